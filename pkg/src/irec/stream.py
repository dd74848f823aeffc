"""Shared deterministic randomness: an addressable stream of standard normals.

Encoder and decoder regenerate identical samples from (seed, block, step,
sample) addresses, so the generator is part of the wire format:

* Philox4x32-10 counter PRF; key = (seed & 0xFFFFFFFF, seed >> 32),
  counter words = (lane, sample, step, block).
* Each invocation yields four 32-bit words, combined little-word-first into
  two 64-bit words.
* A 64-bit word w maps to the open-interval uniform ((w >> 11) + 0.5) * 2^-53.
* Uniform pairs (u0, u1) map to two normals via Box-Muller:
  r = sqrt(-2 ln u0); lane j produces dims (2j, 2j+1) as (r cos(2 pi u1),
  r sin(2 pi u1)). An odd final dimension uses the cosine branch only.

See docs/FORMAT.md for the normative statement of these rules.
"""

from __future__ import annotations

import numpy as np

from .errors import UsageError

_PHILOX_M0 = np.uint64(0xD2511F53)
_PHILOX_M1 = np.uint64(0xCD9E8D57)
_PHILOX_W0 = 0x9E3779B9
_PHILOX_W1 = 0xBB67AE85
_MASK32 = np.uint64(0xFFFFFFFF)
_U32_MAX = 0xFFFFFFFF
_U64_MAX = 0xFFFFFFFFFFFFFFFF

_TWO_PI = 2.0 * np.pi


def _check_u32(name: str, value: int) -> int:
    value = int(value)
    if not 0 <= value <= _U32_MAX:
        raise UsageError(f"{name} out of u32 range: {value}")
    return value


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= _U64_MAX:
        raise UsageError(f"seed out of u64 range: {seed}")
    return seed


def _philox4x32_10(c0, c1, c2, c3, k0: int, k1: int):
    """Ten Philox rounds over uint64 arrays holding 32-bit counter words."""
    k0 = np.uint64(k0)
    k1 = np.uint64(k1)
    for _ in range(10):
        p0 = _PHILOX_M0 * c0
        p1 = _PHILOX_M1 * c2
        hi0, lo0 = p0 >> np.uint64(32), p0 & _MASK32
        hi1, lo1 = p1 >> np.uint64(32), p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = (k0 + np.uint64(_PHILOX_W0)) & _MASK32
        k1 = (k1 + np.uint64(_PHILOX_W1)) & _MASK32
    return c0, c1, c2, c3


def raw_words(
    seed: int, block: int, step: int, samples: np.ndarray, lanes: np.ndarray
):
    """64-bit output words for a grid of (sample, lane) addresses.

    Returns two arrays of shape broadcast(samples, lanes): the low and high
    64-bit words of each Philox invocation.
    """
    seed = _check_seed(seed)
    block = _check_u32("block", block)
    step = _check_u32("step", step)
    lanes_a, samples_a = np.broadcast_arrays(
        np.asarray(lanes, dtype=np.uint64), np.asarray(samples, dtype=np.uint64)
    )
    c0 = lanes_a
    c1 = samples_a
    c2 = np.full(lanes_a.shape, step, dtype=np.uint64)
    c3 = np.full(lanes_a.shape, block, dtype=np.uint64)
    r0, r1, r2, r3 = _philox4x32_10(
        c0, c1, c2, c3, seed & _U32_MAX, seed >> 32
    )
    w_lo = r0 | (r1 << np.uint64(32))
    w_hi = r2 | (r3 << np.uint64(32))
    return w_lo, w_hi


def _to_uniform(words: np.ndarray) -> np.ndarray:
    # Top 53 bits, offset by half a ulp so the result lies in the open (0,1).
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def draw_matrix(
    seed: int, block: int, step: int, n_samples: int, dims: int
) -> np.ndarray:
    """Standard-normal draws for sample indices 0..n_samples-1, shape (n, dims)."""
    if dims < 1:
        raise UsageError("dims must be >= 1")
    if n_samples < 1:
        raise UsageError("n_samples must be >= 1")
    n_lanes = (dims + 1) // 2
    lanes = np.arange(n_lanes, dtype=np.uint64)[None, :]
    samples = np.arange(n_samples, dtype=np.uint64)[:, None]
    w_lo, w_hi = raw_words(seed, block, step, samples, lanes)
    u0 = _to_uniform(w_lo)
    u1 = _to_uniform(w_hi)
    r = np.sqrt(-2.0 * np.log(u0))
    theta = _TWO_PI * u1
    out = np.empty((n_samples, 2 * n_lanes), dtype=np.float64)
    out[:, 0::2] = r * np.cos(theta)
    out[:, 1::2] = r * np.sin(theta)
    return out[:, :dims]


def draw_vector(
    seed: int, block: int, step: int, sample: int, dims: int
) -> np.ndarray:
    """Standard-normal vector at one address; bit-identical across calls."""
    sample = _check_u32("sample", sample)
    n_lanes = (max(dims, 1) + 1) // 2
    lanes = np.arange(n_lanes, dtype=np.uint64)
    if dims < 1:
        raise UsageError("dims must be >= 1")
    w_lo, w_hi = raw_words(seed, block, step, np.uint64(sample), lanes)
    u0 = _to_uniform(w_lo)
    u1 = _to_uniform(w_hi)
    r = np.sqrt(-2.0 * np.log(u0))
    theta = _TWO_PI * u1
    out = np.empty(2 * n_lanes, dtype=np.float64)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out[:dims]


def draw_uniform(seed: int, block: int, step: int, sample: int) -> float:
    """Deterministic uniform in (0,1) at one address (lane 0, low word)."""
    sample = _check_u32("sample", sample)
    w_lo, _ = raw_words(
        seed, block, step, np.uint64(sample), np.zeros(1, dtype=np.uint64)
    )
    return float(_to_uniform(w_lo)[0])


def scale_to_aux(u: np.ndarray, sigma_k: float) -> np.ndarray:
    """Scale standard-normal draws to the step distribution N(0, sigma_k^2 I)."""
    if sigma_k <= 0:
        raise UsageError("sigma_k must be positive")
    return sigma_k * np.asarray(u, dtype=np.float64)
