"""Index-coding encoder and decoder over the shared sample stream.

The encoder runs a beam search over the per-step shared draws: at step k it
scores every (beam, sample) pair by the cumulative log importance weight
sum_j log q(a_j | a_1:j-1) / p(a_j) and keeps the top B. Ties are broken
toward the lexicographically smallest index tuple, which keeps the output
independent of evaluation order. The decoder only replays the chosen draws
and never sees the target distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import chain, stream
from .chain import AuxSchedule, posterior_moments, samples_per_step, target_moments
from .errors import ConfigError, CorruptStreamError, NumericError, UsageError
from .gauss import DiagGaussian, log_density_ratio

# Candidate arrays are B x M x D floats per step; reject configs beyond this.
MAX_CANDIDATE_FLOATS = 1 << 24


@dataclass(frozen=True)
class RecConfig:
    """Encoder knobs. Only omega and epsilon affect the wire format."""

    omega: float = 3.0
    epsilon: float = 0.2
    beams: int = 20
    stochastic_final: bool = False

    def __post_init__(self):
        if self.beams < 1:
            raise UsageError("beams must be >= 1")
        samples_per_step(self.omega, self.epsilon)  # validates omega/epsilon/M


@dataclass(frozen=True)
class IndexTuple:
    """The transmitted code for one block: one sample index per step."""

    indices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))

    def __len__(self) -> int:
        return len(self.indices)


def importance_select(
    weights: np.ndarray, mode: str = "greedy", u: float | None = None
) -> int:
    """Select a sample index from nonnegative importance weights.

    Greedy returns the smallest argmax; stochastic picks proportionally to
    weight, driven by the caller-supplied uniform so selection stays
    reproducible.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.size == 0 or np.any(np.isnan(weights)) or np.any(weights < 0):
        raise NumericError("weights must be nonnegative and NaN-free")
    total = float(weights.sum())
    if total <= 0 or not np.isfinite(total):
        raise NumericError("weights sum to zero or overflow")
    if mode == "greedy":
        return int(np.argmax(weights))
    if mode == "stochastic":
        if u is None or not 0.0 <= u < 1.0:
            raise UsageError("stochastic mode needs a uniform u in [0, 1)")
        cdf = np.cumsum(weights)
        return int(np.searchsorted(cdf, u * total, side="right"))
    raise UsageError(f"unknown mode {mode!r}")


def _check_budget(cfg: RecConfig, schedule: AuxSchedule, dims: int) -> None:
    if cfg.beams * schedule.M * dims > MAX_CANDIDATE_FLOATS:
        raise ConfigError(
            f"candidate volume B*M*D = {cfg.beams * schedule.M * dims} "
            f"exceeds budget {MAX_CANDIDATE_FLOATS}"
        )


def encode(
    q: DiagGaussian,
    schedule: AuxSchedule,
    cfg: RecConfig,
    seed: int,
    block: int,
) -> tuple[IndexTuple, np.ndarray, float]:
    """Encode a whitened target; returns (indices, decoded z, log q(z)/p(z)).

    Deterministic in all arguments unless cfg.stochastic_final is set with a
    single beam, in which case each step's index is sampled proportionally to
    its importance weight using a reserved stream address.
    """
    if schedule.M != samples_per_step(cfg.omega, cfg.epsilon):
        raise UsageError("schedule and config disagree on samples per step")
    d = q.dim
    _check_budget(cfg, schedule, d)
    stochastic = cfg.stochastic_final and cfg.beams == 1

    m = schedule.M
    tails = schedule.tail_var()
    # Beam state, kept sorted by lexicographic index prefix.
    nu = q.mean[None, :].copy()
    rho_sq = q.var[None, :].copy()
    b = np.zeros((1, d))
    log_w = np.zeros(1)
    prefixes = np.zeros((1, 0), dtype=np.int64)

    for k in range(schedule.K):
        sig_sq = float(schedule.sigma_sq[k])
        s_prev, s_next = float(tails[k]), float(tails[k + 1])
        a = stream.scale_to_aux(
            stream.draw_matrix(seed, block, k, m, d), np.sqrt(sig_sq)
        )  # (M, D), shared across beams

        mean_t, var_t = target_moments(nu, rho_sq, b, sig_sq, s_prev, s_next)
        # log q(a | beam) - log p(a), for every beam x sample pair
        diff = a[None, :, :] - mean_t[:, None, :]
        quad_q = np.sum(diff * diff / (2.0 * var_t[:, None, :]), axis=2)
        quad_p = np.sum(a * a, axis=1) / (2.0 * sig_sq)
        norm = -0.5 * np.sum(np.log(var_t / sig_sq), axis=1)
        cand = log_w[:, None] + norm[:, None] - quad_q + quad_p[None, :]

        if stochastic:
            w_log = cand[0]
            w = np.exp(w_log - np.max(w_log))
            u = stream.draw_uniform(seed, block, k, m)
            pick = np.array([importance_select(w, "stochastic", u)])
            beam_idx = np.zeros(1, dtype=np.int64)
        else:
            flat = cand.ravel()
            keep = min(cfg.beams, flat.size)
            # Stable sort on descending weight; candidate order is already
            # lexicographic (beam-major), so ties resolve to the smallest tuple.
            order = np.argsort(-flat, kind="stable")[:keep]
            order.sort()
            beam_idx = order // m
            pick = order % m

        log_w = cand[beam_idx, pick]
        prefixes = np.concatenate(
            [prefixes[beam_idx], pick[:, None]], axis=1
        )
        a_sel = a[pick]
        nu, rho_sq, b = posterior_moments(
            nu[beam_idx], rho_sq[beam_idx], b[beam_idx], a_sel, sig_sq, s_prev, s_next
        )

    # Final selection: highest log q(z)/p(z) over surviving beams.
    dq = (b - q.mean[None, :]) / q.std[None, :]
    ratios = np.sum(
        -np.log(q.std)[None, :] + 0.5 * (b * b - dq * dq), axis=1
    )
    best = int(np.argmax(ratios))
    return (
        IndexTuple(tuple(prefixes[best])),
        b[best].copy(),
        float(ratios[best]),
    )


def decode(
    indices: IndexTuple,
    schedule: AuxSchedule,
    seed: int,
    block: int,
    dims: int,
) -> np.ndarray:
    """Reconstruct z from the index tuple; bit-identical to the encoder's z."""
    if len(indices) != schedule.K:
        raise CorruptStreamError(
            f"index tuple length {len(indices)} != schedule steps {schedule.K}"
        )
    z = np.zeros(dims)
    for k, idx in enumerate(indices.indices):
        if not 0 <= idx < schedule.M:
            raise CorruptStreamError(f"index {idx} out of range [0, {schedule.M})")
        sig = np.sqrt(float(schedule.sigma_sq[k]))
        z = z + stream.scale_to_aux(
            stream.draw_vector(seed, block, k, idx, dims), sig
        )
    return z
