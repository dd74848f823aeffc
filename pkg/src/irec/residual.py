"""Lossless residual channel: range coder over discretized-Gaussian symbols.

The coder is the classic carry-propagating byte-renormalized range coder
(32-bit range, 64-bit low with cache/carry), with 16-bit symbol frequencies.
The Gaussian CDF is a fixed rational approximation so encoder and decoder
always derive identical frequency tables from the same (mu, sigma).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, CorruptStreamError, UsageError

PRECISION_BITS = 16
TOTAL_FREQ = 1 << PRECISION_BITS

_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF

# Abramowitz & Stegun 26.2.17 coefficients; max abs error < 7.5e-8.
_AS_B = (0.319381530, -0.356563782, 1.781477937, -1.821255978, 1.330274429)
_AS_P = 0.2316419
_INV_SQRT_2PI = 0.3989422804014327


def norm_cdf(x) -> np.ndarray:
    """Standard normal CDF via a pinned rational approximation."""
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    t = 1.0 / (1.0 + _AS_P * ax)
    poly = t * (
        _AS_B[0]
        + t * (_AS_B[1] + t * (_AS_B[2] + t * (_AS_B[3] + t * _AS_B[4])))
    )
    upper = 1.0 - _INV_SQRT_2PI * np.exp(-0.5 * ax * ax) * poly
    return np.where(x >= 0, upper, 1.0 - upper)


@dataclass(frozen=True)
class DiscretizedGaussian:
    """Integer symbol model: pmf(r) from the Gaussian CDF over [lo, hi]."""

    mu: float
    sigma: float
    lo: int = -255
    hi: int = 255

    def __post_init__(self):
        if self.sigma <= 0:
            raise UsageError("sigma must be positive")
        if self.hi < self.lo:
            raise UsageError("empty support")


def pmf_quantized(model: DiscretizedGaussian, precision_bits: int = PRECISION_BITS) -> np.ndarray:
    """Integer frequency table summing exactly to 2**precision_bits.

    Every in-support symbol keeps at least one tick; the rounding surplus or
    deficit is absorbed by the most probable symbols.
    """
    total = 1 << precision_bits
    support = model.hi - model.lo + 1
    if support > total:
        raise ConfigError(f"support {support} wider than {total} symbols")
    r = np.arange(model.lo, model.hi + 1, dtype=np.float64)
    upper = norm_cdf((r + 0.5 - model.mu) / model.sigma)
    lower = norm_cdf((r - 0.5 - model.mu) / model.sigma)
    p = np.maximum(upper - lower, 0.0)
    mass = p.sum()
    if mass <= 0:
        # Degenerate model entirely outside the support: nearest edge wins.
        p[np.argmin(np.abs(r - model.mu))] = 1.0
        mass = 1.0
    freq = np.maximum(np.rint(p / mass * total).astype(np.int64), 1)
    excess = int(freq.sum()) - total
    while excess > 0:
        i = int(np.argmax(freq))
        take = min(excess, int(freq[i]) - 1)
        if take == 0:
            raise ConfigError("cannot normalize frequency table")
        freq[i] -= take
        excess -= take
    if excess < 0:
        freq[int(np.argmax(freq))] += -excess
    return freq


def _cum_freq(freq: np.ndarray) -> np.ndarray:
    cum = np.zeros(freq.size + 1, dtype=np.int64)
    np.cumsum(freq, out=cum[1:])
    return cum


class _TableCache(dict):
    def table(self, model: DiscretizedGaussian):
        key = (model.mu, model.sigma, model.lo, model.hi)
        entry = self.get(key)
        if entry is None:
            freq = pmf_quantized(model)
            entry = (freq, _cum_freq(freq))
            self[key] = entry
        return entry


class RangeEncoder:
    def __init__(self):
        self.low = 0
        self.range = _MASK32
        self.cache = 0
        self.cache_size = 1
        self.out = bytearray()

    def encode(self, cum: int, freq: int, total: int = TOTAL_FREQ) -> None:
        r = self.range // total
        self.low += cum * r
        self.range = r * freq
        while self.range < _TOP:
            self.range = (self.range << 8) & _MASK32
            self._shift_low()

    def _shift_low(self) -> None:
        if (self.low & _MASK32) < 0xFF000000 or self.low > _MASK32:
            carry = self.low >> 32
            self.out.append((self.cache + carry) & 0xFF)
            for _ in range(self.cache_size - 1):
                self.out.append((0xFF + carry) & 0xFF)
            self.cache_size = 0
            self.cache = (self.low >> 24) & 0xFF
        self.cache_size += 1
        self.low = (self.low << 8) & _MASK32

    def finish(self) -> bytes:
        for _ in range(5):
            self._shift_low()
        return bytes(self.out)


class RangeDecoder:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.range = _MASK32
        self.code = 0
        for _ in range(5):
            self.code = ((self.code << 8) | self._byte()) & 0xFFFFFFFFFF
        self.code &= _MASK32

    def _byte(self) -> int:
        if self.pos >= len(self.data):
            raise CorruptStreamError("range coder input exhausted")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def threshold(self, total: int = TOTAL_FREQ) -> int:
        self.range //= total
        return min(self.code // self.range, total - 1)

    def consume(self, cum: int, freq: int) -> None:
        self.code -= cum * self.range
        self.range *= freq
        while self.range < _TOP:
            self.code = ((self.code << 8) | self._byte()) & _MASK32
            self.range = (self.range << 8) & _MASK32


def _model_list(models, count: int):
    if isinstance(models, DiscretizedGaussian):
        return [models] * count
    models = list(models)
    if len(models) != count:
        raise UsageError(f"expected {count} symbol models, got {len(models)}")
    return models


def encode_residuals(residuals, models) -> bytes:
    """Range-code integer residuals under their per-symbol Gaussian models."""
    residuals = np.asarray(residuals, dtype=np.int64)
    models = _model_list(models, residuals.size)
    cache = _TableCache()
    enc = RangeEncoder()
    for value, model in zip(residuals.tolist(), models):
        if not model.lo <= value <= model.hi:
            raise UsageError(f"residual {value} outside [{model.lo}, {model.hi}]")
        freq, cum = cache.table(model)
        sym = value - model.lo
        enc.encode(int(cum[sym]), int(freq[sym]))
    return enc.finish()


def decode_residuals(data: bytes, models, count: int) -> np.ndarray:
    """Exact inverse of encode_residuals given identical models."""
    models = _model_list(models, count)
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    cache = _TableCache()
    dec = RangeDecoder(data)
    out = np.empty(count, dtype=np.int64)
    for i, model in enumerate(models):
        freq, cum = cache.table(model)
        t = dec.threshold()
        sym = int(np.searchsorted(cum, t, side="right")) - 1
        dec.consume(int(cum[sym]), int(freq[sym]))
        out[i] = sym + model.lo
    return out
