"""Diagonal Gaussian algebra: densities, KL divergence, prior whitening.

All probability arithmetic is float64 and in nats; bits appear only at
serialization boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError

# Collapsed posterior dimensions are clamped here so log-densities stay finite.
STD_FLOOR = 1e-6

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class DiagGaussian:
    """Diagonal Gaussian given by per-dimension mean and standard deviation."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.ndim != 1 or std.ndim != 1:
            raise UsageError("mean and std must be 1-D vectors")
        if mean.shape != std.shape or mean.size < 1:
            raise UsageError(
                f"mean/std shape mismatch: {mean.shape} vs {std.shape}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(std))):
            raise UsageError("non-finite Gaussian parameters")
        std = np.maximum(std, STD_FLOOR)
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def var(self) -> np.ndarray:
        return self.std * self.std

    @staticmethod
    def standard(dim: int) -> "DiagGaussian":
        return DiagGaussian(np.zeros(dim), np.ones(dim))


@dataclass(frozen=True)
class AffineMap:
    """Elementwise map z -> scale * z + shift."""

    scale: np.ndarray
    shift: np.ndarray

    def apply(self, z: np.ndarray) -> np.ndarray:
        return self.scale * np.asarray(z, dtype=np.float64) + self.shift


def _check_dims(q: DiagGaussian, p: DiagGaussian) -> None:
    if q.dim != p.dim:
        raise UsageError(f"dimension mismatch: {q.dim} vs {p.dim}")


def kl_divergence(q: DiagGaussian, p: DiagGaussian) -> float:
    """Analytic KL(q || p) in nats, summed over dimensions."""
    _check_dims(q, p)
    ratio = q.var / p.var
    delta = (q.mean - p.mean) / p.std
    return float(0.5 * np.sum(ratio + delta * delta - 1.0 - np.log(ratio)))


def log_density_ratio(q: DiagGaussian, p: DiagGaussian, z: np.ndarray) -> float:
    """log q(z) - log p(z) in nats."""
    _check_dims(q, p)
    z = np.asarray(z, dtype=np.float64)
    if z.shape != q.mean.shape:
        raise UsageError(f"point dimension mismatch: {z.shape}")
    dq = (z - q.mean) / q.std
    dp = (z - p.mean) / p.std
    return float(
        np.sum(np.log(p.std) - np.log(q.std) + 0.5 * (dp * dp - dq * dq))
    )


def log_density(g: DiagGaussian, z: np.ndarray) -> float:
    """log density of z under g, in nats."""
    z = np.asarray(z, dtype=np.float64)
    d = (z - g.mean) / g.std
    return float(np.sum(-np.log(g.std) - 0.5 * (d * d + _LOG_2PI)))


def whiten(q: DiagGaussian, p: DiagGaussian) -> tuple[DiagGaussian, AffineMap]:
    """Re-express q in coordinates where p becomes the standard normal.

    Returns the transformed target and the inverse map taking whitened
    samples back to the original coordinates.
    """
    _check_dims(q, p)
    q_std = DiagGaussian((q.mean - p.mean) / p.std, q.std / p.std)
    return q_std, AffineMap(scale=p.std.copy(), shift=p.mean.copy())
