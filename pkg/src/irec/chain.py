"""Auxiliary-variable decomposition of a whitened latent: z = sum_k a_k.

The step variances follow the power-law schedule: with remaining variance r
(starting at 1), step k of K takes r * (K + 1 - k)^-0.79, so the last step
absorbs all remaining variance exactly. The conditional target, conditional
prior and posterior update are the closed-form Gaussian-sum conditionals;
they are univariate formulas applied elementwise to each latent dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UsageError
from .gauss import STD_FLOOR, DiagGaussian

POWER_LAW_EXPONENT = -0.79

_VAR_FLOOR = STD_FLOOR * STD_FLOOR
_MAX_INDEX = 1 << 32


def samples_per_step(omega: float, epsilon: float) -> int:
    """Number of shared draws per step, ceil(exp(omega * (1 + epsilon)))."""
    if omega <= 0:
        raise UsageError("omega must be positive")
    if epsilon < 0:
        raise UsageError("epsilon must be nonnegative")
    exponent = omega * (1.0 + epsilon)
    if exponent > math.log(_MAX_INDEX):
        raise ConfigError("samples per step exceeds index width (2^32)")
    m = math.ceil(math.exp(exponent))
    if m < 2:
        # A single-candidate step carries no information and would make the
        # packed index width zero, which breaks payload bounds downstream.
        raise ConfigError("omega too small: need at least 2 samples per step")
    if m > _MAX_INDEX:
        raise ConfigError(f"samples per step {m} exceeds index width (2^32)")
    return m


@dataclass(frozen=True)
class AuxSchedule:
    """Per-step variances and sampling parameters for one coded block."""

    K: int
    sigma_sq: np.ndarray
    omega: float
    epsilon: float
    M: int

    def __post_init__(self):
        sigma_sq = np.asarray(self.sigma_sq, dtype=np.float64)
        sigma_sq.setflags(write=False)
        object.__setattr__(self, "sigma_sq", sigma_sq)
        if self.K < 1 or sigma_sq.size != self.K:
            raise UsageError("schedule length mismatch")
        if np.any(sigma_sq <= 0):
            raise UsageError("step variances must be positive")
        if abs(float(sigma_sq.sum()) - 1.0) > 1e-12:
            raise UsageError("step variances must sum to 1")

    def tail_var(self) -> np.ndarray:
        """tail_var[k] = sum of sigma_sq[k:]; tail_var[K] == 0 exactly."""
        tails = np.zeros(self.K + 1)
        tails[:-1] = np.cumsum(self.sigma_sq[::-1])[::-1]
        tails[0] = 1.0
        return tails


def schedule_from_steps(K: int, omega: float, epsilon: float) -> AuxSchedule:
    """Build the variance schedule for a known step count (decoder side)."""
    if K < 1:
        raise UsageError("K must be >= 1")
    m = samples_per_step(omega, epsilon)
    sigma_sq = np.empty(K)
    remaining = 1.0
    for k in range(1, K + 1):
        ratio = float(K + 1 - k) ** POWER_LAW_EXPONENT
        take = remaining if k == K else remaining * ratio
        sigma_sq[k - 1] = take
        remaining -= take
    return AuxSchedule(K=K, sigma_sq=sigma_sq, omega=omega, epsilon=epsilon, M=m)


def build_schedule(total_kl: float, omega: float, epsilon: float) -> AuxSchedule:
    """Schedule for a target with the given total KL to the whitened prior."""
    if total_kl < 0 or not math.isfinite(total_kl):
        raise UsageError("total_kl must be finite and nonnegative")
    if omega <= 0:
        raise UsageError("omega must be positive")
    k = max(1, math.ceil(total_kl / omega))
    return schedule_from_steps(k, omega, epsilon)


@dataclass(frozen=True)
class ChainState:
    """Running conditional q(z | a_1:k): mean nu, variance rho_sq, partial sum b."""

    nu: np.ndarray
    rho_sq: np.ndarray
    b: np.ndarray
    k: int
    s_sq_remaining: float

    @staticmethod
    def initial(q: DiagGaussian) -> "ChainState":
        return ChainState(
            nu=q.mean.copy(),
            rho_sq=q.var,
            b=np.zeros(q.dim),
            k=0,
            s_sq_remaining=1.0,
        )


def target_moments(nu, rho_sq, b, sig_sq: float, s_prev_sq: float, s_next_sq: float):
    """Mean/variance of the conditional step target q(a_k | a_1:k-1).

    Elementwise over trailing dimensions; batched leading axes allowed.
    """
    scale = sig_sq / s_prev_sq
    mean = (nu - b) * scale
    var = s_next_sq * scale + rho_sq * scale * scale
    return mean, np.maximum(var, _VAR_FLOOR)


def posterior_moments(nu, rho_sq, b, a, sig_sq: float, s_prev_sq: float, s_next_sq: float):
    """Updated (nu, rho_sq, b) after observing step value a."""
    denom = np.maximum(sig_sq * rho_sq + s_prev_sq * s_next_sq, 1e-300)
    nu_new = (
        a * rho_sq * s_prev_sq + b * sig_sq * rho_sq + nu * s_next_sq * s_prev_sq
    ) / denom
    rho_new = rho_sq * s_prev_sq * s_next_sq / denom
    return nu_new, rho_new, b + a


def _step_vars(state: ChainState, schedule: AuxSchedule):
    if state.k >= schedule.K:
        raise UsageError("chain exhausted: no steps remain")
    tails = schedule.tail_var()
    sig_sq = float(schedule.sigma_sq[state.k])
    return sig_sq, float(tails[state.k]), float(tails[state.k + 1])


def aux_target(state: ChainState, schedule: AuxSchedule) -> DiagGaussian:
    """Conditional target distribution of the next auxiliary variable."""
    sig_sq, s_prev, s_next = _step_vars(state, schedule)
    mean, var = target_moments(state.nu, state.rho_sq, state.b, sig_sq, s_prev, s_next)
    return DiagGaussian(mean, np.sqrt(var))


def conditional_prior(
    state: ChainState, schedule: AuxSchedule, z: np.ndarray
) -> DiagGaussian:
    """Distribution of the next step value given the full latent z."""
    sig_sq, s_prev, s_next = _step_vars(state, schedule)
    z = np.asarray(z, dtype=np.float64)
    mean = (z - state.b) * (sig_sq / s_prev)
    var = np.full_like(mean, max(s_next * sig_sq / s_prev, _VAR_FLOOR))
    return DiagGaussian(mean, np.sqrt(var))


def posterior_update(
    state: ChainState, schedule: AuxSchedule, a_k: np.ndarray
) -> ChainState:
    """Advance the chain one step after committing to the step value a_k."""
    sig_sq, s_prev, s_next = _step_vars(state, schedule)
    a_k = np.asarray(a_k, dtype=np.float64)
    nu, rho_sq, b = posterior_moments(
        state.nu, state.rho_sq, state.b, a_k, sig_sq, s_prev, s_next
    )
    return ChainState(nu=nu, rho_sq=rho_sq, b=b, k=state.k + 1, s_sq_remaining=s_next)


def chain_kl_profile(
    q: DiagGaussian, schedule: AuxSchedule, trials: int, seed: int = 0
) -> np.ndarray:
    """Monte-Carlo per-step mean KL of the conditional targets to N(0, sigma_k^2).

    Ancestral-samples `trials` chains; the per-step KL itself is analytic, so
    the returned vector sums to an estimate of KL(q || standard normal).
    """
    if trials < 100:
        raise UsageError("trials must be >= 100")
    rng = np.random.default_rng(seed)
    d = q.dim
    nu = np.broadcast_to(q.mean, (trials, d)).copy()
    rho_sq = np.broadcast_to(q.var, (trials, d)).copy()
    b = np.zeros((trials, d))
    tails = schedule.tail_var()
    profile = np.empty(schedule.K)
    for k in range(schedule.K):
        sig_sq = float(schedule.sigma_sq[k])
        s_prev, s_next = float(tails[k]), float(tails[k + 1])
        mean, var = target_moments(nu, rho_sq, b, sig_sq, s_prev, s_next)
        ratio = var / sig_sq
        kl = 0.5 * np.sum(ratio + mean * mean / sig_sq - 1.0 - np.log(ratio), axis=1)
        profile[k] = float(kl.mean())
        a = rng.normal(mean, np.sqrt(var))
        nu, rho_sq, b = posterior_moments(nu, rho_sq, b, a, sig_sq, s_prev, s_next)
    return profile
