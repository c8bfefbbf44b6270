"""Model zoo: Lindley waiting times, birth-death chains, reflected AR(1), and rewards."""

from __future__ import annotations

import warnings

import numpy as np
from scipy import stats

from .errors import InvalidArgument, NotContractive, UnstableModel
from .kernel import (
    CONTINUOUS,
    MonotoneKernel,
    RewardFunction,
)


def build_lindley(lam: float, mu: float) -> MonotoneKernel:
    """Waiting times of the M/M/1 FIFO queue, W' = [W + S - A]^+.

    S ~ Exp(mu) is the service time, A ~ Exp(lam) the interarrival time, so
    Z = S - A has density c e^{-mu z} on z >= 0 and c e^{lam z} on z < 0
    with c = lam mu / (lam + mu).
    """
    if lam <= 0 or mu <= 0:
        raise InvalidArgument("rates must be positive")
    if lam >= mu:
        raise UnstableModel(f"arrival rate {lam} >= service rate {mu}")
    c = lam * mu / (lam + mu)
    p_neg = mu / (lam + mu)  # P(Z < 0)

    def z_cdf(z):
        neg = p_neg * np.exp(lam * np.minimum(z, 0.0))
        pos = 1.0 - (1.0 - p_neg) * np.exp(-mu * np.maximum(z, 0.0))
        return np.where(z < 0, neg, pos)

    def z_pdf(z):
        return c * np.where(z < 0, np.exp(lam * np.minimum(z, 0.0)), np.exp(-mu * np.maximum(z, 0.0)))

    def z_ppf(u):
        lo = np.log(np.maximum(u, 1e-300) / p_neg) / lam
        hi = -np.log(np.maximum(1.0 - u, 1e-300) / (1.0 - p_neg)) / mu
        return np.where(u < p_neg, lo, hi)

    def cdf(x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        return np.where(y < 0, 0.0, z_cdf(y - x))

    def inverse_cdf(x, u):
        return np.maximum(0.0, np.asarray(x, dtype=float) + z_ppf(np.asarray(u, dtype=float)))

    def pdf(x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        return np.where(y > 0, z_pdf(y - x), 0.0)

    rho = lam / mu
    params = {
        "arrival_rate": lam,
        "service_rate": mu,
        "traffic_intensity": rho,
        "mean_wait": rho / (mu - lam),
        "p_wait_zero": 1.0 - rho,
    }
    return MonotoneKernel(
        CONTINUOUS, cdf, inverse_cdf, pdf=pdf, monotone=True,
        continuous_inverse=True, name="lindley", params=params,
    )


def mm1_wait_cdf(lam: float, mu: float, w):
    """Stationary FIFO waiting-time CDF of the M/M/1 queue."""
    w = np.asarray(w, dtype=float)
    return np.where(w < 0, 0.0, 1.0 - (lam / mu) * np.exp(-(mu - lam) * np.maximum(w, 0.0)))


def build_discrete_lindley(p_up: float, up: int = 1, down: int = -1, N: int = 40) -> MonotoneKernel:
    """Lindley recursion on {0..N} with a two-point increment.

    Z = up with probability p_up, else down; moves past N are folded onto N,
    which keeps x -> min([x + Z]^+, N) non-decreasing.
    """
    if not 0 < p_up < 1:
        raise InvalidArgument("p_up must lie in (0, 1)")
    if not (up > 0 > down):
        raise InvalidArgument("need up > 0 > down")
    if N < 2:
        raise InvalidArgument("N must be at least 2")
    drift = p_up * up + (1 - p_up) * down
    if drift >= 0:
        raise UnstableModel(f"E[Z] = {drift} >= 0")
    P = np.zeros((N + 1, N + 1))
    for i in range(N + 1):
        P[i, min(max(i + up, 0), N)] += p_up
        P[i, min(max(i + down, 0), N)] += 1 - p_up
    params = {"p_up": p_up, "up": up, "down": down, "N": N, "drift": drift, "folded": True}
    return MonotoneKernel.from_matrix(P, name="lindley_discrete", params=params)


def build_birth_death(p, N: int, q=None) -> MonotoneKernel:
    """Birth-death chain on {0..N}, reflecting at 0 and folded at N.

    ``p`` (and optionally ``q``) may be scalars or per-state arrays; the
    holding probability is 1 - p - q.  Stochastic monotonicity is checked on
    the full state space and stored on the kernel.
    """
    if N < 2:
        raise InvalidArgument("N must be at least 2")
    p_arr = np.broadcast_to(np.asarray(p, dtype=float), (N + 1,)).copy()
    q_arr = 1.0 - p_arr if q is None else np.broadcast_to(np.asarray(q, dtype=float), (N + 1,)).copy()
    if (p_arr <= 0).any() or (p_arr >= 1).any() or (q_arr < 0).any() or (p_arr + q_arr > 1 + 1e-15).any():
        raise InvalidArgument("need 0 < p < 1, q >= 0 and p + q <= 1")
    P = np.zeros((N + 1, N + 1))
    for i in range(N + 1):
        P[i, min(i + 1, N)] += p_arr[i]
        P[i, max(i - 1, 0)] += q_arr[i]
        P[i, i] += 1.0 - p_arr[i] - q_arr[i]
    params = {"p": p, "q": q, "N": N, "folded": True}
    if np.ndim(p) == 0 and q is None and p >= 0.5:
        warnings.warn(f"birth-death p={p} >= 1/2: truncation at N={N} dominates", stacklevel=2)
        params["truncation_warning"] = True
    # monotone=None runs check_stochastic_monotonicity over every state
    return MonotoneKernel.from_matrix(P, name="birth_death", monotone=None, params=params)


def build_reflected_ar1(a: float, noise=None) -> MonotoneKernel:
    """X' = (a X + Z)^+ with Z drawn from a frozen scipy distribution.

    Off the boundary two coupled copies contract by exactly ``a`` per step, so
    the mean-square contraction factor is at most a^2.
    """
    if a < 0:
        raise InvalidArgument("a must be non-negative")
    if a >= 1:
        raise NotContractive(f"a = {a} >= 1")
    return _reflected_ar1(a, noise)


def _reflected_ar1(a, noise=None):
    noise = stats.norm(-0.5, 1.0) if noise is None else noise
    if not np.isfinite(noise.var()):
        raise InvalidArgument("noise needs a finite second moment")

    def cdf(x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        return np.where(y < 0, 0.0, noise.cdf(y - a * x))

    def inverse_cdf(x, u):
        return np.maximum(0.0, a * np.asarray(x, dtype=float) + noise.ppf(np.asarray(u, dtype=float)))

    def pdf(x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        return np.where(y > 0, noise.pdf(y - a * x), 0.0)

    params = {"a": a, "noise_mean": float(noise.mean()), "noise_sd": float(noise.std())}
    return MonotoneKernel(
        CONTINUOUS, cdf, inverse_cdf, pdf=pdf, monotone=True,
        continuous_inverse=True, name="reflected_ar1", params=params,
    )


# ---------------------------------------------------------------------------
# rewards


def identity_reward() -> RewardFunction:
    return RewardFunction(lambda x: x, monotone=True, lipschitz_root_constant=1.0, name="x")


def linear_reward(slope: float, intercept: float = 0.0) -> RewardFunction:
    return RewardFunction(
        lambda x: slope * x + intercept, monotone=slope >= 0,
        lipschitz_root_constant=abs(slope), name=f"{slope}*x+{intercept}",
    )


def constant_reward(value: float) -> RewardFunction:
    return RewardFunction(
        lambda x: np.full(np.shape(x), float(value)), monotone=True,
        lipschitz_root_constant=0.0, name=f"const({value})",
    )


def power_reward(exponent: float) -> RewardFunction:
    # Lipschitz only for exponent == 1 on all of R+
    return RewardFunction(
        lambda x: np.power(np.maximum(x, 0.0), exponent), monotone=exponent >= 0,
        lipschitz_root_constant=1.0 if exponent == 1 else None, name=f"x^{exponent}",
    )


def capped_reward(cap: float) -> RewardFunction:
    return RewardFunction(
        lambda x: np.minimum(x, cap), monotone=True, lipschitz_root_constant=1.0, name=f"min(x,{cap})"
    )


def step_reward(threshold: float) -> RewardFunction:
    """1{x >= threshold}: monotone but discontinuous."""
    return RewardFunction(
        lambda x: (x >= threshold).astype(float), monotone=True, continuous=False,
        name=f"1{{x>={threshold}}}",
    )


def indicator_reward(point: float) -> RewardFunction:
    """1{x == point}; not monotone unless point is the bottom state."""
    return RewardFunction(
        lambda x: (x == point).astype(float), monotone=False, continuous=False, name=f"1{{x=={point}}}"
    )
