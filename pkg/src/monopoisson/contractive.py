"""Poisson solutions for chains that contract on average.

If E|F^{-1}(x, U) - F^{-1}(y, U)|^2 <= rho |x - y|^2 with rho < 1 and r is
Lipschitz with constant c^{1/2}, then

    |E_x r_c(X_n)| <= c^{1/2} m rho^{n/2} / (1 - rho^{1/2}),   m^2 = E_x|X_1 - x|^2,

so g = sum_j E_x r_c(X_j) converges, is non-decreasing for monotone r, and is
Lipschitz with constant c^{1/2} / (1 - rho^{1/2}).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coupling import UniformStream, backward_from_uniforms, backward_iterates
from .discrete_solver import PoissonSolution
from .errors import CertificationFailed, InvalidArgument, NotContractive, SeriesBudgetExceeded
from .kernel import MonotoneKernel, RewardFunction, expect_next


@dataclass(frozen=True)
class ContractiveParams:
    rho: float
    c_root: float
    second_moment: float  # max over reference states of E_x|X_1 - x|^2

    def __post_init__(self):
        if not 0 <= self.rho < 1:
            raise NotContractive(f"rho = {self.rho} is not in [0, 1)")
        if self.c_root < 0 or self.second_moment < 0:
            raise InvalidArgument("c_root and second_moment must be non-negative")

    @property
    def lipschitz_bound(self) -> float:
        return self.c_root / (1.0 - np.sqrt(self.rho))

    def term_bound(self, n: int) -> float:
        """Bound on |E_x r_c(X_n)|."""
        q = np.sqrt(self.rho)
        return self.c_root * np.sqrt(self.second_moment) * q**n / (1.0 - q)

    def tail_bound(self, J: int) -> float:
        """Bound on sum_{n > J} |E_x r_c(X_n)|."""
        q = np.sqrt(self.rho)
        return self.c_root * np.sqrt(self.second_moment) * q ** (J + 1) / (1.0 - q) ** 2


@dataclass
class ContractionEstimate:
    rho_hat: float
    standard_error: float
    per_pair: list = field(default_factory=list)  # (x, y, mean ratio, se)

    def __iter__(self):
        return iter((self.rho_hat, self.standard_error))

    @property
    def working_rho(self) -> float:
        return self.rho_hat + 3 * self.standard_error


@dataclass
class LipschitzCertificate:
    max_ratio: float
    bound: float
    margin: float
    location: tuple


def estimate_contraction_factor(k: MonotoneKernel, pairs, n_samples: int, stream: UniformStream) -> ContractionEstimate:
    """Max over pairs of the MC mean of |F^{-1}(x,U) - F^{-1}(y,U)|^2 / |x - y|^2.

    Raises NotContractive when rho_hat + 3 SE >= 1.
    """
    if n_samples < 1000:
        raise InvalidArgument("need at least 1000 samples per pair")
    u = stream.uniforms(n_samples)
    per_pair = []
    for x, y in pairs:
        if x == y:
            raise InvalidArgument(f"pair ({x}, {y}) has equal states")
        ratio = (k.inverse_cdf(x, u) - k.inverse_cdf(y, u)) ** 2 / (x - y) ** 2
        per_pair.append((float(x), float(y), float(ratio.mean()), float(ratio.std(ddof=1) / np.sqrt(n_samples))))
    best = max(per_pair, key=lambda p: p[2])
    est = ContractionEstimate(best[2], best[3], per_pair)
    if est.working_rho >= 1:
        raise NotContractive(f"rho_hat + 3 SE = {est.working_rho:.4g} >= 1")
    return est


def contractive_params(k: MonotoneKernel, r: RewardFunction, pairs, reference_states,
                       n_samples: int, stream: UniformStream) -> ContractiveParams:
    """Build params with the conservative rho = rho_hat + 3 SE."""
    if r.lipschitz_root_constant is None:
        raise InvalidArgument(f"reward {r.name} has no Lipschitz constant")
    est = estimate_contraction_factor(k, pairs, n_samples, stream)
    m2 = max(expect_next(k, x, lambda y, x=x: (y - x) ** 2, stream=stream)[0] for x in reference_states)
    return ContractiveParams(est.working_rho, float(r.lipschitz_root_constant), float(m2))


def truncation_terms(params: ContractiveParams, tol: float, max_terms: int = 10_000) -> int:
    """Smallest J with tail_bound(J) <= tol."""
    if params.c_root == 0 or params.second_moment == 0 or params.rho == 0:
        return 0
    q = np.sqrt(params.rho)
    scale = params.c_root * np.sqrt(params.second_moment) / (1 - q) ** 2
    J = max(0, int(np.ceil(np.log(tol / scale) / np.log(q))) - 1)
    while params.tail_bound(J) > tol:
        J += 1
    if J > max_terms:
        raise SeriesBudgetExceeded(f"tolerance {tol} needs {J} terms (cap {max_terms})")
    return J


def stationary_depth(params: ContractiveParams, tol: float) -> int:
    """Smallest n >= 1 with term_bound(n) <= tol."""
    n = 1
    while params.term_bound(n) > tol and n < 100_000:
        n += 1
    return n


def estimate_pi_r_backward(k: MonotoneKernel, r: RewardFunction, x: float, depth: int, n_streams: int,
                           stream: UniformStream):
    """Mean of r(X~_depth(x)) over independent backward compositions."""
    U = stream.uniforms((n_streams, depth))
    vals = r(backward_from_uniforms(k, x, U))
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n_streams))


def solve_contractive(k: MonotoneKernel, r: RewardFunction, params: ContractiveParams, xs, tol: float,
                      stream: UniformStream, n_paths: int = 10_000, n_pi: int = 100_000,
                      max_terms: int = 10_000, terms: int = None, z: float = 1.96) -> PoissonSolution:
    """Truncated series g(x) = sum_{j=0}^J E_x r_c(X_j) with common random numbers.

    J is the smallest truncation whose analytic tail bound is <= tol, unless
    ``terms`` overrides it.  pi r comes from backward compositions of depth
    max(J_tol, 1) from xs[0].  ``se`` holds the per-point path-sum error; the pi r
    error shifts every point equally and is reported in info only.
    """
    if r.lipschitz_root_constant is None:
        raise InvalidArgument(f"reward {r.name} has no Lipschitz constant")
    xs = np.asarray(xs, dtype=float)
    if (np.diff(xs) < 0).any():
        raise InvalidArgument("xs must be sorted")
    J_tol = truncation_terms(params, tol, max_terms)
    J = J_tol if terms is None else int(terms)
    depth = max(J_tol, stationary_depth(params, tol) if params.rho > 0 else 1, 1)
    pi_r, pi_se = estimate_pi_r_backward(k, r, float(xs[0]), depth, n_pi, stream.child(0))

    U = stream.child(1).uniforms((n_paths, J)) if J else np.empty((n_paths, 0))
    X = np.broadcast_to(xs, (n_paths, xs.size)).astype(float)
    sums = r(X)
    for j in range(J):
        X = k.inverse_cdf(X, U[:, j, None])
        sums = sums + r(X)
    g = sums.mean(axis=0) - (J + 1) * pi_r
    se = sums.std(axis=0, ddof=1) / np.sqrt(n_paths) if n_paths > 1 else np.zeros(xs.size)
    return PoissonSolution(
        xs, g, "series", pi_r, float("nan"), "series", se=se, ci_halfwidth=z * se,
        info={
            "terms": J, "tail_bound": params.tail_bound(J), "pi_r_se": pi_se,
            "pi_depth": depth, "n_paths": n_paths,
        },
    )


def certify_lipschitz(sol: PoissonSolution, params: ContractiveParams, n_sigma: float = 3.0) -> LipschitzCertificate:
    """Adjacent slopes of g must not exceed c^{1/2}/(1 - rho^{1/2}) beyond n_sigma combined SEs."""
    if sol.grid.size < 3:
        raise InvalidArgument("need a grid of at least 3 points")
    dx = np.diff(sol.grid)
    if (dx <= 0).any():
        raise InvalidArgument("grid must be strictly increasing")
    ratio = np.abs(np.diff(sol.g)) / dx
    slack = np.zeros(dx.size)
    if sol.se is not None:
        slack = n_sigma * np.sqrt(sol.se[1:] ** 2 + sol.se[:-1] ** 2) / dx
    bound = params.lipschitz_bound
    excess = ratio - bound - slack
    i = int(np.argmax(excess))
    loc = (float(sol.grid[i]), float(sol.grid[i + 1]))
    if excess[i] > 0:
        raise CertificationFailed(
            f"slope {ratio[i]:.4g} on {loc} exceeds bound {bound:.4g} + slack {slack[i]:.3g}", location=loc
        )
    return LipschitzCertificate(float(ratio.max()), float(bound), float(-excess.max()), loc)


def crn_path_differences(k: MonotoneKernel, r: RewardFunction, x: float, y: float, J: int, n_paths: int,
                         stream: UniformStream) -> np.ndarray:
    """Per-sample sum_{j<=J} [r(X~_j(y)) - r(X~_j(x))] with shared backward maps."""
    U = stream.uniforms((n_paths, J))
    it = backward_iterates(k, [x, y], U)
    return (r(it[:, 1, :]) - r(it[:, 0, :])).sum(axis=1)


def statistical_residual(k: MonotoneKernel, r: RewardFunction, sol: PoissonSolution, xs, n_paths: int,
                         stream: UniformStream):
    """MC estimate of (Pg)(x) - g(x) + r_c(x) for a truncated-series solution.

    (Pg)(x) is estimated from fresh forward paths as E_x sum_{j=1}^{J+1} r(X_j) - (J+1) pi r.
    Returns (residual, se); the se combines the fresh paths, the solution's own
    per-point error and the pi r error.  g is needed at xs, so xs must lie on
    the solution grid.
    """
    xs = np.asarray(xs, dtype=float)
    idx = np.searchsorted(sol.grid, xs)
    if (idx >= sol.grid.size).any() or not np.allclose(sol.grid[idx], xs):
        raise InvalidArgument("probe states must lie on the solution grid")
    J = int(sol.info["terms"])
    U = stream.uniforms((n_paths, J + 1))
    X = np.broadcast_to(xs, (n_paths, xs.size)).astype(float)
    sums = np.zeros(X.shape)
    for j in range(J + 1):
        X = k.inverse_cdf(X, U[:, j, None])
        sums = sums + r(X)
    pg = sums.mean(axis=0) - (J + 1) * sol.pi_r
    res = pg - sol.g[idx] + r(xs) - sol.pi_r
    se = np.sqrt(sums.var(axis=0, ddof=1) / n_paths + sol.se[idx] ** 2 + sol.info["pi_r_se"] ** 2)
    return res, se
