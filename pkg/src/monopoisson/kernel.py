"""Transition kernels on Z+ and R+.

A kernel is described by its one-step CDF ``F(x, y) = P_x(X_1 <= y)`` and the
generalized inverse ``F^{-1}(x, u) = inf{z : F(x, z) >= u}``.  Both callables
must broadcast over numpy arrays.  Discrete kernels additionally carry the
row-stochastic matrix on the truncation ``{0, ..., N}``.

Continuous kernels live on R+ and may put an atom at 0 (reflection at the
boundary).  Their ``pdf`` is the density of the part on ``(0, inf)``; the atom
is ``cdf(x, 0)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import InvalidArgument, NoUniqueStationary

MASS_TOL = 1e-12
FIXED_POINT_TOL = 1e-10
MONOTONE_SLACK = 1e-12
INVERSE_TOL = 1e-12

DISCRETE = "discrete"
CONTINUOUS = "continuous"


@dataclass(frozen=True)
class MonotoneKernel:
    state_space: str
    cdf: Callable
    inverse_cdf: Callable
    matrix: Optional[np.ndarray] = None
    pdf: Optional[Callable] = None
    monotone: bool = False
    continuous_inverse: bool = False
    name: str = "kernel"
    params: dict = field(default_factory=dict)

    @property
    def discrete(self) -> bool:
        return self.state_space == DISCRETE

    @property
    def n_states(self) -> int:
        if self.matrix is None:
            raise InvalidArgument(f"{self.name}: continuous kernel has no finite state count")
        return self.matrix.shape[0]

    def states(self) -> np.ndarray:
        return np.arange(self.n_states)

    def step(self, x, u):
        return self.inverse_cdf(x, u)

    @classmethod
    def from_matrix(cls, matrix, name="matrix", monotone=None, params=None):
        """Wrap a row-stochastic matrix; ``monotone=None`` runs the grid check."""
        P = np.array(matrix, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise InvalidArgument("transition matrix must be square")
        if (P < 0).any():
            raise InvalidArgument("transition matrix has negative entries")
        top = P.shape[0] - 1
        cum = np.cumsum(P, axis=1)
        # mass errors are reported by validate_kernel; the CDF itself must reach 1
        cum[:, -1] = 1.0

        def cdf(x, y):
            x = np.asarray(x).astype(np.int64)
            y = np.asarray(y, dtype=float)
            yi = np.clip(np.floor(y), 0, top).astype(np.int64)
            out = cum[x, yi]
            return np.where(y < 0, 0.0, out)

        def inverse_cdf(x, u):
            x, u = np.broadcast_arrays(np.asarray(x).astype(np.int64), np.asarray(u, dtype=float))
            idx = (cum[x] < u[..., None]).sum(axis=-1)
            return np.minimum(idx, top)

        kernel = cls(DISCRETE, cdf, inverse_cdf, matrix=P, name=name, params=dict(params or {}))
        if monotone is None:
            monotone = check_stochastic_monotonicity(kernel, kernel.states()).passed
        return _with(kernel, monotone=bool(monotone))


def _with(kernel, **changes):
    from dataclasses import replace

    return replace(kernel, **changes)


# ---------------------------------------------------------------------------
# rewards


@dataclass(frozen=True)
class RewardFunction:
    """Reward ``r`` with declared structure.

    ``lipschitz_root_constant`` is c^{1/2} in ``|r(x) - r(y)| <= c^{1/2} |x - y|``.
    """

    fn: Callable
    monotone: bool = False
    lipschitz_root_constant: Optional[float] = None
    continuous: bool = True
    name: str = "r"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.fn(x), dtype=float), x.shape).copy()


@dataclass(frozen=True)
class CenteredReward:
    base: RewardFunction
    pi_r: float

    def __call__(self, x):
        return self.base(x) - self.pi_r

    def nonnegative_part(self, x):
        """r_c(x) - r_c(0); non-negative on R+ when the base reward is non-decreasing."""
        return self(x) - self(0.0)


def validate_reward(r: RewardFunction, grid) -> None:
    """Check declared monotonicity / Lipschitz constant on grid points."""
    grid = _check_grid(grid)
    vals = r(grid)
    if r.monotone and (np.diff(vals) < -MONOTONE_SLACK).any():
        i = int(np.argmin(np.diff(vals)))
        raise InvalidArgument(f"reward {r.name} declared monotone but decreases at {grid[i]}")
    if r.lipschitz_root_constant is not None and grid.size > 1:
        dx = np.abs(grid[:, None] - grid[None, :])
        dr = np.abs(vals[:, None] - vals[None, :])
        if (dr > r.lipschitz_root_constant * dx + 1e-12).any():
            raise InvalidArgument(f"reward {r.name} violates its Lipschitz constant")


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    passed: bool
    mass_error: float
    cdf_violations: int
    inverse_violations: int
    messages: list = field(default_factory=list)


@dataclass
class MonotonicityReport:
    passed: bool
    worst_violation: float
    location: Optional[tuple]


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        raise InvalidArgument("grid is empty")
    if (np.diff(grid) < 0).any():
        raise InvalidArgument("grid must be sorted ascending")
    return grid


def validate_kernel(k: MonotoneKernel, grid, tol: float = MASS_TOL) -> ValidationReport:
    grid = _check_grid(grid)
    messages = []
    mass_error = 0.0
    if k.discrete:
        mass_error = float(np.max(np.abs(k.matrix.sum(axis=1) - 1.0)))
        if mass_error > tol:
            messages.append(f"row mass error {mass_error:.3g}")

    C = k.cdf(grid[:, None], grid[None, :])
    cdf_bad = int((np.diff(C, axis=1) < -tol).sum() + ((C < -tol) | (C > 1 + tol)).sum())
    far = grid.max() + (k.n_states if k.discrete else 1e6)
    cdf_bad += int((k.cdf(grid, np.full(grid.shape, far)) < 1 - 1e-9).sum())
    if cdf_bad:
        messages.append(f"{cdf_bad} CDF shape violations")

    u = np.linspace(0.01, 0.99, 99)
    X, U = np.meshgrid(grid, u, indexing="ij")
    inv = k.inverse_cdf(X, U)
    inv_bad = int((k.cdf(X, inv) < U - tol).sum())
    # minimality of the infimum
    if k.discrete:
        below = k.cdf(X, inv - 1)
    else:
        below = k.cdf(X, inv - 1e-7 * np.maximum(1.0, np.abs(inv)))
    inv_bad += int(((inv > 0) & (below >= U + 1e-9)).sum())
    if inv_bad:
        messages.append(f"{inv_bad} inverse-CDF consistency violations")

    passed = mass_error <= tol and cdf_bad == 0 and inv_bad == 0
    return ValidationReport(passed, mass_error, cdf_bad, inv_bad, messages)


def check_stochastic_monotonicity(
    k: MonotoneKernel, grid, slack: float = MONOTONE_SLACK
) -> MonotonicityReport:
    """Certify cdf(x', y) <= cdf(x, y) for consecutive grid states x < x'."""
    grid = _check_grid(grid)
    if grid.size < 2:
        return MonotonicityReport(True, 0.0, None)
    C = k.cdf(grid[:, None], grid[None, :])
    excess = C[1:] - C[:-1]
    i, j = np.unravel_index(int(np.argmax(excess)), excess.shape)
    worst = float(excess[i, j])
    if worst > slack:
        return MonotonicityReport(False, worst, (grid[i], grid[i + 1], grid[j]))
    return MonotonicityReport(True, max(worst, 0.0), None)


def stationary_distribution(k: MonotoneKernel) -> np.ndarray:
    """Solve pi P = pi, sum(pi) = 1 for a discrete kernel."""
    if k.matrix is None:
        raise InvalidArgument("stationary_distribution needs a discrete kernel")
    P = k.matrix
    n = P.shape[0]
    A = P.T - np.eye(n)
    if np.linalg.matrix_rank(A) != n - 1:
        raise NoUniqueStationary(f"{k.name}: fixed-point space is not one-dimensional")
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    residual = np.max(np.abs(pi @ P - pi))
    if residual > FIXED_POINT_TOL or (pi < -FIXED_POINT_TOL).any():
        raise NoUniqueStationary(f"{k.name}: stationary solve residual {residual:.3g}")
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


# ---------------------------------------------------------------------------
# numerical helpers


def generalized_inverse(cdf, x, u, *, discrete=False, upper=None, tol=INVERSE_TOL):
    """inf{z >= 0 : cdf(x, z) >= u}, by bisection vectorised over (x, u).

    One bracket is shared by every element so the search makes identical
    decisions for ordered arguments; this keeps coupled paths ordered.
    """
    x, u = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(u, dtype=float))
    if x.size == 0:
        return np.zeros(x.shape)
    if discrete:
        hi = np.full(x.shape, float(upper if upper is not None else 1))
        if upper is None:
            while (cdf(x, hi) < u).any() and hi.flat[0] < 2.0**62:
                hi = hi * 2
        lo = np.full(x.shape, -1.0)
        while (hi - lo > 1).any():
            mid = np.floor((lo + hi) / 2)
            ok = cdf(x, mid) >= u
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid)
        return hi

    top = float(upper) if upper is not None else max(1.0, 2.0 * float(np.max(x)) + 1.0)
    while upper is None and (cdf(x, np.full(x.shape, top)) < u).any() and top < 1e300:
        top *= 2.0
    lo = np.zeros(x.shape)
    hi = np.full(x.shape, top)
    at_zero = cdf(x, lo) >= u
    iters = int(np.ceil(np.log2(top / tol))) + 1
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ok = cdf(x, mid) >= u
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    return np.where(at_zero, 0.0, hi)


def expect_next(k: MonotoneKernel, x: float, f: Callable, n_mc: int = 100_000, stream=None):
    """E_x f(X_1) and an error estimate.

    Exact for discrete kernels, adaptive quadrature when a density is
    available, Monte Carlo with ``n_mc`` draws otherwise.
    """
    if k.discrete:
        return float(k.matrix[int(x)] @ f(k.states().astype(float))), 0.0
    if k.pdf is not None:
        atom = float(k.cdf(x, 0.0)) * float(f(np.array(0.0)))

        def integrand(y):
            return float(f(np.array(y))) * float(k.pdf(x, y))

        # kink of the density sits near x for the zoo kernels
        cut = max(float(x), 1.0)
        left, e1 = integrate.quad(integrand, 0.0, cut, limit=200)
        right, e2 = integrate.quad(integrand, cut, np.inf, limit=200)
        return atom + left + right, e1 + e2
    if stream is None:
        raise InvalidArgument("Monte Carlo expectation needs a stream")
    draws = f(k.inverse_cdf(np.full(n_mc, float(x)), stream.uniforms(n_mc)))
    return float(draws.mean()), float(draws.std(ddof=1) / np.sqrt(n_mc))
