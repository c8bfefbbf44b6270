"""Exact solutions of (P - I) g = -r_c on truncated Z+ chains.

Three independent routes are provided and cross-checked by the test suite:

* ``solve_linear``: the square linear system with the anchor row g(z) = 0.
* ``solve_regenerative``: g_z(x) = E_x sum_{j < tau} r_c(X_j), tau the first
  return time to z, computed from the taboo system on the states != z.
* ``solve_series``: partial sums of sum_j P^j r_c.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order

from .errors import CertificationFailed, InvalidArgument, SeriesDiverged, SolverFailure
from .kernel import MonotoneKernel, RewardFunction, stationary_distribution

MONOTONE_TOL = 1e-10
DRIFT_TOL = 1e-8


@dataclass
class PoissonSolution:
    grid: np.ndarray
    g: np.ndarray
    normalization: str
    pi_r: float
    residual_sup: float
    method: str
    r_c: Optional[np.ndarray] = None
    se: Optional[np.ndarray] = None
    ci_halfwidth: Optional[np.ndarray] = None
    raw: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)

    def anchored(self, z=0) -> np.ndarray:
        """g shifted so that g(z) = 0."""
        hits = np.flatnonzero(self.grid == z)
        if not hits.size:
            raise InvalidArgument(f"anchor {z} not on the solution grid")
        return self.g - self.g[hits[0]]


@dataclass
class MonotonicityCertificate:
    min_increment: float
    location: Optional[float]
    n_points: int


@dataclass
class BiasReport:
    x: float
    n: int
    expected_sum: float
    approximation: float
    gap: float
    remainder: float = 0.0  # (P^n g)(x) - pi g, the exact correction
    identity_gap: float = 0.0  # |E_x S_n - (approximation - remainder)|


@dataclass
class MartingaleTrace:
    path: np.ndarray
    values: np.ndarray
    increments: np.ndarray
    drift: np.ndarray  # (Pg - g + r_c) at each visited state X_0..X_{n-1}

    @property
    def drift_sup(self) -> float:
        return float(np.max(np.abs(self.drift))) if self.drift.size else 0.0

    @property
    def passed(self) -> bool:
        return self.drift_sup <= DRIFT_TOL


def _require_discrete(k):
    if not k.discrete:
        raise InvalidArgument(f"{k.name}: exact solvers need a discrete kernel")


def poisson_residual(k: MonotoneKernel, g, r_c) -> np.ndarray:
    """(Pg)(x) - g(x) + r_c(x) at every state."""
    return k.matrix @ g - g + r_c


def _centered(k, r):
    pi = stationary_distribution(k)
    rv = r(k.states())
    pi_r = float(pi @ rv)
    return pi, pi_r, rv - pi_r


def _state_index(k, z):
    z = int(z)
    if not 0 <= z < k.n_states:
        raise InvalidArgument(f"state {z} outside 0..{k.n_states - 1}")
    return z


def solve_linear(k: MonotoneKernel, r: RewardFunction, anchor=0) -> PoissonSolution:
    _require_discrete(k)
    z = _state_index(k, anchor)
    _, pi_r, rc = _centered(k, r)
    n = k.n_states
    A = np.eye(n) - k.matrix
    # the equations are rank n-1; the anchor row replaces one of them
    A[z, :] = 0.0
    A[z, z] = 1.0
    b = rc.copy()
    b[z] = 0.0
    try:
        g = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SolverFailure(f"{k.name}: singular anchored system ({exc})") from exc
    if not np.all(np.isfinite(g)):
        raise SolverFailure(f"{k.name}: non-finite solution")
    res = float(np.max(np.abs(poisson_residual(k, g, rc))))
    return PoissonSolution(
        k.states(), g, f"anchor:{z}", pi_r, res, "linear", r_c=rc,
    )


def _reach(adj, start):
    return set(breadth_first_order(adj, start, directed=True, return_predecessors=False).tolist())


def solve_regenerative(k: MonotoneKernel, r: RewardFunction, z=0) -> PoissonSolution:
    """g_z(x) = E_x sum_{j=0}^{tau-1} r_c(X_j) with tau = inf{n >= 1 : X_n = z}.

    ``g`` is returned anchored at g(z) = 0; the raw g_z (whose value at z is
    zero only up to rounding) is kept in ``raw``.
    """
    _require_discrete(k)
    z = _state_index(k, z)
    P = k.matrix
    n = k.n_states
    adj = csr_matrix(P > 0)
    everyone = set(range(n))
    cut_off = sorted((everyone - _reach(adj, z)) | (everyone - _reach(adj.T.tocsr(), z)))
    if cut_off:
        raise SolverFailure(f"{k.name}: states {cut_off} do not communicate with {z}")

    _, pi_r, rc = _centered(k, r)
    keep = np.array([i for i in range(n) if i != z], dtype=int)
    taboo = P[np.ix_(keep, keep)]
    h = np.linalg.solve(np.eye(keep.size) - taboo, rc[keep])
    raw = np.empty(n)
    raw[keep] = h
    raw[z] = rc[z] + P[z, keep] @ h
    g = raw - raw[z]
    res = float(np.max(np.abs(poisson_residual(k, g, rc))))
    return PoissonSolution(
        k.states(), g, f"anchor:{z}", pi_r, res, "regenerative", r_c=rc, raw=raw,
        info={"raw_residual_sup": float(np.max(np.abs(poisson_residual(k, raw, rc))))},
    )


def solve_series(
    k: MonotoneKernel, r: RewardFunction, tol: float = 1e-12, max_terms: int = 100_000
) -> PoissonSolution:
    """g = sum_j P^j r_c, stopped once the newest term has sup-norm below tol."""
    _require_discrete(k)
    _, pi_r, rc = _centered(k, r)
    g = np.zeros_like(rc)
    term = rc.copy()
    for j in range(max_terms):
        g += term
        if np.max(np.abs(term)) < tol:
            res = float(np.max(np.abs(poisson_residual(k, g, rc))))
            return PoissonSolution(
                k.states(), g, "series", pi_r, res, "series", r_c=rc,
                info={"terms": j + 1},
            )
        term = k.matrix @ term
    raise SeriesDiverged(
        f"{k.name}: term sup-norm {np.max(np.abs(term)):.3g} after {max_terms} terms"
    )


SOLVERS = {"linear": solve_linear, "regenerative": solve_regenerative, "series": solve_series}


def certify_monotone(sol: PoissonSolution, tol: float = MONOTONE_TOL) -> MonotonicityCertificate:
    """Certify g is non-decreasing along the grid.

    For Monte Carlo solutions the CI half-widths of neighbouring points are
    added to the slack, i.e. monotone up to CI overlap.
    """
    inc = np.diff(sol.g)
    slack = np.full(inc.shape, tol)
    if sol.ci_halfwidth is not None:
        slack = slack + sol.ci_halfwidth[1:] + sol.ci_halfwidth[:-1]
    if inc.size == 0:
        return MonotonicityCertificate(0.0, None, sol.g.size)
    worst = int(np.argmin(inc + slack))
    if inc[worst] < -slack[worst]:
        loc = float(sol.grid[worst])
        raise CertificationFailed(
            f"g decreases by {-inc[worst]:.3g} between {sol.grid[worst]} and {sol.grid[worst + 1]}",
            location=loc,
        )
    i = int(np.argmin(inc))
    return MonotonicityCertificate(float(inc[i]), float(sol.grid[i]), sol.g.size)


def bias_expansion_check(k: MonotoneKernel, r: RewardFunction, sol: PoissonSolution, x, n: int) -> BiasReport:
    """Compare E_x S_n(r) with n pi r + g(x) - pi g, both computed exactly.

    ``gap`` is the approximation error, which decays like the chain's mixing;
    ``identity_gap`` checks the exact form with (P^n g)(x) in place of pi g.
    """
    _require_discrete(k)
    x = _state_index(k, x)
    pi = stationary_distribution(k)
    rv = r(k.states())
    total = 0.0
    v = rv.copy()
    w = sol.g.copy()
    for _ in range(n):
        total += v[x]
        v = k.matrix @ v
        w = k.matrix @ w
    pi_g = float(pi @ sol.g)
    approx = n * sol.pi_r + sol.g[x] - pi_g
    # E_x S_n = n pi r + g(x) - (P^n g)(x) holds exactly
    remainder = float(w[x] - pi_g)
    return BiasReport(x, n, total, approx, abs(total - approx), remainder, abs(total - approx + remainder))


def martingale_drift_check(k: MonotoneKernel, sol: PoissonSolution, paths) -> list:
    """M_n = g(X_n) + sum_{j<n} r_c(X_j) along each path, with exact one-step drifts."""
    _require_discrete(k)
    if sol.r_c is None:
        raise InvalidArgument("solution carries no centred reward")
    arr = paths.paths if hasattr(paths, "paths") else np.asarray(paths)
    arr = np.atleast_2d(arr).astype(np.int64)
    drift = poisson_residual(k, sol.g, sol.r_c)
    traces = []
    for path in arr:
        values = sol.g[path] + np.concatenate([[0.0], np.cumsum(sol.r_c[path[:-1]])])
        traces.append(MartingaleTrace(path, values, np.diff(values), drift[path[:-1]]))
    return traces

