"""Split-chain regeneration on R+ (and on Z+ as a special case).

On the small set [0, b] the kernel is written as

    P_x(X_1 in .) = lam * phi(.) + (1 - lam) * Q(x, .),

so from x <= b the chain jumps to a fresh phi-draw with probability lam (a
regeneration) and otherwise moves according to Q, whose CDF is
G(x, w) = (F(x, w) - lam * Phi(w)) / (1 - lam).

Cycles are simulated in vectorised batches.  Each step draws one row of
uniforms per cycle, whether or not that cycle is still running, so cycle i
always consumes column i.  Two batches run from one stream key therefore use
common random numbers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .coupling import UniformStream
from .discrete_solver import PoissonSolution
from .errors import (
    CouplingInvariantError,
    CycleOverflow,
    InvalidArgument,
    MinorizationUnsupported,
    MinorizationViolated,
)
from .kernel import MONOTONE_SLACK, MonotoneKernel, RewardFunction, expect_next, generalized_inverse

CYCLE_CAP = 10_000_000
G_TOL = 1e-12


# ---------------------------------------------------------------------------
# laws and configs


@dataclass(frozen=True)
class Law:
    """Probability law on Z+ or R+.

    ``density`` is the pmf for discrete laws, and for continuous laws the
    density of the part on (0, inf); a continuous law's atom at 0 is cdf(0).
    """

    cdf: Callable
    discrete: bool
    density: Optional[Callable] = None
    inverse: Optional[Callable] = None

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.inverse is not None:
            return self.inverse(u)
        return generalized_inverse(lambda _, z: self.cdf(z), np.zeros(u.shape), u, discrete=self.discrete)


def discrete_law(pmf) -> Law:
    pmf = np.asarray(pmf, dtype=float)
    if (pmf < 0).any() or abs(pmf.sum() - 1.0) > 1e-12:
        raise InvalidArgument("pmf must be non-negative and sum to 1")
    top = pmf.size - 1
    cum = np.cumsum(pmf)
    cum[-1] = 1.0

    def cdf(y):
        y = np.asarray(y, dtype=float)
        return np.where(y < 0, 0.0, cum[np.clip(np.floor(y), 0, top).astype(np.int64)])

    def density(y):
        y = np.asarray(y, dtype=float)
        inside = (y >= 0) & (y <= top) & (y == np.floor(y))
        return np.where(inside, pmf[np.clip(y, 0, top).astype(np.int64)], 0.0)

    def inverse(u):
        return np.minimum((cum < np.asarray(u)[..., None]).sum(axis=-1), top)

    return Law(cdf, True, density, inverse)


def matrix_minorization(k: MonotoneKernel, b: float):
    """Largest measure below every row x <= b: nu(y) = min_x P(x, y).

    Returns (mass of nu, nu normalised to a probability law).
    """
    rows = k.matrix[: int(np.floor(b)) + 1]
    nu = rows.min(axis=0)
    mass = float(nu.sum())
    if mass <= 0:
        raise InvalidArgument(f"rows 0..{int(b)} share no common mass")
    return mass, discrete_law(nu / mass)


def lindley_minorization(lam_a: float, mu: float, b: float):
    """Largest measure below P_x(X_1 in .) for all x in [0, b], M/M/1 Lindley kernel.

    With c = lam_a mu / (lam_a + mu) the minimum over x of the one-step law is
    an atom (mu / (lam_a + mu)) e^{-lam_a b} at 0 plus the density
    c min(e^{-mu y}, e^{lam_a (y - b)}) on y > 0; the two branches cross at
    y* = lam_a b / (lam_a + mu).  Returns (mass, normalised law).
    """
    c = lam_a * mu / (lam_a + mu)
    atom = mu / (lam_a + mu) * np.exp(-lam_a * b)
    y_star = lam_a * b / (lam_a + mu)
    left_mass = c / lam_a * (np.exp(lam_a * (y_star - b)) - np.exp(-lam_a * b))
    mass = atom + left_mass + c / mu * np.exp(-mu * y_star)

    def cum(y):
        y = np.maximum(np.asarray(y, dtype=float), 0.0)
        left = c / lam_a * (np.exp(lam_a * (np.minimum(y, y_star) - b)) - np.exp(-lam_a * b))
        right = c / mu * (np.exp(-mu * y_star) - np.exp(-mu * np.maximum(y, y_star)))
        return atom + left + right

    def cdf(y):
        y = np.asarray(y, dtype=float)
        return np.where(y < 0, 0.0, np.minimum(cum(y) / mass, 1.0))

    def density(y):
        y = np.asarray(y, dtype=float)
        m = c * np.minimum(np.exp(-mu * np.maximum(y, 0.0)), np.exp(lam_a * (np.minimum(y, b) - b)))
        return np.where(y > 0, m / mass, 0.0)

    return float(mass), Law(cdf, False, density)


@dataclass
class SplitConfig:
    b: float
    lam: float
    phi: Law
    v1: Callable = None
    v2: Callable = None
    name: str = "split"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.b > 0:
            raise InvalidArgument("small-set endpoint b must be positive")
        if not 0 < self.lam < 1:
            raise InvalidArgument(f"split lambda must lie in (0, 1), got {self.lam}")


def residual_cdf(cfg: SplitConfig, k: MonotoneKernel, x, w):
    """G(x, w), the CDF of Q(x, .) for x <= b."""
    return (k.cdf(x, w) - cfg.lam * cfg.phi.cdf(w)) / (1.0 - cfg.lam)


def residual_inverse(cfg: SplitConfig, k: MonotoneKernel, x, u):
    """G^{-1}(x, u) by bisection on G; one shared bracket keeps ordered inputs ordered."""
    x = np.asarray(x, dtype=float)
    upper = k.n_states - 1 if k.discrete else None
    y = generalized_inverse(lambda v, w: residual_cdf(cfg, k, v, w), x, u, discrete=k.discrete, upper=upper)
    at0 = residual_cdf(cfg, k, x, np.zeros(x.shape))
    aty = residual_cdf(cfg, k, x, y)
    if (at0 < -G_TOL).any() or (aty > 1 + G_TOL).any() or (aty < np.asarray(u) - 1e-9).any():
        raise MinorizationViolated(f"{cfg.name}: G is not a distribution function on the small set")
    return y


# ---------------------------------------------------------------------------
# Assumption checks


@dataclass
class ConditionResult:
    passed: bool
    margin: float
    se: float = 0.0
    detail: str = ""


@dataclass
class AssumptionReport:
    conditions: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions.values())


def _point_mass(k, x, y):
    """Density of P_x(X_1 in .) at y w.r.t. counting measure (discrete) or atom-at-0 + Lebesgue."""
    if k.discrete:
        return k.matrix[np.asarray(x).astype(np.int64), np.asarray(y).astype(np.int64)]
    y = np.asarray(y, dtype=float)
    return np.where(y == 0, k.cdf(x, np.zeros(y.shape)), k.pdf(x, y))


def _phi_mass(phi, y):
    if phi.discrete:
        return phi.density(y)
    y = np.asarray(y, dtype=float)
    return np.where(y == 0, phi.cdf(np.zeros(y.shape)), phi.density(y))


def verify_assumption1(cfg: SplitConfig, k: MonotoneKernel, grid, r: RewardFunction, n_sigma: float = 2.0):
    """Numerical check of the drift and minorization conditions on a grid.

    a, b: boundedness of E_x v_i(X_1) and |r| on [0, b];
    c, d: drift E_x v1(X_1) <= v1(x) - 1 and E_x v2(X_1) <= v2(x) - |r(x)| for x > b;
    e: P_x(X_1 in .) >= lam phi(.) on [0, b], checked on CDF level and on every
       grid interval (so Q has non-negative mass).
    Expectations come from expect_next; a drift margin passes when it exceeds
    n_sigma times its error estimate.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or (np.diff(grid) <= 0).any():
        raise InvalidArgument("grid must be non-empty and strictly increasing")
    if cfg.v1 is None or cfg.v2 is None:
        raise InvalidArgument("drift functions v1 and v2 are required")
    small = grid[grid <= cfg.b]
    tail = grid[grid > cfg.b]
    if small.size == 0 or tail.size == 0:
        raise InvalidArgument("grid must cover [0, b] and a tail segment beyond b")

    # absolute continuity of phi w.r.t. every P_x, x <= b
    if k.discrete or k.pdf is not None:
        X, Y = np.meshgrid(small, grid, indexing="ij")
        unsupported = (_phi_mass(cfg.phi, Y) > 0) & (_point_mass(k, X, Y) <= 0)
        if unsupported.any():
            i, j = np.argwhere(unsupported)[0]
            raise MinorizationUnsupported(
                f"phi charges y={grid[j]} but P_x has no mass there for x={small[i]}"
            )

    conds = {}
    sup_v = []
    for x in small:
        e1, _ = expect_next(k, x, cfg.v1)
        e2, _ = expect_next(k, x, cfg.v2)
        sup_v.append(max(e1, e2))
    sup_v = max(sup_v)
    conds["a"] = ConditionResult(bool(np.isfinite(sup_v)), float(sup_v), detail="sup E_x v_i(X_1) on [0,b]")
    sup_r = float(np.max(np.abs(r(small))))
    conds["b"] = ConditionResult(bool(np.isfinite(sup_r)), sup_r, detail="sup |r| on [0,b]")

    for label, v, target in (("c", cfg.v1, lambda x: 1.0), ("d", cfg.v2, lambda x: np.abs(r(x)))):
        worst, worst_se, where = np.inf, 0.0, None
        for x in tail:
            ev, err = expect_next(k, x, v)
            margin = float(v(np.array(x)) - target(np.array(x)) - ev)
            if margin - n_sigma * err < worst - n_sigma * worst_se:
                worst, worst_se, where = margin, err, x
        conds[label] = ConditionResult(worst - n_sigma * worst_se >= 0, worst, worst_se, f"worst at x={where}")

    X, Y = np.meshgrid(small, grid, indexing="ij")
    excess = k.cdf(X, Y) - cfg.lam * cfg.phi.cdf(Y)
    y0 = np.zeros(small.shape)
    atom_excess = k.cdf(small, y0) - cfg.lam * cfg.phi.cdf(y0)
    interval_excess = float(np.diff(excess, axis=1).min()) if grid.size > 1 else 0.0
    margin_e = float(min(excess.min(), atom_excess.min()))
    conds["e"] = ConditionResult(
        margin_e >= -G_TOL and interval_excess >= -G_TOL, margin_e,
        detail=f"min F - lam*Phi; min interval excess {interval_excess:.3g}",
    )
    return AssumptionReport(conds)


def mixture_reconstruction_error(cfg: SplitConfig, k: MonotoneKernel, xs, ys) -> float:
    """max |lam Phi(y) + (1 - lam) G(x, y) - F(x, y)| over the grid."""
    X, Y = np.meshgrid(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float), indexing="ij")
    mix = cfg.lam * cfg.phi.cdf(Y) + (1 - cfg.lam) * residual_cdf(cfg, k, X, Y)
    return float(np.max(np.abs(mix - k.cdf(X, Y))))


def g_monotonicity_violation(cfg: SplitConfig, k: MonotoneKernel, vs, ws) -> float:
    """Largest increase of G(., w) along vs; 1 - G(., w) must be non-decreasing."""
    V, W = np.meshgrid(np.asarray(vs, dtype=float), np.asarray(ws, dtype=float), indexing="ij")
    G = residual_cdf(cfg, k, V, W)
    return float(max(np.diff(G, axis=0).max(), 0.0)) if G.shape[0] > 1 else 0.0


# ---------------------------------------------------------------------------
# single steps and cycles


def _split_move(cfg, k, x, u_coin, u_main):
    """Vectorised split transition; returns (next, regenerated)."""
    x = np.asarray(x, dtype=float)
    small = x <= cfg.b
    regen = small & (u_coin < cfg.lam)
    nxt = np.empty(x.shape)
    big = ~small
    if big.any():
        nxt[big] = k.inverse_cdf(x[big], u_main[big])
    rest = small & ~regen
    if rest.any():
        nxt[rest] = residual_inverse(cfg, k, x[rest], u_main[rest])
    if regen.any():
        nxt[regen] = cfg.phi.ppf(u_main[regen])
    return nxt, regen


def split_step(cfg: SplitConfig, k: MonotoneKernel, x, stream: UniformStream):
    u = stream.uniforms(2)
    nxt, regen = _split_move(cfg, k, np.array([x], dtype=float), u[:1], u[1:])
    return nxt[0], bool(regen[0])


@dataclass
class RegenerationCycle:
    path: np.ndarray  # X_0..X_{tau-1}
    tau: int
    reward_sum: float
    small_set_visits: int
    regen_state: float
    abs_centered_available: bool = False


@dataclass
class CycleBatch:
    paths: np.ndarray  # (n, max tau), NaN past each cycle's end
    tau: np.ndarray
    small_set_visits: np.ndarray
    regen_state: np.ndarray

    def __len__(self):
        return self.tau.size

    def reward_sums(self, r: RewardFunction) -> np.ndarray:
        live = ~np.isnan(self.paths)
        vals = r(np.where(live, self.paths, 0.0))
        return np.where(live, vals, 0.0).sum(axis=1)

    def cycle(self, i: int, r: Optional[RewardFunction] = None) -> RegenerationCycle:
        path = self.paths[i, : self.tau[i]]
        total = float(r(path).sum()) if r is not None else float("nan")
        return RegenerationCycle(
            path, int(self.tau[i]), total, int(self.small_set_visits[i]), float(self.regen_state[i])
        )


def _starts(cfg, n, start, stream):
    if isinstance(start, str):
        if start != "phi":
            raise InvalidArgument(f"unknown start {start!r}")
        return cfg.phi.ppf(stream.uniforms(n)).astype(float)
    return np.broadcast_to(np.asarray(start, dtype=float), (n,)).copy()


def simulate_cycles(cfg: SplitConfig, k: MonotoneKernel, start, n: int, stream: UniformStream,
                    cap: int = CYCLE_CAP) -> CycleBatch:
    """n independent cycles, each run until its first regeneration."""
    x = _starts(cfg, n, start, stream)
    alive = np.ones(n, dtype=bool)
    tau = np.zeros(n, dtype=np.int64)
    visits = np.zeros(n, dtype=np.int64)
    regen_state = np.full(n, np.nan)
    history = []
    step = 0
    while alive.any():
        if step >= cap:
            raise CycleOverflow(f"{int(alive.sum())} cycles still running after {cap} steps")
        u = stream.uniforms((n, 2))
        history.append(np.where(alive, x, np.nan))
        idx = np.flatnonzero(alive)
        xa = x[idx]
        nxt, regen = _split_move(cfg, k, xa, u[idx, 0], u[idx, 1])
        visits[idx] += xa <= cfg.b
        tau[idx] += 1
        done = idx[regen]
        regen_state[done] = nxt[regen]
        x[idx] = nxt
        alive[done] = False
        step += 1
    return CycleBatch(np.stack(history, axis=1), tau, visits, regen_state)


def simulate_cycle(cfg: SplitConfig, k: MonotoneKernel, start, stream: UniformStream,
                   r: Optional[RewardFunction] = None, cap: int = CYCLE_CAP) -> RegenerationCycle:
    return simulate_cycles(cfg, k, start, 1, stream, cap).cycle(0, r)


# ---------------------------------------------------------------------------
# estimators


def ratio_estimate(rewards, lengths):
    """Regenerative ratio estimator sum(Y)/sum(tau) with delta-method standard error."""
    rewards = np.asarray(rewards, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    n = rewards.size
    est = rewards.sum() / lengths.sum()
    resid = rewards - est * lengths
    se = float(np.sqrt(resid.var(ddof=1) / n) / lengths.mean()) if n > 1 else float("inf")
    return float(est), se


def estimate_pi_r(cfg: SplitConfig, k: MonotoneKernel, r: RewardFunction, n_cycles: int,
                  stream: UniformStream):
    """pi r = E_phi sum_{j<tau} r(X_j) / E_phi tau from cycles started at phi."""
    if n_cycles < 30:
        raise InvalidArgument("need at least 30 cycles")
    batch = simulate_cycles(cfg, k, "phi", n_cycles, stream)
    est, se = ratio_estimate(batch.reward_sums(r), batch.tau)
    if se == 0:
        warnings.warn("degenerate cycle rewards: standard error is zero", stacklevel=2)
    return est, se


def estimate_g(cfg: SplitConfig, k: MonotoneKernel, r: RewardFunction, xs, n_cycles: int,
               stream: UniformStream, pi_r: Optional[float] = None, z: float = 1.96) -> PoissonSolution:
    """Monte Carlo g~(x) = E_x sum_{j<tau} r_c(X_j) at each x.

    Every x reuses the same substream, so the estimates share random numbers.
    When pi_r is not supplied it is estimated first from an independent
    substream; its error is a common shift and is excluded from the per-point SE.
    """
    xs = np.asarray(xs, dtype=float)
    pi_se = 0.0
    if pi_r is None:
        pi_r, pi_se = estimate_pi_r(cfg, k, r, n_cycles, stream.child(0))
    g = np.empty(xs.size)
    se = np.empty(xs.size)
    for i, x in enumerate(xs):
        batch = simulate_cycles(cfg, k, x, n_cycles, stream.child(1))
        sums = batch.reward_sums(r) - pi_r * batch.tau
        g[i] = sums.mean()
        se[i] = sums.std(ddof=1) / np.sqrt(n_cycles)
    return PoissonSolution(
        xs, g, "phi-mean-zero", float(pi_r), float("nan"), "monte_carlo",
        se=se, ci_halfwidth=z * se, info={"pi_r_se": pi_se, "n_cycles": n_cycles},
    )


# ---------------------------------------------------------------------------
# modified coupling


def rn_weight(cfg: SplitConfig, k: MonotoneKernel, x, nxt, return_clamped: bool = False):
    """w(x, y) = lam * (d phi / d P_x(X_1 in .))(y), clamped to [0, 1]."""
    num = cfg.lam * _phi_mass(cfg.phi, nxt)
    den = _point_mass(k, x, nxt)
    if ((den <= 0) & (num > 0)).any():
        raise MinorizationUnsupported("phi is not absolutely continuous w.r.t. P_x(X_1 in .)")
    w = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    clamped = int((w > 1 + 1e-9).sum())
    w = np.clip(w, 0.0, 1.0)
    if return_clamped:
        return w, clamped
    return w


@dataclass
class CoupledCycle:
    lower_path: np.ndarray
    upper_path: np.ndarray
    tau_upper: int
    tau_lower_early: Optional[int]
    order_held: bool
    regen_state: float


@dataclass
class CoupledCycleBatch:
    lower: np.ndarray  # (n, max tau), NaN padded
    upper: np.ndarray
    tau: np.ndarray  # regeneration time of the upper path
    tau_lower: np.ndarray  # first regeneration of the lower path (<= tau)
    regen_state: np.ndarray
    clamped_weights: int = 0

    def difference_sums(self, r: RewardFunction) -> np.ndarray:
        """sum_{j<tau} [r(upper_j) - r(lower_j)] per cycle."""
        live = ~np.isnan(self.upper)
        up = r(np.where(live, self.upper, 0.0))
        lo = r(np.where(live, self.lower, 0.0))
        return np.where(live, up - lo, 0.0).sum(axis=1)

    def lower_reward_sums(self, r: RewardFunction) -> np.ndarray:
        """sum_{j<tau'} r(lower_j): the lower path's own cycle reward."""
        cols = np.arange(self.lower.shape[1])
        live = cols[None, :] < self.tau_lower[:, None]
        vals = r(np.where(live, self.lower, 0.0))
        return np.where(live, vals, 0.0).sum(axis=1)

    def lower_state_at(self, j) -> np.ndarray:
        j = np.asarray(j, dtype=np.int64)
        return self.lower[np.arange(self.tau.size), j]

    def cycle(self, i: int) -> CoupledCycle:
        t = int(self.tau[i])
        return CoupledCycle(
            self.lower[i, :t], self.upper[i, :t], t, int(self.tau_lower[i]), True,
            float(self.regen_state[i]),
        )


def simulate_coupled_cycles(cfg: SplitConfig, k: MonotoneKernel, x: float, y: float, n: int,
                            stream: UniformStream, cap: int = CYCLE_CAP) -> CoupledCycleBatch:
    """Jointly simulate the split chain from x <= y until the upper path regenerates.

    Per step, with shared uniforms (u_coin, u_main, u_w):
      both <= b:      with prob lam the upper path draws from phi and the lower
                      copies it; otherwise both move by G^{-1}(., u_main);
      lower <= b < upper: both move by F^{-1}(., u_main) and the lower path is
                      marked as regenerating with prob w(lower, next lower);
      both > b:       both move by F^{-1}(., u_main).
    The lower path keeps running after its own first regeneration tau'.
    """
    if x > y:
        raise InvalidArgument("need x <= y")
    lo = np.full(n, float(x))
    hi = np.full(n, float(y))
    alive = np.ones(n, dtype=bool)
    tau = np.zeros(n, dtype=np.int64)
    tau_lower = np.zeros(n, dtype=np.int64)
    regen_state = np.full(n, np.nan)
    lo_hist, hi_hist = [], []
    clamped = 0
    step = 0
    while alive.any():
        if step >= cap:
            raise CycleOverflow(f"{int(alive.sum())} coupled cycles still running after {cap} steps")
        u = stream.uniforms((n, 3))
        lo_hist.append(np.where(alive, lo, np.nan))
        hi_hist.append(np.where(alive, hi, np.nan))
        idx = np.flatnonzero(alive)
        a, c = lo[idx], hi[idx]
        uc, um, uw = u[idx, 0], u[idx, 1], u[idx, 2]
        na, nc = np.empty(idx.size), np.empty(idx.size)
        lower_regen = np.zeros(idx.size, dtype=bool)

        both = c <= cfg.b
        regen = both & (uc < cfg.lam)
        if regen.any():
            na[regen] = nc[regen] = cfg.phi.ppf(um[regen])
            lower_regen |= regen
        viaq = both & ~regen
        if viaq.any():
            m = int(viaq.sum())
            moved = residual_inverse(cfg, k, np.concatenate([a[viaq], c[viaq]]), np.tile(um[viaq], 2))
            na[viaq], nc[viaq] = moved[:m], moved[m:]
        plain = ~both
        if plain.any():
            na[plain] = k.inverse_cdf(a[plain], um[plain])
            nc[plain] = k.inverse_cdf(c[plain], um[plain])
        mixed = plain & (a <= cfg.b)
        if mixed.any():
            w, nclamp = rn_weight(cfg, k, a[mixed], na[mixed], return_clamped=True)
            clamped += nclamp
            lower_regen[mixed] = uw[mixed] < w

        if (na > nc + MONOTONE_SLACK).any():
            raise CouplingInvariantError(f"lower path exceeded upper path at step {step}")

        tau[idx] += 1
        first = lower_regen & (tau_lower[idx] == 0)
        tau_lower[idx[first]] = tau[idx[first]]
        finished = idx[regen]
        regen_state[finished] = nc[regen]
        lo[idx], hi[idx] = na, nc
        alive[finished] = False
        step += 1
    # without an earlier mark the lower path regenerates together with the upper one
    tau_lower = np.where(tau_lower == 0, tau, tau_lower)
    return CoupledCycleBatch(np.stack(lo_hist, 1), np.stack(hi_hist, 1), tau, tau_lower, regen_state, clamped)


def simulate_coupled_cycle(cfg: SplitConfig, k: MonotoneKernel, x: float, y: float,
                           stream: UniformStream, cap: int = CYCLE_CAP) -> CoupledCycle:
    return simulate_coupled_cycles(cfg, k, x, y, 1, stream, cap).cycle(0)


@dataclass
class ContinuityReport:
    x: float
    deltas: np.ndarray
    differences: np.ndarray
    se: np.ndarray

    @property
    def shrinking(self) -> bool:
        """|difference| is non-increasing as delta decreases (within 3 SE)."""
        order = np.argsort(-self.deltas)
        d = np.abs(self.differences[order])
        s = self.se[order]
        return bool(np.all(d[1:] <= d[:-1] + 3 * np.sqrt(s[1:] ** 2 + s[:-1] ** 2)))


def continuity_probe(cfg: SplitConfig, k: MonotoneKernel, r: RewardFunction, x: float, deltas,
                     n_cycles: int, stream: UniformStream) -> ContinuityReport:
    """Estimate g~(x + delta) - g~(x) from coupled cycles for shrinking delta.

    With the upper path started at x + delta the difference equals
    E sum_{j<tau} [r(X_j(x + delta)) - r(X_j(x))]; pi r cancels.
    """
    if not k.continuous_inverse:
        raise InvalidArgument(f"{k.name}: inverse CDF is not declared continuous in the state")
    if not r.continuous:
        raise InvalidArgument(f"reward {r.name} is not continuous")
    deltas = np.asarray(deltas, dtype=float)
    if (deltas < 0).any():
        raise InvalidArgument("deltas must be non-negative")
    diffs = np.zeros(deltas.size)
    ses = np.zeros(deltas.size)
    for i, d in enumerate(deltas):
        if d == 0:
            continue
        batch = simulate_coupled_cycles(cfg, k, x, x + d, n_cycles, stream.child(1))
        sums = batch.difference_sums(r)
        diffs[i] = sums.mean()
        ses[i] = sums.std(ddof=1) / np.sqrt(n_cycles)
    return ContinuityReport(float(x), deltas, diffs, ses)
