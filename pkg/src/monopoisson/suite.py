"""The reproducible check suite behind ``monopoisson check``.

Each check draws from its own substream ``UniformStream(seed, (id,))`` so
adding or skipping a check never shifts the random numbers of another, and
rerunning with the same config and seed gives identical reports.
"""

from __future__ import annotations

import numpy as np

from . import config as config_mod
from .contractive import certify_lipschitz, contractive_params, crn_path_differences, solve_contractive
from .coupling import UniformStream, backward_from_uniforms, check_order_preservation, coupled_from_uniforms
from .diagnostics import StatReport, binomial_ci, ks_two_sample
from .discrete_solver import (
    SOLVERS,
    bias_expansion_check,
    certify_monotone,
    martingale_drift_check,
)
from .errors import CertificationFailed, CouplingInvariantError, MonoPoissonError
from .kernel import check_stochastic_monotonicity, stationary_distribution, validate_kernel
from .split import (
    estimate_g,
    estimate_pi_r,
    mixture_reconstruction_error,
    simulate_coupled_cycles,
    simulate_cycles,
    verify_assumption1,
)

ORDER_SEEDS = 10_000
ORDER_HORIZON = 100
KS_SAMPLES = 10_000
KS_HORIZON = 50
CYCLES = 10_000
BIAS_HORIZON = 200


def _continuous_grid(cfg):
    if cfg.solver.grid:
        return config_mod.parse_grid(cfg.solver.grid)
    return np.linspace(0.0, 10.0, 41)


def _initial_states(k, cfg):
    if k.discrete:
        n = k.n_states
        return np.array([0, n // 4, n // 2], dtype=float)
    return np.array([0.0, 1.0, 4.0])


def discrete_checks(name, k, r, stream_for, seed):
    out = []
    states = k.states().astype(float)
    v = validate_kernel(k, states)
    out.append(StatReport.at_most(f"{name}:kernel_mass", v.mass_error, 1e-12, k.n_states, seed))
    out.append(StatReport.at_most(f"{name}:kernel_shape", v.cdf_violations + v.inverse_violations, 0,
                                  k.n_states, seed))
    m = check_stochastic_monotonicity(k, states)
    out.append(StatReport.at_most(f"{name}:stochastic_monotonicity", m.worst_violation, 1e-12, k.n_states, seed))

    sols = {method: solve(k, r) for method, solve in SOLVERS.items()}
    base = sols["linear"].anchored(0)
    for method, sol in sols.items():
        out.append(StatReport.at_most(f"{name}:residual_{method}", sol.residual_sup, 1e-8, k.n_states, seed))
        if method != "linear":
            dev = float(np.max(np.abs(sol.anchored(0) - base)))
            out.append(StatReport.at_most(f"{name}:agreement_{method}", dev, 1e-6, k.n_states, seed))
    sol = sols["linear"]
    if k.monotone and r.monotone:
        try:
            cert = certify_monotone(sol)
            stat = max(-cert.min_increment, 0.0)
        except CertificationFailed:
            stat = float("inf")
        out.append(StatReport.at_most(f"{name}:g_monotone", stat, 1e-10, k.n_states, seed))

    paths = coupled_from_uniforms(k, [0], stream_for(10).uniforms((1000, ORDER_HORIZON)))[:, 0, :]
    traces = martingale_drift_check(k, sol, paths)
    drift = max(t.drift_sup for t in traces)
    out.append(StatReport.at_most(f"{name}:martingale_drift", drift, 1e-8, paths.size, seed))
    bias = bias_expansion_check(k, r, sol, 0, BIAS_HORIZON)
    out.append(StatReport.at_most(f"{name}:bias_identity_x0", bias.identity_gap, 1e-8, BIAS_HORIZON, seed))
    if k.name == "birth_death":
        # the n pi r + g(x) - pi g approximation is only claimed for this fast-mixing chain
        out.append(StatReport.at_most(f"{name}:bias_expansion_x0", bias.gap, 1e-6, BIAS_HORIZON, seed))
    return out


def coupling_checks(name, k, cfg, stream_for, seed):
    out = []
    xs = _initial_states(k, cfg)
    U = stream_for(20).uniforms((ORDER_SEEDS, ORDER_HORIZON))
    rep = check_order_preservation(coupled_from_uniforms(k, xs, U))
    out.append(StatReport.at_most(f"{name}:coupling_order_violations", rep.violations, 0,
                                  ORDER_SEEDS * ORDER_HORIZON, seed))
    if not k.discrete:
        x0 = 1.0
        Uf = stream_for(21).uniforms((KS_SAMPLES, KS_HORIZON))
        fwd = coupled_from_uniforms(k, [x0], Uf)[:, 0, -1]
        bwd = backward_from_uniforms(k, x0, stream_for(22).uniforms((KS_SAMPLES, KS_HORIZON)))
        out.append(ks_two_sample(fwd, bwd, 0.01, f"{name}:forward_backward_ks", seed))
    return out


def _exact_pi_r(k, r):
    if k.discrete:
        return float(stationary_distribution(k) @ r(k.states()))
    if k.name == "lindley" and r.name == "x":
        return float(k.params["mean_wait"])
    return None


def split_checks(name, k, r, cfg, stream_for, seed):
    out = []
    sc = config_mod.build_split(cfg, k)
    if k.discrete:
        grid = k.states().astype(float)
    else:
        grid = np.concatenate([np.linspace(0.0, sc.b, 21), np.linspace(sc.b + 0.1, 20.0, 60)])
    rep = verify_assumption1(sc, k, grid, r)
    for label, cond in rep.conditions.items():
        stat = 0.0 if cond.passed else float("inf")
        out.append(StatReport.at_most(f"{name}:assumption_{label}", stat, 0.0, grid.size, seed))
    small = grid[grid <= sc.b]
    err = mixture_reconstruction_error(sc, k, small, grid)
    out.append(StatReport.at_most(f"{name}:mixture_reconstruction", err, 1e-10, grid.size, seed))

    batch = simulate_cycles(sc, k, "phi", CYCLES, stream_for(30))
    visits = batch.small_set_visits
    z = abs(visits.mean() - 1 / sc.lam) / (visits.std(ddof=1) / np.sqrt(visits.size))
    out.append(StatReport.at_most(f"{name}:visits_per_cycle_z", z, 3.0, CYCLES, seed))
    for kk in range(1, 6):
        lo, hi = binomial_ci(int((visits > kk).sum()), visits.size, 0.99)
        target = (1 - sc.lam) ** kk
        outside = max(lo - target, target - hi, 0.0)
        out.append(StatReport.at_most(f"{name}:visit_tail_k{kk}", outside, 0.0, CYCLES, seed))

    exact = _exact_pi_r(k, r)
    if exact is not None:
        est, se = estimate_pi_r(sc, k, r, CYCLES, stream_for(31))
        out.append(StatReport.at_most(f"{name}:pi_r_z", abs(est - exact) / se, 3.0, CYCLES, seed))

    x, y = (0.0, 3.0) if not k.discrete else (0.0, float(min(3, k.n_states - 1)))
    try:
        cb = simulate_coupled_cycles(sc, k, x, y, CYCLES, stream_for(32))
        violations = 0
    except CouplingInvariantError:
        cb, violations = None, 1
    out.append(StatReport.at_most(f"{name}:coupled_cycle_order", violations, 0, CYCLES, seed))
    if cb is not None:
        ind = simulate_cycles(sc, k, x, CYCLES, stream_for(33))
        out.append(ks_two_sample(cb.tau_lower, ind.tau, 0.01, f"{name}:coupled_lower_tau_ks", seed))
        lower = cb.lower_state_at(np.minimum(5, cb.tau_lower) - 1)
        plain = ind.paths[np.arange(CYCLES), np.minimum(5, ind.tau) - 1]
        out.append(ks_two_sample(lower, plain, 0.01, f"{name}:coupled_lower_state_ks", seed))

    if r.monotone:
        xs = np.array([0, 1, 2, 4, 8], dtype=float)
        if k.discrete:
            xs = xs[xs < k.n_states]
        sol = estimate_g(sc, k, r, xs, CYCLES, stream_for(34))
        inc = np.diff(sol.g) + sol.ci_halfwidth[1:] + sol.ci_halfwidth[:-1]
        out.append(StatReport.at_most(f"{name}:estimate_g_monotone", max(-inc.min(), 0.0), 0.0, CYCLES, seed))
    return out


def contractive_checks(name, k, r, cfg, stream_for, seed):
    out = []
    grid = _continuous_grid(cfg)
    pairs = [(grid[i], grid[i + 1]) for i in range(0, grid.size - 1, max(1, (grid.size - 1) // 8))]
    params = contractive_params(k, r, pairs, grid, 10_000, stream_for(40))
    out.append(StatReport.at_most(f"{name}:rho_working", params.rho, 1.0 - 1e-12, 10_000, seed))
    sol = solve_contractive(k, r, params, grid, max(cfg.solver.tol, 1e-4), stream_for(41),
                            n_paths=cfg.solver.paths)
    try:
        cert = certify_lipschitz(sol, params)
        stat = -cert.margin
    except CertificationFailed:
        stat = float("inf")
    out.append(StatReport.at_most(f"{name}:lipschitz_margin", stat, 0.0, cfg.solver.paths, seed))
    diffs = crn_path_differences(k, r, 0.5, 2.0, 30, 10_000, stream_for(42))
    out.append(StatReport.at_most(f"{name}:crn_differences_negative", max(-diffs.min(), 0.0), 0.0, 10_000, seed))
    return out


def run_checks(cfg, name: str) -> list:
    """All checks that apply to one config, in a fixed order."""
    seed = cfg.effective_seed()

    def stream_for(i):
        return UniformStream(seed, (i,))

    k = config_mod.build_kernel(cfg)
    r = config_mod.build_reward(cfg)
    out = []
    try:
        if k.discrete:
            out += discrete_checks(name, k, r, stream_for, seed)
        out += coupling_checks(name, k, cfg, stream_for, seed)
        if cfg.split is not None:
            out += split_checks(name, k, r, cfg, stream_for, seed)
        if k.name == "reflected_ar1":
            out += contractive_checks(name, k, r, cfg, stream_for, seed)
    except MonoPoissonError as exc:
        out.append(StatReport(f"{name}:error:{type(exc).__name__}", float("inf"), 0.0, False, 0, seed))
    return out
