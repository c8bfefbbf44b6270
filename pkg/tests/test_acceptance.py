"""Acceptance criteria 1-10, one test each.

Every test records a PASS/FAIL line with the measured statistic; the lines
are printed in the terminal summary.
"""

import numpy as np
import pytest
from scipy import stats

from conftest import record_criterion
from monopoisson.cli import run
from monopoisson.contractive import (
    certify_lipschitz,
    contractive_params,
    crn_path_differences,
    estimate_contraction_factor,
    solve_contractive,
)
from monopoisson.coupling import (
    UniformStream,
    check_order_preservation,
    simulate_backward_batch,
    simulate_coupled_batch,
    simulate_forward_batch,
)
from monopoisson.diagnostics import binomial_ci, ks_two_sample
from monopoisson.discrete_solver import (
    bias_expansion_check,
    certify_monotone,
    poisson_residual,
    solve_linear,
    solve_regenerative,
    solve_series,
)
from monopoisson.errors import CertificationFailed, CouplingInvariantError
from monopoisson.kernel import MonotoneKernel
from monopoisson.models import (
    build_birth_death,
    build_discrete_lindley,
    build_reflected_ar1,
    capped_reward,
    identity_reward,
    power_reward,
    step_reward,
)
from monopoisson.split import (
    estimate_g,
    estimate_pi_r,
    mixture_reconstruction_error,
    simulate_coupled_cycles,
    simulate_cycles,
)

MM1_GRID = np.concatenate([np.linspace(0, 1, 21), np.linspace(1.1, 20, 60)])


def _check(label, ok, detail):
    record_criterion(label, bool(ok), detail)
    assert ok, detail


def test_c01_cross_route_agreement(bd, dlindley):
    r = identity_reward()
    worst_dev, worst_res = 0.0, 0.0
    for k in (bd, dlindley):
        sols = [solve_linear(k, r), solve_regenerative(k, r), solve_series(k, r)]
        g = [s.anchored(0) for s in sols]
        worst_dev = max(worst_dev, *(np.max(np.abs(a - b)) for a in g for b in g))
        worst_res = max(worst_res, *(s.residual_sup for s in sols))
    _check("C1 cross-route agreement", worst_dev <= 1e-6 and worst_res <= 1e-8,
           f"sup deviation {worst_dev:.3e} (<= 1e-6), residual {worst_res:.3e} (<= 1e-8)")


def test_c02_monotone_solution(bd, dlindley):
    kernels = [
        bd,
        build_birth_death(0.1, 30),
        dlindley,
        build_discrete_lindley(0.3, 1, -1, 30),
        MonotoneKernel.from_matrix([[0.6, 0.4, 0.0], [0.3, 0.3, 0.4], [0.0, 0.3, 0.7]]),
    ]
    rewards = [identity_reward(), capped_reward(5.0), step_reward(2.0), power_reward(2.0)]
    pairs, worst = 0, np.inf
    for k in kernels:
        assert k.monotone
        for r in rewards:
            for solve in (solve_linear, solve_regenerative):
                try:
                    worst = min(worst, certify_monotone(solve(k, r)).min_increment)
                except CertificationFailed:
                    worst = -np.inf
            pairs += 1
    _check("C2 monotone g", pairs >= 6 and worst >= -1e-10,
           f"{pairs} pairs, min increment {worst:.3e} (>= -1e-10)")


def test_c03_coupling_order(bd, mm1, ar1):
    seeds = range(10_000)
    total = 0
    for k, xs in ((bd, [0, 5, 12]), (mm1, [0.0, 1.0, 4.0]), (ar1, [0.0, 1.0, 4.0])):
        total += check_order_preservation(simulate_coupled_batch(k, xs, 100, seeds)).violations
    _check("C3 coupling order", total == 0, f"{total} violations over 1e4 seeds x 100 steps x 3 models")


def test_c04_backward_forward(ar1, mm1):
    reps = []
    for k in (ar1, mm1):
        fwd = simulate_forward_batch(k, 0.0, 50, range(10_000))
        bwd = simulate_backward_batch(k, 0.0, 50, range(10_000, 20_000))
        reps.append(ks_two_sample(fwd, bwd, 0.01))
    detail = ", ".join(f"D={r.statistic:.4f} crit={r.threshold:.4f}" for r in reps)
    _check("C4 backward/forward KS", all(r.passed for r in reps), detail)


def test_c05_split_identities(mm1, mm1_split):
    lam = mm1_split.lam
    b = simulate_cycles(mm1_split, mm1, "phi", 10_000, UniformStream(501))
    v = b.small_set_visits
    z = abs(v.mean() - 1 / lam) / (v.std(ddof=1) / np.sqrt(v.size))
    tails_ok = True
    for kk in range(1, 6):
        lo, hi = binomial_ci(int((v > kk).sum()), v.size, 0.99)
        tails_ok &= lo <= (1 - lam) ** kk <= hi
    mix = mixture_reconstruction_error(mm1_split, mm1, MM1_GRID[MM1_GRID <= 1], MM1_GRID)
    _check("C5 split-chain identities", z <= 3 and tails_ok and mix <= 1e-10,
           f"visit z={z:.2f} (<= 3), tails k<=5 in 99% CI: {tails_ok}, mixture err {mix:.1e} (<= 1e-10)")


def test_c06_ratio_identity(mm1, mm1_split):
    est, se = estimate_pi_r(mm1_split, mm1, identity_reward(), 10_000, UniformStream(601))
    z = abs(est - 1.0) / se
    _check("C6 ratio identity", z <= 3, f"pi r = {est:.4f} +- {se:.4f}, z={z:.2f} (<= 3)")


def test_c07_modified_coupling(mm1, mm1_split):
    try:
        cb = simulate_coupled_cycles(mm1_split, mm1, 0.5, 3.0, 10_000, UniformStream(701))
    except CouplingInvariantError as exc:
        _check("C7 modified coupling", False, f"order violated: {exc}")
    live = ~np.isnan(cb.upper)
    violations = int((cb.lower > cb.upper)[live].sum())
    ind = simulate_cycles(mm1_split, mm1, 0.5, 10_000, UniformStream(702))
    ks_tau = ks_two_sample(cb.tau_lower, ind.tau, 0.01)
    lower = cb.lower_state_at(np.minimum(5, cb.tau_lower) - 1)
    plain = ind.paths[np.arange(10_000), np.minimum(5, ind.tau) - 1]
    ks_x = ks_two_sample(lower, plain, 0.01)
    sol = estimate_g(mm1_split, mm1, identity_reward(), [0, 1, 2, 4, 8], 10_000, UniformStream(703))
    slack = np.diff(sol.g) + sol.ci_halfwidth[1:] + sol.ci_halfwidth[:-1]
    ok = violations == 0 and ks_tau.passed and ks_x.passed and (slack >= 0).all()
    _check("C7 modified coupling", ok,
           f"violations {violations}, KS tau' D={ks_tau.statistic:.4f}, KS X D={ks_x.statistic:.4f} "
           f"(crit {ks_x.threshold:.4f}), g~ = {np.round(sol.g, 3).tolist()}")


def test_c08_contractive_route(ar1):
    r = identity_reward()
    grid = np.linspace(0.0, 8.0, 17)
    pairs = [(grid[i], grid[i + 1]) for i in range(0, 16, 2)]
    est = estimate_contraction_factor(ar1, pairs, 10_000, UniformStream(801))
    params = contractive_params(ar1, r, pairs, grid, 10_000, UniformStream(801))
    sol = solve_contractive(ar1, r, params, grid, 1e-3, UniformStream(802))
    try:
        cert = certify_lipschitz(sol, params)
        lip_ok, lip = True, f"max slope {cert.max_ratio:.3f} <= L={cert.bound:.3f}"
    except CertificationFailed as exc:
        lip_ok, lip = False, str(exc)
    diffs = np.concatenate([
        crn_path_differences(ar1, r, x, y, 30, 5000, UniformStream(803 + i))
        for i, (x, y) in enumerate([(0.0, 0.5), (0.5, 2.0), (1.0, 6.0)])
    ])
    ok = est.working_rho < 1 and lip_ok and (diffs >= 0).all()
    _check("C8 contractive route", ok,
           f"rho_hat+3SE={est.working_rho:.4f} (< 1), {lip}, min CRN diff {diffs.min():.3e} (>= 0)")


def test_c09_martingale_and_bias(bd, dlindley):
    r = identity_reward()
    drift = 0.0
    for k in (bd, dlindley):
        for solve in (solve_linear, solve_regenerative, solve_series):
            sol = solve(k, r)
            drift = max(drift, float(np.max(np.abs(poisson_residual(k, sol.g, sol.r_c)))))
    sol = solve_linear(bd, r)
    gap = bias_expansion_check(bd, r, sol, 0, 200).gap
    _check("C9 martingale drift and bias", drift <= 1e-8 and gap <= 1e-6,
           f"max drift {drift:.3e} (<= 1e-8), bias gap at x=0, n=200: {gap:.3e} (<= 1e-6)")


def test_c10_reproducible_check(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    code_a = run(["check", "--out", str(a)])
    code_b = run(["check", "--out", str(b)])
    same = a.read_bytes() == b.read_bytes()
    _check("C10 reproducible check reports", same and code_a == 0 and code_b == 0,
           f"exit codes {code_a},{code_b}; byte-identical: {same}; {len(a.read_text().splitlines()) - 1} rows")
