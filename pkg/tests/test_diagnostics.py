import io

import numpy as np
import pytest

from monopoisson.coupling import UniformStream, coupled_from_uniforms
from monopoisson.diagnostics import (
    StatReport,
    binomial_ci,
    ks_two_sample,
    martingale_mc_check,
    tav_constant,
    write_report,
)
from monopoisson.discrete_solver import solve_linear
from monopoisson.kernel import MonotoneKernel, stationary_distribution
from monopoisson.models import constant_reward, identity_reward


def two_state(p, q):
    return MonotoneKernel.from_matrix([[1 - p, p], [q, 1 - q]], monotone=False)


def test_ks_identical():
    a = UniformStream(1).uniforms(1000)
    rep = ks_two_sample(a, a.copy())
    assert rep.statistic == 0 and rep.passed


def test_ks_null_rate():
    passes = 0
    for s in range(200):
        st = UniformStream(s)
        passes += ks_two_sample(st.child(0).uniforms(100_000), st.child(1).uniforms(100_000), 0.01).passed
    assert passes / 200 >= 0.99


def test_ks_shift_fails():
    st = UniformStream(3)
    assert not ks_two_sample(st.uniforms(100_000), st.uniforms(100_000) + 0.2).passed


def test_ks_empty():
    with pytest.raises(ValueError):
        ks_two_sample([], [1.0])


def test_martingale_zero_increments():
    assert martingale_mc_check(np.zeros((1000, 10))).passed


def test_martingale_corrupted_state(bd):
    sol = solve_linear(bd, identity_reward())
    paths = coupled_from_uniforms(bd, [0], UniformStream(4).uniforms((2000, 50)))[:, 0, :]
    inc = sol.g[paths[:, 1:]] - sol.g[paths[:, :-1]] + sol.r_c[paths[:, :-1]]
    assert martingale_mc_check(inc, paths[:, :-1]).passed
    bad = sol.g.copy()
    bad[0] += 0.1  # the most visited state, so the shifted drift is resolvable
    inc = bad[paths[:, 1:]] - bad[paths[:, :-1]] + sol.r_c[paths[:, :-1]]
    rep = martingale_mc_check(inc, paths[:, :-1])
    assert not rep.passed


def test_tav_constant_reward(bd):
    sol = solve_linear(bd, constant_reward(4.0))
    assert tav_constant(bd, sol) == 0.0


def test_tav_iid_kernel():
    k = MonotoneKernel.from_matrix([[0.7, 0.3], [0.7, 0.3]])
    sol = solve_linear(k, identity_reward())
    assert tav_constant(k, sol) == pytest.approx(0.7 * 0.3, abs=1e-12)


@pytest.mark.parametrize("p,q", [(0.5, 0.5), (0.2, 0.4)])
def test_tav_two_state_closed_form(p, q):
    k = two_state(p, q)
    sol = solve_linear(k, identity_reward())
    assert tav_constant(k, sol) == pytest.approx(p * q * (2 - p - q) / (p + q) ** 3, rel=1e-10)


def test_tav_two_state_monte_carlo():
    k = two_state(0.5, 0.5)
    sol = solve_linear(k, identity_reward())
    n = 400
    paths = coupled_from_uniforms(k, [0], UniformStream(5).uniforms((10_000, n)))[:, 0, 1:]
    scaled = (paths.sum(axis=1) - n * sol.pi_r) / np.sqrt(n)
    assert abs(scaled.var(ddof=1) / tav_constant(k, sol) - 1) <= 0.10


def test_tav_shift_invariant(bd):
    sol = solve_linear(bd, identity_reward())
    base = tav_constant(bd, sol)
    sol.g = sol.g + 17.0
    assert abs(tav_constant(bd, sol) - base) <= 1e-10


def test_stat_report_rule():
    r = StatReport.at_most("x", 1.0, 1.0, 10, 3)
    assert r.passed
    assert not StatReport.at_most("x", np.nextafter(1.0, 2.0), 1.0).passed


def test_binomial_ci_covers():
    lo, hi = binomial_ci(30, 100, 0.99)
    assert lo < 0.3 < hi


def test_write_report_round_trip():
    rows = [StatReport.at_most("a", 0.1, 0.2, 5, 7), StatReport.at_most("b", 1 / 3, 0.2, 5, None)]
    buf = io.StringIO()
    text = write_report(rows, buf)
    assert buf.getvalue() == text
    lines = text.splitlines()
    assert lines[0] == "name,statistic,threshold,pass,n,seed"
    assert lines[1] == "a,0.10000000000000001,0.20000000000000001,1,5,7"
    assert float(lines[2].split(",")[1]) == 1 / 3
    assert lines[2].endswith(",0,5,")


def test_stationary_used_by_tav_is_valid(bd):
    pi = stationary_distribution(bd)
    assert pi.min() >= 0 and abs(pi.sum() - 1) < 1e-12
