import numpy as np
import pytest

from monopoisson.coupling import (
    CoupledPaths,
    RandomMap,
    UniformStream,
    backward_from_uniforms,
    backward_iterates,
    check_order_preservation,
    simulate_backward,
    simulate_backward_batch,
    simulate_coupled,
    simulate_coupled_batch,
    simulate_forward_batch,
)
from monopoisson.diagnostics import ks_one_sample, ks_two_sample
from monopoisson.errors import InvalidArgument


def test_stream_is_deterministic_and_open_interval():
    a = UniformStream(9).uniforms(10_000)
    b = UniformStream(9).uniforms(10_000)
    assert np.array_equal(a, b)
    assert (a > 0).all() and (a < 1).all()
    assert not np.array_equal(UniformStream(9).child(1).uniforms(5), UniformStream(9).child(2).uniforms(5))


def test_stream_uniformity_smoke():
    u = UniformStream(2024).uniforms(100_000)
    assert ks_one_sample(u, "uniform").passed
    assert abs(u.mean() - 0.5) < 4 * np.sqrt(1 / 12 / u.size)


def test_zero_horizon(bd):
    p = simulate_coupled(bd, [4], 0, 1)
    assert p.paths.tolist() == [[4]]


def test_equal_starts_identical(mm1):
    p = simulate_coupled(mm1, [3.0, 3.0], 50, 5)
    assert np.array_equal(p.paths[0], p.paths[1])


def test_unsorted_raises(bd):
    with pytest.raises(InvalidArgument):
        simulate_coupled(bd, [5, 0], 10, 1)


def test_order_birth_death_many_seeds(bd):
    paths = simulate_coupled_batch(bd, [0, 5], 100, range(10_000))
    assert check_order_preservation(paths).violations == 0


def test_batch_matches_single(bd):
    batch = simulate_coupled_batch(bd, [0, 5, 9], 30, [11, 12])
    assert np.array_equal(batch[1], simulate_coupled(bd, [0, 5, 9], 30, 12).paths)


def test_adding_paths_keeps_existing(mm1):
    a = simulate_coupled(mm1, [1.0], 40, 3).paths[0]
    b = simulate_coupled(mm1, [0.0, 1.0, 2.0], 40, 3).paths[1]
    assert np.array_equal(a, b)


def test_determinism(ar1):
    a = simulate_coupled(ar1, [0.0, 2.0], 60, 8).paths
    b = simulate_coupled(ar1, [0.0, 2.0], 60, 8).paths
    assert np.array_equal(a, b)


def test_backward_edge_cases(bd):
    assert simulate_backward(bd, 7, 0, 1) == 7
    assert simulate_backward(bd, 7, 1, 99) == simulate_coupled(bd, [7], 1, 99).paths[0, 1]


def test_backward_forward_ks_ar1(ar1):
    seeds = range(10_000)
    fwd = simulate_forward_batch(ar1, 0.0, 50, seeds)
    bwd = simulate_backward_batch(ar1, 0.0, 50, range(10_000, 20_000))
    assert ks_two_sample(fwd, bwd, 0.01).passed


def test_backward_iterates_consistent(ar1):
    U = UniformStream(1).uniforms((20, 6))
    it = backward_iterates(ar1, [0.5, 2.0], U)
    assert np.allclose(it[:, 0, 6], backward_from_uniforms(ar1, 0.5, U))
    assert np.allclose(it[:, 1, 3], backward_from_uniforms(ar1, 2.0, U[:, :3]))


def test_order_report_examples(flip):
    single = CoupledPaths(np.array([1]), 5, np.arange(6)[None, :], None)
    assert check_order_preservation(single).passed
    rep = check_order_preservation(simulate_coupled(flip, [0, 1], 3, 0))
    assert rep.violations > 0
    assert rep.first is not None


def test_random_map_monotone(mm1):
    kappa = RandomMap(mm1, 0.37)
    xs = np.linspace(0, 10, 101)
    assert (np.diff(kappa(xs)) >= 0).all()


@pytest.mark.parametrize("x", [0.0, 0.5, 1.0, 3.0, 8.0])
def test_coupling_marginal_matches_cdf(mm1, x):
    u = UniformStream(int(x * 10) + 1).uniforms(100_000)
    draws = mm1.inverse_cdf(np.full(u.size, x), u)
    atom = float(mm1.cdf(x, 0.0))
    pos = draws[draws > 0]
    assert ks_one_sample(pos, lambda y: (mm1.cdf(x, y) - atom) / (1 - atom)).passed
