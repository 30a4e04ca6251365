import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leoscale.link_dynamics import (
    LinkDynamics,
    Region,
    RegionError,
    binary_entropy,
    consensus_lower_bound,
)
from leoscale.scalability import (
    NoOptimumError,
    OverheadModel,
    Scenario,
    delta_tau,
    log_grid,
    max_scalability,
    n_star_approx,
    optimality_residual,
    optimum_report,
    region_tau_bound,
    scalability_point,
    solve_optimal_n,
    tau_envelope,
    tau_upper,
)
from oracles import golden_section_max

SLOW_FAILURE = LinkDynamics(1e-6, 0.5)


def test_tau_upper_examples():
    assert tau_upper(100, 0.0, 0.0) == 160.0
    hk = consensus_lower_bound(LinkDynamics(1e-5, 0.8), 10)
    # mpmath reference: 148.5468...
    assert tau_upper(100, 1e-12, hk) == pytest.approx(148.5468, abs=1e-3)


@pytest.mark.parametrize("args", [(100, -1e-9, 0.0), (100, 0.0, -1e-3), (0.5, 0.0, 0.0)])
def test_tau_upper_domain(args):
    with pytest.raises(ValueError):
        tau_upper(*args)


def test_scalability_point_components():
    p = scalability_point(400, 1e-6, 1e-3)
    assert p.capacity == 160.0
    assert p.contention == pytest.approx(8e-3)
    assert p.consensus == pytest.approx(1.6)
    assert p.tau == pytest.approx(320 / (1 + 8e-3 + 1.6))


def test_overhead_model_validation():
    assert OverheadModel(1e-10).link_rate == 1.0
    with pytest.raises(ValueError):
        OverheadModel(math.inf)


def test_envelope_equal_on_memoryless_line():
    d = LinkDynamics(0.3, 0.7)
    t1, tinf = tau_envelope(1e4, 1e-10, d)
    assert t1 == tinf
    assert delta_tau(500, 1e-10, d) == 0.0


def test_envelope_ordering_over_k():
    n, sigma = 1e4, 1e-10
    t1, tinf = tau_envelope(n, sigma, SLOW_FAILURE)
    assert t1 < tinf
    for k in (1, 2, 5, 10, 100):
        tk = tau_upper(n, sigma, consensus_lower_bound(SLOW_FAILURE, k))
        assert t1 <= tk <= tinf
    assert tau_upper(n, sigma, consensus_lower_bound(SLOW_FAILURE, 1)) == t1


def test_delta_tau_vanishes():
    grid = log_grid(1, 1e12, 601)
    vals = [delta_tau(n, 1e-10, SLOW_FAILURE) for n in grid]
    i_peak = int(np.argmax(vals))
    peak = vals[i_peak]
    # the gain rises while consensus overhead builds up, then decays
    assert 1e3 < grid[i_peak] < 1e6
    assert np.all(np.diff(vals[i_peak:]) < 0)
    assert delta_tau(1e8, 1e-10, SLOW_FAILURE) < 0.05 * peak
    assert delta_tau(1e12, 1e-10, SLOW_FAILURE) < 1e-3 * peak


@settings(max_examples=100, deadline=None)
@given(
    st.floats(1e-6, 1 - 1e-6),
    st.floats(1e-6, 1 - 1e-6),
    st.floats(1, 1e9),
    st.floats(0, 1e-6),
)
def test_delta_tau_nonnegative(a, b, n, sigma):
    assert delta_tau(n, sigma, LinkDynamics(a, b)) >= -1e-12


def test_region_bound_examples():
    d = LinkDynamics(5e-5, 5e-5)
    for n in (10, 1e3, 1e6):
        assert region_tau_bound(Region.I, n, 0.0, d, 1) == pytest.approx(16 * math.sqrt(n) / (1 + 4 * n))
    d2 = LinkDynamics(1e-5, 0.8)
    n, k = 1e4, 10
    expected = 16 * k * math.sqrt(n) / (k * (1 + 1e-11 * n**1.5) + 4 * n * (k - 1) * binary_entropy(1e-5))
    assert region_tau_bound("II", n, 1e-11, d2, k) == pytest.approx(expected, rel=1e-14)
    with pytest.raises(RegionError):
        region_tau_bound(Region.V, n, 1e-11, d2, k)
    with pytest.raises(ValueError):
        region_tau_bound(Region.I, n, 1e-11, d2, 0)


def test_region_bound_large_k_tracks_one_over_k():
    d = LinkDynamics(5e-5, 5e-5)
    n, sigma = 1e4, 1e-11
    for k in (10, 100, 1000):
        ref = tau_upper(n, sigma, 1.0 / k)
        assert region_tau_bound(Region.I, n, sigma, d, k) == pytest.approx(ref, rel=1e-12)


def test_region_ordering():
    k, sigma = 10, 1e-11
    reps = {
        Region.I: LinkDynamics(5e-5, 5e-5),
        Region.II: LinkDynamics(1e-5, 0.8),
        Region.III: LinkDynamics(0.8, 0.8),
        Region.IV: LinkDynamics(0.8, 5e-5),
    }
    for n in log_grid(1e2, 1e8, 61):
        t = {r: region_tau_bound(r, n, sigma, d, k) for r, d in reps.items()}
        assert t[Region.II] > t[Region.IV] > t[Region.I]
        assert t[Region.I] == t[Region.III]


def test_solve_optimal_n_table_values():
    assert solve_optimal_n(0.0, 1e-6) == 2.5e5
    assert solve_optimal_n(0.0, 1e-7) == 2.5e6
    assert 6.25e3 <= solve_optimal_n(1e-6, 0.0) <= 6.35e3
    assert 2.90e4 <= solve_optimal_n(1e-7, 0.0) <= 2.95e4
    with pytest.raises(NoOptimumError):
        solve_optimal_n(0.0, 0.0)
    with pytest.raises(ValueError):
        solve_optimal_n(-1e-6, 1e-6)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-14, 1e-2), st.floats(1e-12, 1e-1))
def test_root_residual(sigma, hk):
    n = solve_optimal_n(sigma, hk)
    assert abs(optimality_residual(n, sigma, hk)) < 1e-10
    lo, hi = 0.99 * n, 1.01 * n
    if lo >= 1:
        assert tau_upper(lo, sigma, hk) < tau_upper(n, sigma, hk)
    assert tau_upper(hi, sigma, hk) < tau_upper(n, sigma, hk)


def test_n_star_approx():
    assert n_star_approx(Scenario.CONTENTION_FREE, hk=1e-6) == pytest.approx(1e6)
    assert n_star_approx("consensus_free", sigma=1e-6) == pytest.approx(5e5 ** (2 / 3))
    assert n_star_approx("consensus_free", sigma=1e-7) == pytest.approx(2.92e4, rel=2e-3)
    with pytest.raises(ValueError):
        n_star_approx("contention_free", hk=0.0)
    with pytest.raises(ValueError):
        n_star_approx("consensus_free", sigma=0.0)


def test_max_scalability():
    assert max_scalability(0.0, 1e-6) == pytest.approx(4000.0, rel=1e-12)
    rep = optimum_report(1e-6, 0.0)
    # direct evaluation 16 sqrt(n*) / 1.5 against the 8 sqrt(n*) annotation
    assert rep.tau_max == pytest.approx(16 * math.sqrt(rep.n_star) / 1.5, rel=1e-10)
    assert rep.tau_max == pytest.approx(846.6, abs=0.1)
    assert rep.tau_max_8sqrt == pytest.approx(635.0, abs=0.1)
    assert rep.n_star_contention_free is None


@pytest.mark.parametrize("sigma,hk", [(1e-10, 1e-4), (1e-8, 1e-6), (1e-12, 1.93e-4)])
def test_unimodality_and_golden_section(sigma, hk):
    n_star = solve_optimal_n(sigma, hk)
    grid = np.asarray(log_grid(n_star / 1e3, n_star * 1e3, 601))
    tau = np.array([tau_upper(n, sigma, hk) for n in grid])
    left, right = grid < n_star, grid > n_star
    assert np.all(np.diff(tau[left]) > 0)
    assert np.all(np.diff(tau[right]) < 0)
    g = golden_section_max(lambda x: tau_upper(math.exp(x), sigma, hk),
                           math.log(n_star / 100), math.log(n_star * 100), tol=1e-12)
    assert math.exp(g) == pytest.approx(n_star, rel=1e-3)


def test_asymptotics():
    sigma = 1e-6
    assert tau_upper(1e16, sigma, 1e-3) * 1e16 == pytest.approx(16 / sigma, rel=1e-3)
    hk = 1e-4
    assert tau_upper(1e14, 0.0, hk) * 1e7 == pytest.approx(4 / hk, rel=1e-6)


def test_sensitivity_ratios():
    assert solve_optimal_n(0.0, 1e-7) / solve_optimal_n(0.0, 1e-6) == pytest.approx(10.0)
    ratio = solve_optimal_n(1e-7, 0.0) / solve_optimal_n(1e-6, 0.0)
    assert ratio == pytest.approx(10 ** (2 / 3), rel=1e-10)


def test_log_grid():
    g = log_grid(1e2, 1e8, 7)
    np.testing.assert_allclose(g, [10.0 ** e for e in range(2, 9)], rtol=1e-12)
    assert log_grid(5, 5, 3) == [5.0]
    with pytest.raises(ValueError):
        log_grid(10, 1, 5)
