import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import GRID
from leoscale.link_dynamics import (
    INFINITE,
    LinkDynamics,
    MaintenancePolicy,
    Region,
    RegionError,
    RegionThresholds,
    belief,
    binary_entropy,
    classify_region,
    conditional_entropy,
    consensus_bound_from_rates,
    consensus_lower_bound,
    k_step_transition,
    region_consensus_approx,
    steady_state,
)
from oracles import joint_entropy_bruteforce, one_step_power

probs = st.floats(min_value=1e-6, max_value=1 - 1e-6)


def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    # mpmath at 40 digits: 0.72192809488736234787...
    assert binary_entropy(0.8) == pytest.approx(0.7219280948873623, abs=1e-15)


@pytest.mark.parametrize("x", [-0.1, 1.0000001, math.nan])
def test_binary_entropy_domain(x):
    with pytest.raises(ValueError):
        binary_entropy(x)


@pytest.mark.parametrize("a,b", [(0.0, 0.3), (0.2, 1.0), (-0.1, 0.5), (0.5, math.nan)])
def test_link_dynamics_rejects_boundaries(a, b):
    with pytest.raises(ValueError):
        LinkDynamics(a, b)


def test_steady_state():
    assert steady_state(LinkDynamics(0.3, 0.3)) == (0.5, 0.5)
    pi0, pi1 = steady_state(LinkDynamics(0.2, 0.3))
    assert pi0 == pytest.approx(0.4, abs=1e-15) and pi1 == pytest.approx(0.6, abs=1e-15)
    # mpmath: 0.99998750015624804690
    assert steady_state(LinkDynamics(1e-5, 0.8))[1] == pytest.approx(0.999987500156248, abs=1e-14)


def test_k_step_examples(dyn23):
    p1 = k_step_transition(dyn23, 1)
    assert p1[0, 1] == pytest.approx(0.3) and p1[1, 0] == pytest.approx(0.2)
    assert k_step_transition(dyn23, 2)[0, 0] == pytest.approx(0.55, abs=1e-15)
    p60 = k_step_transition(dyn23, 60)
    np.testing.assert_allclose(p60, [[0.4, 0.6], [0.4, 0.6]], atol=1e-10)
    with pytest.raises(ValueError):
        k_step_transition(dyn23, 0)


@settings(max_examples=200, deadline=None)
@given(probs, probs, st.integers(1, 64))
def test_k_step_matches_matrix_power(a, b, k):
    dyn = LinkDynamics(a, b)
    P = k_step_transition(dyn, k)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(P, one_step_power(a, b, k), atol=1e-10)


def test_belief(dyn23):
    for a, b in [(0.2, 0.3), (0.01, 0.9)]:
        d = LinkDynamics(a, b)
        assert belief(d, 1, 1) == pytest.approx(1 - a, abs=1e-15)
    assert belief(dyn23, 0, 2) == pytest.approx(0.45, abs=1e-15)
    assert belief(dyn23, 0, 60) == pytest.approx(0.6, abs=1e-10)
    with pytest.raises(ValueError):
        belief(dyn23, 2, 1)


@settings(max_examples=100, deadline=None)
@given(probs, probs, st.integers(1, 40), st.sampled_from([0, 1]))
def test_belief_is_transition_entry(a, b, k, s):
    d = LinkDynamics(a, b)
    assert belief(d, s, k) == k_step_transition(d, k)[s, 1]


def test_consensus_examples(dyn23):
    assert consensus_lower_bound(dyn23, 1) == pytest.approx(0.9709505944546686, abs=1e-14)
    d = LinkDynamics(0.3, 0.7)
    for k in (1, 2, 7, 100, INFINITE):
        assert consensus_lower_bound(d, k) == pytest.approx(0.8812908992306926, abs=1e-12)
    # joint entropy of the four length-2 paths / 2, by mpmath: 0.87831190553968154750
    assert consensus_lower_bound(dyn23, 2) == pytest.approx(0.8783119055396815, abs=1e-12)


@pytest.mark.parametrize("a", GRID)
@pytest.mark.parametrize("b", GRID)
def test_consensus_equals_bruteforce_joint_entropy(a, b):
    d = LinkDynamics(a, b)
    for k in range(1, 13):
        assert k * consensus_lower_bound(d, k) == pytest.approx(
            joint_entropy_bruteforce(a, b, k), abs=1e-10
        )


@settings(max_examples=200, deadline=None)
@given(probs, probs)
def test_consensus_monotone_in_k_and_floor(a, b):
    d = LinkDynamics(a, b)
    floor = consensus_lower_bound(d, INFINITE)
    assert floor > 0
    prev = math.inf
    for k in (1, 2, 3, 5, 10, 50, 1000):
        hk = consensus_lower_bound(d, k)
        assert hk <= prev + 1e-15
        assert hk >= floor - 1e-15
        prev = hk


@settings(max_examples=200, deadline=None)
@given(probs)
def test_envelope_equality_iff_sum_one(a):
    d = LinkDynamics(a, 1 - a)
    assert binary_entropy(d.pi1) == pytest.approx(conditional_entropy(d), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(probs, probs)
def test_envelope_strict_off_diagonal(a, b):
    if abs(a + b - 1) < 1e-3:
        return
    d = LinkDynamics(a, b)
    assert binary_entropy(d.pi1) > conditional_entropy(d)


def test_maintenance_policy():
    assert MaintenancePolicy.parse("inf").is_infinite
    assert MaintenancePolicy.parse(math.inf).is_infinite
    assert MaintenancePolicy.parse("7").period == 7
    with pytest.raises(ValueError):
        MaintenancePolicy(0)
    with pytest.raises(TypeError):
        MaintenancePolicy(2.5)
    with pytest.raises(ValueError):
        MaintenancePolicy.parse(2.5)


def test_consensus_from_rates_boundaries():
    assert consensus_bound_from_rates(0.0, 0.8, 10) == 0.0
    assert consensus_bound_from_rates(0.2, 0.3, 4) == pytest.approx(
        consensus_lower_bound(LinkDynamics(0.2, 0.3), 4)
    )
    with pytest.raises(ValueError):
        consensus_bound_from_rates(0.0, 0.0, 1)


def test_thresholds_validated():
    with pytest.raises(ValueError):
        RegionThresholds(1e-4, 1e-6, 0.7, 0.9)


@pytest.mark.parametrize(
    "a,b,region",
    [
        (5e-5, 0.5, Region.II),
        (0.8, 0.8, Region.III),
        (0.5, 0.5, Region.V),
        (5e-5, 5e-5, Region.I),
        (0.8, 5e-5, Region.IV),
        (1e-7, 0.5, Region.V),  # outside the universe
        (0.95, 0.95, Region.V),
    ],
)
def test_classify_region(a, b, region):
    assert classify_region(LinkDynamics(a, b)) is region


def test_classify_region_boundaries():
    thr = RegionThresholds()
    # alpha = beta = eps2 belongs to I (closed bounds), beta just above to II
    assert classify_region(LinkDynamics(1e-4, 1e-4), thr) is Region.I
    assert classify_region(LinkDynamics(1e-4, 1.0001e-4), thr) is Region.II
    assert classify_region(LinkDynamics(0.05, 0.05), RegionThresholds(0.01, 0.1, 0.7, 0.9)) is Region.I


def test_region_consensus_approx():
    d = LinkDynamics(1e-4, 0.5)
    assert region_consensus_approx(Region.I, d, 10) == pytest.approx(0.1)
    assert region_consensus_approx("II", d, 10) == pytest.approx(0.9 * binary_entropy(1e-4))
    assert region_consensus_approx(Region.III, d, 1) == 1.0
    assert region_consensus_approx(Region.IV, LinkDynamics(0.5, 3e-5), 5) == pytest.approx(
        0.8 * binary_entropy(3e-5)
    )
    with pytest.raises(RegionError):
        region_consensus_approx(Region.V, d, 10)


def test_region_approx_tracks_exact_bound():
    # Region II: the approximation drops only the small prior and beta terms.
    d = LinkDynamics(1e-5, 0.8)
    exact = consensus_lower_bound(d, 10)
    approx = region_consensus_approx(Region.II, d, 10)
    assert approx == pytest.approx(exact, rel=0.2)
