import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from generators import THREE_SPECIES_A, THREE_SPECIES_B, three_species_system, random_system
from lvig import LVSystem, invasion_scheme
from lvig.errors import PreconditionFailed
from lvig.stability import (
    BISECTION_STEPS,
    cone_membership,
    convexity_probe,
    distance_to_residual,
    first_divergence,
    perturbation_sweep,
    residual_hyperplanes,
    sample_ball,
    scheme_equal,
)


@pytest.fixture(scope="module")
def sys3():
    return three_species_system()


def _on_plane(A, community, species, b):
    h = next(p for p in residual_hyperplanes(A).hyperplanes
             if p.community == community and p.species == species)
    b = np.array(b, dtype=float)
    b[species] -= h.value(b) / h.normal[species]
    return b


def test_scheme_equal(sys3):
    s = invasion_scheme(sys3)
    assert scheme_equal(s, s)
    assert scheme_equal(s, invasion_scheme(sys3.with_b(1.7 * THREE_SPECIES_B)))
    flipped = invasion_scheme(sys3.with_b(-THREE_SPECIES_B))
    assert not scheme_equal(s, flipped)
    assert first_divergence(s, flipped)["reason"] == "admissibility"


def test_sweep_small_and_large_radius(sys3):
    small = perturbation_sweep(sys3, radius=1e-4, trials=200, seed=0)
    assert small.failures == [] and small.epsilon_star == 1e-4
    large = perturbation_sweep(sys3, radius=10.0, trials=50, seed=0)
    assert large.failures
    assert 0 < large.epsilon_star < 10.0
    payload = json.loads(large.to_json())
    assert payload["failure_count"] == len(large.failures)


def test_sweep_untested(sys3):
    report = perturbation_sweep(sys3, radius=0.5, trials=0)
    assert report.untested and report.epsilon_star == 0.5


def test_sweep_is_deterministic(sys3):
    a = perturbation_sweep(sys3, radius=1.0, trials=30, seed=7)
    b = perturbation_sweep(sys3, radius=1.0, trials=30, seed=7)
    assert a.to_json() == b.to_json()


def test_sweep_bisection_bound(sys3):
    report = perturbation_sweep(sys3, radius=1.0, trials=40, seed=1)
    assert report.failures
    # bisection resolution on [0, radius]
    assert report.epsilon_star <= 1.0 - 1.0 / 2 ** BISECTION_STEPS


def test_sweep_preconditions():
    with pytest.raises(PreconditionFailed):
        perturbation_sweep(LVSystem(THREE_SPECIES_A, _on_plane(THREE_SPECIES_A, (0,), 1, THREE_SPECIES_B)))
    with pytest.raises(PreconditionFailed):
        perturbation_sweep(LVSystem([[-2.0, -3.0], [3.0, 3.0]], [1.0, 1.0]))


def test_cone_membership(sys3):
    assert cone_membership(sys3, THREE_SPECIES_B)
    assert cone_membership(sys3, 3.2 * THREE_SPECIES_B)
    assert not cone_membership(sys3, _on_plane(THREE_SPECIES_A, (0,), 1, THREE_SPECIES_B))


def test_convexity_probe(sys3):
    lambdas = [0, 0.25, 0.5, 0.75, 1]
    assert convexity_probe(sys3, THREE_SPECIES_B, lambdas)
    assert convexity_probe(sys3, 1.5 * THREE_SPECIES_B, lambdas)
    near = THREE_SPECIES_B + np.array([1e-3, -1e-3, 5e-4])
    assert convexity_probe(sys3, near, np.linspace(0, 1, 101))
    with pytest.raises(PreconditionFailed):
        convexity_probe(sys3, -THREE_SPECIES_B, lambdas)


def test_residual_hyperplanes_examples():
    one = residual_hyperplanes([[-1.0]])
    assert len(one) == 1 and np.array_equal(one.hyperplanes[0].normal, [1.0])
    arr = residual_hyperplanes(THREE_SPECIES_A)
    assert len(arr) == 12 and not arr.singular
    h = next(p for p in arr.hyperplanes if p.community == (2,) and p.species == 1)
    assert np.allclose(h.normal, [0, 1, 0.12])
    assert arr.to_csv().splitlines()[0] == "community,species,n1,n2,n3"


def test_residual_hyperplanes_match_rates(sys3):
    cat = sys3.catalog()
    for h in residual_hyperplanes(THREE_SPECIES_A).hyperplanes:
        if h.community in cat:
            assert h.value(THREE_SPECIES_B) == pytest.approx(cat[h.community].rates[h.species], abs=1e-12)
            assert h.side_condition(THREE_SPECIES_B)
        else:
            assert not h.side_condition(THREE_SPECIES_B)


def test_singular_subsets_reported():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    arr = residual_hyperplanes(A)
    assert arr.singular == [(0, 1)]


def test_distance_to_residual(sys3):
    d = distance_to_residual(sys3)
    assert d.restricted > 0 and d.unrestricted <= d.restricted
    # independent evaluation over admissible (I, i) pairs of |r_i(I)| / |normal|
    cat = sys3.catalog()
    expected = min(abs(cat[h.community].rates[h.species]) / np.linalg.norm(h.normal)
                   for h in residual_hyperplanes(THREE_SPECIES_A).hyperplanes if h.community in cat)
    assert d.restricted == pytest.approx(expected, rel=1e-12)
    doubled = distance_to_residual(sys3.with_b(2 * THREE_SPECIES_B))
    assert doubled.restricted == pytest.approx(2 * d.restricted, rel=1e-12)
    assert doubled.unrestricted == pytest.approx(2 * d.unrestricted, rel=1e-12)
    on = distance_to_residual(LVSystem(THREE_SPECIES_A, _on_plane(THREE_SPECIES_A, (0,), 1, THREE_SPECIES_B)))
    assert on.restricted == pytest.approx(0.0, abs=1e-15)


def test_sample_ball_inside():
    rng = np.random.default_rng(0)
    c = np.zeros((2, 3))
    pts = [sample_ball(rng, c, 0.5) for _ in range(500)]
    assert all(p.shape == (2, 3) and np.linalg.norm(p) <= 0.5 for p in pts)
    # uniform in a 6-ball: radius^6 is uniform on [0, 0.5^6]
    r6 = np.array([np.linalg.norm(p) for p in pts]) ** 6 / 0.5 ** 6
    assert abs(r6.mean() - 0.5) < 0.05


def _scheme_rates_close(s1, s2, alpha):
    for c in s1.communities:
        out = [i for i in range(s1.n) if i not in c]
        assert np.allclose(s2.rates[c][out], alpha * s1.rates[c][out], rtol=1e-9, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1), st.sampled_from([0.1, 1.0, 10.0]))
def test_scheme_scaling(n, seed, alpha):
    sys = random_system(np.random.default_rng(seed), n, rate_floor=1e-5)
    s1 = invasion_scheme(sys)
    s2 = invasion_scheme(sys.with_b(alpha * sys.b))
    assert scheme_equal(s1, s2)
    _scheme_rates_close(s1, s2, alpha)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_convexity_of_cones(n, seed):
    rng = np.random.default_rng(seed)
    sys = random_system(rng, n)
    for _ in range(20):
        b2 = sys.b + rng.normal(size=n) * rng.uniform(0.01, 0.5)
        if cone_membership(sys, b2):
            assert convexity_probe(sys, b2, np.linspace(0, 1, 11))
            break


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_sign_flip_needs_distance(n, seed):
    sys = random_system(np.random.default_rng(seed), n)
    dist = distance_to_residual(sys).unrestricted
    report = perturbation_sweep(sys, radius=2 * dist, trials=20, seed=seed, perturb_matrix=False)
    for f in report.failures:
        assert np.linalg.norm(np.array(f["b"]) - sys.b) >= dist


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_admissible_set_preserved_within_passing_radius(n, seed):
    sys = random_system(np.random.default_rng(seed), n)
    radius = 0.5 * distance_to_residual(sys).unrestricted
    report = perturbation_sweep(sys, radius=radius, trials=20, seed=seed, perturb_matrix=False)
    assert not report.failures
    rng = np.random.default_rng(seed)
    for _ in range(5):
        b = sample_ball(rng, sys.b, radius)
        assert sys.with_b(b).catalog().communities == sys.catalog().communities
