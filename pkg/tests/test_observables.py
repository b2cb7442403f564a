import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mrepp.dynamics import LinearMod1, random_orbit
from mrepp.errors import DomainError, InsufficientSamples
from mrepp.observables import (
    Analytic,
    EmpiricalQuantile,
    Observable,
    evaluate,
    g_inverse,
    scaling_a,
    threshold_from_tau,
)

spec_example = pytest.mark.spec_example

LOG = Observable("log")
PARETO1 = Observable("pareto", alpha=1.0)
BOUNDED2 = Observable("bounded", alpha=2.0, D=1.0)


@spec_example
def test_evaluate_examples():
    assert evaluate(Observable("log", zeta=0.5), 0.5 + math.exp(-2)) == pytest.approx(2.0, rel=1e-12)
    assert evaluate(PARETO1, 0.25) == 4.0
    assert evaluate(BOUNDED2, 0.09) == pytest.approx(0.7, rel=1e-14)


def test_evaluate_at_zeta():
    assert evaluate(LOG, 0.0) == math.inf
    assert evaluate(PARETO1, 0.0) == math.inf
    assert evaluate(BOUNDED2, 0.0) == 1.0


@spec_example
def test_g_inverse_examples():
    assert g_inverse(LOG, 2.0) == pytest.approx(math.exp(-2))
    assert g_inverse(PARETO1, 4.0) == 0.25
    assert g_inverse(BOUNDED2, 0.7) == pytest.approx(0.09, rel=1e-14)
    with pytest.raises(DomainError):
        g_inverse(BOUNDED2, 1.0)


@spec_example
def test_threshold_examples():
    level = threshold_from_tau(PARETO1, 10**6, 2.0, Analytic(1.0))
    assert level.u == pytest.approx(1e6, rel=1e-12)
    # numeric root check: n * 2 g^-1(u) = tau
    assert 10**6 * 2 * g_inverse(PARETO1, level.u) == pytest.approx(2.0, rel=1e-12)
    for n, tau in ((100, 1.0), (10**6, 5.0), (12345, 0.3)):
        assert threshold_from_tau(LOG, n, tau, Analytic(1.0)).u == pytest.approx(math.log(2 * n / tau))
    level = threshold_from_tau(LOG, 100, 5.0, EmpiricalQuantile(np.arange(1, 101)))
    assert np.count_nonzero(np.arange(1, 101) > level.u) == 5
    assert level.tail_prob == 0.05


@spec_example
def test_scaling_examples():
    assert scaling_a(LOG, 7.0) == 1.0
    assert scaling_a(Observable("pareto", alpha=2.0), 4.0) == 0.25
    assert scaling_a(Observable("bounded", alpha=1.0), 0.9) == pytest.approx(10.0)
    with pytest.raises(DomainError):
        scaling_a(Observable("bounded"), 1.0)


def test_threshold_errors():
    with pytest.raises(DomainError):
        threshold_from_tau(LOG, 10, 10.0, Analytic())
    with pytest.raises(InsufficientSamples):
        threshold_from_tau(LOG, 1000, 5.0, EmpiricalQuantile(np.arange(100)))


def test_empirical_tail_subset_matches_full_sample():
    rng = np.random.default_rng(0)
    full = rng.random(10_000)
    tail = np.sort(full)[-60:]
    a = threshold_from_tau(LOG, 1000, 5.0, EmpiricalQuantile(full))
    b = threshold_from_tau(LOG, 1000, 5.0, EmpiricalQuantile(tail, population=full.size))
    assert a == b


def test_level_invariants():
    for obs in (LOG, PARETO1, BOUNDED2):
        level = threshold_from_tau(obs, 10**4, 3.0, Analytic())
        assert level.v_u * level.tail_prob == pytest.approx(1.0, rel=1e-15)
        assert level.a_u == scaling_a(obs, level.u)


@given(st.floats(1e-12, 0.49))
def test_g_inverse_round_trip(r):
    for obs in (LOG, PARETO1, Observable("pareto", alpha=0.3)):
        u = obs.g(r)
        assert g_inverse(obs, u) == pytest.approx(r, rel=1e-10)


@given(st.floats(0.0, 2.999))
def test_g_of_g_inverse_bounded(u):
    obs = Observable("bounded", alpha=0.5, D=3.0)
    assert obs.g(g_inverse(obs, u)) == pytest.approx(u, rel=1e-10, abs=1e-15)


def test_g_inverse_monotone_and_round_trip_grid():
    rng = np.random.default_rng(1)
    for obs, lo, hi in ((LOG, 0.1, 30.0), (PARETO1, 2.1, 1e8), (BOUNDED2, 0.0, 0.999)):
        u = np.sort(rng.uniform(lo, hi, 1000))
        r = g_inverse(obs, u)
        assert np.all(np.diff(r) < 0)
        np.testing.assert_allclose(obs.g(r), u, rtol=1e-10)
    u = np.linspace(0.0, 0.99, 100)
    assert np.all(np.diff([scaling_a(BOUNDED2, v) for v in u]) > 0)


# d bounded away from 0: (zeta - d) % 1 rounds to 1.0 for tiny d, and the
# distance then carries round-off of order 1e-16 / d
@given(st.floats(0.0, 0.999), st.floats(1e-6, 0.49))
def test_radial_symmetry(zeta, d):
    obs = Observable("pareto", zeta=zeta, alpha=0.7)
    a = evaluate(obs, (zeta + d) % 1.0)
    b = evaluate(obs, (zeta - d) % 1.0)
    assert a == pytest.approx(b, rel=1e-9)


def test_exceedance_count_calibration():
    n, tau, m = 10**5, 4.0, 200
    level = threshold_from_tau(LOG, n, tau, Analytic())
    counts = [
        np.count_nonzero(evaluate(LOG, random_orbit(LinearMod1(3), n, seed).states) > level.u)
        for seed in range(m)
    ]
    assert abs(np.mean(counts) - tau) < 3 * math.sqrt(tau / m)


def test_observable_dict_round_trip():
    for obs in (LOG, PARETO1, BOUNDED2, Observable("bounded", zeta=0.3, alpha=0.5, D=2.0)):
        assert Observable.from_dict(obs.to_dict()) == obs
    with pytest.raises(ValueError):
        Observable("weibull")
