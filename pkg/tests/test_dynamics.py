import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mrepp.dynamics import (
    LSV,
    Interval,
    LinearMod1,
    Orbit,
    PiecewiseLinear,
    circle_dist,
    find_period,
    first_return,
    format_map,
    hitting_time,
    induce,
    induce_orbit,
    iterate,
    map_apply,
    map_derivative,
    parse_map,
    random_induced,
    random_orbit,
    verify_periodic,
)
from mrepp.errors import BreakpointError, NonReturningError

spec_example = pytest.mark.spec_example


@spec_example
def test_map_apply_examples():
    assert map_apply(LinearMod1(2), 0.6) == pytest.approx(0.2, abs=1e-15)
    assert map_apply(LSV(0.5), 0.75) == 0.5
    # high-precision oracle for 0.25 (1 + 2^0.5 0.25^0.5)
    mpmath.mp.dps = 30
    x = mpmath.mpf("0.25")
    expected = float(x * (1 + mpmath.sqrt(2) * mpmath.sqrt(x)))
    assert map_apply(LSV(0.5), 0.25) == pytest.approx(expected, rel=1e-15)
    assert expected == pytest.approx(0.4267766953, abs=1e-10)


@spec_example
def test_map_derivative_examples():
    assert map_derivative(LinearMod1(3), 0.1) == 3
    assert map_derivative(LSV(0.5), 0.75) == 2
    h = 1e-6
    fd = (map_apply(LSV(0.5), 0.25 + h) - map_apply(LSV(0.5), 0.25 - h)) / (2 * h)
    d = map_derivative(LSV(0.5), 0.25)
    assert d == pytest.approx(fd, rel=1e-8)
    assert d == pytest.approx(2.06066, abs=1e-5)


def test_map_derivative_breakpoints():
    with pytest.raises(BreakpointError):
        map_derivative(LSV(0.3), 0.5)
    f = PiecewiseLinear((0.0, 0.4, 1.0), (2.5, -5 / 3))
    with pytest.raises(BreakpointError):
        map_derivative(f, 0.4)
    assert map_derivative(f, 0.2) == 2.5
    assert map_derivative(f, 0.7) == pytest.approx(-5 / 3)


@spec_example
def test_iterate_examples():
    np.testing.assert_allclose(iterate(LinearMod1(2), 1 / 3, 4).states, [1 / 3, 2 / 3, 1 / 3, 2 / 3], atol=1e-15)
    np.testing.assert_array_equal(iterate(LinearMod1(2), 0.0, 3).states, [0.0, 0.0, 0.0])
    np.testing.assert_allclose(iterate(LinearMod1(2), 0.6, 3, burn_in=1).states, [0.2, 0.4, 0.8], atol=1e-15)


@spec_example
def test_verify_periodic_examples():
    assert verify_periodic(LinearMod1(2), 0.0, 1) == (True, 2.0)
    check = verify_periodic(LinearMod1(2), 1 / 3, 2)
    assert check.is_periodic and check.deriv_product == 4.0
    assert not verify_periodic(LinearMod1(2), 0.1, 1).is_periodic


def test_verify_periodic_rejects_non_prime_period():
    # 0 is fixed, so it does not have prime period 2
    assert not verify_periodic(LinearMod1(2), 0.0, 2).is_periodic
    assert find_period(LinearMod1(2), 1 / 3) == 2
    assert find_period(LinearMod1(2), math.sqrt(0.5)) is None


@pytest.mark.parametrize("m", [2, 3, 4, 5, 7, 10])
def test_fixed_point_derivative_is_m(m):
    assert verify_periodic(LinearMod1(m), 0.0, 1) == (True, float(m))


@spec_example
def test_hitting_time_examples():
    orbit = iterate(LinearMod1(2), 0.6, 6)
    assert hitting_time(orbit, Interval(0.75, 1.0)) == 3
    assert hitting_time(iterate(LinearMod1(2), 0.0, 50), Interval(0.5, 1.0)) is None
    assert hitting_time(np.array([0.6, 0.7, 0.1]), Interval(0.65, 0.75)) == 1


@spec_example
def test_induce_examples():
    s = induce(LinearMod1(2), Interval(0.5, 1.0), 0.6, 2)
    assert s.return_times[0] == 3
    assert s.induced_states[1] == pytest.approx(0.8, abs=1e-15)
    assert first_return(LinearMod1(2), Interval(0.5, 1.0), 0.75) == (0.5, 1)
    y, r = first_return(LinearMod1(2), Interval(0.5, 1.0), 0.6)
    assert r == 3 and y == pytest.approx(0.8, abs=1e-15)


@spec_example
def test_lsv_induced_map_invariants():
    # first return to [1/2, 1] of the LSV map: every induced state lies in B and
    # matches the underlying forward orbit at its cumulative time
    f, B = LSV(0.4), Interval(0.5, 1.0)
    s = induce(f, B, 0.7123, 500)
    assert np.all(B.contains(s.induced_states))
    assert np.all(s.return_times >= 1)
    orbit = iterate(f, 0.7123, int(s.cumulative_times[-1]) + 1)
    np.testing.assert_array_equal(orbit.states[s.cumulative_times], s.induced_states)


def test_induce_non_returning():
    # 1/2 maps onto the fixed point 0 and never comes back
    with pytest.raises(NonReturningError):
        induce(LinearMod1(2), Interval(0.5, 1.0), 0.5, 3, max_iter=100)


@given(st.floats(0.0, 0.999), st.integers(1, 200), st.integers(0, 20))
def test_iterate_deterministic_and_consistent(x0, n, burn):
    f = LSV(0.3)
    a = iterate(f, x0, n, burn)
    b = iterate(f, x0, n, burn)
    np.testing.assert_array_equal(a.states, b.states)
    assert np.all((a.states >= 0) & (a.states < 1))
    # each state is the map of the previous one
    np.testing.assert_array_equal([map_apply(f, x) for x in a.states[:-1]], a.states[1:])


@given(st.integers(0, 2**32), st.sampled_from([2, 3, 5]))
def test_random_orbit_follows_map(seed, m):
    o = random_orbit(LinearMod1(m), 200, seed, burn_in=50)
    assert np.all((o.states >= 0) & (o.states < 1))
    np.testing.assert_allclose((m * o.states[:-1]) % 1.0, o.states[1:], atol=1e-12)
    np.testing.assert_array_equal(o.states, random_orbit(LinearMod1(m), 200, seed, burn_in=50).states)


def test_random_doubling_orbit_stays_uniform():
    # forward doubling would collapse to 0 within ~60 steps; the digit orbit must not
    x = random_orbit(LinearMod1(2), 100_000, 7).states
    assert np.count_nonzero(x == 0.0) == 0
    counts = np.histogram(x, bins=10, range=(0, 1))[0]
    assert np.all(np.abs(counts - 10_000) < 5 * 100)


@given(st.integers(0, 2**32), st.integers(0, 50))
def test_induction_identity(seed, j0):
    f, B = LinearMod1(3), Interval(0.2, 0.55)
    orbit = random_orbit(f, 3000, seed, burn_in=10)
    s = induce_orbit(orbit, B)
    np.testing.assert_array_equal(np.diff(s.cumulative_times), s.return_times[:-1])
    np.testing.assert_array_equal(orbit.states[s.start_index + s.cumulative_times], s.induced_states)
    assert np.all(np.diff(s.cumulative_times) > 0)
    # and matches the direct first-return iteration from the first visit
    d = induce(f, B, float(s.induced_states[0]), 5)
    np.testing.assert_array_equal(d.return_times, s.return_times[:5])


@given(st.integers(0, 2**32), st.integers(1, 5))
def test_hitting_time_shift(seed, j):
    # r_U(f^j x) = r_U(x) - j while the orbit has not yet entered U
    orbit = random_orbit(LinearMod1(2), 5000, seed)
    U = Interval(0.4, 0.45)
    r0 = hitting_time(orbit, U, 0)
    if r0 is None or r0 <= j:
        return
    assert hitting_time(orbit, U, j) == r0 - j


def test_random_induced_length_and_membership():
    B = Interval(0.5, 1.0)
    s = random_induced(LSV(0.4), B, 2000, seed=3)
    assert len(s) == 2000
    assert np.all(B.contains(s.induced_states))


def test_orbit_is_read_only():
    o = random_orbit(LinearMod1(2), 10, 1)
    assert isinstance(o, Orbit)
    with pytest.raises(ValueError):
        o.states[0] = 0.5


def test_circle_dist():
    assert circle_dist(0.99, 0.01) == pytest.approx(0.02)
    assert circle_dist(0.3, 0.3) == 0.0
    np.testing.assert_allclose(circle_dist(np.array([0.1, 0.9]), 0.0), [0.1, 0.1])


def test_map_validation():
    for bad in (lambda: LinearMod1(1), lambda: LSV(1.0), lambda: LSV(0.0),
                lambda: PiecewiseLinear((0, 0.5, 1), (2, 0.5)),
                lambda: PiecewiseLinear((0.1, 1), (3,))):
        with pytest.raises(ValueError):
            bad()


@pytest.mark.parametrize("text", ["mod1:2", "mod1:7", "lsv:0.4", "pwl:0.0,0.4,1.0:2.5,-2.0"])
def test_parse_format_round_trip(text):
    f = parse_map(text)
    assert parse_map(format_map(f)) == f


def test_piecewise_linear_matches_mod1():
    f = PiecewiseLinear((0.0, 1 / 3, 2 / 3, 1.0), (3.0, 3.0, 3.0))
    for x in np.linspace(0.01, 0.99, 37):
        assert map_apply(f, x) == pytest.approx((3 * x) % 1.0, abs=1e-12)
