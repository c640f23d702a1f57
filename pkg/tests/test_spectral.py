"""Series routines against scipy oracles and closed forms."""

import math

import numpy as np
import pytest
import scipy.integrate
import scipy.special

from fracrig.spectral import (
    SERIES_RTOL,
    DiscSpectrum,
    IntervalSpectrum,
    bessel_j0,
    bessel_zeros,
    bound_constants,
    disc_heat_content,
    interval_heat_content,
    rigidity_cylinder,
    rigidity_disc,
    torsion_sandwich_check,
    weighted_moment,
    zero_inverse_power_sum,
)

# Frozen reference values.  Each was produced by an independent route and
# cross-checked before being written down here; the producing route is noted
# next to the number.
J0_FIRST_ZERO = 2.404825557695773          # scipy.special.jn_zeros(0, 1)
HALF_MOMENT = 0.14094180728626182          # quadrature of sqrt(t) Q_disc(t):
                                           #   0.14094180728629(3) +- 3.3e-9
DISC_CONTENT_01 = 1.2383398164570776       # 200k-term sum over jn_zeros
INTERVAL_CONTENT_01 = 0.30211809377327326  # reflection (image) series
RIGIDITY_10_1 = 3.6089192187805055         # quad of Q_disc*Q_int:
                                           #   3.60891921878046 +- 1.5e-8


def test_j0_matches_scipy():
    x = np.concatenate([np.linspace(0.0, 60.0, 4001),
                        np.random.default_rng(5).uniform(0, 120, 500)])
    assert np.max(np.abs(bessel_j0(x) - scipy.special.j0(x))) < 5e-14


def test_zeros_match_scipy():
    z = bessel_zeros(200)
    ref = scipy.special.jn_zeros(0, 200)
    assert np.max(np.abs(z - ref) / ref) < 1e-13
    assert np.max(np.abs(bessel_j0(z))) < 1e-12
    assert float(z[0]) == pytest.approx(J0_FIRST_ZERO, abs=1e-14)


def test_zeros_cache_grows_consistently():
    head = bessel_zeros(10).copy()
    bessel_zeros(600)
    assert np.array_equal(bessel_zeros(10), head)


def test_inverse_square_sum_is_quarter():
    s = zero_inverse_power_sum(2.0)
    assert abs(s.value - 0.25) <= 1e-8
    assert abs(s.value - 0.25) <= s.tail_bound + 1e-14


def test_inverse_fourth_sum_is_one_thirtysecond():
    s = zero_inverse_power_sum(4.0)
    assert abs(s.value - 1.0 / 32.0) <= 1e-10


def test_inverse_power_sum_rejects_divergent_exponent():
    with pytest.raises(ValueError):
        zero_inverse_power_sum(1.0)
    with pytest.raises(ValueError):
        zero_inverse_power_sum(0.5)


def test_disc_heat_content_frozen_value():
    q = disc_heat_content(0.1, DiscSpectrum(1.0))
    assert q.value == pytest.approx(DISC_CONTENT_01, abs=1e-11)
    assert q.tail_bound <= SERIES_RTOL * q.value


def test_disc_heat_content_limits_and_monotonicity():
    spec = DiscSpectrum(1.0)
    assert disc_heat_content(0.0, spec).value == math.pi
    ts = np.array([1e-4, 1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0])
    vals = [disc_heat_content(float(t), spec).value for t in ts]
    assert all(a > b > 0.0 for a, b in zip(vals, vals[1:]))
    # short-time boundary layer: each unit of perimeter sheds 2 sqrt(t/pi)
    # of content, so Q(t) = pi - 4 sqrt(pi t) + O(t)
    t = 1e-6
    q = disc_heat_content(t, spec).value
    assert q == pytest.approx(math.pi - 4.0 * math.sqrt(math.pi * t),
                              abs=20.0 * t)


def test_disc_heat_content_scaling():
    # Q_R(t) = R^2 Q_1(t / R^2), exact at series level
    for r in (0.5, 2.0):
        for t in (0.01, 0.2):
            big = disc_heat_content(t, DiscSpectrum(r)).value
            unit = disc_heat_content(t / r ** 2, DiscSpectrum(1.0)).value
            assert big == pytest.approx(r ** 2 * unit, rel=1e-12)


def test_interval_heat_content_frozen_value():
    q = interval_heat_content(0.1, IntervalSpectrum(1.0))
    assert q.value == pytest.approx(INTERVAL_CONTENT_01, abs=1e-12)


def test_interval_heat_content_against_image_series():
    """Eigenfunction series vs quadrature of the image-method kernel.

    The survival probability of a path started at x in (0, L) is an
    alternating sum of reflected Gaussian masses; integrating it over x
    gives the heat content by a completely different route.  With the
    generator-Laplacian scaling the kernel variance at time t is 2t.
    """
    length = 1.0
    for t in (0.02, 0.1, 0.3):
        s = 2.0 * math.sqrt(t)

        def survive(x):
            p = 0.0
            for k in range(-30, 31):
                p += ((-1) ** k) * (
                    math.erf((x + k * length) / s)
                    - math.erf((x - length + k * length) / s)) / 2.0
            return p

        quad, err = scipy.integrate.quad(survive, 0.0, length, limit=200)
        series = interval_heat_content(t, IntervalSpectrum(length)).value
        assert series == pytest.approx(quad, abs=5e-10 + 10 * err)


def test_interval_heat_content_scaling_and_bounds():
    for length in (0.5, 1.0, 4.0):
        spec = IntervalSpectrum(length)
        assert interval_heat_content(0.0, spec).value == length
        for t in (0.001, 0.05):
            q = interval_heat_content(t, spec).value
            lo = length - (4.0 / math.sqrt(math.pi)) * math.sqrt(t)
            assert lo - 1e-12 <= q <= lo + 8.0 * t / length + 1e-12
            unit = interval_heat_content(t / length ** 2,
                                         IntervalSpectrum(1.0)).value
            assert q == pytest.approx(length * unit, rel=1e-12)


def test_half_moment_frozen_value():
    m = weighted_moment(0.5, 1.0)
    assert m.value == pytest.approx(HALF_MOMENT, abs=2e-12)
    assert m.tail_bound < 1e-10
    # R-scaling: the sqrt(t) moment of Q_R picks up R^5
    m2 = weighted_moment(0.5, 2.0)
    assert m2.value == pytest.approx(2.0 ** 5 * m.value, rel=1e-11)


def test_zeroth_moment_is_disc_rigidity():
    m = weighted_moment(0.0, 1.0)
    assert abs(m.value - rigidity_disc(1.0)) <= 1e-10
    assert rigidity_disc(1.0) == math.pi / 8.0
    assert rigidity_disc(2.0) == pytest.approx(math.pi * 2.0, rel=1e-15)


def test_rigidity_cylinder_frozen_value():
    t = rigidity_cylinder(10.0, 1.0)
    assert t.value == pytest.approx(RIGIDITY_10_1, abs=1e-10)
    assert t.tail_bound <= SERIES_RTOL * t.value


def test_rigidity_cylinder_against_heat_content_quadrature():
    """Cross-route check: integrate the factorized heat content in time.

    The cylinder heat content is the product of the disc and interval
    contents divided by nothing (unit initial data factorizes), and its
    time integral is the rigidity.  The quadrature route shares no code
    with the tanh-form series beyond the zero cache.
    """
    length = 3.0
    dspec = DiscSpectrum(1.0)
    ispec = IntervalSpectrum(length)

    def product(t):
        return (disc_heat_content(t, dspec).value
                * interval_heat_content(t, ispec).value)

    quad, err = scipy.integrate.quad(product, 0.0, 12.0, limit=200)
    tail = product(12.0) / (bound_constants().j0 ** 2 + math.pi ** 2 / length ** 2)
    series = rigidity_cylinder(length, 1.0).value
    assert series == pytest.approx(quad, abs=1e-7 + 10 * err + tail)


def test_rigidity_cylinder_scaling():
    # T(sL, sR) = s^5 T(L, R)
    base = rigidity_cylinder(4.0, 1.0).value
    scaled = rigidity_cylinder(2.0, 0.5).value
    assert scaled == pytest.approx(0.5 ** 5 * base, rel=1e-11)


def test_rigidity_cylinder_monotone_in_length():
    vals = [rigidity_cylinder(L, 1.0).value for L in (1.0, 2.0, 4.0, 8.0)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    # per unit length the slab limit pi/8 R^4 is approached from below
    dens = [v / L for v, L in zip(vals, (1.0, 2.0, 4.0, 8.0))]
    assert all(b > a for a, b in zip(dens, dens[1:]))
    assert dens[-1] < math.pi / 8.0


def test_sandwich_defect_certified():
    for length in (2.0, 5.0, 10.0, 20.0):
        entry = torsion_sandwich_check(length, 1.0)
        assert entry.passed
        assert entry.lower == 0.0
        assert entry.upper == pytest.approx(
            math.pi / (length * bound_constants().j0 ** 2), rel=1e-12)
        assert entry.tol < 1e-8
    # defect decays with length
    d = [torsion_sandwich_check(L, 1.0).value for L in (2.0, 5.0, 10.0)]
    assert d[0] > d[1] > d[2] >= -1e-12


def test_bound_constants_closed_forms():
    k = bound_constants()
    assert k.j0 == pytest.approx(J0_FIRST_ZERO, abs=1e-14)
    a = k.a_opt
    ap = k.ap_opt
    assert a == pytest.approx((math.sqrt(79.0) - 3.0) / 28.0, rel=1e-15)
    assert ap == pytest.approx((math.sqrt(61.0) - 4.0) / 15.0, rel=1e-15)
    # the rational-surd coefficients equal the optimised expressions
    assert k.c_lower_coeff == pytest.approx(
        (1.0 - 4.0 * a) * (1.0 + 2.0 * a) * a ** 5 / 24.0, rel=1e-13)
    assert k.cp_lower_coeff_derived == pytest.approx(
        (1.0 - 3.0 * ap) * (1.0 + ap) * ap ** 3 / 24.0, rel=1e-13)
    assert k.cp_lower_coeff == pytest.approx(
        10.0 * k.cp_lower_coeff_derived, rel=1e-15)
    # stationarity of both objectives at the quoted optima
    for frac, fn in ((a, lambda x: (1 - 4 * x) * (1 + 2 * x) * x ** 5),
                     (ap, lambda x: (1 - 3 * x) * (1 + x) * x ** 3)):
        h = 1e-6
        assert abs(fn(frac + h) - fn(frac - h)) < 1e-10
    assert k.c_upper == pytest.approx(math.pi / (2.0 * k.j0), rel=1e-15)
    assert k.cp_upper == pytest.approx(
        (math.pi / 4.0) * (1.0 + 1.0 / k.j0), rel=1e-15)
    assert k.kappa_upper == 4.0 * math.pi
    assert 0.0 < k.c_lower_coeff < k.c_upper
    assert 0.0 < k.cp_lower_coeff < k.cp_upper


def test_spectra_validate_inputs():
    with pytest.raises(ValueError):
        DiscSpectrum(0.0)
    with pytest.raises(ValueError):
        DiscSpectrum(1.0, n_terms=0)
    with pytest.raises(ValueError):
        IntervalSpectrum(-1.0)
    with pytest.raises(ValueError):
        disc_heat_content(-0.1, DiscSpectrum(1.0))
    with pytest.raises(ValueError):
        rigidity_cylinder(math.inf, 1.0)
    with pytest.raises(ValueError):
        rigidity_disc(-2.0)
