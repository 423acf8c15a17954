import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from hardystein.core import BallDomain, DomainError, SingularityError, StableParams
from hardystein.kernels import (cauchy_interval_measure, exit_tail_mass_1d, expected_exit_time,
                                green_classical, green_frac, green_profile, martin_kernel_frac,
                                poisson_kernel_classical, poisson_kernel_frac, radial_exit_sf)

UNIT = BallDomain((0.0,), 1.0)
DISK = BallDomain((0.0, 0.0), 1.0)


def test_poisson_frac_example():
    assert poisson_kernel_frac(StableParams(1, 1.0), UNIT, 0.0, 2.0) == pytest.approx(
        1 / (2 * math.pi * math.sqrt(3)), rel=1e-14)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("x", [0.0, 0.4, -0.9])
def test_poisson_frac_normalized(alpha, x):
    sp = StableParams(1, alpha)
    ball = BallDomain((0.5,), 2.0)
    xx = 0.5 + 2.0 * x
    r, a, g0 = 2.0, alpha, 1e-6
    # gap^(-alpha/2) edge at the sphere: gap = t^k for gap > g0, leading-order closed form below
    k = 2.0 / (2.0 - alpha)
    C = math.sin(math.pi * a / 2) / math.pi
    tot = 0.0
    for sign in (1.0, -1.0):
        near = C * ((r * r - (xx - 0.5) ** 2) / (2 * r)) ** (a / 2) / (r - sign * (xx - 0.5))
        tot += near * g0 ** (1 - a / 2) / (1 - a / 2)
        edge = lambda t: poisson_kernel_frac(sp, ball, xx, 0.5 + sign * (r + t ** k)) * k * t ** (k - 1)
        tot += integrate.quad(edge, g0 ** (1 / k), 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
        far = lambda y: poisson_kernel_frac(sp, ball, xx, 0.5 + sign * y)
        tot += integrate.quad(far, 3.0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    assert tot == pytest.approx(1.0, abs=1e-6)


def test_poisson_frac_radial_symmetry_and_errors():
    sp = StableParams(2, 0.7)
    ys = np.array([[1.5, 0.0], [0.0, -1.5], [1.5 / math.sqrt(2), 1.5 / math.sqrt(2)]])
    vals = poisson_kernel_frac(sp, DISK, (0.0, 0.0), ys)
    np.testing.assert_allclose(vals, vals[0], rtol=1e-14)
    with pytest.raises(SingularityError):
        poisson_kernel_frac(sp, DISK, (0.0, 0.0), (1.0, 0.0))
    with pytest.raises(DomainError):
        poisson_kernel_frac(sp, DISK, (0.0, 0.0), (0.5, 0.0))
    with pytest.raises(DomainError):
        poisson_kernel_frac(sp, DISK, (1.2, 0.0), (2.0, 0.0))


def test_poisson_frac_scaling():
    sp = StableParams(2, 1.3)
    r, c = 3.0, np.array([1.0, -2.0])
    big = BallDomain(tuple(c), r)
    x, y = np.array([0.2, 0.1]), np.array([1.1, -0.7])
    assert poisson_kernel_frac(sp, big, c + r * x, c + r * y) == pytest.approx(
        r ** -2 * poisson_kernel_frac(sp, DISK, x, y), rel=1e-13)


def test_green_frac_example():
    # w = 3 and B_{1,1} = 1 / (2 pi), so G = arsinh(sqrt 3) / pi = 0.4192...
    val = green_frac(StableParams(1, 1.0), UNIT, 0.0, 0.5)
    assert val == pytest.approx(math.asinh(math.sqrt(3)) / math.pi, rel=1e-14)
    assert val == pytest.approx(0.41920, abs=1e-5)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([(1, 0.5), (1, 1.0), (1, 1.5), (2, 1.0), (2, 0.6), (3, 1.7)]),
       st.lists(st.floats(-0.69, 0.69), min_size=6, max_size=6))
def test_green_frac_symmetric(da, coords):
    d, alpha = da
    sp = StableParams(d, alpha)
    ball = BallDomain((0.0,) * d, 1.2)
    x, y = np.array(coords[:d]), np.array(coords[3:3 + d])
    if np.linalg.norm(x - y) < 1e-6:
        return
    xa = x if d > 1 else x[0]
    ya = y if d > 1 else y[0]
    g1, g2 = green_frac(sp, ball, xa, ya), green_frac(sp, ball, ya, xa)
    assert g1 > 0 and abs(g1 - g2) <= 1e-12 * g1


def test_green_frac_vanishes_at_boundary_and_errors():
    sp = StableParams(1, 1.5)
    vals = [green_frac(sp, UNIT, 0.0, 1 - 10.0 ** -k) for k in range(2, 12, 3)]
    assert all(a > b for a, b in zip(vals, vals[1:])) and vals[-1] < 1e-6
    with pytest.raises(SingularityError):
        green_frac(sp, UNIT, 0.3, 0.3)
    with pytest.raises(DomainError):
        green_frac(sp, UNIT, 0.3, 1.0)


@pytest.mark.parametrize("d,alpha", [(1, 0.5), (1, 1.0), (1, 1.5), (1, 1.9), (2, 1.0), (2, 1.5), (3, 0.8)])
def test_green_profile_matches_quadrature(d, alpha):
    for w in (1e-6, 0.3, 0.5, 3.0, 250.0, 1e6):
        f = lambda s: s ** (alpha / 2 - 1) * (1 + s) ** (-d / 2)
        ref = integrate.quad(f, 0.0, w, limit=400, epsabs=0, epsrel=1e-13, points=[min(w, 1.0)])[0]
        assert green_profile(d, alpha, w) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("x", [0.0, 0.6])
def test_green_frac_integrates_to_exit_time(alpha, x):
    sp = StableParams(1, alpha)
    g = lambda y: green_frac(sp, UNIT, x, y)
    ref = (integrate.quad(g, -1.0, x, limit=400, epsrel=1e-12)[0]
           + integrate.quad(g, x, 1.0, limit=400, epsrel=1e-12)[0])
    assert expected_exit_time(sp, UNIT, x) == pytest.approx(ref, rel=1e-8)


def test_martin_examples():
    sp = StableParams(1, 1.0)
    assert martin_kernel_frac(sp, UNIT, 0.0, 1.0, 0.0) == pytest.approx(1.0)
    assert martin_kernel_frac(sp, UNIT, 0.5, 1.0, 0.0) == pytest.approx(math.sqrt(3), rel=1e-14)
    vals = [martin_kernel_frac(sp, UNIT, 1 - 10.0 ** -k, 1.0, 0.0) for k in (1, 3, 6)]
    assert vals[0] < vals[1] < vals[2] and vals[2] > 1e2
    assert martin_kernel_frac(sp, UNIT, 1.5, 1.0, 0.0) == 0.0
    with pytest.raises(DomainError):
        martin_kernel_frac(sp, UNIT, 0.0, 0.9, 0.0)
    sp2 = StableParams(2, 0.8)
    x0 = np.array([0.3, -0.1])
    assert martin_kernel_frac(sp2, DISK, x0, (0.0, 1.0), x0) == pytest.approx(1.0)


def test_martin_is_limit_of_poisson_ratio():
    # M(x, z) = lim P(x, y) / P(x0, y) as y -> z from outside
    sp = StableParams(1, 0.7)
    y = 1 + 1e-9
    ratio = poisson_kernel_frac(sp, UNIT, 0.4, y) / poisson_kernel_frac(sp, UNIT, -0.2, y)
    assert martin_kernel_frac(sp, UNIT, 0.4, 1.0, -0.2) == pytest.approx(ratio, rel=1e-7)


def test_poisson_classical_examples():
    assert poisson_kernel_classical(DISK, (0.0, 0.0), (0.0, 1.0)) == pytest.approx(1 / (2 * math.pi))
    assert poisson_kernel_classical(DISK, (0.5, 0.0), (1.0, 0.0)) == pytest.approx(3 / (2 * math.pi), rel=1e-14)
    x = (0.3, -0.6)
    f = lambda t: poisson_kernel_classical(DISK, x, (math.cos(t), math.sin(t)))
    assert integrate.quad(f, 0, 2 * math.pi, limit=200, epsrel=1e-12)[0] == pytest.approx(1.0, abs=1e-8)
    ball3 = BallDomain((0.0, 0.0, 0.0), 1.0)
    assert poisson_kernel_classical(ball3, (0.0, 0.0, 0.0), (0.0, 0.0, 1.0)) == pytest.approx(1 / (4 * math.pi))
    with pytest.raises(DomainError):
        poisson_kernel_classical(DISK, (0.0, 0.0), (0.5, 0.0))


def test_green_classical():
    ys = np.array([[0.5, 0.0], [0.1, 0.2], [-0.3, 0.9]])
    np.testing.assert_allclose(green_classical(DISK, (0.0, 0.0), ys),
                               np.log(1 / np.linalg.norm(ys, axis=1)) / (2 * math.pi), rtol=1e-13)
    x, y = np.array([0.2, -0.4]), np.array([-0.5, 0.1])
    assert green_classical(DISK, x, y) == pytest.approx(green_classical(DISK, y, x), rel=1e-12)
    assert green_classical(DISK, x, (0.0, 1 - 1e-12)) < 1e-11
    total = integrate.quad(lambda r: r * math.log(1 / r), 0, 1)[0]
    assert total == pytest.approx(0.25)
    # d = 1: G(x, y) = (1 - max)(1 + min) / 2 solves -G'' = delta
    assert green_classical(UNIT, 0.0, 0.5) == pytest.approx(0.25)
    with pytest.raises(SingularityError):
        green_classical(DISK, x, x)


def test_green_classical_3d_is_harmonic_off_pole():
    ball = BallDomain((0.0, 0.0, 0.0), 1.0)
    x = np.array([0.1, 0.2, -0.3])
    y = np.array([-0.2, 0.4, 0.3])
    h = 1e-3
    lap = sum(green_classical(ball, x, y + s * e) for e in np.eye(3) * h for s in (1, -1)) - 6 * green_classical(ball, x, y)
    assert abs(lap / h ** 2) < 1e-4


def test_cauchy_interval_measure_matches_kernel():
    sp = StableParams(1, 1.0)
    for xi in (0.0, 0.7, -0.95):
        ref = integrate.quad(lambda y: poisson_kernel_frac(sp, UNIT, xi, y), 1.0, 2.0, epsrel=1e-12, limit=200)[0]
        assert cauchy_interval_measure(xi, 1.0, 2.0) == pytest.approx(ref, rel=1e-9)
        left = cauchy_interval_measure(xi, -np.inf, -1.0)
        right = cauchy_interval_measure(xi, 1.0, np.inf)
        assert left + right == pytest.approx(1.0, abs=1e-14)
    assert cauchy_interval_measure(0.0, 1.0, 2.0) == pytest.approx(1 / 3, rel=1e-14)


def test_radial_exit_law():
    assert radial_exit_sf(1.0, 2.0) == pytest.approx(1 / 3, rel=1e-13)
    assert radial_exit_sf(1.0, math.sqrt(2)) == pytest.approx(0.5, rel=1e-13)
    assert radial_exit_sf(1.3, 0.5) == 1.0


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_exit_tail_mass(alpha):
    sp = StableParams(1, alpha)
    xs = np.array([0.0, 0.5, -0.8])
    got = exit_tail_mass_1d(sp, UNIT, 3.0, xs)
    for x, g in zip(xs, got):
        ref = sum(integrate.quad(lambda y: poisson_kernel_frac(sp, UNIT, x, s * y), 3.0, np.inf,
                                 epsrel=1e-12, limit=200)[0] for s in (1, -1))
        assert g == pytest.approx(ref, rel=1e-8)
    assert exit_tail_mass_1d(sp, UNIT, 3.0, 0.0)[0] == pytest.approx(radial_exit_sf(alpha, 3.0), rel=1e-10)


def _ratio_range(vals):
    return float(np.min(vals)), float(np.max(vals))


def test_green_asymptotics_fractional_disk():
    sp = StableParams(2, 1.0)
    x0 = np.array([0.0, 0.0])
    ratios = []
    for rho in np.concatenate([np.linspace(0.05, 0.95, 19), 1 - np.logspace(-2, -8, 7)]):
        for th in np.linspace(0, 2 * math.pi, 12, endpoint=False):
            y = rho * np.array([math.cos(th), math.sin(th)])
            delta = 1 - rho
            ratios.append(green_frac(sp, DISK, x0, y) / (delta ** 0.5 * rho ** -1.0))
    lo, hi = _ratio_range(ratios)
    assert 0 < lo <= hi < np.inf and hi / lo < 10


def test_green_asymptotics_classical_ball():
    ball = BallDomain((0.0, 0.0, 0.0), 1.0)
    x0 = np.zeros(3)
    ratios = []
    for rho in np.concatenate([np.linspace(0.05, 0.95, 19), 1 - np.logspace(-2, -8, 7)]):
        for v in np.eye(3):
            y = rho * v
            ratios.append(green_classical(ball, x0, y) / ((1 - rho) * rho ** -1.0))
    lo, hi = _ratio_range(ratios)
    assert 0 < lo <= hi < np.inf and hi / lo < 10
