import math

import numpy as np
import pytest

from hardystein.core import BallDomain, DomainError, QuadratureSpec, StableParams
from hardystein.harmonic import ExteriorData, constant_function, martin_combination, poisson_extension
from hardystein.integrate import Region
from hardystein.kernels import green_frac
from hardystein.quadrature import (ExitKernel, exit_kernel_integral, greens_outer_integral,
                                   inner_jump_integral, inner_jump_integral_conditional)

UNIT = BallDomain((0.0,), 1.0)
SP1 = StableParams(1, 1.0)
SPEC = QuadratureSpec(1e-9, 1e-12)


def _graded_nodes(a, b, n):
    """Trapezoid nodes and weights on [a, b], clustered quadratically at both ends."""
    s = np.linspace(0.0, 1.0, n + 1)
    x = a + (b - a) * (1 - np.cos(np.pi * s)) / 2
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    return x, w


def _brute_inner(u, y, alpha, A, remainder, breaks, R, n=10 ** 6):
    """Trapezoid sum of A remainder(u(z)) |z - y|^(-1-alpha) on a graded grid with ~n nodes,
    plus the closed-form tail of |z| > R where u vanishes."""
    pts = sorted({-R, R, y, *breaks})
    per = n // (len(pts) - 1)
    tot = 0.0
    for a, b in zip(pts, pts[1:]):
        x, w = _graded_nodes(a, b, per)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = A * remainder(u(x)) * np.abs(x - y) ** (-1 - alpha)
        # the limit of the integrand at z = y is A u'(y)^2 for alpha = 1, taken from a difference
        at_y = x == y
        if np.any(at_y):
            h = 1e-5
            f[at_y] = A * ((u(y + h) - u(y - h)) / (2 * h)) ** 2
        tot += float(np.sum(w * f))
    tail = A * float(remainder(np.array(0.0))) * ((R - y) ** -alpha + (R + y) ** -alpha) / alpha
    return tot + tail


@pytest.fixture(scope="module")
def u_ind():
    return poisson_extension(SP1, UNIT, ExteriorData.indicator(1.0, 2.0))


def test_inner_integral_constant_is_zero():
    c = constant_function(2.5, SP1, UNIT)
    assert inner_jump_integral(SP1, c, 0.3, 3.0, SPEC).value == pytest.approx(0.0, abs=1e-14)


def test_inner_integral_brute_force(u_ind):
    res = inner_jump_integral(SP1, u_ind, 0.0, 2.0, SPEC)
    a = u_ind(0.0)
    ref = _brute_inner(u_ind, 0.0, 1.0, SP1.A, lambda b: (b - a) ** 2, (-1.0, 1.0, 2.0), 2.0)
    assert res.value == pytest.approx(ref, rel=1e-4)


def test_inner_integral_generic_path_matches_quadratic(u_ind):
    for y in (0.0, 0.37, -0.8):
        q = inner_jump_integral(SP1, u_ind, y, 2.0, SPEC)
        g = inner_jump_integral(SP1, u_ind, y, 2.0, SPEC, quadratic_path=False)
        assert abs(q.value - g.value) <= 1e-10 * max(abs(q.value), 1.0)


@pytest.mark.parametrize("alpha,p", [(0.5, 1.5), (1.0, 3.0), (1.5, 2.0)])
def test_inner_integral_symmetries(alpha, p):
    sp = StableParams(1, alpha)
    data = ExteriorData.step([(1.0, 2.0, 1.0), (-3.0, -1.5, -0.5)])
    u = poisson_extension(sp, UNIT, data)
    y = 0.21
    base = inner_jump_integral(sp, u, y, p, SPEC).value
    neg = inner_jump_integral(sp, u.scaled(-1.0), y, p, SPEC).value
    big = inner_jump_integral(sp, u.scaled(-2.5), y, p, SPEC).value
    assert neg == pytest.approx(base, rel=1e-8)
    assert big == pytest.approx(2.5 ** p * base, rel=1e-8)
    assert inner_jump_integral(sp, u, y, p, SPEC) == inner_jump_integral(sp, u, y, p, SPEC)


def test_inner_integral_rejects_boundary(u_ind):
    with pytest.raises(DomainError):
        inner_jump_integral(SP1, u_ind, 1.0, 2.0, SPEC)


def test_conditional_inner_closed_form():
    # u / h = (1 + z) / 2 and h = 2 / sqrt(1 - z^2) for alpha = 1, so at y = 0, p = 2 the
    # integrand is h(z) / (4 pi) and the integral is 1/2
    u = martin_combination(SP1, UNIT, [((1.0,), 1.0)], (0.0,))
    h = martin_combination(SP1, UNIT, [((1.0,), 1.0), ((-1.0,), 1.0)], (0.0,))
    res = inner_jump_integral_conditional(SP1, u, h, 0.0, 2.0, SPEC)
    assert res.value == pytest.approx(0.5, rel=1e-8)


def test_conditional_inner_brute_force():
    u = martin_combination(SP1, UNIT, [((1.0,), 1.0)], (0.0,))
    h = martin_combination(SP1, UNIT, [((1.0,), 1.0), ((-1.0,), 1.0)], (0.0,))
    y = 0.3
    r0 = u(y) / h(y)
    x, w = _graded_nodes(-1.0, 1.0, 10 ** 6)
    x, w = x[1:-1], w[1:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        f = h(x) * (u(x) / h(x) - r0) ** 2 / np.pi * np.abs(x - y) ** -2.0
    f[~np.isfinite(f)] = h(y) / (4 * np.pi)
    ref = float(np.sum(w * f))
    res = inner_jump_integral_conditional(SP1, u, h, y, 2.0, SPEC)
    assert res.value == pytest.approx(ref, rel=1e-3)


def test_conditional_inner_vanishes_for_multiples_of_h():
    h = martin_combination(SP1, UNIT, [((1.0,), 0.5), ((-1.0,), 0.5)], (0.0,))
    for p in (1.5, 2.0, 3.0):
        assert abs(inner_jump_integral_conditional(SP1, h, h, 0.4, p, SPEC).value) < 1e-12
        assert abs(inner_jump_integral_conditional(SP1, h.scaled(-3.0), h, 0.4, p, SPEC).value) < 1e-11


def test_green_outer_unit_weight():
    # int G(0, y) dy = E_0 tau = 1 for the unit interval at alpha = 1
    green = lambda x0, ys: green_frac(SP1, UNIT, x0, ys)
    res = greens_outer_integral(green, 0.0, lambda ys: np.ones_like(ys), Region("interval", (-1.0, 1.0)), SPEC)
    assert res.value == pytest.approx(1.0, abs=1e-8)
    x, w = _graded_nodes(0.0, 1.0, 10 ** 6)
    x, w = x[1:-1], w[1:-1]
    brute = 2 * float(np.sum(w * np.arcsinh(np.sqrt(1 - x * x) / x) / np.pi))
    assert res.value == pytest.approx(brute, abs=1e-6)
    zero = greens_outer_integral(green, 0.0, lambda ys: np.zeros_like(ys), Region("interval", (-1.0, 1.0)), SPEC)
    assert zero.value == 0.0


def test_green_outer_classical_disk():
    from hardystein.kernels import green_classical
    disk = BallDomain((0.0, 0.0), 1.0)
    res = greens_outer_integral(lambda a, ys: green_classical(disk, a, ys), (0.0, 0.0),
                                lambda ys: np.ones(len(ys)), Region("disk-polar", (0.0, 0.0, 1.0, 0.0, 0.0)),
                                QuadratureSpec(1e-10, 1e-12))
    assert res.value == pytest.approx(0.25, abs=1e-9)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_exit_integral_normalization(alpha):
    sp = StableParams(1, alpha)
    k = ExitKernel("fractional", UNIT, sp)
    for x in (0.0, 0.6):
        res = exit_kernel_integral(k, x, lambda w: np.zeros_like(w), Region("exterior-shell", (0.0, 1.0, 3.0)),
                                   SPEC, tail_value=1.0)
        one = exit_kernel_integral(k, x, lambda w: np.ones_like(w), Region("exterior-shell", (0.0, 1.0, 3.0)),
                                   SPEC, tail_value=1.0)
        assert one.value == pytest.approx(1.0, abs=1e-8)
        assert 0 < res.value < 1


def test_exit_integral_square_of_indicator(u_ind):
    k = ExitKernel("fractional", UNIT, SP1)
    res = exit_kernel_integral(k, 0.0, lambda w: u_ind(w) ** 2, Region("exterior-shell", (0.0, 1.0, 2.0)),
                               SPEC, breakpoints=(1.0, 2.0, -2.0, -1.0))
    assert res.value == pytest.approx(1 / 3, abs=1e-9)


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_exit_integral_mean_value(alpha):
    sp = StableParams(1, alpha)
    D = UNIT
    U = BallDomain((0.1,), 0.6)
    u = poisson_extension(sp, D, ExteriorData.step([(1.0, 2.0, 1.0), (-3.0, -1.5, -0.5)]))
    k = ExitKernel("fractional", U, sp)
    spec = QuadratureSpec(1e-10, 1e-13, grading_exponent=8.0)
    res = exit_kernel_integral(k, 0.2, u, Region("exterior-shell", (0.1, 0.6, 3.1)), spec,
                               breakpoints=(-1.0, 1.0, 2.0, -3.0, -1.5))
    assert res.value == pytest.approx(u(0.2), abs=1e-7)


def test_exit_integral_classical_disk():
    disk = BallDomain((0.0, 0.0), 1.0)
    k = ExitKernel("classical", disk)
    res = exit_kernel_integral(k, (0.3, -0.2), lambda pts: pts[:, 0] ** 2 - pts[:, 1] ** 2, None,
                               QuadratureSpec(1e-11, 1e-13))
    assert res.value == pytest.approx(0.3 ** 2 - 0.2 ** 2, abs=1e-10)
    with pytest.raises(DomainError):
        ExitKernel("fractional", disk)
