"""The integrals in the Hardy-Stein identities.

The nonlocal integrals are implemented on the line (d = 1); exit-kernel integrals
also cover the plane (fractional annuli and classical circles).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import BallDomain, DomainError, QuadratureSpec, StableParams, as_points
from .harmonic import HarmonicFunction
from .integrate import QuadResult, Region, ZERO, integrate_interval, integrate_polar
from .kernels import exit_tail_mass_1d, poisson_constant, radial_exit_sf
from .remainder import remainder_F, weighted_conditional_remainder

# a rounding allowance per identity side, relative to the magnitude of the result
ROUNDING_ULPS = 64.0


def rounding_bound(*scales: float) -> float:
    return ROUNDING_ULPS * np.finfo(float).eps * max([abs(s) for s in scales] + [1e-300])


def graded_spec(spec: QuadratureSpec, alpha: float) -> QuadratureSpec:
    """Raise the grading exponent so that the endpoint behaviors met in the identities,
    delta^(-alpha/2), delta^(alpha/2 - 1) and |y - x0|^(alpha - 1), become bounded after the
    power map."""
    k = max(spec.grading_exponent, 2.0 / alpha, 4.0 / (2.0 - alpha))
    return spec.replace(grading_exponent=k)


def _require_line(sp: StableParams):
    if sp.d != 1:
        raise DomainError("nonlocal identity integrals are implemented for d = 1")


def _interior_scalar(ball: BallDomain, y) -> float:
    y = float(np.asarray(y, dtype=float).reshape(-1)[0])
    if not abs(y - ball.center[0]) < ball.radius:
        raise DomainError(f"point {y} is not interior to the ball")
    return y


def _tail_factor(alpha: float, y: float, lo: float, hi: float) -> float:
    """int over z < lo and z > hi of |z - y|^(-1-alpha) dz."""
    return ((hi - y) ** (-alpha) + (y - lo) ** (-alpha)) / alpha


def integrate_split(f, y: float, lo: float, hi: float, pts, spec: QuadratureSpec,
                    w_min: float = 0.0) -> QuadResult:
    """int of f(z, |z - y|) dz over lo < z < hi with |z - y| > w_min, integrated in the offset
    w = |z - y| on each side of y.

    Keeping w exact avoids z rounding onto y where the integrand has its singular factor.
    Offsets of `pts` are graded and used as breakpoints.
    """
    res = ZERO
    for sign, length in ((1.0, hi - y), (-1.0, y - lo)):
        if length <= w_min:
            continue
        offs = tuple(sorted({sign * (q - y) for q in pts if w_min < sign * (q - y) < length}))
        res = res + integrate_interval(lambda w, sign=sign: f(y + sign * w, w), w_min, length, spec,
                                       graded=(w_min, *offs, length), breakpoints=offs)
    return res


# the near field |z - y| < w_c, with w_c at most NEAR_FRACTION times the distance from y to
# the nearest breakpoint, is replaced by a power-law model of the integrand
NEAR_FRACTION = 1e-3
# F(a, a + e) is quadratic in e only while |e| << |a|; the cutoff shrinks until the relative
# change of the argument across the near field is below this
NEAR_REL_CHANGE = 1e-2


def _near_cutoff(y: float, pts, value=None, quadratic: bool = True):
    """(w_c, q): cutoff and model exponent, S(w) ~ w^q for the near field.

    value(z) is the first argument of F along the line (u, or u/h).  Unless F is exactly
    quadratic, w_c is divided by 10 (at most 8 times) until value changes by less than
    NEAR_REL_CHANGE relative to value(y); when value(y) = 0, F(0, b) = |b|^p and the model
    exponent is p instead of 2.
    """
    w_c = NEAR_FRACTION * min(abs(y - q) for q in pts)
    if quadratic or value is None or w_c <= 0.0:
        return w_c, None
    a = float(value(np.array([y]))[0])
    if a == 0.0:
        return w_c, "p"
    for _ in range(8):
        change = np.max(np.abs(value(np.array([y - w_c, y + w_c])) - a))
        if change <= NEAR_REL_CHANGE * abs(a):
            break
        w_c *= 0.1
    return w_c, None


def _near_field(g, y: float, w_c: float, alpha: float, q: float = 2.0) -> QuadResult:
    """int over |z - y| < w_c of g(z, w), an integrand of the form N(z) w^(-1-alpha).

    S(w) = N(y + w) + N(y - w) behaves as C w^q: q = 2 at a point of smoothness, where S
    is even and the model int_0^w_c S(w) w^(-1-alpha) dw = S(w_c) w_c^(-alpha) / (q - alpha)
    is good to a relative O((w_c / eta)^2).  Below w_c the numerators are dominated by
    rounding in the evaluations of u, which the weight w^(-1-alpha) would amplify.
    """
    if w_c <= 0.0:
        return ZERO
    if not q > alpha:
        raise DomainError("the inner integral diverges at this point")
    w = np.array([w_c, w_c])
    vals = np.asarray(g(np.array([y + w_c, y - w_c]), w), dtype=float)
    near = float(vals.sum()) * w_c / (q - alpha)
    return QuadResult(near, (NEAR_FRACTION ** 2) * abs(near) + rounding_bound(near), 0, True)


def inner_jump_integral(sp: StableParams, u: HarmonicFunction, y, p: float, spec: QuadratureSpec,
                        quadratic_path: Optional[bool] = None) -> QuadResult:
    """int A F(u(y), u(z)) |z - y|^(-1-alpha) dz over the whole line.

    The mesh is graded at z = y and at u's breakpoints; beyond the support radius u equals
    its tail value and that part is added in closed form.  With p = 2 the squared
    difference is used directly unless quadratic_path is False.
    """
    _require_line(sp)
    ball = u.domain
    y = _interior_scalar(ball, y)
    c = ball.center[0]
    R = u.support_radius
    lo, hi = c - R, c + R
    a = float(u(y))
    A, alpha = sp.A, sp.alpha
    quad = (p == 2) if quadratic_path is None else quadratic_path

    def remainder(b):
        return (b - a) ** 2 if quad else remainder_F(p, a, b)

    def g(z, w):
        return A * remainder(u(z)) * w ** (-1.0 - alpha)

    pts = (*u.breakpoints, lo, hi)
    w_c, q = _near_cutoff(y, pts, lambda z: u(z), quadratic=quad)
    q = p if q == "p" else 2.0
    res = integrate_split(g, y, lo, hi, pts, spec, w_min=w_c) + _near_field(g, y, w_c, alpha, q)
    tail = A * float(remainder(np.asarray(u.tail_value))) * _tail_factor(alpha, y, lo, hi)
    return res + QuadResult(tail, rounding_bound(tail), 0, True)


def inner_jump_integral_conditional(sp: StableParams, u: HarmonicFunction, h: HarmonicFunction, y,
                                    p: float, spec: QuadratureSpec) -> QuadResult:
    """int_D h(z) F(u(y)/h(y), u(z)/h(z)) A |z - y|^(-1-alpha) dz.

    Away from the boundary the ratio form is used (F is evaluated stably near its zero
    set); where h(z) is below 1e-3 h(y) the expanded four-term form with compensated
    summation is used instead.
    """
    _require_line(sp)
    ball = h.domain
    y = _interior_scalar(ball, y)
    c, r = ball.center[0], ball.radius
    a, s = float(u(y)), float(h(y))
    if not s > 0:
        raise DomainError("h must be positive on D")
    A, alpha = sp.A, sp.alpha

    def g(z, w):
        b, t = u(z), h(z)
        bad = (t <= 0) & (np.abs(z - c) < r)
        if np.any(bad):
            raise DomainError(f"h is not positive at z = {z[bad][:3]}")
        near_edge = t < 1e-3 * s
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = t * remainder_F(p, a / s, b / np.where(near_edge, 1.0, t))
        if np.any(near_edge):
            expanded = weighted_conditional_remainder(p, a, s, b, t)
            ratio = np.where(near_edge, expanded, ratio)
        return A * ratio * w ** (-1.0 - alpha)

    pts = (c - r, c + r, *u.breakpoints, *h.breakpoints)
    w_c, q = _near_cutoff(y, pts, lambda z: u(z) / h(z), quadratic=(p == 2))
    q = p if q == "p" else 2.0
    return (integrate_split(g, y, c - r, c + r, pts, spec, w_min=w_c)
            + _near_field(g, y, w_c, alpha, q))


def greens_outer_integral(greenfn, x0, g, region: Region, spec: QuadratureSpec) -> QuadResult:
    """int G(x0, y) g(y) dy over region.

    greenfn(x0, ys) is vectorized in ys.  For intervals g may return an array of shape
    (2, n) holding values and pointwise error estimates; the second row is integrated
    against G as well and reported in `extra[0]` and folded into err_est.
    """
    if region.kind == "interval":
        a, b = region.bounds
        x0 = float(np.asarray(x0, dtype=float).reshape(-1)[0])
        pts = tuple(q for q in (*region.graded, *region.breakpoints) if a < q < b)

        def f(ys, w):
            # nodes that round onto an endpoint carry G = 0; nodes that round onto x0 sit in a
            # sub-ulp neighbourhood of an integrable singularity and are dropped as well
            inside = (ys > a) & (ys < b) & (ys != x0)
            out = None
            if np.any(inside):
                yi = ys[inside]
                vals = np.asarray(greenfn(x0, yi), dtype=float) * np.asarray(g(yi), dtype=float)
                out = np.zeros(vals.shape[:-1] + ys.shape)
                out[..., inside] = vals
            return out if out is not None else np.zeros_like(ys)

        if not a < x0 < b:
            raise DomainError("x0 must lie inside the interval")
        res = integrate_split(f, x0, a, b, pts, spec)
        if res.extra:
            return QuadResult(res.value, res.err_est + abs(res.extra[0]), res.cells, res.converged, res.extra)
        return res
    if region.kind == "disk-polar":
        cx, cy, radius = region.bounds[:3]
        from .integrate import ray_exit_distance
        pole = tuple(float(v) for v in np.asarray(x0, dtype=float).reshape(-1))
        f = lambda pts: np.asarray(greenfn(np.asarray(pole), pts), dtype=float) * np.asarray(g(pts), dtype=float)
        return integrate_polar(f, pole, lambda th: ray_exit_distance(pole, (cx, cy), radius, th), spec,
                               rho_graded=("min", "max"))
    raise DomainError(f"unsupported region kind {region.kind!r} for a Green integral")


@dataclass(frozen=True)
class ExitKernel:
    """Exit density of a ball: kind 'fractional' (stable process) or 'classical' (Brownian)."""
    kind: str
    ball: BallDomain
    sp: Optional[StableParams] = None

    def __post_init__(self):
        if self.kind not in ("fractional", "classical"):
            raise DomainError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "fractional" and self.sp is None:
            raise DomainError("fractional kernel needs StableParams")


def _frac_density_from_gap(sp, ball, x, gap, sign):
    """Poisson kernel at y = c + sign (r + gap), computed from the gap without cancellation."""
    c, r = ball.center[0], ball.radius
    xi = x - c
    y_off = sign * (r + gap)
    return (poisson_constant(1, sp.alpha) * ((r - xi) * (r + xi)) ** (sp.alpha / 2.0)
            * (gap * (gap + 2.0 * r)) ** (-sp.alpha / 2.0) / np.abs(y_off - xi))


def exit_kernel_integral(kernel: ExitKernel, start, payoff, region: Optional[Region], spec: QuadratureSpec,
                         tail_value: float = 0.0, breakpoints=()) -> QuadResult:
    """E_start[payoff(X_tau)] for the exit from kernel.ball, as an explicit integral.

    fractional, d = 1: region 'exterior-shell' (c, r, R) is integrated in the gap variable
    |y - c| - r (graded at the sphere and at the given breakpoints, which are absolute
    abscissae); payoff equals tail_value beyond R, added in closed form.
    fractional, d = 2: region 'annulus' (cx, cy, r, R) in polar form about the center.
    classical: the sphere of kernel.ball, parametrized by angle (d = 2).
    """
    ball = kernel.ball
    if kernel.kind == "classical":
        return _classical_exit_integral(ball, start, payoff, spec)
    sp = kernel.sp
    if ball.d == 1:
        x = _interior_scalar(ball, start)
        c, r = ball.center[0], ball.radius
        R = region.bounds[2] if region is not None else r
        if R < r:
            raise DomainError("truncation radius below the ball radius")
        res = ZERO
        if R > r:
            for sign in (1.0, -1.0):
                gb = tuple(sorted({abs(b - c) - r for b in breakpoints if 0 < sign * (b - c) - r < R - r}))

                def f(gap, sign=sign):
                    y = c + sign * (r + gap)
                    return _frac_density_from_gap(sp, ball, x, gap, sign) * np.asarray(payoff(y), dtype=float)

                res = res + integrate_interval(f, 0.0, R - r, spec.replace(grading_exponent=max(
                    spec.grading_exponent, 2.0 / (2.0 - sp.alpha))), graded=(0.0, *gb, R - r), breakpoints=gb)
        if tail_value != 0.0:
            tail = tail_value * float(exit_tail_mass_1d(sp, ball, R, np.array([x]))[0])
            res = res + QuadResult(tail, rounding_bound(tail), 0, True)
        return res
    if ball.d == 2:
        return _frac_exit_integral_2d(sp, ball, start, payoff, region, spec, tail_value)
    raise DomainError("fractional exit integrals are implemented for d <= 2")


def _frac_exit_integral_2d(sp, ball, start, payoff, region, spec, tail_value):
    x = np.asarray(start, dtype=float).reshape(-1)
    c, r = ball.c, ball.radius
    R = region.bounds[3] if region is not None else r
    xi2 = float(np.sum((x - c) ** 2))
    C = poisson_constant(2, sp.alpha)
    a = sp.alpha
    inner_spec = spec.replace(rel_tol=spec.rel_tol * 0.1, abs_tol=spec.abs_tol * 0.1,
                              grading_exponent=max(spec.grading_exponent, 2.0 / (2.0 - a)))
    errs = []

    def over_theta(thetas):
        out = np.empty(len(thetas))
        for i, th in enumerate(thetas):
            e = np.array([math.cos(th), math.sin(th)])

            def f(gap):
                rho = r + gap
                y = c[None, :] + rho[:, None] * e[None, :]
                dist2 = np.sum((y - x) ** 2, axis=-1)
                dens = C * (r * r - xi2) ** (a / 2.0) * (gap * (gap + 2 * r)) ** (-a / 2.0) / dist2
                return dens * np.asarray(payoff(y), dtype=float) * rho

            res = integrate_interval(f, 0.0, R - r, inner_spec, graded=(0.0,)) if R > r else ZERO
            out[i] = res.value
            errs.append(res.err_est)
        return out

    res = integrate_interval(over_theta, 0.0, 2 * math.pi, spec, initial_cells=4) if R > r else ZERO
    res = QuadResult(res.value, res.err_est + 2 * math.pi * (max(errs) if errs else 0.0), res.cells, res.converged)
    if tail_value != 0.0:
        tail = tail_value * _tail_mass_2d(sp, ball, x, R, spec)
        res = res + QuadResult(tail, rounding_bound(tail) + spec.rel_tol * abs(tail), 0, True)
    return res


def _tail_mass_2d(sp, ball, x, R, spec):
    """P_x(|X_tau - c| > R) in the plane."""
    c, r = ball.c, ball.radius
    if np.allclose(x, c):
        return float(radial_exit_sf(sp.alpha, R / r))
    a = sp.alpha
    C = poisson_constant(2, a)
    xi2 = float(np.sum((x - c) ** 2))

    def over_theta(thetas):
        out = np.empty(len(thetas))
        for i, th in enumerate(thetas):
            e = np.array([math.cos(th), math.sin(th)])

            def f(s):
                rho = R / s
                y = c[None, :] + rho[:, None] * e[None, :]
                dist2 = np.sum((y - x) ** 2, axis=-1)
                dens = C * (r * r - xi2) ** (a / 2.0) * (rho * rho - r * r) ** (-a / 2.0) / dist2
                return dens * rho * R / (s * s)

            out[i] = integrate_interval(f, 0.0, 1.0, spec.replace(grading_exponent=max(2.0, 1.0 / a)),
                                        graded=(0.0,)).value
        return out

    return integrate_interval(over_theta, 0.0, 2 * math.pi, spec, initial_cells=4).value


def _classical_exit_integral(ball, start, payoff, spec):
    if ball.d != 2:
        raise DomainError("classical exit integrals are implemented for the disk")
    x = np.asarray(start, dtype=float).reshape(-1)
    c, r = ball.c, ball.radius
    xi2 = float(np.sum((x - c) ** 2))
    if not xi2 < r * r:
        raise DomainError("start must be interior")

    def f(th):
        y = c[None, :] + r * np.stack([np.cos(th), np.sin(th)], axis=-1)
        dens = (r * r - xi2) / (2 * math.pi * r * np.sum((y - x) ** 2, axis=-1))
        return dens * np.asarray(payoff(y), dtype=float) * r

    return integrate_interval(f, 0.0, 2 * math.pi, spec, initial_cells=8)


def exterior_region(ball: BallDomain, support_radius: float) -> Region:
    """exterior-shell region of a ball on the line, truncated at the data support."""
    return Region("exterior-shell", (ball.center[0], ball.radius, max(support_radius, ball.radius)))
