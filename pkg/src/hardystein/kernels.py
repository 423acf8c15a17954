"""Closed-form kernels of balls: fractional Poisson/Green/Martin kernels and the
classical Poisson kernel and Green function of the Laplacian.

Points follow `core.as_points`: trailing axis of length d, or bare coordinates when d = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import beta as beta_fn, betainc

from .core import BallDomain, DomainError, SingularityError, StableParams, as_points, sphere_area
from .integrate import geometric_rule

_GL20 = np.polynomial.legendre.leggauss(20)
_BOUNDARY_RTOL = 1e-9
_GEO_T, _GEO_W = geometric_rule()


@dataclass(frozen=True)
class KernelEval:
    value: float
    regime: str  # interior | boundary-singular | exterior


def poisson_constant(d: int, alpha: float) -> float:
    """C_{d,alpha} = Gamma(d/2) pi^(-d/2-1) sin(pi alpha/2)."""
    return math.gamma(d / 2.0) * math.pi ** (-d / 2.0 - 1.0) * math.sin(math.pi * alpha / 2.0)


def green_constant(d: int, alpha: float) -> float:
    """B_{d,alpha} = Gamma(d/2) / (2^alpha pi^(d/2) Gamma(alpha/2)^2)."""
    return math.gamma(d / 2.0) / (2.0 ** alpha * math.pi ** (d / 2.0) * math.gamma(alpha / 2.0) ** 2)


def _squeeze(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


def _radii(ball, x):
    pts = as_points(x, ball.d)
    return pts, np.linalg.norm(pts - ball.c, axis=-1)


def poisson_kernel_frac(sp: StableParams, ball: BallDomain, x, y):
    """Exit-position density of the alpha-stable process from x in the ball, at y outside."""
    px, rx = _radii(ball, x)
    py, ry = _radii(ball, y)
    r = ball.radius
    if np.any(rx >= r):
        raise DomainError("x must lie inside the ball")
    if np.any(np.isclose(ry, r, rtol=_BOUNDARY_RTOL, atol=0.0)):
        raise SingularityError("y on the sphere: Poisson kernel is singular there")
    if np.any(ry < r):
        raise DomainError("y must lie outside the closed ball")
    dist = np.linalg.norm(px - py, axis=-1)
    val = (poisson_constant(sp.d, sp.alpha) * ((r * r - rx * rx) / (ry * ry - r * r)) ** (sp.alpha / 2.0)
           * dist ** (-float(sp.d)))
    return _squeeze(val)


def radial_exit_sf(alpha: float, t):
    """P(|Y - c| > t r) for the exit position Y from the center of a ball of radius r.

    Does not depend on d: 1/|Y|^2 (unit ball) is Beta(alpha/2, 1 - alpha/2) distributed.
    """
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(t <= 1.0, 1.0, betainc(alpha / 2.0, 1.0 - alpha / 2.0, 1.0 / np.maximum(t, 1.0) ** 2))
    return _squeeze(out)


def _profile_series(d, alpha, w):
    # sum_k binom(-d/2, k) w^(k + alpha/2) / (k + alpha/2), for w <= 1/2
    a = alpha / 2.0
    coef = [1.0]
    for k in range(1, 71):
        coef.append(coef[-1] * (-d / 2.0 - k + 1.0) / k)
    out = np.zeros_like(w)
    for k in range(70, -1, -1):
        out = out * w + coef[k] / (k + a)
    return out * w ** a


def _profile_quad(d, alpha, w):
    """J(w) for any (d, alpha) by series on [0, 1/2] and Gauss-Legendre in log s beyond."""
    w = np.asarray(w, dtype=float)
    out = _profile_series(d, alpha, np.minimum(w, 0.5))
    big = w > 0.5
    if not np.any(big):
        return out
    x0 = math.log(0.5)
    xs = np.log(w[big])
    ncell = int(np.ceil(xs.max() - x0)) + 1
    g = lambda x: np.exp(x * alpha / 2.0) * (1.0 + np.exp(x)) ** (-d / 2.0)
    nodes, weights = _GL20
    edges = x0 + np.arange(ncell + 1, dtype=float)
    mids = 0.5 * (edges[:-1] + edges[1:])
    cell = (0.5 * g(mids[:, None] + 0.5 * nodes[None, :]) @ weights)
    cum = np.concatenate([[0.0], np.cumsum(cell)])
    k = np.floor(xs - x0).astype(int)
    left = edges[k]
    half = 0.5 * (xs - left)
    part = (half[:, None] * g(left[:, None] + half[:, None] * (1.0 + nodes[None, :]))) @ weights
    out = out.copy()
    out[big] = out[big] + cum[k] + part
    return out


def green_profile(d: int, alpha: float, w):
    """J(w) = int_0^w s^(alpha/2-1) (1+s)^(-d/2) ds."""
    w = np.asarray(w, dtype=float)
    if alpha == 1.0 and d == 1:
        return 2.0 * np.arcsinh(np.sqrt(w))
    if alpha == 1.0 and d == 2:
        return 2.0 * np.arctan(np.sqrt(w))
    if alpha == 1.0 and d == 3:
        return 2.0 * np.sqrt(w / (1.0 + w))
    if d > alpha:
        a, b = alpha / 2.0, (d - alpha) / 2.0
        z = w / (1.0 + w)
        reg = np.where(z < 0.5, betainc(a, b, z), 1.0 - betainc(b, a, 1.0 / (1.0 + w)))
        return beta_fn(a, b) * reg
    return _profile_quad(d, alpha, np.atleast_1d(w)).reshape(w.shape)


def green_frac(sp: StableParams, ball: BallDomain, x, y):
    """Green function of the fractional Laplacian for the ball (symmetric, zero on the boundary)."""
    px, rx = _radii(ball, x)
    py, ry = _radii(ball, y)
    r = ball.radius
    if np.any(rx >= r) or np.any(ry >= r):
        raise DomainError("both arguments must lie inside the ball")
    dist = np.linalg.norm(px - py, axis=-1)
    if np.any(dist == 0.0):
        raise SingularityError("Green function is singular on the diagonal")
    d, alpha = sp.d, sp.alpha
    w = (r * r - rx * rx) * (r * r - ry * ry) / (r * r * dist * dist)
    small = w < 1e-14
    prof = np.where(small, (2.0 / alpha) * w ** (alpha / 2.0), green_profile(d, alpha, np.where(small, 1.0, w)))
    return _squeeze(green_constant(d, alpha) * dist ** (alpha - d) * prof)


def expected_exit_time(sp: StableParams, ball: BallDomain, x):
    """E_x tau_ball = int G(x, y) dy, closed form; used as an oracle for green_frac."""
    _, rx = _radii(ball, x)
    d, a = sp.d, sp.alpha
    c = math.gamma(d / 2.0) / (2.0 ** a * math.gamma(1.0 + a / 2.0) * math.gamma((d + a) / 2.0))
    return _squeeze(c * (ball.radius ** 2 - rx * rx) ** (a / 2.0))


@lru_cache(maxsize=4096)
def _martin_norm(d, alpha, center, radius, z, x0):
    c = np.asarray(center)
    z = np.asarray(z)
    x0 = np.asarray(x0)
    return (radius ** 2 - np.sum((x0 - c) ** 2)) ** (alpha / 2.0) * np.linalg.norm(x0 - z) ** (-float(d))


def martin_kernel_frac(sp: StableParams, ball: BallDomain, x, z, x0):
    """Martin kernel with pole z on the sphere, normalized so M(x0, z) = 1.

    Returns 0 for x outside the open ball (the kernel is singular alpha-harmonic).
    """
    zp = as_points(z, ball.d).reshape(-1)
    if zp.size != ball.d:
        raise DomainError("z must be a single point")
    if not math.isclose(float(np.linalg.norm(zp - ball.c)), ball.radius, rel_tol=_BOUNDARY_RTOL):
        raise DomainError("pole z must lie on the sphere")
    x0p = as_points(x0, ball.d).reshape(-1)
    if not bool(ball.contains(x0p)):
        raise DomainError("x0 must be interior")
    px, rx = _radii(ball, x)
    r = ball.radius
    inside = rx < r
    norm = _martin_norm(sp.d, sp.alpha, ball.center, r, tuple(zp), tuple(x0p))
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (np.maximum(r * r - rx * rx, 0.0) ** (sp.alpha / 2.0)
               * np.linalg.norm(px - zp, axis=-1) ** (-float(sp.d)) / norm)
    return _squeeze(np.where(inside, val, 0.0))


def poisson_kernel_classical(ball: BallDomain, x, y):
    """Harmonic measure density of the ball w.r.t. surface measure: (r^2-|x|^2)/(sigma_d r |x-y|^d)."""
    px, rx = _radii(ball, x)
    py, ry = _radii(ball, y)
    r = ball.radius
    if np.any(rx >= r):
        raise DomainError("x must lie inside the ball")
    if not np.allclose(ry, r, rtol=1e-9, atol=0.0):
        raise DomainError("y must lie on the sphere")
    d = ball.d
    dist = np.linalg.norm(px - py, axis=-1)
    return _squeeze((r * r - rx * rx) / (sphere_area(d) * r * dist ** d))


def green_classical(ball: BallDomain, x, y):
    """Green function of the Laplacian (not Laplacian/2) on the ball, via Kelvin reflection."""
    px, rx = _radii(ball, x)
    py, ry = _radii(ball, y)
    r = ball.radius
    if np.any(rx >= r) or np.any(ry >= r):
        raise DomainError("both arguments must lie inside the ball")
    xs = px - ball.c
    ys = py - ball.c
    dist = np.linalg.norm(xs - ys, axis=-1)
    if np.any(dist == 0.0):
        raise SingularityError("Green function is singular on the diagonal")
    d = ball.d
    if d == 1:
        x1, y1 = xs[..., 0], ys[..., 0]
        val = (r - np.maximum(x1, y1)) * (r + np.minimum(x1, y1)) / (2.0 * r)
        return _squeeze(val)
    q = rx * rx * ry * ry / (r * r) - 2.0 * np.sum(xs * ys, axis=-1) + r * r
    q = np.maximum(q, dist * dist)
    if d == 2:
        val = np.log(q) / (4.0 * math.pi) - np.log(dist) / (2.0 * math.pi)
    else:
        val = (dist ** (2.0 - d) - q ** ((2.0 - d) / 2.0)) / ((d - 2.0) * sphere_area(d))
    return _squeeze(np.maximum(val, 0.0))


def _cauchy_right(xi, lo, hi):
    """alpha = 1, unit ball, start xi: exit measure of [lo, hi] with 1 <= lo < hi <= inf."""
    xi = np.asarray(xi, dtype=float)

    one_m, one_p = 1.0 - xi, 1.0 + xi

    def G(y):
        # -arcsin((1 - xi y) / (y - xi)) / pi, written with y - 1 and 1 - xi kept apart
        if np.isinf(y):
            return -np.arctan2(-xi, np.sqrt(one_m * one_p)) / math.pi
        num = one_m - xi * (y - 1.0)
        return -np.arctan2(num, np.sqrt((y - 1.0) * (y + 1.0) * one_m * one_p)) / math.pi
    return G(hi) - G(lo)


def cauchy_interval_measure(xi, lo, hi):
    """Exit measure of [lo, hi] (outside [-1, 1]) from xi in (-1, 1), alpha = 1."""
    if lo >= 1.0:
        return _cauchy_right(xi, lo, hi)
    if hi <= -1.0:
        return _cauchy_right(-np.asarray(xi, dtype=float), -hi, -lo)
    raise DomainError("interval must lie outside the ball")


def exit_tail_mass_1d(sp: StableParams, ball: BallDomain, R: float, x: np.ndarray) -> np.ndarray:
    """P_x(|X_tau - c| > R) on the line, by the substitution y - c = +-R/s, s = t^(1/alpha)."""
    c, r = ball.center[0], ball.radius
    xi = np.atleast_1d(np.asarray(x, dtype=float)) - c
    if R <= r:
        return np.ones_like(xi)
    if sp.alpha == 1.0:
        return cauchy_interval_measure(xi / r, R / r, np.inf) + cauchy_interval_measure(xi / r, -np.inf, -R / r)
    a = sp.alpha
    t, w = _GEO_T, _GEO_W
    s = t ** (1.0 / a)
    C = poisson_constant(1, a)
    base = C * R * (r * r - xi[:, None] ** 2) ** (a / 2.0) / a * (R * R - r * r * s * s) ** (-a / 2.0)
    right = base / (R - xi[:, None] * s)
    left = base / (R + xi[:, None] * s)
    return (right + left) @ w
