"""Test functions for the identities: alpha-harmonic Poisson extensions and Martin
combinations on balls, classical harmonic functions with analytic gradients, the
principal-value fractional Laplacian and the pointwise Laplacian formulas.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .core import BallDomain, DomainError, QuadratureSpec, StableParams, as_points
from .integrate import QuadResult, integrate_interval, integrate_polar
from .kernels import cauchy_interval_measure, exit_tail_mass_1d, martin_kernel_frac, poisson_constant, poisson_kernel_frac

KINDS = ("poisson-extension", "martin-combination", "classical-polynomial",
         "classical-poisson-profile", "constant", "smooth")


class QuadratureError(RuntimeError):
    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


# ---------------------------------------------------------------- exterior data

@dataclass(frozen=True)
class ExteriorData:
    """Bounded exterior data.

    Step data on the line is given by `pieces` ((lo, hi, value), ...).  General data
    uses `func` (points -> values) on |y - center| <= support_radius together with
    `breakpoints` (abscissae for d = 1, radii for d >= 2) where it is not smooth.
    Beyond the support radius the data equals `tail_value`.
    """
    pieces: tuple = ()
    func: Optional[Callable] = None
    support_radius: float = 0.0
    breakpoints: tuple = ()
    tail_value: float = 0.0

    @classmethod
    def step(cls, pieces, tail_value: float = 0.0, support_radius: float = 0.0):
        pieces = tuple((float(lo), float(hi), float(v)) for lo, hi, v in pieces)
        for lo, hi, v in pieces:
            if not (hi > lo and math.isfinite(v)):
                raise DomainError(f"bad piece {(lo, hi, v)}")
        return cls(pieces=pieces, tail_value=float(tail_value), support_radius=float(support_radius))

    @classmethod
    def indicator(cls, lo: float, hi: float, value: float = 1.0):
        return cls.step([(lo, hi, value)])

    def support_about(self, center: float) -> float:
        ends = [abs(e - center) for lo, hi, _ in self.pieces for e in (lo, hi)]
        return max([self.support_radius, *ends])

    def edges(self) -> tuple:
        out = {e for lo, hi, _ in self.pieces for e in (lo, hi)}
        out.update(float(b) for b in self.breakpoints)
        return tuple(sorted(out))

    def __call__(self, y, center=None, d: int = 1) -> np.ndarray:
        pts = as_points(y, d)
        out = np.zeros(pts.shape[:-1])
        if self.pieces:
            coord = pts[..., 0]
            for lo, hi, v in self.pieces:
                out += np.where((coord >= lo) & (coord <= hi), v, 0.0)
        if self.func is not None:
            out += np.asarray(self.func(pts), dtype=float)
        if self.tail_value != 0.0:
            c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
            rad = np.linalg.norm(pts - c, axis=-1)
            out = np.where(rad > self.support_about_vec(c), self.tail_value, out)
        return out

    def support_about_vec(self, c) -> float:
        return self.support_about(float(c[0])) if len(c) == 1 else self.support_radius

    def check_bounded(self, center, d: int) -> None:
        if self.func is None:
            return
        R = self.support_about_vec(np.asarray(center, dtype=float))
        if d == 1:
            ys = np.linspace(center[0] - R, center[0] + R, 2001)
        else:
            g = np.linspace(-R, R, 101)
            ys = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2) + np.asarray(center)
        vals = np.asarray(self.func(as_points(ys, d)), dtype=float)
        if not np.all(np.isfinite(vals)) or np.max(np.abs(vals)) > 1e200:
            raise DomainError("exterior data must be bounded")


# ---------------------------------------------------------------- harmonic functions

@dataclass(frozen=True)
class HarmonicFunction:
    kind: str
    evaluator: Callable
    gradient: Optional[Callable] = None
    support_radius: float = math.inf
    params: Optional[StableParams] = None
    domain: Optional[BallDomain] = None
    breakpoints: tuple = ()
    tail_value: float = 0.0
    data: Optional[ExteriorData] = None
    atoms: tuple = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, x):
        out = np.asarray(self.evaluator(x), dtype=float)
        return float(out) if out.ndim == 0 else out

    @property
    def is_classical(self) -> bool:
        return self.params is None

    def scaled(self, c: float) -> "HarmonicFunction":
        """c * self, same kind and metadata."""
        c = float(c)
        ev = self.evaluator
        grad = self.gradient
        data = self.data
        if data is not None:
            data = ExteriorData(tuple((lo, hi, c * v) for lo, hi, v in data.pieces),
                                None if data.func is None else (lambda y, f=data.func: c * f(y)),
                                data.support_radius, data.breakpoints, c * data.tail_value)
        return replace(self, evaluator=lambda x: c * np.asarray(ev(x)),
                       gradient=None if grad is None else (lambda x: c * np.asarray(grad(x))),
                       tail_value=c * self.tail_value, data=data,
                       atoms=tuple((z, c * w) for z, w in self.atoms))


def smooth_function(evaluator, d: int, support_radius: float, breakpoints=(), tail_value=0.0,
                    center=None) -> HarmonicFunction:
    """Wrap an arbitrary C^2 function (not necessarily harmonic) for frac_laplacian_eval."""
    ball = BallDomain(tuple(center) if center is not None else (0.0,) * d, support_radius)
    return HarmonicFunction("smooth", evaluator, support_radius=support_radius, domain=ball,
                            breakpoints=tuple(breakpoints), tail_value=tail_value)


_GL10_T, _GL10_W = np.polynomial.legendre.leggauss(10)


def _graded_half(length: float, levels: int, k: float):
    """Offsets and weights on [0, length], refined toward 0.

    Cells [L 2^-j-1, L 2^-j] for j < levels are geometric in the offset itself, so a
    near-singular factor 1/(delta + offset) is resolved at every scale delta; the last cell
    [0, L 2^-levels] uses the power map offset ~ t^k for an algebraic endpoint singularity.
    """
    hi = length * 2.0 ** -np.arange(levels, dtype=float)
    lo = hi / 2.0
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    off = (mid[:, None] + half[:, None] * _GL10_T[None, :]).ravel()
    wt = (half[:, None] * _GL10_W[None, :]).ravel()
    eps = length * 2.0 ** -levels
    t = 0.5 * (_GL10_T + 1.0)
    off_last = eps * t ** k
    w_last = eps * k * t ** (k - 1.0) * 0.5 * _GL10_W
    return np.concatenate([off, off_last]), np.concatenate([wt, w_last])


def _exterior_rule_1d(sp: StableParams, ball: BallDomain, data: ExteriorData):
    """Fixed quadrature for y -> f(y) over r <= |y - c| <= R on the line.

    Returns nodes y, weights w and gaps |y - c| - r.  Every segment between data edges is
    halved and each half is graded toward its outer end: 60 geometric levels at the sphere
    (where the kernel carries (|y - c| - r)^(-alpha/2) and 1/|x - y| for x near the
    boundary), 20 at data edges.
    """
    c, r = ball.center[0], ball.radius
    R = max(data.support_about(c), r)
    k_sphere = 2.0 / (2.0 - sp.alpha)
    nodes, weights, gaps = [], [], []
    for sgn in (1.0, -1.0):
        cuts = sorted({r, R, *[abs(e - c) for e in data.edges() if r < sgn * (e - c) < R]})
        for a, b in zip(cuts[:-1], cuts[1:]):
            m = 0.5 * (a + b)
            for end, length, direction in ((a, m - a, 1.0), (b, b - m, -1.0)):
                at_sphere = end == r
                off, wt = _graded_half(length, 60 if at_sphere else 20, k_sphere if at_sphere else 2.0)
                s = end + direction * off
                nodes.append(c + sgn * s)
                weights.append(wt)
                gaps.append(off if at_sphere else s - r)
    if not nodes:
        return np.zeros(0), np.zeros(0), np.zeros(0)
    return np.concatenate(nodes), np.concatenate(weights), np.concatenate(gaps)


def poisson_extension(sp: StableParams, ball: BallDomain, f: ExteriorData) -> HarmonicFunction:
    """u = f outside the ball and u(x) = int P(x, y) f(y) dy inside."""
    d = ball.d
    if sp.d != d:
        raise DomainError("dimension mismatch between params and ball")
    f.check_bounded(ball.center, d)
    c = ball.c
    r = ball.radius
    R = max(f.support_about_vec(c), r)
    if d == 1:
        exact = sp.alpha == 1.0 and f.func is None
        if not exact:
            ys, ws, gaps = _exterior_rule_1d(sp, ball, f)
            right = ys > c[0]
            # kernel factor depending on y only, with |y-c|^2 - r^2 = gap (gap + 2r) kept exact
            fw = (f(ys, c, 1) * ws * poisson_constant(1, sp.alpha)
                  * (gaps * (gaps + 2.0 * r)) ** (-sp.alpha / 2.0))

        def interior(xi):
            if exact:
                out = np.zeros_like(xi)
                scaled = (xi - c[0]) / r
                for lo, hi, v in f.pieces:
                    a, b = (lo - c[0]) / r, (hi - c[0]) / r
                    for s0, s1 in ((max(a, 1.0), b), (a, min(b, -1.0))):
                        if s1 > s0:
                            out += v * cauchy_interval_measure(scaled, s0, s1)
            else:
                out = np.zeros_like(xi)
                for start in range(0, len(xi), 512):
                    chunk = xi[start:start + 512]
                    xi_c = chunk - c[0]
                    # |x - y| = (distance from x to the sphere on y's side) + gap, free of cancellation
                    to_right, to_left = r - xi_c, r + xi_c
                    dist = np.where(right[None, :], to_right[:, None], to_left[:, None]) + gaps[None, :]
                    out[start:start + 512] = (to_right * to_left) ** (sp.alpha / 2.0) * ((1.0 / dist) @ fw)
            if f.tail_value != 0.0:
                out = out + f.tail_value * exit_tail_mass_1d(sp, ball, R, xi)
            return out
    else:
        if f.tail_value != 0.0:
            raise DomainError("nonzero tail data only supported on the line")
        spec = QuadratureSpec(rel_tol=1e-9, abs_tol=1e-13)
        radial_breaks = tuple(b for b in f.breakpoints if r < b < R)

        def interior(pts):
            out = np.empty(len(pts))
            for i, x in enumerate(pts):
                g = lambda ys, x=x: poisson_kernel_frac(sp, ball, x, ys) * f(ys, c, d)
                res = integrate_polar(g, c, lambda th: R, spec, rho_graded=("min",), rho_min=r,
                                      rho_breaks=lambda th: radial_breaks)
                out[i] = res.value
            return out

    def evaluator(x):
        pts = as_points(x, d)
        flat = pts.reshape(-1, d)
        rad = np.linalg.norm(flat - c, axis=-1)
        out = f(flat, c, d).astype(float)
        inside = rad < r
        if np.any(inside):
            arg = flat[inside, 0] if d == 1 else flat[inside]
            out[inside] = interior(arg)
        return out.reshape(pts.shape[:-1])

    bps = (c[0] - r, c[0] + r, *f.edges()) if d == 1 else (r, *f.breakpoints)
    return HarmonicFunction("poisson-extension", evaluator, support_radius=R, params=sp, domain=ball,
                            breakpoints=tuple(sorted(set(bps))), tail_value=f.tail_value, data=f)


def constant_function(value: float, sp: Optional[StableParams] = None,
                      ball: Optional[BallDomain] = None, d: int = 1) -> HarmonicFunction:
    """The constant function; alpha-harmonic when sp is given, classical otherwise."""
    value = float(value)
    if ball is None:
        ball = BallDomain((0.0,) * (sp.d if sp else d), 1.0)
    dim = ball.d
    ev = lambda x: np.full(as_points(x, dim).shape[:-1], value)
    grad = lambda x: np.zeros(as_points(x, dim).shape)
    data = ExteriorData(tail_value=value, support_radius=ball.radius) if sp is not None else None
    return HarmonicFunction("constant", ev, gradient=grad, support_radius=ball.radius, params=sp,
                            domain=ball, breakpoints=(), tail_value=value, data=data)


def martin_combination(sp: StableParams, ball: BallDomain, atoms, x0) -> HarmonicFunction:
    """sum_i w_i M(., z_i), singular alpha-harmonic (zero off the ball)."""
    atoms = tuple((tuple(np.atleast_1d(np.asarray(z, dtype=float))), float(w)) for z, w in atoms)
    if not atoms:
        raise DomainError("need at least one atom")
    x0 = tuple(np.atleast_1d(np.asarray(x0, dtype=float)))
    for z, _ in atoms:
        martin_kernel_frac(sp, ball, x0, z, x0)  # validates z and x0

    def evaluator(x):
        pts = as_points(x, ball.d)
        out = np.zeros(pts.shape[:-1])
        for z, w in atoms:
            out = out + w * np.reshape(martin_kernel_frac(sp, ball, pts, z, x0), out.shape)
        return out

    bps = (ball.center[0] - ball.radius, ball.center[0] + ball.radius) if ball.d == 1 else (ball.radius,)
    return HarmonicFunction("martin-combination", evaluator, support_radius=ball.radius, params=sp,
                            domain=ball, breakpoints=bps, tail_value=0.0, atoms=atoms,
                            meta={"x0": x0})


def classical_harmonic(kind: str, n=1, ball: Optional[BallDomain] = None) -> HarmonicFunction:
    """Classical harmonic functions on the unit disk with analytic gradients.

    monomial-re: Re (x1 + i x2)^n;  poisson-profile: (1 - |x|^2)/|x - zeta|^2 with n = zeta;
    constant: the value n.
    """
    ball = ball or BallDomain((0.0, 0.0), 1.0)
    if kind == "monomial-re":
        n = int(n)
        if n < 0:
            raise DomainError("monomial degree must be >= 0")

        def ev(x):
            p = as_points(x, 2)
            return np.real((p[..., 0] + 1j * p[..., 1]) ** n)

        def grad(x):
            p = as_points(x, 2)
            z = p[..., 0] + 1j * p[..., 1]
            dz = n * z ** (n - 1) if n > 0 else np.zeros_like(z)
            return np.stack([np.real(dz), -np.imag(dz)], axis=-1)

        return HarmonicFunction("classical-polynomial", ev, gradient=grad, domain=ball, meta={"n": n})
    if kind == "poisson-profile":
        zeta = np.asarray(n, dtype=float)
        if zeta.shape != (2,) or not math.isclose(float(np.linalg.norm(zeta)), 1.0, rel_tol=1e-12):
            raise DomainError("zeta must be a point on the unit circle")

        def ev(x):
            p = as_points(x, 2)
            return (1.0 - np.sum(p * p, axis=-1)) / np.sum((p - zeta) ** 2, axis=-1)

        def grad(x):
            p = as_points(x, 2)
            q = np.sum((p - zeta) ** 2, axis=-1)[..., None]
            num = (1.0 - np.sum(p * p, axis=-1))[..., None]
            return -2.0 * p / q - 2.0 * num * (p - zeta) / q ** 2

        return HarmonicFunction("classical-poisson-profile", ev, gradient=grad, domain=ball,
                                meta={"zeta": tuple(zeta)})
    if kind == "constant":
        return constant_function(float(n), None, ball)
    raise DomainError(f"unknown classical kind {kind!r}")


# ---------------------------------------------------------------- operators

def _near_radius(x, breakpoints_abs, scale):
    gaps = [abs(b - x) for b in breakpoints_abs]
    return 0.5 * min(gaps + [scale])


def frac_laplacian_eval(sp: StableParams, phi: HarmonicFunction, x, spec: QuadratureSpec) -> float:
    """Principal-value fractional Laplacian of phi at x.

    The near field uses the symmetrized second difference (first-order Taylor term
    removed) with a quadratic model below 1e-3 of the near radius; the mid field is
    adaptive; beyond phi's support radius the closed form of the kernel tail is used.
    """
    d = sp.d
    if not math.isfinite(phi.support_radius):
        raise DomainError("phi needs a finite support radius")
    ball = phi.domain
    c = ball.c if ball is not None else np.zeros(d)
    R = phi.support_radius
    a = sp.alpha
    xp = as_points(x, d).reshape(-1)
    phix = float(phi(xp if d > 1 else xp[0]))
    if d == 1:
        x1 = float(xp[0])
        eta = _near_radius(x1, phi.breakpoints, 1.0)
        rc = 1e-3 * eta
        S = lambda rho: phi(x1 + rho) + phi(x1 - rho) - 2.0 * phix
        near = integrate_interval(lambda rho: S(rho) * rho ** (-1.0 - a), rc, eta, spec)
        model = float(S(np.array([rc]))[0]) * rc ** (-a) / (2.0 - a)
        lo, hi = c[0] - R, c[0] + R
        g = lambda y: (phi(y) - phix) * np.abs(y - x1) ** (-1.0 - a)
        graded = tuple(phi.breakpoints)
        far = ZERO_Q
        if x1 - eta > lo:
            far = far + integrate_interval(g, lo, x1 - eta, spec, graded=graded, breakpoints=graded)
        if x1 + eta < hi:
            far = far + integrate_interval(g, x1 + eta, hi, spec, graded=graded, breakpoints=graded)
        tail = (phi.tail_value - phix) * ((hi - x1) ** (-a) + (x1 - lo) ** (-a)) / a
        total = near + far
        if not total.converged:
            raise QuadratureError("fractional Laplacian quadrature did not converge",
                                  partial=sp.A * (total.value + model + tail))
        return sp.A * (total.value + model + tail)
    if d == 2:
        return _frac_laplacian_2d(sp, phi, xp, phix, c, R, spec)
    raise DomainError("frac_laplacian_eval supports d = 1 and d = 2")


ZERO_Q = QuadResult(0.0, 0.0, 0, True)


def _frac_laplacian_2d(sp, phi, xp, phix, c, R, spec):
    a = sp.alpha
    rb = [b for b in phi.breakpoints]  # radii about c where phi is not smooth
    dist_c = float(np.linalg.norm(xp - c))
    eta = 0.5 * min([abs(b - dist_c) for b in rb] + [1.0])
    rc = 1e-3 * eta
    nth = 64
    th = 2 * math.pi * np.arange(nth) / nth
    dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)

    def circle_mean(rhos):
        rhos = np.atleast_1d(rhos)
        pts = xp[None, None, :] + rhos[:, None, None] * dirs[None, :, :]
        return phi(pts.reshape(-1, 2)).reshape(len(rhos), nth).mean(axis=1)

    near = integrate_interval(lambda r: 2 * math.pi * (circle_mean(r) - phix) * r ** (-1.0 - a), rc, eta, spec)
    model = 2 * math.pi * float(circle_mean(rc)[0] - phix) * rc ** (-a) / (2.0 - a)
    rho_out = R + dist_c
    inner_spec = spec.replace(rel_tol=spec.rel_tol * 0.1, abs_tol=spec.abs_tol * 0.1)

    def ring(rhos):
        out = np.empty(len(rhos))
        for i, rho in enumerate(rhos):
            br = []
            for rad in set(rb) | {R}:
                br += list(_crossings(xp, rho, c, rad))
            f = lambda t, rho=rho: (phi(np.stack([xp[0] + rho * np.cos(t), xp[1] + rho * np.sin(t)], -1))
                                    - phix)
            out[i] = integrate_interval(f, 0.0, 2 * math.pi, inner_spec, graded=br, breakpoints=br,
                                        initial_cells=4).value * rho ** (-1.0 - a)
        return out

    radial_breaks = sorted({abs(b - dist_c) for b in set(rb) | {R}} | {b + dist_c for b in set(rb) | {R}})
    radial_breaks = [b for b in radial_breaks if eta < b < rho_out]
    far = integrate_interval(ring, eta, rho_out, spec, graded=radial_breaks, breakpoints=radial_breaks)
    tail = (phi.tail_value - phix) * 2 * math.pi * rho_out ** (-a) / a
    total = near + far
    if not total.converged:
        raise QuadratureError("fractional Laplacian quadrature did not converge",
                              partial=sp.A * (total.value + model + tail))
    return sp.A * (total.value + model + tail)


def _crossings(xp, rho, c, rad):
    from .integrate import _circle_crossings
    return _circle_crossings(xp[0], xp[1], rho, c[0], c[1], rad)


def fd_laplacian(fun, x, step: float = 2e-3) -> float:
    """Richardson-extrapolated 5-point (2d+1 point) Laplacian."""
    x = np.asarray(x, dtype=float)
    d = x.size

    def lap(h):
        tot = 0.0
        f0 = float(fun(x))
        for i in range(d):
            e = np.zeros(d)
            e[i] = h
            tot += float(fun(x + e)) + float(fun(x - e)) - 2.0 * f0
        return tot / (h * h)

    return (4.0 * lap(step / 2.0) - lap(step)) / 3.0


def laplacian_formula_check(p: float, u: HarmonicFunction, h: HarmonicFunction, eps: float, x,
                            step: float = 2e-3):
    """(FD Laplacian of (u^2/h^2+eps^2)^(p/2) h at x, closed form of the same).

    The closed form is p (u^2/h^2+eps^2)^((p-4)/2) [(p-1) u^2/h^2 + eps^2] |grad(u/h)|^2 h;
    for eps = 0 it is evaluated as p(p-1)|u/h|^(p-2) |grad(u/h)|^2 h.
    """
    if u.gradient is None or h.gradient is None:
        raise DomainError("analytic gradients required")
    x = np.asarray(x, dtype=float)
    offs = [np.zeros_like(x)] + [s * step * e for e in np.eye(x.size) for s in (-1.0, 1.0)]
    if min(float(h(x + o)) for o in offs) <= 0.0:
        raise DomainError("h must be positive near x")

    def phi(y):
        r = float(u(y)) / float(h(y))
        return (r * r + eps * eps) ** (p / 2.0) * float(h(y))

    lhs = fd_laplacian(phi, x, step)
    uv, hv = float(u(x)), float(h(x))
    gu, gh = np.asarray(u.gradient(x), dtype=float), np.asarray(h.gradient(x), dtype=float)
    grad_r = gu / hv - uv * gh / hv ** 2
    g2 = float(grad_r @ grad_r)
    r = uv / hv
    if eps == 0.0:
        rhs = p * (p - 1.0) * abs(r) ** (p - 2.0) * g2 * hv if r != 0.0 else (
            0.0 if p > 2 else (2.0 * g2 * hv if p == 2 else math.inf))
    else:
        f = r * r + eps * eps
        rhs = p * f ** ((p - 4.0) / 2.0) * ((p - 1.0) * r * r + eps * eps) * g2 * hv
    return lhs, rhs
