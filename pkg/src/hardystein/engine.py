"""Both sides of the Hardy-Stein identities, the Krickeberg decomposition and the
Littlewood-Paley inequality, packaged as IdentityReports.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (LHS_METHODS, BallDomain, DomainError, IdentityReport, QuadratureSpec,
                   StableParams, as_points)
from .harmonic import ExteriorData, HarmonicFunction, poisson_extension
from .integrate import Region
from .kernels import green_classical, green_frac
from .quadrature import (ExitKernel, exit_kernel_integral, graded_spec, greens_outer_integral,
                         inner_jump_integral, inner_jump_integral_conditional, rounding_bound)
from .sim import RngStream, mc_expectation, sample_exit_ball, wos_brownian_exit, wos_stable_exit

NONLOCAL = ("H2U", "HpU", "HpD", "H2Uh", "HpUh", "HpDh")
CLASSICAL = ("classical-chp", "classical-cHS")
IDENTITIES = NONLOCAL + CLASSICAL + ("krickeberg", "littlewood-paley")
CONDITIONAL = ("H2Uh", "HpUh", "HpDh", "classical-cHS")

INNER_SPEC = QuadratureSpec(rel_tol=1e-6, abs_tol=1e-10)
OUTER_SPEC = QuadratureSpec(rel_tol=1e-5, abs_tol=1e-10)


class SpecError(ValueError):
    """An IdentitySpec that cannot be verified as given."""


@dataclass
class IdentitySpec:
    identity_id: str
    domain: BallDomain
    u: HarmonicFunction
    p: float = 2.0
    x0: Optional[tuple] = None
    sp: Optional[StableParams] = None
    sub_ball: Optional[BallDomain] = None
    h: Optional[HarmonicFunction] = None
    lhs_method: str = "exact-kernel-integral"
    quad: QuadratureSpec = INNER_SPEC
    outer: QuadratureSpec = OUTER_SPEC
    mc: Optional[tuple] = None  # (n, seed)
    exhaustion_depth: int = 6
    experiment_id: str = ""
    green_method: str = "quadrature"  # classical only: or "closed-form"

    def __post_init__(self):
        if self.x0 is None:
            self.x0 = self.domain.center
        self.x0 = tuple(float(v) for v in np.atleast_1d(np.asarray(self.x0, dtype=float)))
        self.validate()

    @property
    def region(self) -> BallDomain:
        """The set U whose exit is taken: sub_ball when given, else the domain."""
        return self.sub_ball if self.sub_ball is not None else self.domain

    def validate(self) -> None:
        iid = self.identity_id
        if iid not in IDENTITIES:
            raise SpecError(f"unknown identity {iid!r}")
        if len(self.x0) != self.domain.d:
            raise SpecError("x0 has the wrong dimension")
        classical = iid in CLASSICAL or iid == "littlewood-paley"
        if classical:
            if self.sp is not None or not self.u.is_classical:
                raise SpecError(f"{iid} needs classical functions and no stable parameters")
        else:
            if self.sp is None:
                raise SpecError(f"{iid} needs stable parameters")
            if self.sp.d != self.domain.d:
                raise SpecError("dimension of params and domain differ")
            if self.u.is_classical:
                raise SpecError(f"{iid} needs an alpha-harmonic u")
        if iid in CONDITIONAL:
            if self.h is None:
                raise SpecError(f"{iid} needs h")
        elif self.h is not None and iid != "classical-chp":
            raise SpecError(f"{iid} takes no h")
        if iid in ("H2Uh", "HpUh") and self.sub_ball is None:
            raise SpecError(f"{iid} is verified on a sub-ball; give sub_ball")
        if self.sub_ball is not None and not self.sub_ball.is_inside(self.domain):
            raise SpecError("sub_ball must lie strictly inside the domain")
        if not bool(self.region.contains(np.asarray(self.x0))):
            raise SpecError("x0 must lie inside the sub-ball (or domain)")
        if iid in ("H2U", "H2Uh") and self.p != 2:
            raise SpecError(f"p must be 2 for {iid}")
        if iid == "krickeberg":
            if not self.p >= 1:
                raise SpecError("krickeberg needs p >= 1")
        elif iid == "littlewood-paley":
            if not self.p >= 2:
                raise SpecError("littlewood-paley needs p >= 2")
        elif not self.p > 1:
            raise SpecError("p must exceed 1")
        if self.lhs_method not in LHS_METHODS:
            raise SpecError(f"unknown lhs method {self.lhs_method!r}")
        if self.lhs_method == "monte-carlo" and self.mc is None:
            raise SpecError("monte-carlo lhs needs mc = (n, seed)")
        if self.green_method not in ("quadrature", "closed-form"):
            raise SpecError(f"unknown green method {self.green_method!r}")
        if self.exhaustion_depth < 1:
            raise SpecError("exhaustion depth must be >= 1")
        if iid not in CLASSICAL and self.domain.d != 1 and iid != "littlewood-paley":
            raise SpecError("nonlocal identities are implemented for d = 1")


@dataclass
class Side:
    value: float
    budget: list = field(default_factory=list)
    details: dict = field(default_factory=dict)


# ---------------------------------------------------------------- nonlocal, plain

def _exit_region(U: BallDomain, D: BallDomain, support_radius: float) -> Region:
    R = support_radius + abs(U.center[0] - D.center[0])
    return Region("exterior-shell", (U.center[0], U.radius, max(R, U.radius)))


def _exit_spec(quad: QuadratureSpec, alpha: float) -> QuadratureSpec:
    # exit integrals are one-dimensional and cheap, so they run 1e4 times tighter than the
    # inner integrals; this keeps the LHS error far below the RHS budget
    return graded_spec(quad.replace(rel_tol=quad.rel_tol * 1e-4, abs_tol=quad.abs_tol * 1e-4), alpha)


def exit_moment(sp: StableParams, U: BallDomain, D: BallDomain, u: HarmonicFunction, p: float, x0,
                quad: QuadratureSpec):
    """E_x0 |u(X_tau_U)|^p by quadrature against the exit kernel of U (d = 1)."""
    region = _exit_region(U, D, u.support_radius)
    payoff = lambda w: np.abs(u(w)) ** p
    return exit_kernel_integral(ExitKernel("fractional", U, sp), x0[0], payoff, region, _exit_spec(quad, sp.alpha),
                                tail_value=abs(u.tail_value) ** p, breakpoints=u.breakpoints)


def _exhaust(U: BallDomain, x0, depth: int):
    balls = [b for b in U.exhaustion(depth) if bool(b.contains(np.asarray(x0)))]
    if not balls:
        raise DomainError("x0 lies outside every exhaustion ball")
    return balls


def lhs_hp(spec: IdentitySpec) -> Side:
    sp, u, p, U, D = spec.sp, spec.u, spec.p, spec.region, spec.domain
    if spec.lhs_method == "exact-kernel-integral":
        res = exit_moment(sp, U, D, u, p, spec.x0, spec.quad)
        return Side(res.value, [("lhs-quadrature", res.err_est), ("lhs-rounding", rounding_bound(res.value))],
                    {"lhs_cells": res.cells, "lhs_converged": res.converged})
    if spec.lhs_method == "monte-carlo":
        n, seed = spec.mc
        if np.allclose(spec.x0, U.center):
            sampler = lambda rng, m: sample_exit_ball(sp, U, rng, m)
        else:
            sampler = lambda rng, m: wos_stable_exit(sp, U, spec.x0, rng, m)[0]
        est = mc_expectation(lambda w: np.abs(u(w[:, 0])) ** p, sampler, int(n), RngStream(int(seed), 0))
        return Side(est.mean, [("mc-3-stderr", 3.0 * est.stderr)], {"mc_n": est.n, "mc_stderr": est.stderr})
    vals, errs = exhaustion_sequence(spec)
    inc = abs(vals[-1] - vals[-2]) if len(vals) > 1 else 0.0
    return Side(vals[-1], [("exhaustion-increment", inc), ("lhs-quadrature", errs[-1])], {"exhaustion": vals})


def exhaustion_sequence(spec: IdentitySpec):
    """E_x0|u(X_tau_{U_n})|^p along the exhaustion U_n of U (radii r(1 - 2^-n))."""
    vals, errs = [], []
    for ball in _exhaust(spec.region, spec.x0, spec.exhaustion_depth):
        res = exit_moment(spec.sp, ball, spec.domain, spec.u, spec.p, spec.x0, spec.quad)
        vals.append(res.value)
        errs.append(res.err_est)
    return vals, errs


def _outer_region(U: BallDomain) -> Region:
    c, r = U.center[0], U.radius
    return Region("interval", (c - r, c + r))


def _stacked(fn):
    def g(ys):
        out = np.empty((2, len(ys)))
        for i, y in enumerate(ys):
            q = fn(float(y))
            out[0, i], out[1, i] = q.value, q.err_est
        return out
    return g


def _inner_spec(quad: QuadratureSpec, U: BallDomain, alpha: float, y: float) -> QuadratureSpec:
    """The inner tolerance at y: abs_tol grows like (r / delta(y))^(alpha/2), mirroring the
    decay of the Green weight G(x0, y) ~ delta(y)^(alpha/2) at the boundary, so the
    weighted inner error stays uniform.  Near the boundary u(z) - u(y) is tiny compared
    with u, and a fixed absolute target would chase rounding noise."""
    delta = U.radius - abs(y - U.center[0])
    scale = (U.radius / delta) ** (alpha / 2.0) if delta > 0 else 1.0
    return quad.replace(abs_tol=quad.abs_tol * max(scale, 1.0))


def rhs_hp(spec: IdentitySpec) -> Side:
    sp, u, p, U = spec.sp, spec.u, spec.p, spec.region
    x0 = spec.x0[0]
    base = abs(float(u(x0))) ** p
    inner = _stacked(lambda y: inner_jump_integral(sp, u, y, p, _inner_spec(spec.quad, U, sp.alpha, y)))
    res = greens_outer_integral(lambda a, ys: green_frac(sp, U, a, ys), x0, inner, _outer_region(U),
                                graded_spec(spec.outer, sp.alpha))
    total = base + res.value
    return Side(total, [("rhs-quadrature", res.err_est), ("rhs-rounding", rounding_bound(total))],
                {"u_x0_p": base, "double_integral": res.value, "rhs_cells": res.cells,
                 "rhs_converged": res.converged})


# ---------------------------------------------------------------- nonlocal, conditional

def _ratio_payoff(u, h, p):
    def payoff(w):
        uw, hw = u(w), h(w)
        out = np.zeros_like(np.asarray(uw, dtype=float))
        pos = hw > 0
        out[pos] = np.abs(uw[pos]) ** p * hw[pos] ** (1.0 - p)
        return out
    return payoff


def lhs_conditional(spec: IdentitySpec, U: Optional[BallDomain] = None) -> Side:
    """E_x0[|u|^p / h^(p-1) at X_tau_U, restricted to exits inside D]."""
    sp, u, h, p, D = spec.sp, spec.u, spec.h, spec.p, spec.domain
    U = U or spec.region
    R = D.radius + abs(U.center[0] - D.center[0])
    region = Region("exterior-shell", (U.center[0], U.radius, R))
    D_edges = (D.center[0] - D.radius, D.center[0] + D.radius)
    res = exit_kernel_integral(ExitKernel("fractional", U, sp), spec.x0[0], _ratio_payoff(u, h, p), region,
                               _exit_spec(spec.quad, sp.alpha), breakpoints=D_edges)
    return Side(res.value, [("lhs-quadrature", res.err_est), ("lhs-rounding", rounding_bound(res.value))],
                {"lhs_cells": res.cells})


def rhs_conditional(spec: IdentitySpec, U: Optional[BallDomain] = None) -> Side:
    sp, u, h, p = spec.sp, spec.u, spec.h, spec.p
    U = U or spec.region
    x0 = spec.x0[0]
    hx = float(h(x0))
    base = abs(float(u(x0))) ** p * hx ** (1.0 - p)
    inner = _stacked(lambda y: inner_jump_integral_conditional(sp, u, h, y, p,
                                                               _inner_spec(spec.quad, U, sp.alpha, y)))
    res = greens_outer_integral(lambda a, ys: green_frac(sp, U, a, ys), x0, inner, _outer_region(U),
                                graded_spec(spec.outer, sp.alpha))
    total = base + res.value
    return Side(total, [("rhs-quadrature", res.err_est), ("rhs-rounding", rounding_bound(total))],
                {"base": base, "double_integral": res.value, "h_x0": hx})


# ---------------------------------------------------------------- classical

def _h_or_one(spec):
    if spec.h is not None:
        return spec.h
    from .harmonic import constant_function
    return constant_function(1.0, None, spec.domain)


def lhs_classical(spec: IdentitySpec) -> Side:
    u, h, p, U = spec.u, _h_or_one(spec), spec.p, spec.region
    payoff = lambda w: np.abs(u(w)) ** p * np.asarray(h(w), dtype=float) ** (1.0 - p)
    if spec.lhs_method == "monte-carlo":
        n, seed = spec.mc
        est = mc_expectation(payoff, lambda rng, m: wos_brownian_exit(U, spec.x0, None, rng, m), int(n),
                             RngStream(int(seed), 0))
        return Side(est.mean, [("mc-3-stderr", 3.0 * est.stderr)], {"mc_n": est.n})
    res = exit_kernel_integral(ExitKernel("classical", U), spec.x0, payoff, None, spec.quad)
    return Side(res.value, [("lhs-quadrature", res.err_est), ("lhs-rounding", rounding_bound(res.value))])


def _ratio_energy(u, h, p):
    """|u/h|^(p-2) |grad(u/h)|^2 h, vectorized over (n, d) points."""
    def g(ys):
        uv, hv = u(ys), h(ys)
        gu, gh = u.gradient(ys), h.gradient(ys)
        grad_r = gu / hv[:, None] - (uv / hv ** 2)[:, None] * gh
        r = uv / hv
        g2 = np.sum(grad_r * grad_r, axis=-1)
        if p == 2:
            return g2 * hv
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(r == 0.0, 0.0 if p > 2 else np.inf, np.abs(r) ** (p - 2.0))
        return w * g2 * hv
    return g


def rhs_classical(spec: IdentitySpec) -> Side:
    u, h, p, U = spec.u, _h_or_one(spec), spec.p, spec.region
    x0 = np.asarray(spec.x0)
    hx = float(h(x0))
    base = abs(float(u(x0))) ** p * hx ** (1.0 - p)
    g = _ratio_energy(u, h, p)
    if spec.green_method == "closed-form":
        # valid when the energy density is constant on U: int G_U(x0, y) dy = (r^2 - |x0 - c|^2) / (2d)
        probe = g(np.asarray(U.c)[None, :] + U.radius * np.array([[0.0, 0.0], [0.3, -0.2], [-0.5, 0.4]]))
        if not np.allclose(probe, probe[0], rtol=1e-13, atol=0.0):
            raise SpecError("closed-form Green path needs a constant energy density")
        mass = (U.radius ** 2 - float(np.sum((x0 - U.c) ** 2))) / (2.0 * U.d)
        val = p * (p - 1.0) * float(probe[0]) * mass
        total = base + val
        return Side(total, [("rhs-rounding", rounding_bound(total))], {"double_integral": val})
    region = Region("disk-polar", (U.center[0], U.center[1], U.radius, x0[0], x0[1]))
    res = greens_outer_integral(lambda a, ys: green_classical(U, a, ys), x0, g, region, spec.outer)
    val = p * (p - 1.0) * res.value
    total = base + val
    return Side(total, [("rhs-quadrature", p * (p - 1.0) * res.err_est), ("rhs-rounding", rounding_bound(total))],
                {"double_integral": val})


# ---------------------------------------------------------------- verify

def verify(spec: IdentitySpec) -> IdentityReport:
    spec.validate()
    t0 = time.perf_counter()
    iid = spec.identity_id
    relation = "equality"
    if iid in ("H2U", "HpU", "HpD"):
        L, Rs = lhs_hp(spec), rhs_hp(spec)
        if iid == "HpD" and spec.lhs_method == "exact-kernel-integral" and spec.region is spec.domain:
            vals, _ = exhaustion_sequence(spec)
            L.details["exhaustion"] = vals
            L.details["full_domain_value"] = L.value
    elif iid in ("H2Uh", "HpUh"):
        L, Rs = lhs_conditional(spec), rhs_conditional(spec)
    elif iid == "HpDh":
        L, Rs = _conditional_exhaustion(spec)
    elif iid in CLASSICAL:
        L, Rs = lhs_classical(spec), rhs_classical(spec)
    elif iid == "krickeberg":
        L, Rs = _krickeberg_sides(spec)
    else:
        lhs_gap, rhs_bound, _, budget, details = littlewood_paley_check(
            spec.domain, spec.u, spec.p, spec.x0, spec.quad, spec.outer)
        L, Rs = Side(lhs_gap, budget, details), Side(rhs_bound)
        relation = "inequality"
    runtime = (time.perf_counter() - t0) * 1e3
    details = {**L.details, **{f"rhs_{k}" if k in L.details else k: v for k, v in Rs.details.items()}}
    seed = spec.mc[1] if spec.mc is not None else None
    return IdentityReport.from_sides(
        iid, L.value, Rs.value, spec.lhs_method, L.budget + Rs.budget, seed=seed,
        experiment_id=spec.experiment_id, d=spec.domain.d, alpha=None if spec.sp is None else spec.sp.alpha,
        p=spec.p, runtime_ms=runtime, details=details, relation=relation)


def _conditional_exhaustion(spec: IdentitySpec):
    """Conditional identity on the exhaustion of D: the last ball is reported, the trend kept."""
    trend = []
    L = Rs = None
    for ball in _exhaust(spec.domain, spec.x0, spec.exhaustion_depth):
        L = lhs_conditional(spec, ball)
        Rs = rhs_conditional(spec, ball)
        trend.append((ball.radius, L.value, Rs.value))
    L.details["trend"] = trend
    return L, Rs


# ---------------------------------------------------------------- Krickeberg

@dataclass
class KrickebergReport:
    depth: int
    f_x0: float
    g_x0: float
    norm1: float
    sum_error: float
    monotone: bool
    max_monotone_violation: float
    p: float
    norm_p_u: float
    norm_p_f: float
    norm_p_g: float
    additivity_error: float
    norm_p_f_depth: float
    norm_p_g_depth: float
    conjecture_max_diff: Optional[float]
    f_sequence_x0: list
    g_sequence_x0: list
    grid: list


def _positive_part_data(u: HarmonicFunction, sign: float, D: BallDomain) -> ExteriorData:
    R = u.support_radius
    return ExteriorData(func=lambda y: np.maximum(sign * u(y[..., 0]), 0.0), support_radius=R,
                        breakpoints=tuple(u.breakpoints))


def krickeberg_decompose(sp: StableParams, domain: BallDomain, u: HarmonicFunction, depth: int,
                         quad: QuadratureSpec, x0=None, p: float = 2.0, grid_size: int = 50):
    """u = f - g with f_n = E[u^+ at the exit of U_n], g_n likewise with u^-; depth-N approximants.

    Returns (f_N, g_N, KrickebergReport).  Every f_n equals u^+ off D, hence so does the
    limit f, and its p-norm is the exit moment from D of u^+ (the full-domain shortcut for
    bounded data); likewise for g.  The exit moments of f_N, g_N from U_N, the norms of the
    approximants themselves, are reported as norm_p_f_depth and norm_p_g_depth.
    """
    if sp.d != 1 or u.kind not in ("poisson-extension", "constant"):
        raise DomainError("the decomposition is implemented for Poisson extensions on the line")
    if depth < 2:
        raise DomainError("depth must be >= 2")
    x0 = domain.center[0] if x0 is None else float(np.asarray(x0).reshape(-1)[0])
    balls = domain.exhaustion(depth)
    plus, minus = _positive_part_data(u, 1.0, domain), _positive_part_data(u, -1.0, domain)
    fs = [poisson_extension(sp, b, plus) for b in balls]
    gs = [poisson_extension(sp, b, minus) for b in balls]
    f, g = fs[-1], gs[-1]
    c, r = domain.center[0], domain.radius
    grid = np.linspace(c - 0.98 * r, c + 0.98 * r, grid_size)
    viol = 0.0
    for seq in (fs, gs):
        vals = np.array([fn(grid) for fn in seq])
        viol = max(viol, float(np.max(vals[:-1] - vals[1:])))
    tol = 1e-9
    f_x0, g_x0 = float(f(x0)), float(g(x0))
    norm1 = exit_moment(sp, domain, domain, u, 1.0, (x0,), quad).value
    norm_p_u = exit_moment(sp, domain, domain, u, p, (x0,), quad).value
    norm_p_f = exit_moment(sp, domain, domain, f, p, (x0,), quad).value
    norm_p_g = exit_moment(sp, domain, domain, g, p, (x0,), quad).value
    norm_p_f_depth = exit_moment(sp, balls[-1], domain, f, p, (x0,), quad).value
    norm_p_g_depth = exit_moment(sp, balls[-1], domain, g, p, (x0,), quad).value
    conj = None
    if u.data is not None and u.data.func is None:
        pos = ExteriorData.step([(lo, hi, max(v, 0.0)) for lo, hi, v in u.data.pieces],
                                tail_value=max(u.data.tail_value, 0.0), support_radius=u.data.support_radius)
        ext = poisson_extension(sp, domain, pos)
        inner = grid[np.abs(grid - c) < balls[0].radius]
        conj = float(np.max(np.abs(ext(inner) - f(inner))))
    report = KrickebergReport(
        depth=depth, f_x0=f_x0, g_x0=g_x0, norm1=norm1, sum_error=abs(f_x0 + g_x0 - norm1),
        monotone=viol <= tol, max_monotone_violation=viol, p=p, norm_p_u=norm_p_u, norm_p_f=norm_p_f,
        norm_p_g=norm_p_g, additivity_error=abs(norm_p_u - norm_p_f - norm_p_g),
        norm_p_f_depth=norm_p_f_depth, norm_p_g_depth=norm_p_g_depth, conjecture_max_diff=conj,
        f_sequence_x0=[float(fn(x0)) for fn in fs], g_sequence_x0=[float(gn(x0)) for gn in gs],
        grid=grid.tolist())
    return f, g, report


def _krickeberg_sides(spec: IdentitySpec):
    _, _, rep = krickeberg_decompose(spec.sp, spec.domain, spec.u, spec.exhaustion_depth, spec.quad,
                                     spec.x0, spec.p)
    # the depth-N sum approaches the norm from below; the gap at depth N is the truncation
    details = {k: v for k, v in rep.__dict__.items() if k != "grid"}
    L = Side(rep.f_x0 + rep.g_x0, [("exhaustion-truncation", _krickeberg_truncation(rep)),
                                   ("lhs-rounding", rounding_bound(rep.norm1))], details)
    return L, Side(rep.norm1)


def _krickeberg_truncation(rep: KrickebergReport) -> float:
    """Remaining increase of f_n(x0) + g_n(x0) beyond depth N, by geometric extrapolation of
    the last two increments of each sequence, doubled as a safety margin (the increment
    ratios creep up toward their limit, so the plain geometric tail undershoots)."""
    total = 0.0
    for seq in (rep.f_sequence_x0, rep.g_sequence_x0):
        if len(seq) < 3:
            return float("inf")
        i1, i2 = seq[-2] - seq[-3], seq[-1] - seq[-2]
        q = i2 / i1 if i1 > 0 else 0.0
        if not 0.0 <= q < 1.0:
            return float("inf")
        total += i2 * q / (1.0 - q)
    return 2.0 * total


# ---------------------------------------------------------------- Littlewood-Paley

def littlewood_paley_check(domain: BallDomain, u: HarmonicFunction, p: float, x0=None,
                           quad: QuadratureSpec = INNER_SPEC, outer: QuadratureSpec = OUTER_SPEC):
    """(lhs_gap, rhs_bound, passed, budget, details) for
    ||u||_p^p - |u(x0)|^p >= p(p-1) d^(2-p) 2^(1-p) int G(x0, y) delta(y)^(p-2) |grad u(y)|^p dy.
    """
    if not p >= 2:
        raise DomainError("the inequality needs p >= 2")
    if u.gradient is None:
        raise DomainError("analytic gradient required")
    x0 = domain.center if x0 is None else tuple(np.asarray(x0, dtype=float).reshape(-1))
    spec = IdentitySpec("classical-chp", domain, u, p, x0, quad=quad, outer=outer)
    L, Rs = lhs_classical(spec), rhs_classical(spec)
    base = abs(float(u(np.asarray(x0)))) ** p
    lhs_gap = L.value - base
    d = domain.d
    const = p * (p - 1.0) * d ** (2.0 - p) * 2.0 ** (1.0 - p)
    c, r = domain.c, domain.radius

    def g(ys):
        delta = r - np.linalg.norm(ys - c, axis=-1)
        gn = np.linalg.norm(u.gradient(ys), axis=-1)
        return delta ** (p - 2.0) * gn ** p

    region = Region("disk-polar", (c[0], c[1], r, x0[0], x0[1]))
    res = greens_outer_integral(lambda a, ys: green_classical(domain, a, ys), x0, g, region, outer)
    rhs_bound = const * res.value
    budget = L.budget + [("bound-quadrature", const * res.err_est), ("rounding", rounding_bound(lhs_gap, rhs_bound))]
    passed = lhs_gap >= rhs_bound - sum(b for _, b in budget)
    details = {"identity_rhs_gap": Rs.value - base, "constant": const}
    return lhs_gap, rhs_bound, bool(passed), budget, details
