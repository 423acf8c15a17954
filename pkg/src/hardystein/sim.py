"""Monte Carlo exits: exact ball exits of the isotropic stable process, walk-on-spheres
for the stable and Brownian processes, and chunked expectation estimates.

Streams: RngStream(seed, stream_id) seeds numpy's PCG64 from
SeedSequence(seed, spawn_key=(stream_id,)); chunk k of an estimate with stream s uses
spawn_key (s, k).  Chunk sizes do not depend on the worker count, and chunk results are
combined in chunk order, so estimates are bit-identical for any number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import betaincinv

from .core import BallDomain, DomainError, StableParams, as_points

MAX_WOS_STEPS = 10 ** 6
CHUNK = 8192


class StepCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0
    chunk: Optional[int] = None

    def generator(self) -> np.random.Generator:
        key = (self.stream_id,) if self.chunk is None else (self.stream_id, self.chunk)
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=key)))

    def for_chunk(self, k: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, k)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("an estimate needs n >= 2")

    def within(self, value: float, k: float = 3.0) -> bool:
        return abs(self.mean - value) <= k * self.stderr


def _gen(rng) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngStream) else rng


def _directions(gen: np.random.Generator, n: int, d: int) -> np.ndarray:
    if d == 1:
        return np.where(gen.random(n) < 0.5, -1.0, 1.0)[:, None]
    g = gen.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_radius(alpha: float, gen: np.random.Generator, n: int) -> np.ndarray:
    """|Y - c| / r for the exit from the center; inverse CDF of 1/t^2 ~ Beta(alpha/2, 1 - alpha/2)."""
    q = gen.random(n)
    q = np.where(q == 0.0, 2.0 ** -54, q)
    # upper quantile: 1/t^2 = B with P(B <= b) = q, so large t come from small q
    b = betaincinv(alpha / 2.0, 1.0 - alpha / 2.0, q)
    t = 1.0 / np.sqrt(np.maximum(b, np.finfo(float).tiny))
    # t > 1 almost surely; b can round to 1 when alpha is large
    return np.maximum(t, _ONE_UP)


_ONE_UP = float(np.nextafter(1.0, 2.0))
_SNAP_ULPS = 8.0


def _snap_outside(pts: np.ndarray, ball: BallDomain) -> np.ndarray:
    """Move points that round onto the sphere to just outside it.

    Exits are by jump, so a landing within a few ulps of the sphere is a rounding artifact
    of a point strictly outside.
    """
    off = pts - ball.c
    rad = np.linalg.norm(off, axis=1)
    tol = _SNAP_ULPS * np.finfo(float).eps * ball.radius
    snap = (rad <= ball.radius) & (rad > ball.radius - tol)
    if np.any(snap):
        target = ball.radius + tol
        pts = pts.copy()
        pts[snap] = ball.c + off[snap] * (target / rad[snap])[:, None]
    return pts


def sample_exit_ball(sp: StableParams, ball: BallDomain, rng, n: Optional[int] = None) -> np.ndarray:
    """Exit position from the center of the ball; shape (d,) or (n, d)."""
    gen = _gen(rng)
    m = 1 if n is None else int(n)
    t = sample_radius(sp.alpha, gen, m)
    pts = _snap_outside(ball.c[None, :] + ball.radius * t[:, None] * _directions(gen, m, ball.d), ball)
    return pts[0] if n is None else pts


def wos_stable_exit(sp: StableParams, domain: BallDomain, x, rng, n: Optional[int] = None,
                    max_steps: int = MAX_WOS_STEPS):
    """Walk on spheres for the stable process, started at x.

    Every step samples the exact exit from the largest ball about the current position
    inside the domain; the walk stops at the first position outside the closed domain.
    Returns (points, steps) with shapes (d,), () or (n, d), (n,).
    """
    d = domain.d
    x = np.asarray(as_points(x, d), dtype=float).reshape(-1)
    if not bool(domain.contains(x)):
        raise DomainError("start must be interior")
    gen = _gen(rng)
    m = 1 if n is None else int(n)
    pos = np.repeat(x[None, :], m, axis=0)
    steps = np.zeros(m, dtype=np.int64)
    active = np.arange(m)
    while active.size:
        if steps[active[0]] >= max_steps:
            raise StepCapExceeded(f"walk exceeded {max_steps} steps")
        cur = pos[active]
        rad = domain.radius - np.linalg.norm(cur - domain.c, axis=1)
        t = sample_radius(sp.alpha, gen, active.size)
        new = _snap_outside(cur + (rad * t)[:, None] * _directions(gen, active.size, d), domain)
        pos[active] = new
        steps[active] += 1
        outside = np.linalg.norm(new - domain.c, axis=1) > domain.radius
        active = active[~outside]
    assert np.all(np.linalg.norm(pos - domain.c, axis=1) > domain.radius)
    return (pos[0], int(steps[0])) if n is None else (pos, steps)


def wos_brownian_exit(domain: BallDomain, x, eps_shell: Optional[float], rng, n: Optional[int] = None,
                      max_steps: int = MAX_WOS_STEPS) -> np.ndarray:
    """Classical walk on spheres; stops within eps_shell of the sphere and projects onto it."""
    d = domain.d
    eps_shell = 1e-4 * domain.radius if eps_shell is None else float(eps_shell)
    if not 0 < eps_shell < domain.radius:
        raise DomainError("eps_shell must lie in (0, radius)")
    x = np.asarray(as_points(x, d), dtype=float).reshape(-1)
    if not bool(domain.contains(x)):
        raise DomainError("start must be interior")
    gen = _gen(rng)
    m = 1 if n is None else int(n)
    pos = np.repeat(x[None, :], m, axis=0)
    active = np.arange(m)
    for _ in range(max_steps):
        cur = pos[active]
        rad = domain.radius - np.linalg.norm(cur - domain.c, axis=1)
        done = rad < eps_shell
        active = active[~done]
        if not active.size:
            break
        cur = cur[~done]
        pos[active] = cur + rad[~done][:, None] * _directions(gen, active.size, d)
    else:
        raise StepCapExceeded(f"walk exceeded {max_steps} steps")
    off = pos - domain.c
    proj = domain.c + domain.radius * off / np.linalg.norm(off, axis=1, keepdims=True)
    return proj[0] if n is None else proj


def mc_expectation(payoff: Callable, sampler: Callable, n: int, rng: RngStream, jobs: int = 1,
                   chunk: int = CHUNK) -> McEstimate:
    """Mean and standard error of payoff(sampler(rng, m)) over n independent exits.

    sampler(rng_stream, m) returns m exit points.  Work is split into fixed chunks with
    their own streams and evaluated on `jobs` threads; results are combined in chunk order.
    """
    if n < 100:
        raise DomainError("need n >= 100 samples")
    sizes = [chunk] * (n // chunk) + ([n % chunk] if n % chunk else [])

    def run(k):
        pts = sampler(rng.for_chunk(k), sizes[k])
        vals = np.asarray(payoff(pts), dtype=float).reshape(-1)
        bad = ~np.isfinite(vals)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise FloatingPointError(
                f"non-finite payoff at sample {k * chunk + i} (point {np.asarray(pts)[i]})")
        return vals

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(run, range(len(sizes))))
    else:
        parts = [run(k) for k in range(len(sizes))]
    vals = np.concatenate(parts)
    mean = float(np.mean(vals))
    sd = float(np.std(vals, ddof=1))
    return McEstimate(mean, sd / math.sqrt(n), n)


def exit_cdf_line(sp: StableParams, ball: BallDomain, t, x=None):
    """CDF of the exit position on the line from x (default: center).

    Exact from the center for every alpha; for alpha = 1 also from any interior start.
    """
    from .kernels import cauchy_interval_measure, radial_exit_sf
    c, r = ball.center[0], ball.radius
    t = np.asarray(t, dtype=float)
    s = (t - c) / r
    if x is None or float(x) == c:
        sf = radial_exit_sf(sp.alpha, np.abs(s))
        out = np.where(s <= -1.0, 0.5 * sf, np.where(s >= 1.0, 1.0 - 0.5 * sf, 0.5))
        return out
    if sp.alpha != 1.0:
        raise DomainError("off-center exit CDF is only closed-form for alpha = 1")
    xi = (float(x) - c) / r
    left = cauchy_interval_measure(xi, -np.inf, -1.0)
    out = np.empty_like(s)
    for i, v in np.ndenumerate(s):
        if v <= -1.0:
            out[i] = cauchy_interval_measure(xi, -np.inf, v)
        elif v < 1.0:
            out[i] = left
        else:
            out[i] = left + cauchy_interval_measure(xi, 1.0, v)
    return out
