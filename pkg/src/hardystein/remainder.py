"""Second-order Taylor remainders of |x|^p and their comparison function.

All functions broadcast over numpy arrays.  Real arguments only.
"""
from __future__ import annotations

import numpy as np
from scipy import optimize
from scipy.special import binom

from .core import DomainError

# |b/a - 1| below this switches F to its binomial series
_SERIES_CUTOFF = 0.125
_SERIES_TERMS = 24


def _check_p(p):
    if not p > 1:
        raise DomainError(f"exponent must exceed 1, got {p!r}")


def signed_power(a, q):
    """a|a|^(q-1), i.e. sign(a)|a|^q, with value 0 at a = 0."""
    a = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a == 0.0, 0.0, np.sign(a) * np.abs(a) ** q)


def _f_series(p, delta):
    """|1+delta|^p - 1 - p delta for small delta, summed from the binomial series."""
    out = np.zeros_like(delta)
    # Horner on delta^2 * sum_{k>=2} binom(p,k) delta^(k-2)
    for k in range(_SERIES_TERMS + 1, 1, -1):
        out = out * delta + binom(p, k)
    return out * delta * delta


def remainder_F(p, a, b):
    """F(a, b) = |b|^p - |a|^p - p a|a|^(p-2) (b - a); nonnegative."""
    _check_p(p)
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    direct = np.abs(b) ** p - np.abs(a) ** p - p * signed_power(a, p - 1) * (b - a)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # b - a is exact when b is close to a, so delta keeps full relative accuracy
        delta = np.where(a != 0.0, (b - a) / np.where(a != 0.0, a, 1.0), np.inf)
    near = np.abs(delta) < _SERIES_CUTOFF
    if np.any(near):
        series = np.abs(a) ** p * _f_series(p, np.where(near, delta, 0.0))
        direct = np.where(near, series, direct)
    out = np.maximum(direct, 0.0)
    return out if out.ndim else float(out)


def remainder_F_eps(p, a, b, eps):
    """Regularized remainder (b^2+eps^2)^(p/2) - (a^2+eps^2)^(p/2) - p a (a^2+eps^2)^((p-2)/2) (b-a)."""
    _check_p(p)
    a, b, eps = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, eps)))
    # evaluate on rescaled arguments (F_eps is p-homogeneous in (a, b, eps)) so squares
    # neither underflow nor overflow
    m = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.abs(eps))
    m = np.where(m > 0.0, m, 1.0)
    sa_, sb, se = a / m, b / m, eps / m
    e2 = se * se
    sa = sa_ * sa_ + e2
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(sa_ == 0.0, 0.0, p * sa_ * sa ** ((p - 2.0) / 2.0))
    val = ((sb * sb + e2) ** (p / 2.0) - sa ** (p / 2.0) - slope * (sb - sa_)) * m ** p
    exact = remainder_F(p, a, b)
    out = np.where(eps == 0.0, exact, val)
    return out if out.ndim else float(out)


def comparator_K(p, a, b):
    """K(a, b) = (b - a)^2 max(|a|, |b|)^(p-2); zero when a = b."""
    _check_p(p)
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    m = np.maximum(np.abs(a), np.abs(b))
    diff2 = (b - a) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(diff2 == 0.0, 0.0, diff2 * m ** (p - 2.0))
    return out if out.ndim else float(out)


def neumaier_sum(terms, axis=0):
    """Compensated (Neumaier) summation along an axis of a stacked array."""
    terms = np.moveaxis(np.asarray(terms, dtype=float), axis, 0)
    s = np.zeros(terms.shape[1:])
    c = np.zeros(terms.shape[1:])
    for x in terms:
        t = s + x
        c += np.where(np.abs(s) >= np.abs(x), (s - t) + x, (x - t) + s)
        s = t
    return s + c


def conditional_terms(p, a, s, b, t):
    """The four terms of the expansion of F(a/s, b/t), stacked on axis 0."""
    a, s, b, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, s, b, t)))
    abs_a_p = np.abs(a) ** p
    return np.stack([
        np.abs(b) ** p / t ** p,
        -abs_a_p / (t * s ** (p - 1.0)),
        -p * signed_power(a, p - 1.0) * (b - a) / (t * s ** (p - 1.0)),
        (p - 1.0) * abs_a_p * (t - s) / (t * s ** p),
    ])


def conditional_remainder(p, a, s, b, t):
    """Expanded four-term form of F(a/s, b/t) for s, t > 0."""
    _check_p(p)
    if np.any(np.asarray(s) <= 0) or np.any(np.asarray(t) <= 0):
        raise DomainError("s and t must be positive")
    out = neumaier_sum(conditional_terms(p, a, s, b, t))
    return out if np.ndim(out) else float(out)


def weighted_conditional_remainder(p, a, s, b, t):
    """t * F(a/s, b/t) in expanded form; finite as t -> 0 and zero when b = t = 0.

    This is the integrand factor h(z) F(u(y)/h(y), u(z)/h(z)) with a = u(y), s = h(y),
    b = u(z), t = h(z).  Requires s > 0, t >= 0.
    """
    _check_p(p)
    a, s, b, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, s, b, t)))
    if np.any(s <= 0) or np.any(t < 0):
        raise DomainError("need s > 0 and t >= 0")
    abs_a_p = np.abs(a) ** p
    with np.errstate(divide="ignore", invalid="ignore"):
        first = np.where(b == 0.0, 0.0, np.abs(b) ** p / t ** (p - 1.0))
    terms = np.stack([
        first,
        -abs_a_p / s ** (p - 1.0),
        -p * signed_power(a, p - 1.0) * (b - a) / s ** (p - 1.0),
        (p - 1.0) * abs_a_p * (t - s) / s ** p,
    ])
    return neumaier_sum(terms)


def _ratio(p, b):
    return remainder_F(p, 1.0, b) / comparator_K(p, 1.0, b)


def comparability_grid(grid_size: int) -> np.ndarray:
    """Sample points b for the a = 1 reduction: signed log grid plus a band around b = 1."""
    mags = np.logspace(-6, 6, grid_size)
    near = 1.0 + np.linspace(-0.5, 0.5, grid_size)
    near = near[near != 1.0]
    return np.unique(np.concatenate([mags, -mags, near, [0.0]]))


def comparability_bounds(p, grid_size: int = 2000):
    """Empirical (inf, sup) of F(1,b)/K(1,b) over b != 1.

    Grid extrema are polished by bounded scalar minimization, and the limits at
    b -> 1 (p(p-1)/2) and |b| -> inf (1) are included since the extremes may only
    be approached there.
    """
    _check_p(p)
    if grid_size < 100:
        raise DomainError("grid_size must be >= 100")
    b = comparability_grid(grid_size)
    r = _ratio(p, b)
    cands = list(r) + [p * (p - 1.0) / 2.0, 1.0]
    for idx, sign in ((int(np.argmin(r)), 1.0), (int(np.argmax(r)), -1.0)):
        lo = b[max(idx - 1, 0)]
        hi = b[min(idx + 1, len(b) - 1)]
        if hi > lo and not (lo < 1.0 < hi):
            res = optimize.minimize_scalar(lambda x: sign * _ratio(p, x), bounds=(lo, hi),
                                           method="bounded", options={"xatol": 1e-14})
            if np.isfinite(res.fun):
                cands.append(sign * res.fun)
    cands = np.asarray(cands)
    return float(cands.min()), float(cands.max())
