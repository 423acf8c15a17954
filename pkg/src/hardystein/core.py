"""Parameter records, ball domains and identity reports shared by every module."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

MACHINE_FLOOR = 1e-300

LHS_METHODS = ("exact-kernel-integral", "monte-carlo", "exhaustion-limit")


class DomainError(ValueError):
    """Argument outside the domain where a formula is defined."""


class SingularityError(DomainError):
    """Argument sits on the singular set of a kernel."""


def normalization_constant(d: int, alpha: float) -> float:
    """Jump-kernel constant of the fractional Laplacian.

    A(d, alpha) = Gamma((d+alpha)/2) / (2^-alpha pi^(d/2) |Gamma(-alpha/2)|)
    """
    if not (isinstance(d, (int, np.integer)) and d >= 1):
        raise DomainError(f"dimension must be a positive integer, got {d!r}")
    if not (0.0 < alpha < 2.0):
        raise DomainError(f"alpha must lie in (0, 2), got {alpha!r}")
    num = math.gamma((d + alpha) / 2.0)
    den = 2.0 ** (-alpha) * math.pi ** (d / 2.0) * abs(math.gamma(-alpha / 2.0))
    return num / den


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (2 for d=1)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


@dataclass(frozen=True)
class StableParams:
    d: int
    alpha: float
    A: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "A", normalization_constant(self.d, float(self.alpha)))


def as_points(x, d: int) -> np.ndarray:
    """Return x as an array of shape (..., d).

    For d == 1 bare scalars and 1-D arrays are read as collections of points on the line;
    an explicit (n, 1) array is also accepted.
    """
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim <= 1 or x.shape[-1] != 1):
        return x[..., None]
    if x.shape[-1] != d:
        raise DomainError(f"expected points with trailing dimension {d}, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class BallDomain:
    center: tuple
    radius: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        object.__setattr__(self, "center", tuple(float(v) for v in c))
        if not self.radius > 0:
            raise DomainError(f"radius must be positive, got {self.radius!r}")
        object.__setattr__(self, "radius", float(self.radius))

    @classmethod
    def interval(cls, lo: float, hi: float) -> "BallDomain":
        return cls(((lo + hi) / 2.0,), (hi - lo) / 2.0)

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.center)

    def dist_to_center(self, x) -> np.ndarray:
        pts = as_points(x, self.d)
        return np.linalg.norm(pts - self.c, axis=-1)

    def inradius_at(self, x) -> np.ndarray:
        """delta_D(x): distance to the complement (negative outside)."""
        return self.radius - self.dist_to_center(x)

    def contains(self, x) -> np.ndarray:
        return self.dist_to_center(x) < self.radius

    def scaled(self, radius: float) -> "BallDomain":
        return BallDomain(self.center, radius)

    def exhaustion(self, n: int) -> list["BallDomain"]:
        """Concentric balls with radii R(1 - 2^-k), k = 1..n."""
        if n < 1:
            raise DomainError("exhaustion depth must be >= 1")
        return [self.scaled(self.radius * (1.0 - 2.0 ** (-k))) for k in range(1, n + 1)]

    def is_inside(self, other: "BallDomain") -> bool:
        """True when the closure of self lies in the open ball other."""
        gap = np.linalg.norm(self.c - other.c)
        return gap + self.radius < other.radius


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-10
    max_depth: int = 40
    grading_exponent: float = 2.0
    tail_radius: float = 64.0

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("tolerances must be positive")
        if self.max_depth < 1:
            raise DomainError("max_depth must be >= 1")
        if self.grading_exponent < 1:
            raise DomainError("grading_exponent must be >= 1")

    def replace(self, **kw) -> "QuadratureSpec":
        vals = dict(rel_tol=self.rel_tol, abs_tol=self.abs_tol, max_depth=self.max_depth,
                    grading_exponent=self.grading_exponent, tail_radius=self.tail_radius)
        vals.update(kw)
        return QuadratureSpec(**vals)


@dataclass
class IdentityReport:
    identity_id: str
    lhs: float
    rhs: float
    abs_err: float
    rel_err: float
    lhs_method: str
    error_budget: list = field(default_factory=list)
    seed: Optional[int] = None
    experiment_id: str = ""
    d: Optional[int] = None
    alpha: Optional[float] = None
    p: Optional[float] = None
    runtime_ms: Optional[float] = None
    details: dict = field(default_factory=dict)
    relation: str = "equality"  # or "inequality": lhs >= rhs up to the budget

    @classmethod
    def from_sides(cls, identity_id: str, lhs: float, rhs: float, lhs_method: str,
                   error_budget: Sequence = (), **kw) -> "IdentityReport":
        if lhs_method not in LHS_METHODS:
            raise ValueError(f"unknown lhs method {lhs_method!r}")
        abs_err = abs(lhs - rhs)
        rel_err = abs_err / max(abs(lhs), abs(rhs), MACHINE_FLOOR)
        return cls(identity_id, float(lhs), float(rhs), abs_err, rel_err, lhs_method,
                   [(str(t), float(b)) for t, b in error_budget], **kw)

    @property
    def budget(self) -> float:
        return float(sum(b for _, b in self.error_budget))

    @property
    def passed(self) -> bool:
        if not (np.isfinite(self.lhs) and np.isfinite(self.rhs)):
            return False
        if self.relation == "inequality":
            return bool(self.lhs >= self.rhs - self.budget)
        return bool(self.abs_err <= self.budget)
