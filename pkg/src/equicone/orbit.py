"""Weighted quarter-plane geometry of SO(m+1) x SO(n+1)-invariant hypersurfaces.

A point ``(x, y)`` in R^(m+1) x R^(n+1) projects to ``(u, v) = (|x|, |y|)``.
The orbit through ``(u, v)`` is a copy of S^m x S^n with volume proportional
to ``u^m v^n``, so the area of the lift of a curve is its length in the
conformal metric ``u^(2m) v^(2n) (du^2 + dv^2)``, i.e. the weighted length
``integral of u^m v^n ds``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels


class DomainError(ValueError):
    """Raised when an operation is evaluated where the geometry is singular."""


@dataclass(frozen=True)
class OrbitParams:
    """Sphere-factor dimensions of the link S^m x S^n."""

    m: int
    n: int

    def __post_init__(self):
        for name in ("m", "n"):
            val = getattr(self, name)
            if isinstance(val, bool) or int(val) != val or val < 1:
                raise ValueError(f"{name} must be a positive integer, got {val!r}")
            object.__setattr__(self, name, int(val))

    @property
    def k(self) -> int:
        """Dimension of the cross-section S^m x S^n."""
        return self.m + self.n

    @property
    def d(self) -> int:
        """Dimension of the hypersurface (and the homothety degree of length)."""
        return self.m + self.n + 1

    def swapped(self) -> "OrbitParams":
        return OrbitParams(self.n, self.m)


@dataclass(frozen=True)
class QuadrantPoint:
    u: float
    v: float

    def __post_init__(self):
        if not (self.u >= 0.0 and self.v >= 0.0):
            raise ValueError(f"point ({self.u}, {self.v}) is outside the closed quadrant")

    @property
    def interior(self) -> bool:
        return self.u > 0.0 and self.v > 0.0

    @property
    def on_boundary(self) -> bool:
        return not self.interior

    @property
    def r(self) -> float:
        return math.hypot(self.u, self.v)

    @property
    def omega(self) -> float:
        return math.atan2(self.v, self.u)


class Curve:
    """Polyline in the closed quadrant with cumulative Euclidean arclength."""

    def __init__(self, points):
        pts = np.array(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("curve points must have shape (N, 2)")
        if pts.shape[0] < 2:
            raise ValueError("a curve needs at least 2 samples")
        if np.any(pts < 0.0):
            raise ValueError("curve leaves the closed quadrant")
        seg = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
        if np.any(seg <= 0.0):
            raise ValueError("consecutive curve samples must be distinct")
        self.points = pts
        self.arclength = np.concatenate(([0.0], np.cumsum(seg)))

    def __len__(self):
        return self.points.shape[0]

    @property
    def u(self):
        return self.points[:, 0]

    @property
    def v(self):
        return self.points[:, 1]

    def scaled(self, lam: float) -> "Curve":
        return Curve(lam * self.points)

    def reflected(self) -> "Curve":
        return Curve(self.points[:, ::-1])

    def to_csv(self, path) -> None:
        write_curve_csv(path, self)

    @classmethod
    def from_csv(cls, path) -> "Curve":
        return read_curve_csv(path)


def density(p: OrbitParams, q: QuadrantPoint) -> float:
    """Orbit-volume weight ``u^m v^n``; vanishes exactly on the axes."""
    return q.u**p.m * q.v**p.n


def log_density_gradient(p: OrbitParams, q: QuadrantPoint) -> tuple[float, float]:
    if not q.interior:
        raise DomainError(f"grad log density is singular on the axis point ({q.u}, {q.v})")
    return p.m / q.u, p.n / q.v


def cone_profile(p: OrbitParams, omega):
    """``f(omega) = cos^m(omega) sin^n(omega)``, the weight on the unit circle."""
    return np.cos(omega) ** p.m * np.sin(omega) ** p.n


def cone_angle(p: OrbitParams) -> float:
    """Angle of the cone ray, the maximizer of ``cone_profile`` on (0, pi/2)."""
    return math.atan(math.sqrt(p.n / p.m))


def weighted_length(p: OrbitParams, c: Curve) -> float:
    """Trapezoid approximation of ``integral u^m v^n ds`` along the polyline."""
    return float(kernels.trapezoid_weighted_length(c.points, p.m, p.n))


def ray_length(p: OrbitParams, r1: float, r2: float) -> float:
    """Exact weighted length of the cone ray between radii ``r1 <= r2``."""
    if r1 < 0.0 or r2 < r1:
        raise ValueError(f"need 0 <= r1 <= r2, got r1={r1}, r2={r2}")
    f_star = float(cone_profile(p, cone_angle(p)))
    return f_star * (r2**p.d - r1**p.d) / p.d


def ray_curve(p: OrbitParams, r1: float, r2: float, nodes: int) -> Curve:
    """Uniform polyline along the cone ray."""
    w = cone_angle(p)
    r = np.linspace(r1, r2, nodes)
    return Curve(np.column_stack((r * math.cos(w), r * math.sin(w))))


def sphere_volume(k: int) -> float:
    """Volume of the unit k-sphere in R^(k+1)."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)


def lift_area_factor(p: OrbitParams) -> float:
    """Factor converting weighted length downstairs into hypersurface volume upstairs."""
    return sphere_volume(p.m) * sphere_volume(p.n)


def write_curve_csv(path, c: Curve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "u", "v"])
        for s, (u, v) in zip(c.arclength, c.points):
            w.writerow([repr(float(s)), repr(float(u)), repr(float(v))])


def read_curve_csv(path) -> Curve:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"s", "u", "v"}:
        raise ValueError(f"{path}: expected header s,u,v")
    return Curve([(float(r["u"]), float(r["v"])) for r in rows])
