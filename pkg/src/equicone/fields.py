"""Grid operators for the 1-harmonic equation, minimal graphs and coarea.

All derivatives are second-order central differences (``np.gradient``) with
one-sided second-order closure on the window edge.  Operators built from two
nested gradients are trustworthy only two cells away from the edge, which is
what ``interior_max`` excludes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .classify import foliation_check
from .geodesic import Trajectory
from .orbit import OrbitParams, cone_angle


class EmptyResultError(ValueError):
    """Every evaluated cell was masked."""


class MaskedCellsError(ValueError):
    pass


class CoverageError(ValueError):
    def __init__(self, message, cells):
        super().__init__(message)
        self.cells = cells


@dataclass
class GridField:
    """Scalar samples on a uniform grid; ``values[i, j, ...]`` sits at ``origin + h * (i, j, ...)``."""

    values: np.ndarray
    h: float
    origin: tuple

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not 1 <= self.values.ndim <= 4:
            raise ValueError(f"grid fields have 1 to 4 axes, got {self.values.ndim}")
        if not self.h > 0.0:
            raise ValueError(f"grid spacing must be positive, got {self.h}")
        self.origin = tuple(float(o) for o in self.origin)
        if len(self.origin) != self.values.ndim:
            raise ValueError("origin length must match the number of axes")

    @property
    def dims(self) -> tuple:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    def axes(self) -> list:
        return [o + self.h * np.arange(nk) for o, nk in zip(self.origin, self.dims)]

    def coords(self) -> list:
        return np.meshgrid(*self.axes(), indexing="ij")

    def like(self, values) -> "GridField":
        return GridField(values, self.h, self.origin)

    @classmethod
    def from_function(cls, fn, dims, h, origin) -> "GridField":
        g = cls(np.zeros(dims), h, origin)
        g.values = np.asarray(fn(*g.coords()), dtype=float) * np.ones(dims)
        return g

    @classmethod
    def on_box(cls, fn, lower, upper, h) -> "GridField":
        """Sample ``fn`` on the box ``[lower, upper]`` with spacing close to ``h``."""
        dims = tuple(int(round((b - a) / h)) + 1 for a, b in zip(lower, upper))
        return cls.from_function(fn, dims, h, lower)

    def save(self, path, payload: str = "bin") -> None:
        """Write a JSON header plus a row-major ``.bin`` (float64 LE) or ``.csv`` payload."""
        path = Path(path)
        data_path = path.with_suffix("." + payload)
        header = {"dims": list(self.dims), "h": self.h, "origin": list(self.origin), "payload": data_path.name}
        if payload == "bin":
            self.values.astype("<f8").ravel(order="C").tofile(data_path)
        elif payload == "csv":
            np.savetxt(data_path, self.values.ravel(order="C"), fmt="%.17g")
        else:
            raise ValueError(f"payload must be 'bin' or 'csv', got {payload!r}")
        path.write_text(json.dumps(header, indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "GridField":
        path = Path(path)
        header = json.loads(path.read_text())
        dims = tuple(header["dims"])
        if "values" in header:
            vals = np.asarray(header["values"], dtype=float)
        else:
            data_path = path.parent / header["payload"]
            if data_path.suffix == ".csv":
                vals = np.loadtxt(data_path, dtype=float, ndmin=1)
            else:
                vals = np.fromfile(data_path, dtype="<f8")
        if vals.size != int(np.prod(dims)):
            raise ValueError(f"{path}: payload has {vals.size} values, header dims {dims}")
        return cls(vals.reshape(dims), header["h"], header["origin"])


def _grad(values, h):
    g = np.gradient(values, h, edge_order=2)
    return g if isinstance(g, (list, tuple)) else [g]


def _div(components, h):
    return sum(np.gradient(c, h, axis=i, edge_order=2) for i, c in enumerate(components))


def default_eps(f: GridField) -> float:
    span = float(np.ptp(f.values))
    return 1e-8 * (span if span > 0.0 else 1.0) / f.h


def unit_normal(f: GridField, eps: float | None = None):
    """``grad f / |grad f|`` with cells where ``|grad f| < eps`` set to NaN."""
    eps = default_eps(f) if eps is None else eps
    g = _grad(f.values, f.h)
    norm = np.sqrt(sum(c * c for c in g))
    mask = norm < eps
    with np.errstate(invalid="ignore", divide="ignore"):
        N = [np.where(mask, np.nan, c / norm) for c in g]
    return N, mask


def one_tension(f: GridField, eps: float | None = None) -> GridField:
    """``div(grad f / |grad f|)``; masked cells (and their neighbours) carry NaN."""
    N, mask = unit_normal(f, eps)
    if mask.all():
        raise EmptyResultError("gradient vanishes on every cell")
    tau = _div(N, f.h)
    tau[mask] = np.nan
    return f.like(tau)


def weighted_one_tension(p: OrbitParams, g: GridField, eps: float | None = None) -> GridField:
    """1-tension of the invariant lift ``G(x, y) = g(|x|, |y|)``.

    Equals ``(1/rho) div(rho grad g / |grad g|)`` with ``rho = u^m v^n``; its zero
    set certifies that the level curves of ``g`` are weighted geodesics.
    """
    if g.ndim != 2:
        raise ValueError("weighted tension is defined on the (u, v) quadrant")
    if not (g.origin[0] > 0.0 and g.origin[1] > 0.0):
        raise ValueError("grid must lie strictly inside the quadrant")
    N, mask = unit_normal(g, eps)
    if mask.all():
        raise EmptyResultError("gradient vanishes on every cell")
    U, V = g.coords()
    tau = _div(N, g.h) + (p.m / U) * N[0] + (p.n / V) * N[1]
    tau[mask] = np.nan
    return g.like(tau)


def mse_residual(eta: GridField) -> GridField:
    """Minimal-surface operator ``div(grad eta / sqrt(1 + |grad eta|^2))`` on a height field."""
    g = _grad(eta.values, eta.h)
    w = np.sqrt(1.0 + sum(c * c for c in g))
    return eta.like(_div([c / w for c in g], eta.h))


def interior_mask(f: GridField, ring: int = 2) -> np.ndarray:
    keep = np.zeros(f.dims, dtype=bool)
    keep[tuple(slice(ring, nk - ring) for nk in f.dims)] = True
    return keep


def interior_max(res: GridField, ring: int = 2, where=None) -> float:
    keep = interior_mask(res, ring)
    if where is not None:
        keep &= where
    vals = np.abs(res.values[keep])
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        raise EmptyResultError("no unmasked interior cells")
    return float(vals.max())


def residual_report(res: GridField, ring: int = 2, where=None, order_estimate=None) -> dict:
    keep = interior_mask(res, ring)
    if where is not None:
        keep &= where
    return {
        "max_residual": interior_max(res, ring, where),
        "masked_fraction": float(np.mean(~np.isfinite(res.values[keep]))) if keep.any() else 1.0,
        "order_estimate": order_estimate,
    }


def observed_order(errors, ratio: float = 2.0) -> list:
    """Convergence orders between successive refinements by ``ratio``."""
    e = np.asarray(errors, dtype=float)
    return list(np.log(e[:-1] / e[1:]) / math.log(ratio))


def make_cutoff(center, s: float, t: float, like: GridField) -> GridField:
    """Radial ramp: 1 on B(center, s), 0 off B(center, t), affine in between.

    Its gradient has magnitude ``1/(t - s)`` on the annulus, so the cutoff
    constant is realized with value 1.
    """
    if not 0.0 < s < t:
        raise ValueError(f"need 0 < s < t, got s={s}, t={t}")
    X = like.coords()
    c = np.asarray(center, dtype=float)
    dist = np.sqrt(sum((x - ck) ** 2 for x, ck in zip(X, c)))
    return like.like(np.clip((t - dist) / (t - s), 0.0, 1.0))


def gradient_norm(f: GridField) -> np.ndarray:
    return np.sqrt(sum(c * c for c in _grad(f.values, f.h)))


def ball_volume(d: int, r: float) -> float:
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0) * r**d


@dataclass
class BoundReport:
    c: float
    lhs: float
    rhs: float
    weak_lhs: float
    realized_c1: float
    analytic_bound: float  # bound on c implied by the cutoff

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs

    @property
    def weak_holds(self) -> bool:
        # integration by parts is only approximate on the grid
        return self.weak_lhs <= self.rhs * (1.0 + 1e-2)

    def record(self) -> dict:
        return {
            "c": self.c,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "holds": self.holds,
            "weak_lhs": self.weak_lhs,
            "weak_holds": self.weak_holds,
            "realized_c1": self.realized_c1,
            "analytic_bound": self.analytic_bound,
        }


def tension_bound_check(f: GridField, x0, r: float, eps: float | None = None) -> BoundReport:
    """Test-function bound on the infimum of the 1-tension over a half ball.

    With ``c`` the infimum of ``div(grad f/|grad f|)`` over B(x0, r/2) and the
    cutoff ``psi`` between radii r/2 and r, checks
    ``c Vol(B(r/2)) <= integral over B(r) of |grad psi|``.  ``weak_lhs`` is
    ``integral tension * psi``, the quantity the integration by parts bounds.
    """
    x0 = np.asarray(x0, dtype=float)
    lo = np.asarray(f.origin) + 2 * f.h
    hi = np.asarray(f.origin) + f.h * (np.asarray(f.dims) - 3)
    if np.any(x0 - r < lo) or np.any(x0 + r > hi):
        raise ValueError("ball B(x0, r) must lie inside the grid, two cells from its edge")
    tau = one_tension(f, eps)
    X = f.coords()
    dist = np.sqrt(sum((x - ck) ** 2 for x, ck in zip(X, x0)))
    in_big = dist <= r
    in_half = dist <= 0.5 * r
    if not np.all(np.isfinite(tau.values[in_big])):
        bad = np.argwhere(in_big & ~np.isfinite(tau.values))
        raise MaskedCellsError(f"{len(bad)} masked cells inside the ball, first at index {tuple(bad[0])}")
    psi = make_cutoff(x0, 0.5 * r, r, f)
    gpsi = gradient_norm(psi)
    cell = f.h**f.ndim
    c = float(tau.values[in_half].min())
    lhs = c * ball_volume(f.ndim, 0.5 * r)
    rhs = float(gpsi[in_big].sum() * cell)
    weak = float((tau.values * psi.values)[in_big].sum() * cell)
    realized = float(gpsi.max() * 0.5 * r)
    # continuum value of rhs / Vol(B(r/2)): |grad psi| = 2 C1 / r on the annulus
    bound = 2.0 * realized * (2**f.ndim - 1) / r
    return BoundReport(c, lhs, rhs, weak, realized, bound)


def _differences(values):
    return [np.abs(np.diff(values, axis=i)) for i in range(values.ndim)]


def tv_l1(f: GridField) -> float:
    """Anisotropic total variation: sum of per-axis absolute differences times face area."""
    face = f.h ** (f.ndim - 1)
    return float(sum(d.sum() for d in _differences(f.values)) * face)


def tv_isotropic(f: GridField) -> float:
    """Forward-difference isotropic total variation (coarea holds only approximately)."""
    face = f.h ** (f.ndim - 1)
    crop = tuple(slice(0, nk - 1) for nk in f.dims)
    diffs = [np.diff(f.values, axis=i)[tuple(s if j != i else slice(None) for j, s in enumerate(crop))] for i in range(f.ndim)]
    return float(np.sqrt(sum(d * d for d in diffs)).sum() * face)


def perimeter_l1(E: GridField) -> float:
    """Anisotropic perimeter of a set given by its characteristic function."""
    vals = E.values
    if not np.all((vals == 0.0) | (vals == 1.0)):
        raise ValueError("perimeter needs a 0/1 characteristic field")
    return tv_l1(E)


@dataclass
class LevelSetFamily:
    thresholds: np.ndarray
    sets: list  # GridField characteristic functions of {f >= threshold}

    @classmethod
    def of(cls, f: GridField, thresholds) -> "LevelSetFamily":
        th = np.sort(np.asarray(thresholds, dtype=float))
        return cls(th, [f.like((f.values >= lam).astype(float)) for lam in th])

    def is_nested(self) -> bool:
        return all(np.all(b.values <= a.values) for a, b in zip(self.sets, self.sets[1:]))


@dataclass
class CoareaReport:
    tv: float
    level_sum: float
    levels: int

    @property
    def discrepancy(self) -> float:
        return abs(self.tv - self.level_sum) / self.tv if self.tv else abs(self.level_sum)

    def record(self) -> dict:
        return {"tv": self.tv, "level_sum": self.level_sum, "levels": self.levels, "discrepancy": self.discrepancy}


def coarea_check(f: GridField, levels) -> CoareaReport:
    """Compare ``tv_l1(f)`` with the layer sum over a partition of the value range.

    ``levels`` are partition points ``e_0 < ... < e_K``; cell ``j`` contributes
    ``perimeter({f >= midpoint_j}) * (e_{j+1} - e_j)``.  The identity is exact
    when ``f`` only takes values in ``levels``.
    """
    e = np.asarray(levels, dtype=float)
    if e.size < 2:
        raise ValueError("coarea needs at least 2 levels")
    if np.any(np.diff(e) <= 0.0):
        raise ValueError("levels must be strictly increasing")
    mids = 0.5 * (e[:-1] + e[1:])
    fam = LevelSetFamily.of(f, mids)
    total = math.fsum(perimeter_l1(E) * w for E, w in zip(fam.sets, np.diff(e)))
    return CoareaReport(tv_l1(f), total, int(e.size))


def _side_table(T: Trajectory):
    """Strictly increasing (omega, log r, dlog r / domega) samples of a radial-graph leaf."""
    om = T.omega
    order = 1.0 if om[-1] >= om[0] else -1.0
    om_s = order * om
    # drop samples where rounding stalls the angle near the asymptote
    keep = np.concatenate(([True], om_s[1:] > np.maximum.accumulate(om_s)[:-1]))
    idx = np.flatnonzero(keep)
    om_k = om[idx]
    logr = np.log(T.r[idx])
    with np.errstate(divide="ignore"):
        slope = 1.0 / np.tan(T.theta[idx] - om_k)
    if order < 0:
        om_k, logr, slope = om_k[::-1], logr[::-1], slope[::-1]
    return np.ascontiguousarray(om_k), np.ascontiguousarray(logr), np.ascontiguousarray(slope)


def foliation_function(p: OrbitParams, leaves, window, h: float) -> GridField:
    """Homothety parameter of the leaf through each grid point.

    ``leaves`` is one trajectory or a pair, each starting on an axis and a
    radial graph.  For ``P`` on the side of the cone ray swept by leaf ``Γ``,
    ``g(P) = lambda`` with ``P`` on ``lambda Γ``; on the side swept from the
    v-axis the sign is flipped so that the cone ray is the level ``g = 0``.
    """
    if isinstance(leaves, Trajectory):
        leaves = [leaves]
    u0, u1, v0, v1 = map(float, window)
    if not (0.0 < u0 < u1 and 0.0 < v0 < v1):
        raise ValueError(f"window must be inside the open quadrant, got {window!r}")
    grid = GridField.on_box(lambda U, V: 0.0 * U, (u0, v0), (u1, v1), h)
    U, V = grid.coords()
    om = np.arctan2(V, U).ravel()
    rad = np.hypot(U, V).ravel()
    w_star = cone_angle(p)
    out = np.full(om.shape, np.nan)
    out[om == w_star] = 0.0
    for T in leaves:
        if not foliation_check(p, T).radial_graph:
            raise ValueError("leaf is not a radial graph; homothetic copies overlap")
        below = T.omega[0] < w_star
        om_k, logr, slope = _side_table(T)
        sel = (om < w_star) if below else (om > w_star)
        logR = kernels.hermite_radius_lookup(om_k, logr, slope, np.ascontiguousarray(om[sel]))
        lam = rad[sel] / np.exp(logR)
        # beyond the last sample the leaf is within its final gap of the ray: the cone level
        sliver = ~np.isfinite(logR) & (np.abs(om[sel] - w_star) <= abs(om_k[-1 if below else 0] - w_star))
        lam[sliver] = 0.0
        out[sel] = lam if below else -lam
    missing = np.flatnonzero(~np.isfinite(out))
    if missing.size:
        cells = [tuple(int(i) for i in np.unravel_index(j, grid.dims)) for j in missing]
        raise CoverageError(f"{len(cells)} cells are not covered by the foliation", cells)
    return grid.like(out.reshape(grid.dims))


def cone_band(p: OrbitParams, g: GridField, width: float) -> np.ndarray:
    """Cells at angular distance ``>= width`` from the cone ray."""
    U, V = g.coords()
    return np.abs(np.arctan2(V, U) - cone_angle(p)) >= width


def box_mask(f: GridField, lower, upper) -> np.ndarray:
    """Cells inside the physical box ``[lower, upper]``; fixed across refinements."""
    X = f.coords()
    tol = 1e-9 * f.h
    return np.all([(x >= lo - tol) & (x <= hi + tol) for x, lo, hi in zip(X, lower, upper)], axis=0)
