"""Verdicts on the cones C(S^m x S^n).

The geodesic leaving an axis orthogonally either stays on one side of the
cone ray and approaches it monotonically (its homothetic copies then sweep the
sector and calibrate the cone), or it crosses the ray, in which case its
copies give smooth invariant competitors and the cone cannot be minimizing.
"""

from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .geodesic import (
    Event,
    GeodesicIntegrationError,
    IntegratorControls,
    Trajectory,
    integrate_from_axis,
    solve_bvp,
)
from .orbit import OrbitParams, QuadrantPoint, cone_angle, ray_length


class Minimality(str, enum.Enum):
    CONE_MINIMIZING = "ConeMinimizing"
    SMOOTH_MINIMIZER = "SmoothMinimizer"
    UNDETERMINED = "Undetermined"


class Stability(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"


@dataclass
class CrossingReport:
    count: int
    states: list  # GeodesicState at each localized crossing


@dataclass
class FoliationReport:
    monotone_omega: bool
    asymptote_gap: float
    radial_graph: bool
    sector: tuple
    final_radius: float
    determined: bool = True
    gap_threshold: float = 1e-3
    diagnostics: str = ""

    @property
    def foliation_ok(self) -> bool:
        return (
            self.determined
            and self.monotone_omega
            and self.radial_graph
            and self.asymptote_gap <= self.gap_threshold
        )


def crossing_count(p: OrbitParams, T: Trajectory, dead_band: float = 1e-10) -> CrossingReport:
    """Sign changes of ``omega - omega*`` along the samples, ignoring the dead band."""
    gap = T.residual
    signs = np.sign(gap[np.abs(gap) > dead_band])
    count = int(np.count_nonzero(signs[1:] != signs[:-1])) if signs.size else 0
    return CrossingReport(count, T.events_of(Event.RAY_CROSSING))


def foliation_check(
    p: OrbitParams,
    T: Trajectory,
    gap_threshold: float = 1e-3,
    min_radius_ratio: float = 10.0,
) -> FoliationReport:
    """Check that the homothetic copies of ``T`` sweep a sector without overlap."""
    if len(T) < 2:
        raise ValueError("trajectory too short to assess the foliation")
    om = T.omega
    r = T.r
    d = np.diff(om)
    direction = np.sign(om[-1] - om[0]) or 1.0
    # tolerate rounding-level jitter once the curve has settled on the ray
    jitter = 64 * np.finfo(float).eps * max(1.0, np.abs(om).max())
    monotone = bool(np.all(direction * d > -jitter))
    # radial graph: the tangent is never radial, so d(omega)/ds keeps its sign
    tilt = np.sin(T.theta - om)
    big = tilt[np.abs(tilt) > 1e-12]
    radial_graph = bool(monotone and (big.size == 0 or np.all(np.sign(big) == np.sign(big[0]))))
    gap = float(abs(om[-1] - cone_angle(p)))
    determined = bool(r[-1] >= min_radius_ratio * r[0])
    diag = "" if determined else f"final radius {r[-1]:.3g} < {min_radius_ratio:g} x start radius {r[0]:.3g}"
    return FoliationReport(
        monotone,
        gap,
        radial_graph,
        (float(om.min()), float(om.max())),
        float(r[-1]),
        determined,
        gap_threshold,
        diag,
    )


@dataclass
class CompeteResult:
    ray_length: float
    competitor_length: float
    points: np.ndarray
    seed: str = "straight"

    @property
    def improvement(self) -> float:
        """Relative amount by which the competitor beats the ray segment."""
        if self.ray_length == 0.0:
            return 0.0
        return (self.ray_length - self.competitor_length) / self.ray_length


def compete(p: OrbitParams, r1: float, r2: float, nodes: int = 64) -> CompeteResult:
    """Shortest discrete curve between the ray points at radii ``r1`` and ``r2``."""
    if r1 == r2:
        return CompeteResult(0.0, 0.0, np.empty((0, 2)))
    if not 0.0 < r1 < r2:
        raise ValueError(f"need 0 < r1 < r2, got {r1}, {r2}")
    w = cone_angle(p)
    A = QuadrantPoint(r1 * math.cos(w), r1 * math.sin(w))
    B = QuadrantPoint(r2 * math.cos(w), r2 * math.sin(w))
    res = solve_bvp(p, A, B, nodes)
    return CompeteResult(ray_length(p, r1, r2), res.length, res.points, res.seed)


def stability_margin(p: OrbitParams) -> float:
    """``((k-1)/2)^2 - |A|^2`` with ``|A|^2 = k`` on the link S^m x S^n."""
    k = p.k
    return ((k - 1) / 2.0) ** 2 - k


def rayleigh_infimum(p: OrbitParams, nodes: int = 400, r_range=(1e-2, 1e2)) -> float:
    """Smallest discrete second-variation quotient over radial test profiles.

    Minimizes ``integral (phi'^2 - k phi^2 / r^2) r^k dr / integral phi^2 r^(k-2) dr``
    over piecewise-linear ``phi`` on a log-uniform grid, vanishing at both
    ends.  With this normalization the infimum over all radii equals the
    closed-form margin; on a finite range it sits slightly above it.
    """
    r0, r1 = map(float, r_range)
    if nodes < 32:
        raise ValueError(f"need at least 32 radial nodes, got {nodes}")
    if not 0.0 < r0 < r1:
        raise ValueError(f"bad radial range {r_range!r}")
    k = p.k
    # in t = log r: numerator (phi_t^2 - k phi^2) e^((k-1)t), denominator phi^2 e^((k-1)t)
    t = np.linspace(math.log(r0), math.log(r1), nodes)
    ht = np.diff(t)
    gx, gw = np.polynomial.legendre.leggauss(4)
    gx, gw = 0.5 * (gx + 1.0), 0.5 * gw
    K = np.zeros((nodes, nodes))
    M = np.zeros((nodes, nodes))
    # symmetric rescaling by exp(-(k-1) t_i / 2) keeps the pencil well conditioned
    half = 0.5 * (k - 1) * t
    N = np.column_stack((1.0 - gx, gx))
    for e in range(nodes - 1):
        tq = t[e] + ht[e] * gx
        dN = np.array([-1.0, 1.0]) / ht[e]
        for a in range(2):
            for b in range(2):
                i, j = e + a, e + b
                wq = gw * ht[e] * np.exp((k - 1) * tq - half[i] - half[j])
                K[i, j] += dN[a] * dN[b] * wq.sum()
                M[i, j] += np.sum(wq * N[:, a] * N[:, b])
    inner = slice(1, nodes - 1)
    lam = scipy.linalg.eigh(K[inner, inner], M[inner, inner], eigvals_only=True, subset_by_index=[0, 0])
    return float(lam[0]) - k


@dataclass
class StabilityReport:
    status: Stability
    margin: float
    rayleigh: float | None = None

    @property
    def agrees(self) -> bool | None:
        if self.rayleigh is None:
            return None
        return (self.rayleigh >= 0.0) == (self.margin >= 0.0)


def stability_verdict(p: OrbitParams, cross_check: bool = True) -> StabilityReport:
    margin = stability_margin(p)
    status = Stability.STABLE if margin >= 0.0 else Stability.UNSTABLE
    return StabilityReport(status, margin, rayleigh_infimum(p) if cross_check else None)


@dataclass
class Verdict:
    m: int
    n: int
    minimality: Minimality
    stability: Stability
    crossings: int
    crossing_locations: list
    foliation_ok: bool
    ray_length: float | None
    competitor_length: float | None
    evidence: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.minimality is Minimality.SMOOTH_MINIMIZER and self.crossings < 1:
            raise ValueError("SmoothMinimizer verdict requires at least one crossing")
        if self.minimality is Minimality.CONE_MINIMIZING and (self.crossings or not self.foliation_ok):
            raise ValueError("ConeMinimizing verdict requires no crossings and a foliation")

    def record(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "minimality": self.minimality.value,
            "stability": self.stability.value,
            "crossings": self.crossings,
            "crossing_locations": self.crossing_locations,
            "foliation_ok": self.foliation_ok,
            "ray_length": self.ray_length,
            "competitor_length": self.competitor_length,
            "evidence": self.evidence,
            "tolerances": self.tolerances,
        }

    def to_json(self, metadata: dict | None = None) -> str:
        rec = self.record()
        if metadata is not None:
            rec["metadata"] = metadata
        return json.dumps(rec, indent=2, sort_keys=True)


def _foot_evidence(p, axis, a, stop_radius, ctrl, gap_threshold):
    T = integrate_from_axis(p, axis, a, stop_radius, ctrl)
    cr = crossing_count(p, T, ctrl.dead_band)
    fol = foliation_check(p, T, gap_threshold)
    info = {
        "axis": axis,
        "status": T.status,
        "samples": len(T),
        "crossings": cr.count,
        "monotone_omega": fol.monotone_omega,
        "radial_graph": fol.radial_graph,
        "asymptote_gap": fol.asymptote_gap,
        "final_radius": fol.final_radius,
        "foliation_ok": fol.foliation_ok,
    }
    locs = []
    for st in cr.states:
        # weighted length from the axis to the crossing against the cone from the vertex
        cone = ray_length(p, 0.0, st.r)
        locs.append(
            {
                "axis": axis,
                "s": st.s,
                "u": st.u,
                "v": st.v,
                "r": st.r,
                "axis_length": st.length,
                "cone_length": cone,
                "cone_defect": 1.0 - st.length / cone,
            }
        )
    return cr.count, fol, info, locs


def minimality_verdict(
    p: OrbitParams,
    a: float = 1.0,
    stop_radius: float = 1e3,
    ctrl: IntegratorControls | None = None,
    gap_threshold: float = 1e-3,
    compete_radii=(1.0, 2.0),
    compete_nodes: int = 64,
    stability_check: bool = True,
) -> Verdict:
    """Integrate from both axis feet and classify the cone.

    No crossing from either foot and a homothetic foliation on both sides give
    ``ConeMinimizing``; any crossing gives ``SmoothMinimizer``; anything else
    (including an integration failure) is ``Undetermined``.
    """
    ctrl = ctrl or IntegratorControls()
    crossings = 0
    feet = []
    locations = []
    all_ok = True
    failure = None
    for axis in ("u", "v"):
        try:
            c, fol, info, locs = _foot_evidence(p, axis, a, stop_radius, ctrl, gap_threshold)
        except (GeodesicIntegrationError, ValueError) as exc:
            failure = f"{axis}-axis: {exc}"
            all_ok = False
            continue
        crossings += c
        all_ok = all_ok and fol.foliation_ok
        feet.append(info)
        locations.extend(locs)

    if crossings >= 1:
        minimality = Minimality.SMOOTH_MINIMIZER
    elif all_ok and failure is None:
        minimality = Minimality.CONE_MINIMIZING
    else:
        minimality = Minimality.UNDETERMINED

    stab = stability_verdict(p, cross_check=stability_check)
    evidence = {"feet": feet, "stability_margin": stab.margin}
    if stab.rayleigh is not None:
        evidence["rayleigh_infimum"] = stab.rayleigh
    if failure:
        evidence["failure"] = failure

    ray_len = comp_len = None
    if compete_radii is not None:
        r1, r2 = compete_radii
        cmp_ = compete(p, r1, r2, compete_nodes)
        ray_len, comp_len = cmp_.ray_length, cmp_.competitor_length
        evidence["compete"] = {
            "r1": r1,
            "r2": r2,
            "nodes": compete_nodes,
            "improvement": cmp_.improvement,
            "seed": cmp_.seed,
        }

    return Verdict(
        p.m,
        p.n,
        minimality,
        stab.status,
        crossings,
        locations,
        all_ok and failure is None,
        ray_len,
        comp_len,
        evidence,
        {
            "rtol": ctrl.rtol,
            "atol": ctrl.atol,
            "dead_band": ctrl.dead_band,
            "asymptote_gap": gap_threshold,
            "stop_radius": stop_radius,
            "axis_foot": a,
        },
    )


def _sweep_cell(args):
    m, n, kwargs = args
    try:
        return minimality_verdict(OrbitParams(m, n), **kwargs)
    except Exception as exc:  # a failed cell must not stop the sweep
        p = OrbitParams(m, n)
        stab = stability_verdict(p, cross_check=False)
        return Verdict(m, n, Minimality.UNDETERMINED, stab.status, 0, [], False, None, None, {"failure": str(exc)})


def sweep(m_max: int, n_max: int | None = None, workers: int = 1, **kwargs) -> list:
    """Verdicts over the grid ``1 <= m <= m_max, 1 <= n <= n_max`` in row-major order."""
    n_max = m_max if n_max is None else n_max
    cells = [(m, n, kwargs) for m in range(1, m_max + 1) for n in range(1, n_max + 1)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_cell, cells))
    return [_sweep_cell(c) for c in cells]


SWEEP_COLUMNS = ("m", "n", "minimality", "stability", "crossings", "foliation_ok", "stability_margin")


def sweep_rows(verdicts) -> list:
    return [
        {
            "m": v.m,
            "n": v.n,
            "minimality": v.minimality.value,
            "stability": v.stability.value,
            "crossings": v.crossings,
            "foliation_ok": v.foliation_ok,
            "stability_margin": stability_margin(OrbitParams(v.m, v.n)),
        }
        for v in verdicts
    ]
