"""Geodesics of the weighted quarter-plane.

A unit-speed curve ``(u(s), v(s))`` with Euclidean tangent angle ``theta`` is a
geodesic of ``u^(2m) v^(2n) (du^2 + dv^2)`` exactly when its Euclidean
curvature equals the normal derivative of ``log(u^m v^n)``:

    theta' = -(m/u) sin(theta) + (n/v) cos(theta).

The lift of such a curve is a minimal SO(m+1) x SO(n+1)-invariant hypersurface.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .orbit import Curve, DomainError, OrbitParams, QuadrantPoint, cone_angle, cone_profile


class GeodesicIntegrationError(RuntimeError):
    """Integration broke down; ``last_state`` is the last accepted state."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class Event(str, enum.Enum):
    RAY_CROSSING = "RayCrossing"
    AXIS_APPROACH = "AxisApproach"
    SELF_SCALING_CONTACT = "SelfScalingContact"


_EVENT_CODES = {
    kernels.EV_RAY_CROSSING: Event.RAY_CROSSING,
    kernels.EV_AXIS_APPROACH: Event.AXIS_APPROACH,
    kernels.EV_SELF_SCALING_CONTACT: Event.SELF_SCALING_CONTACT,
}

_STATUS = {
    kernels.ST_MAX_ARCLENGTH: "max_arclength",
    kernels.ST_STOP_RADIUS: "stop_radius",
    kernels.ST_AXIS: "axis",
    kernels.ST_ESCAPED: "escaped",
    kernels.ST_MAX_STEPS: "max_steps",
}

DEFAULT_EVENTS = frozenset({Event.RAY_CROSSING, Event.AXIS_APPROACH})


@dataclass(frozen=True)
class GeodesicState:
    u: float
    v: float
    theta: float
    s: float = 0.0
    length: float = 0.0  # accumulated weighted length

    @property
    def interior(self) -> bool:
        return self.u > 0.0 and self.v > 0.0

    @property
    def r(self) -> float:
        return math.hypot(self.u, self.v)

    @property
    def omega(self) -> float:
        return math.atan2(self.v, self.u)

    def scaled(self, lam: float) -> "GeodesicState":
        return GeodesicState(
            lam * self.u, lam * self.v, self.theta, lam * self.s, self.length
        )

    def reversed(self) -> "GeodesicState":
        return GeodesicState(self.u, self.v, self.theta + math.pi, 0.0, 0.0)


@dataclass(frozen=True)
class IntegratorControls:
    atol: float = 1e-12
    rtol: float = 1e-10
    max_step: float = 1.0
    max_arclength: float = 1e7
    event_tol: float = 1e-13
    max_radius: float = 1e4
    axis_threshold: float = 1e-9
    dead_band: float = 1e-10
    max_steps: int = 400_000

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not v > 0:
                raise ValueError(f"integrator control {k} must be positive, got {v!r}")


@dataclass
class Trajectory:
    """Sampled geodesic with the events met along the way."""

    params: OrbitParams
    s: np.ndarray
    u: np.ndarray
    v: np.ndarray
    theta: np.ndarray
    length: np.ndarray
    events: list = field(default_factory=list)
    status: str = "max_arclength"

    def __len__(self):
        return self.s.shape[0]

    @property
    def r(self):
        return np.hypot(self.u, self.v)

    @property
    def omega(self):
        return np.arctan2(self.v, self.u)

    @property
    def residual(self):
        """Gap to the cone ray, ``omega - omega*``."""
        return self.omega - cone_angle(self.params)

    def state(self, i: int) -> GeodesicState:
        return GeodesicState(
            float(self.u[i]), float(self.v[i]), float(self.theta[i]), float(self.s[i]), float(self.length[i])
        )

    @property
    def initial(self) -> GeodesicState:
        return self.state(0)

    @property
    def final(self) -> GeodesicState:
        return self.state(-1)

    def events_of(self, kind: Event) -> list:
        return [st for k, st in self.events if k == kind]

    def points(self) -> np.ndarray:
        return np.column_stack((self.u, self.v))

    def to_curve(self) -> Curve:
        return Curve(self.points())

    def to_csv(self, path) -> None:
        r, om = self.r, self.omega
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "u", "v", "theta", "r", "omega"])
            for row in zip(self.s, self.u, self.v, self.theta, r, om):
                w.writerow([repr(float(x)) for x in row])

    def events_records(self) -> list:
        return [{"kind": k.value, "s": st.s, "u": st.u, "v": st.v} for k, st in self.events]

    def events_json(self) -> str:
        return json.dumps(self.events_records(), indent=2)


def geodesic_rhs(p: OrbitParams, st: GeodesicState) -> tuple[float, float, float]:
    """Rates ``(du/ds, dv/ds, dtheta/ds)``."""
    if not st.interior:
        raise DomainError(f"geodesic equation is singular at ({st.u}, {st.v})")
    c, s = math.cos(st.theta), math.sin(st.theta)
    return c, s, -(p.m / st.u) * s + (p.n / st.v) * c


def axis_slope(p: OrbitParams, axis: str, a: float) -> float:
    """Leading coefficient of the tilt of the axis-orthogonal geodesic.

    Leaving ``(a, 0)`` the tilt away from vertical grows like
    ``m / (a (n + 1)) * v``; leaving ``(0, a)`` the tilt from horizontal grows
    like ``n / (a (m + 1)) * u``.
    """
    if axis == "u":
        return p.m / (a * (p.n + 1))
    if axis == "v":
        return p.n / (a * (p.m + 1))
    raise ValueError(f"axis must be 'u' or 'v', got {axis!r}")


def start_from_axis(p: OrbitParams, axis: str, a: float, step: float | None = None) -> GeodesicState:
    """State a short distance from the axis on the geodesic leaving it orthogonally.

    The orthogonal start is the only one with a finite limit of the singular
    term, so the first ``step`` is taken from the local series
    ``tilt = c t, offset = c t^2 / 2`` with ``c = axis_slope``.
    """
    if not a > 0.0:
        raise ValueError(f"axis foot must be positive, got a={a}")
    if step is None:
        step = 1e-3 * a
    if not (0.0 < step < 0.5 * a):
        raise ValueError(f"step must lie in (0, a/2), got step={step} for a={a}")
    c = axis_slope(p, axis, a)
    t = step
    tilt = c * t
    # arclength correction sqrt(1 + (c t)^2) is O(t^3)
    s = t + c * c * t**3 / 6.0
    if axis == "u":
        length = a**p.m * t ** (p.n + 1) / (p.n + 1)
        return GeodesicState(a + 0.5 * c * t * t, t, 0.5 * math.pi - tilt, s, length)
    length = a**p.n * t ** (p.m + 1) / (p.m + 1)
    return GeodesicState(t, a + 0.5 * c * t * t, tilt, s, length)


def integrate(
    p: OrbitParams,
    init: GeodesicState,
    ctrl: IntegratorControls | None = None,
    events=DEFAULT_EVENTS,
    stop_radius: float | None = None,
) -> Trajectory:
    """Integrate the geodesic from ``init`` until a terminal condition.

    Stops at ``stop_radius`` (if given), at ``ctrl.max_radius`` (reported as
    ``"escaped"``), on approach to an axis, or at ``ctrl.max_arclength``.
    """
    ctrl = ctrl or IntegratorControls()
    if not init.interior:
        raise DomainError("initial state must be interior; use start_from_axis to leave an axis")
    events = frozenset(Event(e) for e in events)
    if stop_radius is not None and stop_radius <= ctrl.max_radius:
        r_stop, escaped_at_stop = float(stop_radius), False
    else:
        r_stop, escaped_at_stop = float(ctrl.max_radius), True
    y0 = np.array([init.u, init.v, init.theta, init.length], dtype=float)
    h0 = min(ctrl.max_step, 1e-2 * min(init.u, init.v, init.r))
    S, Y, count, status, ev_kind, ev_s, ev_y, ev_dir, ev_count = kernels.integrate_geodesic(
        float(p.m),
        float(p.n),
        y0,
        float(init.s),
        ctrl.rtol,
        ctrl.atol,
        h0,
        ctrl.max_step,
        float(init.s) + ctrl.max_arclength,
        r_stop,
        escaped_at_stop,
        ctrl.axis_threshold,
        cone_angle(p),
        ctrl.dead_band,
        ctrl.event_tol,
        Event.RAY_CROSSING in events,
        Event.SELF_SCALING_CONTACT in events,
        int(ctrl.max_steps),
        4096,
    )
    rec = []
    for i in range(ev_count):
        kind = _EVENT_CODES[int(ev_kind[i])]
        if kind in events:
            yv = ev_y[i]
            rec.append((kind, GeodesicState(float(yv[0]), float(yv[1]), float(yv[2]), float(ev_s[i]), float(yv[3]))))
    traj = Trajectory(p, S.copy(), Y[:, 0].copy(), Y[:, 1].copy(), Y[:, 2].copy(), Y[:, 3].copy(), rec)
    if status == kernels.ST_UNDERFLOW:
        raise GeodesicIntegrationError(
            f"step size underflow at s={S[-1]:.6g}, (u, v)=({Y[-1, 0]:.6g}, {Y[-1, 1]:.6g})",
            traj.final,
        )
    traj.status = _STATUS[int(status)]
    return traj


def integrate_from_axis(
    p: OrbitParams,
    axis: str = "u",
    a: float = 1.0,
    stop_radius: float | None = 1e3,
    ctrl: IntegratorControls | None = None,
    events=DEFAULT_EVENTS,
    step: float | None = None,
) -> Trajectory:
    """Convenience: ``start_from_axis`` followed by ``integrate``."""
    return integrate(p, start_from_axis(p, axis, a, step), ctrl, events, stop_radius)


@dataclass(frozen=True)
class Linearization:
    """Exponents of ``omega - omega* ~ r^lambda`` near the cone ray."""

    plus: complex
    minus: complex
    discriminant: float
    oscillatory: bool

    @property
    def roots(self) -> tuple:
        if self.oscillatory:
            return self.plus, self.minus
        return self.plus.real, self.minus.real


def linearize_at_cone(p: OrbitParams) -> Linearization:
    """Roots of ``lambda^2 + (m+n+1) lambda + 2(m+n) = 0``.

    In log-polar coordinates ``t = log r`` the weighted length is
    ``integral e^((m+n+1) t) f(omega) sqrt(1 + omega'^2) dt`` and
    ``f''/f = -2(m+n)`` at the cone angle, which gives this Jacobi equation.
    """
    b = float(p.d)
    c = 2.0 * p.k
    disc = b * b - 4.0 * c
    if disc >= 0.0:
        sq = math.sqrt(disc)
        # avoid cancellation in the smaller-magnitude root
        minus = -(b + sq) / 2.0
        plus = c / minus
        return Linearization(complex(plus), complex(minus), disc, False)
    sq = math.sqrt(-disc)
    return Linearization(complex(-b / 2.0, sq / 2.0), complex(-b / 2.0, -sq / 2.0), disc, True)


def profile_curvature_ratio(p: OrbitParams, step: float = 1e-3) -> float:
    """Five-point estimate of ``f''(omega*) / f(omega*)``; exact value is ``-2(m+n)``."""
    w = cone_angle(p)
    f = [float(cone_profile(p, w + j * step)) for j in (-2, -1, 0, 1, 2)]
    d2 = (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * step * step)
    return d2 / f[2]


@dataclass
class BVPResult:
    points: np.ndarray
    length: float
    seed_length: float
    seed: str
    converged: bool
    history: list
    warning: str | None = None

    @property
    def curve(self) -> Curve:
        return Curve(self.points)


def _gauss01(p: OrbitParams):
    q = (p.k + 2) // 2 + 1
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (x + 1.0), 0.5 * w


def polyline_length(p: OrbitParams, points) -> float:
    """Weighted length of a polyline, exact up to rounding.

    Along a straight segment ``u^m v^n`` is a polynomial of degree m+n in the
    segment parameter, which Gauss-Legendre with this many nodes integrates
    exactly.
    """
    gx, gw = _gauss01(p)
    return float(kernels.polyline_length_grad(np.asarray(points, dtype=float), float(p.m), float(p.n), gx, gw)[0])


def _respace(points: np.ndarray) -> np.ndarray:
    seg = np.hypot(*np.diff(points, axis=0).T)
    s = np.concatenate(([0.0], np.cumsum(seg)))
    t = np.linspace(0.0, s[-1], points.shape[0])
    out = np.column_stack((np.interp(t, s, points[:, 0]), np.interp(t, s, points[:, 1])))
    out[0], out[-1] = points[0], points[-1]
    return out


def _seed_polyline(kind: str, A: np.ndarray, B: np.ndarray, nodes: int) -> np.ndarray:
    if kind == "straight":
        t = np.linspace(0.0, 1.0, nodes)[:, None]
        return (1.0 - t) * A + t * B
    if kind not in ("u-dip", "v-dip"):
        raise ValueError(f"unknown seed {kind!r}")
    # drop to the axis, slide along it (zero weight), climb back
    j = 1 if kind == "u-dip" else 0
    FA, FB = A.copy(), B.copy()
    FA[j] = 0.0
    FB[j] = 0.0
    return _resample(np.vstack((A, FA, FB, B)), nodes)


def _resample(P: np.ndarray, nodes: int) -> np.ndarray:
    seg = np.hypot(*np.diff(P, axis=0).T)
    s = np.concatenate(([0.0], np.cumsum(seg)))
    t = np.linspace(0.0, s[-1], nodes)
    return np.column_stack((np.interp(t, s, P[:, 0]), np.interp(t, s, P[:, 1])))


def _descend(p: OrbitParams, P0: np.ndarray, max_rounds: int, iters_per_round: int, rtol: float):
    gx, gw = _gauss01(p)
    m, n = float(p.m), float(p.n)
    N = P0.shape[0]
    A, B = P0[0].copy(), P0[-1].copy()

    def assemble(x):
        P = np.empty((N, 2))
        P[0], P[-1] = A, B
        P[1:-1] = x.reshape(N - 2, 2)
        return P

    def fun(x):
        L, g = kernels.polyline_length_grad(assemble(x), m, n, gx, gw)
        return L, g[1:-1].ravel()

    P = P0.copy()
    L = fun(P[1:-1].ravel())[0]
    history = [L]
    converged = False
    bounds = [(0.0, None)] * (2 * (N - 2))
    for _ in range(max_rounds):
        L_round = L

        def record(xk):
            history.append(fun(xk)[0])

        res = minimize(
            fun,
            P[1:-1].ravel(),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            callback=record,
            options={"maxiter": iters_per_round, "ftol": 1e-15, "gtol": 1e-14 * max(L, 1e-300)},
        )
        if res.fun <= L:
            P, L = assemble(res.x), float(res.fun)
        # node clustering guard: keep a re-spaced polyline only if it is no longer
        Q = _respace(P)
        LQ = polyline_length(p, Q)
        if LQ <= L:
            P, L = Q, LQ
            history.append(L)
        if L_round - L <= rtol * abs(L_round):
            converged = True
            break
    return P, L, converged, history


def solve_bvp(
    p: OrbitParams,
    A: QuadrantPoint,
    B: QuadrantPoint,
    nodes: int = 64,
    seeds=("straight", "u-dip", "v-dip"),
    max_rounds: int = 40,
    iters_per_round: int = 500,
    rtol: float = 1e-14,
) -> BVPResult:
    """Discrete minimizer of weighted length between two fixed endpoints.

    Interior nodes move freely in the closed quadrant; each seed polyline is
    descended with a bound-constrained quasi-Newton line search and
    periodically re-spaced by arclength.  The best result over the seeds is
    returned, so its length never exceeds that of the straight segment.
    """
    if nodes < 8:
        raise ValueError(f"need at least 8 nodes, got {nodes}")
    a = np.array([A.u, A.v], dtype=float)
    b = np.array([B.u, B.v], dtype=float)
    if np.array_equal(a, b):
        return BVPResult(a[None, :].copy(), 0.0, 0.0, "straight", True, [0.0])
    if not (A.interior and B.interior):
        raise DomainError("endpoints must be interior points")
    best = None
    straight_len = None
    for kind in seeds:
        P0 = _seed_polyline(kind, a, b, nodes)
        L0 = polyline_length(p, P0)
        if kind == "straight":
            straight_len = L0
        P, L, conv, hist = _descend(p, P0, max_rounds, iters_per_round, rtol)
        if best is None or L < best.length:
            best = BVPResult(P, L, L0, kind, conv, hist)
    if straight_len is not None:
        best.seed_length = straight_len
    if not best.converged:
        best.warning = "descent did not converge; returning best iterate"
        warnings.warn(best.warning, RuntimeWarning, stacklevel=2)
    return best
