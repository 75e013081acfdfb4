import math

import numpy as np
import pytest

from equicone.geodesic import (
    Event,
    GeodesicIntegrationError,
    GeodesicState,
    IntegratorControls,
    Trajectory,
    axis_slope,
    geodesic_rhs,
    integrate,
    integrate_from_axis,
    linearize_at_cone,
    polyline_length,
    profile_curvature_ratio,
    solve_bvp,
    start_from_axis,
)
from equicone.orbit import Curve, DomainError, OrbitParams, QuadrantPoint, cone_angle, ray_length, weighted_length


def test_rhs_matches_formula():
    p = OrbitParams(2, 3)
    st = GeodesicState(0.7, 1.3, 0.4)
    du, dv, dth = geodesic_rhs(p, st)
    assert (du, dv) == (math.cos(0.4), math.sin(0.4))
    assert dth == pytest.approx(-2 / 0.7 * math.sin(0.4) + 3 / 1.3 * math.cos(0.4))


def test_controls_must_be_positive():
    with pytest.raises(ValueError):
        IntegratorControls(rtol=0.0)
    with pytest.raises(ValueError):
        IntegratorControls(max_step=-1.0)


def test_start_from_axis_validation():
    p = OrbitParams(1, 1)
    with pytest.raises(ValueError):
        start_from_axis(p, "u", 0.0)
    with pytest.raises(ValueError):
        start_from_axis(p, "u", 1.0, step=0.6)
    with pytest.raises(ValueError):
        start_from_axis(p, "w", 1.0)
    with pytest.raises(DomainError):
        integrate(p, GeodesicState(0.0, 1.0, 0.0))


def test_series_start_is_consistent_with_the_ode():
    # integrating from a smaller step must reach the state produced by a larger one
    p = OrbitParams(1, 5)
    a = 1.0
    fine = integrate(p, start_from_axis(p, "u", a, 1e-5), IntegratorControls(max_step=1e-4), events=(), stop_radius=None)
    coarse = start_from_axis(p, "u", a, 1e-3)
    head = fine.v < 2e-3
    assert np.all(np.diff(fine.v[head]) > 0)
    assert np.interp(coarse.v, fine.v[head], fine.theta[head]) == pytest.approx(coarse.theta, abs=1e-8)
    assert np.interp(coarse.v, fine.v[head], fine.u[head]) == pytest.approx(coarse.u, abs=1e-10)
    assert np.interp(coarse.v, fine.v[head], fine.length[head]) == pytest.approx(coarse.length, rel=1e-5)
    assert axis_slope(p, "u", 2.0) == pytest.approx(1 / 12)


def test_trajectory_outputs(tmp_path):
    p = OrbitParams(3, 3)
    T = integrate_from_axis(p, "u", 1.0, 50.0)
    assert T.status == "stop_radius" and isinstance(T, Trajectory)
    assert T.r[-1] == pytest.approx(50.0)
    assert np.all(np.diff(T.s) > 0) and np.all(np.diff(T.length) > 0)
    T.to_csv(tmp_path / "t.csv")
    header = (tmp_path / "t.csv").read_text().splitlines()[0]
    assert header == "s,u,v,theta,r,omega"
    assert T.events_records() == []
    assert isinstance(T.to_curve(), Curve)


def test_accumulated_length_matches_quadrature():
    p = OrbitParams(2, 2)
    T = integrate_from_axis(p, "u", 1.0, 5.0, IntegratorControls(max_step=1e-3), step=1e-4)
    # the series leg from the axis is included in T.length
    tail = weighted_length(p, Curve(T.points()))
    assert T.length[-1] - T.length[0] == pytest.approx(tail, rel=1e-6)


def test_escape_and_stop_radius_status():
    p = OrbitParams(3, 3)
    T = integrate_from_axis(p, "u", 1.0, stop_radius=1e6, ctrl=IntegratorControls(max_radius=20.0))
    assert T.status == "escaped" and T.r[-1] == pytest.approx(20.0)


def test_crossings_one_five_from_v_foot_only():
    p = OrbitParams(1, 5)
    Tu = integrate_from_axis(p, "u")
    Tv = integrate_from_axis(p, "v")
    assert Tu.events_of(Event.RAY_CROSSING) == []
    cross = Tv.events_of(Event.RAY_CROSSING)
    assert len(cross) == 1
    st = cross[0]
    assert st.omega == pytest.approx(cone_angle(p), abs=1e-12)


def test_self_scaling_contact_event():
    p = OrbitParams(2, 2)
    T = integrate_from_axis(p, "u", events=set(Event))
    contacts = T.events_of(Event.SELF_SCALING_CONTACT)
    assert contacts
    for st in contacts:
        assert abs(math.sin(st.theta - st.omega)) < 1e-9


def test_ray_crossing_event_count_matches_sign_changes():
    p = OrbitParams(2, 2)
    T = integrate_from_axis(p, "u")
    res = T.residual
    sig = np.sign(res[np.abs(res) > 1e-10])
    assert len(T.events_of(Event.RAY_CROSSING)) == np.count_nonzero(sig[1:] != sig[:-1])


def test_underflow_raises():
    p = OrbitParams(1, 1)
    # a tolerance below rounding can never be met, so the step collapses
    ctrl = IntegratorControls(rtol=1e-30, atol=1e-300)
    with pytest.raises(GeodesicIntegrationError) as info:
        integrate(p, GeodesicState(0.5, 1.0, 0.3), ctrl, stop_radius=10.0)
    assert info.value.last_state is not None


def test_linearization():
    lin = linearize_at_cone(OrbitParams(3, 3))
    assert lin.roots == (-3.0, -4.0) and not lin.oscillatory
    osc = linearize_at_cone(OrbitParams(2, 2))
    assert osc.oscillatory and osc.plus.real == pytest.approx(-2.5)
    for m, n in ((1, 1), (2, 5), (6, 6)):
        assert profile_curvature_ratio(OrbitParams(m, n)) == pytest.approx(-2 * (m + n), abs=1e-6)


def test_solve_bvp_basics():
    p = OrbitParams(1, 1)
    A, B = QuadrantPoint(1.0, 1.0), QuadrantPoint(1.0, 1.0)
    res = solve_bvp(p, A, B)
    assert res.length == 0.0 and len(res.points) == 1
    with pytest.raises(ValueError):
        solve_bvp(p, A, QuadrantPoint(2, 2), nodes=4)
    with pytest.raises(DomainError):
        solve_bvp(p, QuadrantPoint(0.0, 1.0), QuadrantPoint(2, 2))


def test_solve_bvp_never_worse_than_seed():
    p = OrbitParams(2, 2)
    A, B = QuadrantPoint(1.0, 0.3), QuadrantPoint(0.3, 1.0)
    res = solve_bvp(p, A, B, nodes=32)
    assert res.length <= res.seed_length
    assert res.length < res.seed_length * (1 - 1e-3)
    assert all(b <= a * (1 + 1e-14) for a, b in zip(res.history, res.history[1:]))
    assert polyline_length(p, res.points) == pytest.approx(res.length, rel=1e-14)


def test_solve_bvp_recovers_ray_segment():
    p = OrbitParams(3, 3)
    w = cone_angle(p)
    A = QuadrantPoint(math.cos(w), math.sin(w))
    B = QuadrantPoint(2 * math.cos(w), 2 * math.sin(w))
    res = solve_bvp(p, A, B, nodes=32)
    assert res.length == pytest.approx(ray_length(p, 1.0, 2.0), rel=1e-12)
