import importlib.util
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from equicone import kernels
from equicone._jit import DISABLE_ENV
from equicone.geodesic import _gauss01, integrate_from_axis, polyline_length
from equicone.orbit import OrbitParams

PROBE = """
import json, numpy as np
from equicone import NUMBA_ENABLED, OrbitParams, integrate_from_axis, compete
T = integrate_from_axis(OrbitParams(1, 5), "v", 1.0, 100.0)
c = compete(OrbitParams(2, 2), 1.0, 1.5, 16)
print(json.dumps({"numba": NUMBA_ENABLED, "n": len(T), "final": [T.u[-1], T.v[-1], T.theta[-1], T.length[-1]],
                  "events": T.events_records(), "compete": c.competitor_length}))
"""


def _probe(disable):
    env = dict(os.environ)
    env.pop(DISABLE_ENV, None)
    if disable:
        env[DISABLE_ENV] = "1"
    out = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def test_numba_and_fallback_agree():
    fast = _probe(False)
    slow = _probe(True)
    assert slow["numba"] is False
    assert fast["numba"] is (importlib.util.find_spec("numba") is not None)
    assert fast["n"] == slow["n"]
    np.testing.assert_allclose(fast["final"], slow["final"], rtol=1e-12)
    assert [e["kind"] for e in fast["events"]] == [e["kind"] for e in slow["events"]]
    assert fast["compete"] == pytest.approx(slow["compete"], rel=1e-12)


def _py(fn):
    return getattr(fn, "py_func", fn)


def test_rhs_kernel_refuses_axis():
    out = np.empty(4)
    assert kernels.geodesic_rhs_kernel(1.0, 1.0, np.array([1.0, 1.0, 0.2, 0.0]), out)
    assert out[3] == pytest.approx(1.0)
    assert not kernels.geodesic_rhs_kernel(1.0, 1.0, np.array([0.0, 1.0, 0.2, 0.0]), out)


def test_gauss_quadrature_is_exact_on_segments():
    p = OrbitParams(3, 4)
    P = np.array([[0.2, 1.0], [1.5, 0.3]])
    # exact: integrate the degree-7 polynomial along the segment with numpy
    t = np.polynomial.polynomial
    u = np.array([0.2, 1.3])
    v = np.array([1.0, -0.7])
    poly = t.polymul(t.polypow(u, 3), t.polypow(v, 4))
    anti = t.polyint(poly)
    exact = (t.polyval(1.0, anti) - t.polyval(0.0, anti)) * np.hypot(1.3, -0.7)
    assert polyline_length(p, P) == pytest.approx(exact, rel=1e-14)


def test_polyline_gradient_matches_finite_differences(rng):
    p = OrbitParams(2, 3)
    gx, gw = _gauss01(p)
    P = np.cumsum(rng.uniform(0.05, 0.2, size=(12, 2)), axis=0) + 0.1
    L, G = kernels.polyline_length_grad(P, float(p.m), float(p.n), gx, gw)
    eps = 1e-6
    for i in (0, 5, 11):
        for j in (0, 1):
            Q = P.copy()
            Q[i, j] += eps
            Lp = kernels.polyline_length_grad(Q, float(p.m), float(p.n), gx, gw)[0]
            Q[i, j] -= 2 * eps
            Lm = kernels.polyline_length_grad(Q, float(p.m), float(p.n), gx, gw)[0]
            assert G[i, j] == pytest.approx((Lp - Lm) / (2 * eps), rel=1e-6, abs=1e-9)


def test_hermite_lookup_reproduces_cubics():
    w = np.linspace(0.0, 1.0, 7)
    f = lambda x: 1 - 2 * x + 0.5 * x**3
    df = lambda x: -2 + 1.5 * x**2
    q = np.array([0.0, 0.123, 0.5, 0.999, 1.0, 1.2, -0.1])
    out = kernels.hermite_radius_lookup(w, f(w), df(w), q)
    np.testing.assert_allclose(out[:5], f(q[:5]), rtol=1e-14, atol=1e-15)
    assert np.isnan(out[5]) and np.isnan(out[6])


def test_python_fallbacks_match_compiled(rng):
    P = rng.uniform(0.1, 2.0, size=(30, 2))
    assert _py(kernels.trapezoid_weighted_length)(P, 2.0, 3.0) == pytest.approx(
        kernels.trapezoid_weighted_length(P, 2.0, 3.0), rel=1e-14
    )
    w = np.linspace(0.1, 1.0, 5)
    q = rng.uniform(0.1, 1.0, size=20)
    np.testing.assert_allclose(
        _py(kernels.hermite_radius_lookup)(w, np.sin(w), np.cos(w), q),
        kernels.hermite_radius_lookup(w, np.sin(w), np.cos(w), q),
        rtol=1e-15,
    )


def test_spiral_crossings_alternate_direction():
    # (1,1) spirals into the cone: successive crossings go in opposite directions
    T = integrate_from_axis(OrbitParams(1, 1), "u", 1.0, 1e3)
    assert len(T.events) >= 3
    side = [np.sign(np.sin(st.theta - st.omega)) for _, st in T.events]
    assert all(a == -b for a, b in zip(side, side[1:]))
