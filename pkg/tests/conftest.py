import numpy as np
import pytest

from equicone.fields import GridField

ACCEPTANCE_LINES = []


def record_acceptance(number, name, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>3}: {name}"
    if detail:
        line += f"  [{detail}]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def band_limited_field(rng, ndim, h, kmax=3, terms=6):
    """Unit linear ramp plus a few low-frequency sines, small enough that grad f never vanishes."""
    a = rng.normal(size=ndim)
    a /= np.linalg.norm(a)
    ks = rng.integers(-kmax, kmax + 1, size=(terms, ndim)).astype(float)
    amp = rng.uniform(0.0, 0.6, size=terms) / (2 * np.pi * np.maximum(np.linalg.norm(ks, axis=1), 1.0) * terms)
    phase = rng.uniform(0.0, 2 * np.pi, size=terms)

    def fn(*X):
        out = sum(ai * x for ai, x in zip(a, X))
        for kk, A, ph in zip(ks, amp, phase):
            out = out + A * np.sin(2 * np.pi * sum(ki * x for ki, x in zip(kk, X)) + ph)
        return out

    return GridField.on_box(fn, (0.0,) * ndim, (1.0,) * ndim, h)


def random_curve(rng, nodes=50):
    pts = rng.uniform(0.05, 3.0, size=(nodes, 2))
    return pts[np.argsort(pts[:, 0] + 1e-3 * rng.random(nodes))]


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
