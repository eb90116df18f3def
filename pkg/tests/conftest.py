import sys

import numpy as np
import pytest

from warpflow.state import BaseKind, FiberSpec, FlowStateS1, FlowStateSurface


def circle_state(vs, fibers, M=128, phi=None, t=0.0):
    theta = np.arange(M) * (2 * np.pi / M)
    v = np.array([np.broadcast_to(f(theta), theta.shape) for f in vs], float)
    ph = np.ones(M) if phi is None else np.asarray(phi(theta), float)
    return FlowStateS1(t, theta, ph, v, tuple(fibers))


def torus_state(ws, fibers, M=32, g=None, t=0.0):
    x = np.arange(M) * (2 * np.pi / M)
    X, Y = np.meshgrid(x, x, indexing="ij")
    w = np.array([np.broadcast_to(f(X, Y), X.shape) for f in ws], float)
    if g is None:
        g = (np.ones_like(X), np.zeros_like(X), np.ones_like(X))
    else:
        g = g(X, Y)
    gg = np.array([np.broadcast_to(c, X.shape) for c in g], float)
    return FlowStateSurface(t, x, x.copy(), gg, w, tuple(fibers))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


S2 = FiberSpec.unit_sphere(2)
S3 = FiberSpec.unit_sphere(3)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
