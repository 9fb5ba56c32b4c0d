import numpy as np
import pytest

from resetfreq.config import bundled_systems, load_system
from resetfreq.steadystate import signal

RESET_SYSTEMS = ("spcid", "ppcid", "cg1", "cg2")

# filled by tests/test_acceptance.py, reported once at the end of the session
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def systems():
    return {name: load_system(name).system for name in bundled_systems()}


def gauss_harmonics(sol, sys, name, harmonics, nodes=24, amplitude=1.0):
    """Harmonic ratios by Gauss-Legendre quadrature on each flow interval.

    The steady-state signal is smooth between resets, so splitting the period
    at the reset instants gives spectral accuracy without touching the
    closed-form resolvent expressions.  Each interval is further split on a
    mesh graded towards its start, where fast modes excited by the jump decay.
    """
    w = sol.omega
    T = 2 * np.pi / w
    t0 = sol.t_s if sol.q else 0.0
    edges = np.unique(np.concatenate([[t0, t0 + T], sol.reset_instants]))
    x, wts = np.polynomial.legendre.leggauss(nodes)
    out = np.zeros(len(harmonics), dtype=complex)
    grading = np.concatenate([[0.0], np.logspace(-7, 0, 29)])
    pieces = [(a + (b - a) * g0, a + (b - a) * g1)
              for a, b in zip(edges[:-1], edges[1:]) for g0, g1 in zip(grading[:-1], grading[1:])]
    for a, b in pieces:
        t = 0.5 * (b - a) * x + 0.5 * (a + b)
        v = signal(sol, sys, name, t, amplitude)
        for k, n in enumerate(harmonics):
            out[k] += 0.5 * (b - a) * np.sum(wts * v * np.exp(-1j * n * w * t))
    return out * (1j * w / np.pi) / amplitude


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
