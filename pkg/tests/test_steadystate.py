import math

import numpy as np
import pytest

from resetfreq.model import build_closed_loop, clegg, realize_transfer_function, unity
from resetfreq.simulator import PeriodicInput, settle_time, simulate
from resetfreq.steadystate import (SolverConfig, SteadyStateError, evaluate_steady_state,
                                   harmonic_basis, psi, signal, solve_steady_state,
                                   solve_with_reset_phases)

FREQS_HZ = (1.0, 3.3, 12.0, 47.0, 230.0, 900.0)
CASES = [(name, f, ch) for name in ("spcid", "ppcid", "cg1", "cg2") for f in FREQS_HZ
         for ch in ("reference", "disturbance")]


@pytest.fixture(scope="module")
def solved(systems):
    cache = {}

    def get(name, f, channel):
        key = (name, f, channel)
        if key not in cache:
            cache[key] = solve_steady_state(systems[name], 2 * np.pi * f, channel)
        return cache[key]

    return get


def test_harmonic_basis_and_psi(systems):
    sys = systems["cg1"]
    w = 2 * np.pi * 7
    for channel, col in (("reference", 0), ("disturbance", 1)):
        b = harmonic_basis(sys, w, channel)
        lhs = (w**2 * np.eye(sys.n) + sys.A_bar @ sys.A_bar) @ b.F
        np.testing.assert_allclose(lhs, sys.B_bar[:, col], atol=1e-10 * np.linalg.norm(lhs))
        np.testing.assert_allclose(psi(sys, b, 0.0), w * b.F)
        np.testing.assert_allclose(psi(sys, b, np.pi / (2 * w)), sys.A_bar @ b.F,
                                   atol=1e-12 * np.linalg.norm(sys.A_bar @ b.F))
        t = np.linspace(0, 1, 17)
        np.testing.assert_allclose(psi(sys, b, t + np.pi / w), -psi(sys, b, t),
                                   atol=1e-12 * np.linalg.norm(w * b.F))


def test_psi_is_the_forced_response(systems):
    # -psi(t) solves x' = A x + b sin(w t)
    sys = systems["ppcid"]
    w = 9.0
    b = harmonic_basis(sys, w)
    t = np.array([0.1, 0.77])
    h = 1e-6
    x = -psi(sys, b, t)
    dx = -(psi(sys, b, t + h) - psi(sys, b, t - h)) / (2 * h)
    rhs = x @ sys.A_bar.T + np.outer(np.sin(w * t), sys.B_bar[:, 0])
    np.testing.assert_allclose(dx, rhs, rtol=1e-6, atol=1e-6 * np.abs(rhs).max())


@pytest.mark.parametrize("name,f,channel", CASES)
def test_solution_invariants(systems, solved, name, f, channel):
    sys = systems[name]
    sol = solved(name, f, channel)
    w = sol.omega
    cfg = SolverConfig()
    assert sol.q >= 1
    assert sum(sol.tau) == pytest.approx(np.pi / w, rel=1e-9)
    assert min(sol.tau) >= cfg.lambda_min_for(w)
    assert sol.kappa**2 <= 1
    assert sol.kappa == pytest.approx(math.sin(w * sol.t_s), abs=1e-12)
    assert 0 <= sol.t_s < 2 * np.pi / w
    assert len(sol.xi) == sol.q + 1
    np.testing.assert_allclose(sol.xi[-1], -sol.xi[0], atol=1e-7 * np.linalg.norm(sol.xi[0]))

    eR = signal(sol, sys, "e_R", sol.reset_instants)
    assert np.max(np.abs(eR)) <= 1e-8

    t = sol.t_s + np.random.default_rng(3).uniform(0, 2 * np.pi / w, 50)
    X = evaluate_steady_state(sol, sys, t)
    scale = np.abs(X).max()
    np.testing.assert_allclose(evaluate_steady_state(sol, sys, t + np.pi / w), -X,
                               atol=1e-7 * scale)
    np.testing.assert_allclose(evaluate_steady_state(sol, sys, t + 2 * np.pi / w), X,
                               atol=1e-7 * scale)


@pytest.mark.parametrize("name,f,channel", CASES[::5])
def test_reset_sign_pattern(systems, solved, name, f, channel):
    """e_R keeps one sign inside each flow interval and the jump maps left limits to xi."""
    sys = systems[name]
    sol = solved(name, f, channel)
    inst = np.append(sol.reset_instants, sol.t_s + 2 * np.pi / sol.omega)
    for a, b in zip(inst[:-1], inst[1:]):
        t = np.linspace(a, b, 400)[1:-1]
        v = signal(sol, sys, "e_R", t)
        assert np.all(v > -1e-9) or np.all(v < 1e-9)
    # evaluation is left-continuous, so at a reset instant it returns the pre-jump state
    left = evaluate_steady_state(sol, sys, sol.reset_instants[: sol.q])
    for i in range(sol.q):
        np.testing.assert_allclose(sys.Arho_bar @ left[i], sol.xi[i],
                                   atol=1e-8 * np.abs(sol.xi[i]).max())


def test_identity_reset_single_crossing(systems):
    sys = systems["pid"]
    w = 2 * np.pi * 4
    sol = solve_steady_state(sys, w)
    assert sol.q == 1
    H = sys.linear_response(w, "e_R")
    # zero crossing of Im(H exp(j w t)) where it goes from negative to positive
    t_cross = ((-np.angle(H)) % (2 * np.pi)) / w
    assert min(abs(sol.t_s - t_cross), abs(sol.t_s + np.pi / w - t_cross),
               abs(sol.t_s - np.pi / w - t_cross)) < 1e-9
    t = np.linspace(0, 1, 101)
    x_lin = np.imag(np.outer(np.exp(1j * w * t), np.linalg.solve(
        1j * w * np.eye(sys.n) - sys.A_bar, sys.B_bar[:, 0])))
    np.testing.assert_allclose(evaluate_steady_state(sol, sys, t), x_lin,
                               atol=1e-9 * np.abs(x_lin).max())


def test_ppcid_reset_instants_match_simulation(systems):
    sys = systems["ppcid"]
    w = 2 * np.pi
    sol = solve_steady_state(sys, w)
    inp = PeriodicInput.sinusoid(w)
    n = int(math.ceil(settle_time(sys))) + 2
    trace = simulate(sys, inp, n * inp.period)
    last = trace.reset_instants[trace.reset_instants >= (n - 1) * inp.period] % inp.period
    ref = np.sort(sol.reset_instants % inp.period)
    assert last.size == ref.size == 2 * sol.q
    np.testing.assert_allclose(np.sort(last), ref, atol=1e-4)
    # consecutive half periods repeat the pattern
    np.testing.assert_allclose(np.diff(ref[:: sol.q]), np.pi / w, atol=1e-9)


def test_prescribed_phases_roundtrip(systems, solved):
    sys = systems["cg1"]
    sol = solved("cg1", 12.0, "reference")
    phases = sol.reset_phases
    deltas = np.diff(np.append(phases, phases[0] + np.pi))
    again = solve_with_reset_phases(sys, sol.omega, "reference", phases[0], deltas)
    assert again.residual <= 1e-8
    for a, b in zip(again.xi, sol.xi):
        np.testing.assert_allclose(a, b, atol=1e-9 * np.abs(b).max())


def test_no_reset_activity():
    G = realize_transfer_function([8695.0], [1.0, 4.36, 7627.0])
    sys = build_closed_loop(unity(0.0), clegg(), unity(1.0), G)
    sol = solve_steady_state(sys, 10.0)
    assert sol.no_reset and sol.q == 0
    t = np.linspace(0, 1, 9)
    np.testing.assert_allclose(evaluate_steady_state(sol, sys, t), -sol.basis.psi(10.0 * t))


def test_rejections(systems):
    with pytest.raises(ValueError):
        solve_steady_state(systems["cg1"], 0.0)
    with pytest.raises(ValueError):
        solve_steady_state(systems["cg1"], 1.0, "sideways")
    with pytest.raises(ValueError):
        SolverConfig(lambda_min=-1.0).lambda_min_for(1.0)
    # a lower bound longer than half the period admits no reset pattern
    with pytest.raises(SteadyStateError) as exc:
        solve_steady_state(systems["ppcid"], 2 * np.pi * 50, cfg=SolverConfig(lambda_min=0.02))
    assert exc.value.best_residual < np.inf
