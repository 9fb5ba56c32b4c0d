import csv
import math
from fractions import Fraction

import numpy as np
import pytest

from resetfreq.model import build_closed_loop, clegg, realize_transfer_function, unity
from resetfreq.simulator import (InputComponent, PeriodicInput, SimConfig, SimulationError,
                                 extract_period, fourier_coefficients, settle_time, simulate,
                                 write_trace_csv)


def test_input_periods():
    two = PeriodicInput((InputComponent("r", 1.0, 1), InputComponent("r", 0.3, 3)))
    assert two.fundamental_frequency == 1 and two.period == 1.0
    assert two.omega_M == pytest.approx(2 * np.pi)
    mixed = PeriodicInput((InputComponent("r", 1.0, Fraction(3, 2)),
                           InputComponent("d", 1.0, Fraction(5, 2))))
    assert mixed.fundamental_frequency == Fraction(1, 2)
    r, d = mixed(np.array([0.1, 0.2]))
    np.testing.assert_allclose(r, np.sin(3 * np.pi * np.array([0.1, 0.2])))
    np.testing.assert_allclose(d, np.sin(5 * np.pi * np.array([0.1, 0.2])))
    with pytest.raises(ValueError):
        InputComponent("x", 1.0, 1)
    with pytest.raises(ValueError):
        InputComponent("r", 1.0, 0)
    with pytest.raises(ValueError):
        PeriodicInput(())
    with pytest.raises(ValueError):
        SimConfig(rel_tol=0)


def test_fourier_examples():
    w = 3.0
    t = np.arange(256) * (2 * np.pi / w) / 256
    assert fourier_coefficients((t, np.sin(w * t)), w, 1) == pytest.approx(1.0, abs=1e-13)
    assert fourier_coefficients((t, np.sin(w * t)), w, 2) == pytest.approx(0.0, abs=1e-13)
    v = np.sin(w * t) + 0.1 * np.sin(3 * w * t)
    assert fourier_coefficients((t, v), w, 3) == pytest.approx(0.1, abs=1e-13)
    assert fourier_coefficients((t, 5 * v), w, 3, amplitude=5) == pytest.approx(0.1, abs=1e-13)
    with pytest.raises(ValueError):
        fourier_coefficients((t[:100], v[:100]), w, 1)


def test_identity_reset_matches_linear_response(systems):
    sys = systems["pid"]
    w = 2 * np.pi * 10
    inp = PeriodicInput.sinusoid(w)
    tr = simulate(sys, inp, 0.2)
    # variation of constants from x(0) = 0: steady part plus the decaying homogeneous part
    F = np.linalg.solve(1j * w * np.eye(sys.n) - sys.A_bar, sys.B_bar[:, 0])
    lam, V = np.linalg.eig(sys.A_bar)
    c0 = np.linalg.solve(V, -np.imag(F))
    X = (np.imag(np.outer(np.exp(1j * w * tr.times), F))
         + np.real(np.exp(np.outer(tr.times, lam)) * c0 @ V.T))
    np.testing.assert_allclose(tr.states, X, atol=1e-8 * np.abs(X).max())
    wf = extract_period(simulate(sys, inp, 1.0), inp.period, 5)
    ref = np.imag(np.outer(np.exp(1j * w * wf.times), F))
    np.testing.assert_allclose(wf.states, ref, atol=1e-6 * np.abs(ref).max())


def test_events_and_half_period_resets(systems):
    sys = systems["cg1"]
    w = 2 * np.pi * 200
    inp = PeriodicInput.sinusoid(w)
    cfg = SimConfig()
    tr = simulate(sys, inp, settle_time(sys) + 4 * inp.period, cfg)
    assert np.all(np.diff(tr.reset_instants) >= 1e-9 * inp.period)
    assert np.max(tr.reset_residuals) <= cfg.event_tol
    late = tr.reset_instants[tr.reset_instants > settle_time(sys)]
    assert late.size >= 6
    np.testing.assert_allclose(np.diff(late), np.pi / w, atol=1e-6 * inp.period)


def test_two_tone_and_square_wave_periodicity(systems):
    sys = systems["ppcid"]
    two = PeriodicInput((InputComponent("r", 1.0, 1), InputComponent("r", 0.5, 3)))
    n = int(math.ceil(settle_time(sys)))
    assert extract_period(simulate(sys, two, n + 2.0), 1.0, n).residual < 1e-4
    # odd-harmonic square-wave approximant at 4 Hz
    sq = PeriodicInput(tuple(InputComponent("r", 4 / (np.pi * k), 4 * k) for k in (1, 3, 5, 7, 9)))
    P = sq.period
    m = int(math.ceil(settle_time(sys) / P))
    assert extract_period(simulate(sys, sq, (m + 2) * P), P, m).residual < 1e-4


def test_residual_decreases_with_settling(systems):
    sys = systems["spcid"]
    inp = PeriodicInput.sinusoid(2 * np.pi * 20)
    P = inp.period
    res = [extract_period(simulate(sys, inp, (k + 2) * P), P, k).residual for k in (0, 2, 6)]
    assert res[0] > res[1] > res[2]


def test_free_decay_with_certificate(systems):
    sys = systems["spcid"]
    x0 = np.zeros(sys.n)
    x0[sys.n_r:] = np.random.default_rng(2).normal(size=sys.n_p)
    inp = PeriodicInput((InputComponent("r", 0.0, 10),))
    tr = simulate(sys, inp, 1.0, x0=x0)
    norms = np.linalg.norm(tr.states, axis=1)
    # resets keep firing on round-off sized errors, so the norm is not monotone
    # once it has collapsed; only the collapse itself is asserted
    assert np.max(norms[tr.times > 0.5]) < 1e-8 * norms[0]
    assert np.max(norms[tr.times > 0.1]) < norms[0]


def test_extract_period_errors(systems):
    sys = systems["cg1"]
    inp = PeriodicInput.sinusoid(2 * np.pi * 10)
    tr = simulate(sys, inp, 0.25)
    with pytest.raises(ValueError, match="too short"):
        extract_period(tr, inp.period, 5)
    with pytest.raises(ValueError):
        extract_period(tr, inp.period * 1.0001, 0)
    with pytest.raises(ValueError):
        simulate(sys, inp, 0.0)


def test_event_storm_aborts():
    G = realize_transfer_function([1.0], [1.0, 1.0])
    sys = build_closed_loop(unity(), clegg(1.0), unity(1.0), G)
    inp = PeriodicInput.sinusoid(2 * np.pi * 5)
    # resets arrive every 0.1 s; a 2 ms guard makes that spacing count as a storm
    with pytest.raises(SimulationError, match="storm"):
        simulate(sys, inp, 1.0, SimConfig(zeno_guard=2e-3, storm_limit=4))
    tr = simulate(sys, inp, 1.0, SimConfig(zeno_guard=5e-4, storm_limit=4))
    assert tr.reset_instants.size >= 8
    with pytest.raises(ValueError):
        SimConfig(storm_limit=1)


def test_trace_csv(tmp_path, systems):
    sys = systems["ppcid"]
    tr = simulate(sys, PeriodicInput.sinusoid(2 * np.pi * 50), 0.05, SimConfig(samples_per_period=64))
    write_trace_csv(tr, tmp_path / "trace.csv", tmp_path / "resets.csv")
    with open(tmp_path / "trace.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t"] + [f"x{i + 1}" for i in range(sys.n)] + ["y", "e", "e_R", "u"]
    assert len(rows) == tr.times.size + 1
    np.testing.assert_allclose([float(v) for v in rows[5][1:sys.n + 1]], tr.states[4], rtol=1e-15)
    with open(tmp_path / "resets.csv") as fh:
        resets = [float(r[0]) for r in list(csv.reader(fh))[1:]]
    np.testing.assert_allclose(resets, tr.reset_instants, rtol=1e-15)
