"""Hybrid time-domain simulation of the closed loop.

The flow is integrated with an adaptive Runge-Kutta pair; a reset is detected
as a sign change of ``e_R`` (located by the integrator's event root finder on
the dense output), and the jump ``x <- A_rho_bar x`` is applied before the
integration restarts.  This is an independent route to every quantity the
analytic modules compute, and also handles inputs with several harmonics.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce

import numpy as np
from scipy.integrate import solve_ivp

__all__ = [
    "InputComponent",
    "PeriodicInput",
    "SimConfig",
    "SimTrace",
    "Waveform",
    "SimulationError",
    "simulate",
    "extract_period",
    "fourier_coefficients",
    "write_trace_csv",
    "settle_time",
]

log = logging.getLogger(__name__)


class SimulationError(RuntimeError):
    pass


def _fraction(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, str)):
        return Fraction(v)
    return Fraction(float(v))


@dataclass(frozen=True)
class InputComponent:
    """``amplitude * sin(2 pi frequency t + phase)`` on channel ``"r"`` or ``"d"``.

    ``frequency`` is in Hz and is stored as a :class:`~fractions.Fraction` so
    that the common period is exact.
    """

    channel: str
    amplitude: float
    frequency: Fraction
    phase: float = 0.0

    def __post_init__(self):
        if self.channel not in ("r", "d"):
            raise ValueError("channel must be 'r' or 'd'")
        object.__setattr__(self, "frequency", _fraction(self.frequency))
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")

    @property
    def omega(self):
        return 2.0 * math.pi * float(self.frequency)


def _gcd(a, b):
    return Fraction(math.gcd(a.numerator * b.denominator, b.numerator * a.denominator),
                    a.denominator * b.denominator)


@dataclass(frozen=True)
class PeriodicInput:
    """Sum of sinusoids on the reference and disturbance channels."""

    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise ValueError("at least one input component is required")

    @classmethod
    def sinusoid(cls, omega, amplitude=1.0, channel="r", phase=0.0):
        """Single tone at ``omega`` rad/s (the frequency ``omega / 2 pi`` is taken exactly)."""
        return cls((InputComponent(channel, amplitude, Fraction(omega / (2 * math.pi)), phase),))

    @property
    def fundamental_frequency(self):
        """Greatest common divisor of the component frequencies, in Hz."""
        return reduce(_gcd, (c.frequency for c in self.components))

    @property
    def omega_M(self):
        return 2.0 * math.pi * float(self.fundamental_frequency)

    @property
    def period(self):
        return float(1 / self.fundamental_frequency)

    def __call__(self, t):
        """``(r(t), d(t))``."""
        r = d = 0.0
        for c in self.components:
            v = c.amplitude * np.sin(c.omega * t + c.phase)
            if c.channel == "r":
                r = r + v
            else:
                d = d + v
        return r, d


@dataclass(frozen=True)
class SimConfig:
    """Integrator and event settings.

    ``zeno_guard`` is in seconds when given; the default is ``1e-9`` times the
    input period.  After every reset the guard window is integrated without
    event detection, which bounds the reset rate.  A run of ``storm_limit``
    consecutive resets, each less than ``100 * zeno_guard`` after the previous
    one, is treated as an event storm.  ``samples_per_period`` sets the uniform
    output grid.
    """

    rel_tol: float = 1e-11
    abs_tol: float = 1e-13
    max_step: float = math.inf
    zeno_guard: float | None = None
    event_tol: float = 1e-8
    samples_per_period: int = 2048
    method: str = "DOP853"
    storm_limit: int = 1000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "event_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.zeno_guard is not None and not self.zeno_guard > 0:
            raise ValueError("zeno_guard must be positive")
        if self.storm_limit < 2:
            raise ValueError("storm_limit must be at least 2")


@dataclass
class SimTrace:
    """Sampled trajectory on a uniform grid plus the detected reset instants."""

    times: np.ndarray
    states: np.ndarray
    y: np.ndarray
    e: np.ndarray
    e_R: np.ndarray
    u: np.ndarray
    reset_instants: np.ndarray
    reset_residuals: np.ndarray = field(repr=False)
    dt: float = 0.0

    def signal(self, name):
        return {"y": self.y, "e": self.e, "e_R": self.e_R, "u": self.u}[name]


def settle_time(sys, digits=13):
    """Time for the slowest closed-loop mode of the base linear loop to decay by ``10**-digits``."""
    rate = float(np.min(-np.linalg.eigvals(sys.A_bar).real))
    if rate <= 0:
        raise ValueError("A_bar is not Hurwitz; there is no settling time")
    return digits * math.log(10.0) / rate


def _outputs(sys, X, t, inp):
    r, d = inp(t)
    r = np.broadcast_to(np.asarray(r, dtype=float), np.shape(t))
    y = X @ sys.C_bar[0]
    e = r - y
    u = X @ sys.Cu_bar[0] + sys.Du_bar * r
    eR = X @ sys.CeR_bar[0] + sys.D_eR * r
    return y, e, eR, u


def simulate(sys, inp, t_end, cfg=SimConfig(), x0=None):
    """Integrate the closed loop from ``x0`` (zero by default) up to ``t_end``.

    The output grid is uniform with ``cfg.samples_per_period`` points per input
    period, aligned with ``t = 0``.  Samples that fall exactly on a reset
    instant hold the post-reset state.

    Raises
    ------
    SimulationError
        When the integrator fails or an event storm is detected (see
        `SimConfig`).
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    period = inp.period
    guard = cfg.zeno_guard if cfg.zeno_guard is not None else 1e-9 * period
    dt = period / cfg.samples_per_period
    n_samples = int(math.floor(t_end / dt + 1e-9)) + 1
    grid = np.arange(n_samples) * dt
    A, B = sys.A_bar, sys.B_bar
    c_R, d_R = sys.CeR_bar[0], sys.D_eR
    Arho = sys.Arho_bar

    def rhs(t, x):
        r, d = inp(t)
        return A @ x + B[:, 0] * r + B[:, 1] * d

    def e_R(t, x):
        return float(c_R @ x + d_R * inp(t)[0])

    e_R.terminal = True

    x = np.zeros(sys.n) if x0 is None else np.array(x0, dtype=float)
    if x0 is not None and np.any(x[: sys.n_r]):
        log.warning("nonzero initial reset-controller state")
    t = 0.0
    states = np.empty((n_samples, sys.n))
    filled = 0
    resets, residuals = [], []
    run = 0
    while t < t_end:
        # integrate across the guard window without event detection, so the
        # root sitting at the restart point is not detected again
        if resets and t == resets[-1]:
            t_guard = min(t + guard, t_end)
            sol = solve_ivp(rhs, (t, t_guard), x, method=cfg.method, rtol=cfg.rel_tol,
                            atol=cfg.abs_tol, dense_output=True)
            if not sol.success:
                raise SimulationError(sol.message)
            mask = (grid[filled:] > t) & (grid[filled:] <= t_guard)
            idx = filled + np.flatnonzero(mask)
            if idx.size:
                states[idx] = sol.sol(grid[idx]).T
                filled = idx[-1] + 1
            t, x = t_guard, sol.y[:, -1]
            if t >= t_end:
                break
        sol = solve_ivp(rhs, (t, t_end), x, method=cfg.method, rtol=cfg.rel_tol,
                        atol=cfg.abs_tol, max_step=cfg.max_step, dense_output=True,
                        events=e_R)
        if not sol.success:
            raise SimulationError(f"integration failed at t={t:.6g}: {sol.message}")
        t_stop = sol.t[-1]
        mask = grid[filled:] < t_stop if sol.status == 1 else grid[filled:] <= t_stop
        idx = filled + np.flatnonzero(mask)
        if idx.size:
            states[idx] = sol.sol(grid[idx]).T
            filled = idx[-1] + 1
        if sol.status != 1:
            break
        t_k = float(sol.t_events[0][0])
        x_minus = sol.y_events[0][0]
        residuals.append(abs(e_R(t_k, x_minus)))
        run = run + 1 if resets and t_k - resets[-1] < 100 * guard else 1
        if run >= cfg.storm_limit:
            raise SimulationError(f"event storm: {run} resets spaced under {100 * guard:.3e} s "
                                  f"near t={t_k:.9g}")
        x = Arho @ x_minus
        resets.append(t_k)
        t = t_k
        # a grid sample exactly at the reset instant holds the post-reset state
        if filled < n_samples and grid[filled] == t_k:
            states[filled] = x
            filled += 1
    states = states[:filled]
    times = grid[:filled]
    y, e, eR, u = _outputs(sys, states, times, inp)
    res = np.asarray(residuals)
    if res.size and np.max(res) > cfg.event_tol:
        log.warning("largest |e_R| at a detected reset is %.3e", np.max(res))
    return SimTrace(times, states, y, e, eR, u, np.asarray(resets), res, dt)


@dataclass(frozen=True)
class Waveform:
    """One period of a trace on a uniform grid, ``times[0]`` being its start."""

    times: np.ndarray
    states: np.ndarray
    signals: dict
    period: float
    residual: float

    def signal(self, name):
        return self.signals[name]


def extract_period(trace, period, n_settle_periods=0):
    """Last full period of ``trace`` and its periodicity residual.

    The residual is ``||x(t) - x(t - period)|| / ||x||`` over the last period,
    which tends to zero as the transient dies out.
    """
    if trace.dt <= 0:
        raise ValueError("trace has no uniform sampling step")
    m = int(round(period / trace.dt))
    if abs(m * trace.dt - period) > 1e-9 * period:
        raise ValueError("period is not a multiple of the trace sampling step")
    if trace.times.size < (n_settle_periods + 2) * m:
        raise ValueError(f"trace too short: need {(n_settle_periods + 2) * m} samples, "
                         f"have {trace.times.size}")
    end = trace.times.size - 1
    last = slice(end - m, end)
    prev = slice(end - 2 * m, end - m)
    X = trace.states[last]
    residual = float(np.linalg.norm(X - trace.states[prev]) / max(np.linalg.norm(X), 1e-300))
    sig = {k: trace.signal(k)[last] for k in ("y", "e", "e_R", "u")}
    return Waveform(trace.times[last], X, sig, float(period), residual)


def fourier_coefficients(waveform, omega, n, amplitude=1.0, t0=None):
    """``n``-th harmonic ratio of samples covering one period ``2 pi / omega``.

    Parameters
    ----------
    waveform : array_like or tuple
        Uniform samples over ``[t0, t0 + 2 pi/omega)``, or a ``(times, values)``
        pair.
    omega : float
    n : int
    amplitude : float
        Amplitude of the input sinusoid ``amplitude * sin(omega t)``.
    t0 : float, optional
        Time of the first sample; taken from ``times`` when given.

    Returns
    -------
    complex
        ``(j omega / pi) * integral(w(t) exp(-j n omega t)) / amplitude``, by the
        trapezoidal rule on the closed periodic grid.
    """
    if isinstance(waveform, tuple):
        times, values = (np.asarray(v) for v in waveform)
        t0 = float(times[0])
        if times.size > 1:
            span = (times[1] - times[0]) * times.size
            if abs(span * omega - 2 * math.pi) > 1e-6 * 2 * math.pi:
                raise ValueError("waveform does not cover exactly one period")
    else:
        values = np.asarray(waveform)
    t0 = 0.0 if t0 is None else t0
    N = values.size
    t = t0 + np.arange(N) * (2 * math.pi / omega) / N
    # trapezoid on a periodic grid is the plain mean
    integral = np.sum(values * np.exp(-1j * n * omega * t)) * (2 * math.pi / omega) / N
    return complex(1j * omega / math.pi * integral / amplitude)


def write_trace_csv(trace, path, resets_path=None):
    """Write ``t, x1..xn, y, e, e_R, u`` and, optionally, the reset instants."""
    n = trace.states.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + ["y", "e", "e_R", "u"])
        for k in range(trace.times.size):
            row = [trace.times[k], *trace.states[k], trace.y[k], trace.e[k], trace.e_R[k],
                   trace.u[k]]
            w.writerow([f"{v:.17e}" for v in row])
    if resets_path is not None:
        with open(resets_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t_reset"])
            for v in trace.reset_instants:
                w.writerow([f"{v:.17e}"])
