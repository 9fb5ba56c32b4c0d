"""Pseudo-sensitivities: the peak of a closed-loop signal over one period.

The peak of ``s(t) = c x(t) + d sin(omega t)`` is attained either at a reset
instant (approached from the left or from the right, since some signals jump)
or at an interior stationary point where ``c x'(t) + d omega cos(omega t)``
vanishes.  The phase is reported as ``pi/2 - omega t_max``, which equals the
phase of the linear sensitivity when there is no reset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from .closedloop import row_harmonics
from .steadystate import SolverConfig, solve_steady_state

__all__ = ["PseudoPoint", "PSEUDO_KINDS", "find_extrema", "pseudo_point",
           "pseudo_from_solution", "wrap_phase"]

# kind -> (channel, signal)
PSEUDO_KINDS = {
    "S": ("reference", "e"),
    "T": ("reference", "y"),
    "CS": ("reference", "u"),
    "PS": ("disturbance", "e"),
    "CS_d": ("disturbance", "u"),
}

_TIE = 1e-9


def wrap_phase(phi):
    """Wrap an angle to ``(-pi, pi]``."""
    out = math.remainder(phi, 2 * math.pi)
    return math.pi if out == -math.pi else out


@dataclass(frozen=True)
class PseudoPoint:
    """Peak gain of one signal per unit input amplitude, with its phase."""

    omega: float
    kind: str
    magnitude: float
    phase: float
    t_max: float

    @property
    def db(self):
        return 20.0 * math.log10(self.magnitude) if self.magnitude > 0 else -math.inf


class _Interval:
    """Flow on one reset interval: ``x(t) = expm(A (t - t0)) z0 - psi(t)``."""

    def __init__(self, sol, sys, t0, t1, z0, c, d):
        self.sol, self.A, self.t0, self.t1, self.z0 = sol, sys.A_bar, t0, t1, z0
        self.c, self.d = c, d
        self.b = sys.channel_vector(sol.channel)
        self.w = sol.omega

    def state(self, t):
        t = np.atleast_1d(t)
        E = scipy.linalg.expm((t - self.t0)[:, None, None] * self.A[None])
        return E @ self.z0 - self.sol.basis.psi(self.w * t)

    def value(self, t):
        return self.state(t) @ self.c + self.d * np.sin(self.w * np.atleast_1d(t))

    def slope(self, t):
        t = np.atleast_1d(t)
        X = self.state(t)
        xdot = X @ self.A.T + np.multiply.outer(np.sin(self.w * t), self.b)
        return xdot @ self.c + self.d * self.w * np.cos(self.w * t)


def _intervals(sol, sys, c, d):
    phases, Z = sol.anchors()
    t = phases / sol.omega
    t_end = np.append(t[1:], t[0] + np.pi / sol.omega)
    return [_Interval(sol, sys, t[i], t_end[i], Z[i], c, d) for i in range(sol.q)]


def _interior_roots(iv, samples=64):
    span = iv.t1 - iv.t0
    grid = np.linspace(iv.t0, iv.t1, samples + 1)[1:-1]
    g = iv.slope(grid)
    roots = []
    for k in np.flatnonzero(g[:-1] * g[1:] < 0):
        roots.append(brentq(lambda t: float(iv.slope(t)[0]), grid[k], grid[k + 1],
                            xtol=1e-15 * max(1.0, span), rtol=1e-15))
    roots.extend(grid[np.flatnonzero(g == 0)].tolist())
    return roots


def find_extrema(sol, sys, signal="e"):
    """Candidate peak times of a signal over one period ``[t_s, t_s + 2 pi/omega)``.

    Returns the sorted interior stationary points of every inter-reset
    interval together with all ``2q`` reset instants.  The channel is that of
    ``sol``.
    """
    c, d = sys.output_row(signal, sol.channel)
    half = np.pi / sol.omega
    if sol.q == 0:
        return _sinusoid_extrema(sol, sys, c, d)
    times = []
    for iv in _intervals(sol, sys, c, d):
        times.append(iv.t0)
        times.extend(_interior_roots(iv))
    times = np.array(times)
    return np.sort(np.concatenate([times, times + half]))


def _sinusoid_extrema(sol, sys, c, d):
    H = row_harmonics(sol, sys, c, d, 1)[0]
    w = sol.omega
    t_peak = ((np.pi / 2 - np.angle(H)) / w) % (2 * np.pi / w)
    return np.sort(np.mod([t_peak, t_peak + np.pi / w], 2 * np.pi / w))


def pseudo_from_solution(sol, sys, kind, amplitude=1.0):
    """Pseudo-sensitivity of ``kind`` from an existing steady-state solution.

    ``amplitude`` scales the evaluated signal before normalization; the
    result does not depend on it.
    """
    channel, name = PSEUDO_KINDS[kind]
    if sol.channel != channel:
        raise ValueError(f"{kind} needs a {channel}-channel solution")
    c, d = sys.output_row(name, channel)
    w = sol.omega
    period = 2 * np.pi / w
    half = np.pi / w
    cand_t, cand_v = [], []
    if sol.q == 0:
        H = row_harmonics(sol, sys, c, d, 1)[0]
        t_peak = ((np.pi / 2 - np.angle(H)) / w) % period
        cand_t, cand_v = [t_peak], [abs(H) * amplitude]
    else:
        for iv in _intervals(sol, sys, c, d):
            # right limit at the start and left limit at the end of the interval
            ts = [iv.t0, iv.t1] + _interior_roots(iv)
            vals = amplitude * iv.value(np.array(ts))
            for t, v in zip(ts, vals):
                cand_t.extend([t, t + half])
                cand_v.extend([v, -v])
    cand_t = np.asarray(cand_t, dtype=float)
    cand_v = np.asarray(cand_v, dtype=float) / amplitude
    # canonical window [t_s, t_s + period)
    cand_t = sol.t_s + np.mod(cand_t - sol.t_s, period)
    vmax = float(np.max(cand_v))
    tied = np.flatnonzero(cand_v >= vmax - _TIE * max(1.0, abs(vmax)))
    t_max = float(np.min(cand_t[tied]))
    return PseudoPoint(float(w), kind, vmax, wrap_phase(np.pi / 2 - w * t_max), t_max)


def pseudo_point(sys, omega, kind, cfg=SolverConfig(), amplitude=1.0):
    """Pseudo-sensitivity ``kind`` in ``{"S", "T", "CS", "PS", "CS_d"}`` at ``omega``."""
    if kind not in PSEUDO_KINDS:
        raise ValueError(f"unknown pseudo-sensitivity {kind!r}; expected one of "
                         f"{sorted(PSEUDO_KINDS)}")
    sol = solve_steady_state(sys, omega, PSEUDO_KINDS[kind][0], cfg)
    return pseudo_from_solution(sol, sys, kind, amplitude)
