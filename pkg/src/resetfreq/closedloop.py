"""Closed-loop harmonic sensitivities computed from the exact steady state.

For a half-wave antisymmetric periodic signal ``s(t) = c x(t) + d sin(omega t)``
the ``n``-th harmonic ratio to the unit input sinusoid is

    (2 j omega / pi) * integral over one half period of s(t) exp(-j n omega t) dt

for odd ``n`` and zero for even ``n``.  Between resets the state is an
exponential of ``A_bar`` minus a sinusoid, so each interval contributes a
closed-form resolvent term.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .model import SingularResolventError, base_response
from .numerics import matrix_exponential
from .openloop import DEFAULT_NMAX
from .steadystate import SolverConfig, solve_steady_state

__all__ = [
    "ReferenceSpectrum",
    "DisturbanceSpectrum",
    "SensitivitySpectrum",
    "harmonic_ratios",
    "row_harmonics",
    "reference_spectrum",
    "disturbance_spectrum",
    "sensitivity_spectrum",
    "SPECTRUM_QUANTITIES",
]

log = logging.getLogger(__name__)

SPECTRUM_QUANTITIES = ("T", "S", "CS", "PS", "CS_d")


def _resolvent(A, s):
    M = A - s * np.eye(A.shape[0])
    if np.linalg.cond(M) > 1e14:
        raise SingularResolventError(f"A_bar - {s}I is singular")
    return M


def row_harmonics(sol, sys, c, d, n_max=DEFAULT_NMAX):
    """Harmonic ratios ``H[n-1]`` of ``c @ x(t) + d sin(omega t)`` for ``n = 1..n_max``.

    Parameters
    ----------
    sol : SteadyStateSolution
    sys : ClosedLoopResetSystem
    c : ndarray, shape (n,)
        Output row applied to the closed-loop state.
    d : float
        Direct feedthrough from the unit input sinusoid.
    n_max : int
    """
    w = sol.omega
    A = sys.A_bar
    n_states = sys.n
    c = np.asarray(c, dtype=float)
    F = sol.basis.F
    out = np.zeros(n_max, dtype=complex)
    if sol.q:
        phases, Z = sol.anchors()
        t = phases / w
        t_end = np.append(t[1:], t[0] + np.pi / w)
        E = [matrix_exponential(A, tau) for tau in sol.tau]
    for n in range(1, n_max + 1, 2):
        acc = np.zeros(n_states, dtype=complex)
        if sol.q:
            for i in range(sol.q):
                acc += (E[i] @ Z[i] * np.exp(-1j * n * w * t_end[i])
                        - Z[i] * np.exp(-1j * n * w * t[i]))
            M = _resolvent(A, 1j * n * w)
            H = (2j * w / np.pi) * (c @ np.linalg.solve(M, acc))
        else:
            H = 0j
        if n == 1:
            H += -c @ ((1j * w * np.eye(n_states) + A) @ F) + d
        out[n - 1] = H
    return out


def harmonic_ratios(sol, sys, signal, n_max=DEFAULT_NMAX):
    """Harmonic ratios of ``y``, ``e``, ``u`` or ``e_R`` on the solution's channel."""
    c, d = sys.output_row(signal, sol.channel)
    return row_harmonics(sol, sys, c, d, n_max)


def _plant_at(sys, omega, n_max):
    return np.array([base_response(sys.plant, n * omega) for n in range(1, n_max + 1)])


@dataclass(frozen=True)
class ReferenceSpectrum:
    """Reference-channel harmonics; index ``n - 1`` holds harmonic ``n``.

    ``S`` and ``CS`` follow from ``T`` (``S_1 = 1 - T_1``, ``S_n = -T_n``,
    ``CS_n = T_n / G(j n omega)``).  ``S_direct`` and ``CS_direct`` are the
    expansions of the error and control signals themselves.  When the plant
    is not stable ``CS`` is taken from the direct expansion and
    ``cs_from_plant`` is ``False``.
    """

    omega: float
    T: np.ndarray
    S: np.ndarray
    CS: np.ndarray
    S_direct: np.ndarray
    CS_direct: np.ndarray
    cs_from_plant: bool


@dataclass(frozen=True)
class DisturbanceSpectrum:
    """Disturbance-channel harmonics; ``PS`` is the error per unit disturbance.

    ``CS_d_1 = -PS_1 / G(j omega) - 1`` and ``CS_d_n = -PS_n / G(j n omega)``;
    ``CS_d_direct`` is the expansion of the control signal itself.
    """

    omega: float
    PS: np.ndarray
    CS_d: np.ndarray
    CS_d_direct: np.ndarray


def reference_spectrum(sys, sol, n_max=DEFAULT_NMAX):
    if sol.channel != "reference":
        raise ValueError("reference_spectrum needs a reference-channel solution")
    T = harmonic_ratios(sol, sys, "y", n_max)
    S = -T.copy()
    S[0] += 1.0
    S_direct = harmonic_ratios(sol, sys, "e", n_max)
    CS_direct = harmonic_ratios(sol, sys, "u", n_max)
    if sys.plant.is_stable():
        CS = T / _plant_at(sys, sol.omega, n_max)
        from_plant = True
    else:
        log.warning("plant is not stable; CS taken from the control-signal expansion")
        CS, from_plant = CS_direct, False
    return ReferenceSpectrum(sol.omega, T, S, CS, S_direct, CS_direct, from_plant)


def disturbance_spectrum(sys, sol, n_max=DEFAULT_NMAX):
    if sol.channel != "disturbance":
        raise ValueError("disturbance_spectrum needs a disturbance-channel solution")
    PS = harmonic_ratios(sol, sys, "e", n_max)
    G = _plant_at(sys, sol.omega, n_max)
    CS_d = -PS / G
    CS_d[0] -= 1.0
    CS_d_direct = harmonic_ratios(sol, sys, "u", n_max)
    return DisturbanceSpectrum(sol.omega, PS, CS_d, CS_d_direct)


@dataclass(frozen=True)
class SensitivitySpectrum:
    """All five harmonic sensitivities at one frequency (index ``n - 1``)."""

    omega: float
    n_max: int
    T: np.ndarray
    S: np.ndarray
    CS: np.ndarray
    PS: np.ndarray
    CS_d: np.ndarray

    def quantity(self, name):
        if name not in SPECTRUM_QUANTITIES:
            raise KeyError(name)
        return getattr(self, name)

    @classmethod
    def from_harmonics(cls, sys, omega, T, PS):
        """Fill ``S``, ``CS`` and ``CS_d`` from ``T`` and ``PS`` through the plant."""
        T, PS = np.asarray(T, dtype=complex), np.asarray(PS, dtype=complex)
        G = _plant_at(sys, omega, T.size)
        S = -T.copy()
        S[0] += 1.0
        CS_d = -PS / G
        CS_d[0] -= 1.0
        return cls(float(omega), T.size, T, S, T / G, PS, CS_d)


def sensitivity_spectrum(sys, omega, n_max=DEFAULT_NMAX, cfg=SolverConfig()):
    """Solve both channels at ``omega`` and assemble the five sensitivities."""
    ref = reference_spectrum(sys, solve_steady_state(sys, omega, "reference", cfg), n_max)
    dist = disturbance_spectrum(sys, solve_steady_state(sys, omega, "disturbance", cfg), n_max)
    return SensitivitySpectrum(float(omega), n_max, ref.T, ref.S, ref.CS, dist.PS, dist.CS_d)
