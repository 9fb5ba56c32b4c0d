"""High-frequency approximation of the closed-loop spectra.

Well above the bandwidth the error entering the reset element is dominated by
its first harmonic, so the reset instants are approximated by the zero
crossings of that harmonic, computed from the describing-function loop.  The
steady state then has one reset per half period at phases ``k pi - phi`` and
the spectra follow in closed form, with no nonlinear solve.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .closedloop import harmonic_ratios
from .model import SingularResolventError, base_response
from .numerics import matrix_exponential
from .openloop import DEFAULT_NMAX, hosidf
from .steadystate import SolverConfig, SteadyStateError, harmonic_basis, signal, solve_steady_state

__all__ = [
    "HighFreqModel",
    "OmegaHError",
    "phi_eR1",
    "phi_ed1",
    "approx_spectra",
    "approx_reset_phase",
    "dominance_ratio",
    "estimate_omega_h",
]

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.05


class OmegaHError(RuntimeError):
    """The first-harmonic dominance bound is not reached within the probe range."""


def _df_loop(sys, omega):
    N = hosidf(sys.reset, omega, 1)
    C1 = base_response(sys.C_L1, omega)
    C2 = base_response(sys.C_L2, omega)
    Cp = base_response(sys.parallel, omega)
    G = sys.plant_response(omega)
    return C1, C1 * (N + Cp) * C2 * G, G


def phi_eR1(sys, omega):
    """Phase of the first harmonic of ``e_R`` per unit reference, from the DF loop."""
    C1, L, _ = _df_loop(sys, omega)
    return float(np.angle(C1 / (1.0 + L)))


def phi_ed1(sys, omega):
    """Phase of the first harmonic of ``e_R`` per unit disturbance, from the DF loop."""
    C1, L, G = _df_loop(sys, omega)
    return float(np.angle(-C1 * G / (1.0 + L)))


def approx_reset_phase(sys, omega, channel="reference"):
    """First approximate reset phase ``(-phi) mod pi``; the next ones are ``pi`` apart."""
    phi = phi_eR1(sys, omega) if channel == "reference" else phi_ed1(sys, omega)
    return (-phi) % np.pi


@dataclass(frozen=True)
class HighFreqModel:
    """Threshold ``epsilon`` and the frequency ``omega_h`` above which it holds."""

    epsilon: float
    omega_h: float

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")

    def phi_eR1(self, sys, omega):
        return phi_eR1(sys, omega)

    def phi_ed1(self, sys, omega):
        return phi_ed1(sys, omega)

    def applies(self, omega):
        return omega >= self.omega_h


def approx_spectra(sys, omega, channel="reference", n_max=DEFAULT_NMAX):
    """Approximate ``T_n`` (reference) or ``PS_n`` (disturbance), ``n = 1..n_max``.

    With one reset per half period at phase ``-phi`` the post-reset state is
    ``xi_s = -(I + A_rho E)^-1 A_rho (I + E) psi(-phi)`` with
    ``E = expm(A_bar pi / omega)``, and the odd harmonics are
    ``c (A_bar - j n omega I)^-1 theta_n`` with
    ``theta_n = -(2 j omega / pi) exp(j n phi) (I + E) (xi_s + psi(-phi))``,
    plus the particular-solution term for ``n = 1``.
    """
    channel = "reference" if channel in ("reference", "r") else "disturbance"
    phi = phi_eR1(sys, omega) if channel == "reference" else phi_ed1(sys, omega)
    basis = harmonic_basis(sys, omega, channel)
    A = sys.A_bar
    n = sys.n
    I = np.eye(n)
    E = matrix_exponential(A, np.pi / omega)
    Arho = sys.Arho_bar
    M = I + Arho @ E
    if np.linalg.cond(M) > 1e13:
        raise SingularResolventError("I + A_rho expm(A_bar pi / omega) is singular")
    psi0 = basis.psi(-phi)
    xi_s = -np.linalg.solve(M, Arho @ (I + E) @ psi0)
    z = (I + E) @ (xi_s + psi0)
    sign = 1.0 if channel == "reference" else -1.0
    c = sys.C_bar[0]
    out = np.zeros(n_max, dtype=complex)
    for k in range(1, n_max + 1, 2):
        theta_k = -(2j * omega / np.pi) * np.exp(1j * k * phi) * z
        val = c @ np.linalg.solve(A - 1j * k * omega * I, theta_k)
        if k == 1:
            val -= c @ ((1j * omega * I + A) @ basis.F)
        out[k - 1] = sign * val
    return out


def dominance_ratio(sol, sys, samples=4096):
    """``max |e_R - e_R1| / max |e_R1|`` over one period of an exact solution."""
    w = sol.omega
    t = sol.t_s + np.arange(samples) * (2 * np.pi / w) / samples
    H1 = harmonic_ratios(sol, sys, "e_R", 1)[0]
    eR = signal(sol, sys, "e_R", t)
    eR1 = np.imag(H1 * np.exp(1j * w * t))
    peak = np.max(np.abs(eR1))
    if peak == 0.0:
        return 0.0
    return float(np.max(np.abs(eR - eR1)) / peak)


def estimate_omega_h(sys, epsilon=DEFAULT_EPSILON, omega_start=2 * np.pi, omega_stop=2 * np.pi * 1e4,
                     points_per_decade=10, channel="reference", cfg=SolverConfig()):
    """Smallest probed frequency at which first-harmonic dominance holds.

    The probe grid is logarithmic.  A probe is accepted when the dominance
    ratio is at most ``epsilon`` there and at the next three probes.

    Returns
    -------
    HighFreqModel

    Raises
    ------
    OmegaHError
        If no probe qualifies; the exact solver should be used instead.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    decades = math.log10(omega_stop / omega_start)
    count = max(int(round(decades * points_per_decade)) + 1, 4)
    grid = np.logspace(math.log10(omega_start), math.log10(omega_stop), count)
    ratios = np.full(grid.size, np.inf)
    for k, w in enumerate(grid):
        try:
            ratios[k] = dominance_ratio(solve_steady_state(sys, w, channel, cfg), sys)
        except SteadyStateError as exc:
            log.debug("probe %g rad/s failed: %s", w, exc)
    ok = ratios <= epsilon
    for k in range(grid.size - 3):
        if ok[k:k + 4].all():
            return HighFreqModel(float(epsilon), float(grid[k]))
    raise OmegaHError(
        f"dominance ratio never stays below epsilon={epsilon} within "
        f"[{omega_start:g}, {omega_stop:g}] rad/s (smallest {np.min(ratios):.3g}); "
        "use the exact solver")


def warn_below(model, omega):
    if not model.applies(omega):
        warnings.warn(f"omega={omega:g} rad/s is below omega_h={model.omega_h:g} rad/s; "
                      "the approximation may be inaccurate", RuntimeWarning, stacklevel=2)
