"""Describing function and higher-order sinusoidal input describing functions
of a reset element driven in open loop, where the reset instants are the zero
crossings ``k*pi/omega`` of the sinusoidal input."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SingularResolventError
from .numerics import matrix_exponential

__all__ = ["OpenLoopSpectrum", "theta", "hosidf", "open_loop_spectrum", "DEFAULT_NMAX"]

DEFAULT_NMAX = 15


@dataclass(frozen=True)
class OpenLoopSpectrum:
    omega: float
    theta: np.ndarray
    H: np.ndarray  # H[n-1] is the n-th harmonic ratio

    def harmonic(self, n):
        return complex(self.H[n - 1])


def _solve_checked(M, rhs, name):
    if np.linalg.cond(M) > 1e13:
        raise SingularResolventError(f"{name} is singular")
    return np.linalg.solve(M, rhs)


def theta(reset, omega):
    """Real ``n_r x n_r`` matrix correcting the base response for the reset action."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    Ar, Arho = reset.A_r, reset.A_rho
    n = reset.n_r
    I = np.eye(n)
    E = matrix_exponential(Ar, np.pi / omega)
    inner = _solve_checked(I + Arho @ E, Arho @ (I + E), "I + A_rho expm(pi A_r / omega)") - I
    W = omega**2 * I + Ar @ Ar
    if np.linalg.cond(W) > 1e13:
        raise SingularResolventError("omega^2 I + A_r^2 is singular")
    # X @ inv(W) computed as solve(W.T, X.T).T
    left = (-2.0 * omega**2 / np.pi) * (I + E) @ inner
    return np.linalg.solve(W.T, left.T).T


def hosidf(reset, omega, n, theta_value=None):
    """n-th harmonic output-to-input ratio of the open-loop reset element.

    ``n = 1`` gives the describing function.  Even harmonics are exactly zero.
    """
    if n < 1:
        raise ValueError("harmonic index must be >= 1")
    if n % 2 == 0:
        return 0j
    th = theta(reset, omega) if theta_value is None else theta_value
    Ar, Br, Cr = reset.A_r, reset.B_r, reset.C_r
    M = 1j * n * omega * np.eye(reset.n_r) - Ar
    if np.linalg.cond(M) > 1e14:
        raise SingularResolventError(f"j{n}wI - A_r is singular at omega={omega}")
    if n == 1:
        v = (np.eye(reset.n_r) + 1j * th) @ Br
        return complex((Cr @ np.linalg.solve(M, v))[0, 0] + reset.D_r)
    v = 1j * th @ Br
    return complex((Cr @ np.linalg.solve(M, v))[0, 0])


def open_loop_spectrum(reset, omega, n_max=DEFAULT_NMAX):
    th = theta(reset, omega)
    H = np.array([hosidf(reset, omega, n, th) for n in range(1, n_max + 1)])
    return OpenLoopSpectrum(float(omega), th, H)
