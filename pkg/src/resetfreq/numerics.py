"""Shared numeric kernels: matrix exponential, spectra and a damped Newton solver."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "NewtonConfig",
    "NewtonResult",
    "NewtonError",
    "matrix_exponential",
    "eigenvalues",
    "spectral_radius",
    "is_hurwitz",
    "newton_solve",
]

log = logging.getLogger(__name__)


def matrix_exponential(M, t=1.0):
    """Return ``expm(M * t)`` (scaling and squaring with a Pade approximant)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix_exponential needs a square matrix, got shape {M.shape}")
    return scipy.linalg.expm(M * t)


def eigenvalues(M):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"eigenvalues needs a square matrix, got shape {M.shape}")
    if M.size == 0:
        return np.zeros(0, dtype=complex)
    return np.linalg.eigvals(M).astype(complex)


def spectral_radius(M):
    ev = eigenvalues(M)
    return float(np.max(np.abs(ev))) if ev.size else 0.0


def is_hurwitz(M):
    ev = eigenvalues(M)
    return bool(np.all(ev.real < 0.0))


class NewtonError(RuntimeError):
    """Newton iteration failed; ``x`` and ``residual`` hold the best iterate."""

    def __init__(self, message, x, residual, iterations):
        super().__init__(message)
        self.x = x
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-10
    max_iter: int = 50
    damping: float = 0.5
    min_step: float = 1e-12

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.damping < 1:
            raise ValueError("damping must lie in (0, 1)")


@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    residual: float
    iterations: int


def _fd_jacobian(F, x, fx):
    k = x.size
    J = np.empty((fx.size, k))
    for i in range(k):
        h = max(1e-7, 1e-7 * abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        J[:, i] = (np.asarray(F(xp)) - np.asarray(F(xm))) / (2 * h)
    return J


def newton_solve(F, x0, cfg=NewtonConfig(), jacobian=None):
    """Damped Newton iteration for ``F(x) = 0``.

    The Jacobian is approximated by central differences unless ``jacobian`` is
    given.  Each full Newton step is halved (times ``cfg.damping``) until the
    residual norm decreases.

    Returns
    -------
    NewtonResult

    Raises
    ------
    NewtonError
        When ``max_iter`` is exhausted or the accepted step shrinks below
        ``min_step`` (the caller should reseed).
    """
    x = np.array(x0, dtype=float).ravel()
    fx = np.asarray(F(x), dtype=float).ravel()
    r = float(np.linalg.norm(fx))
    for it in range(1, cfg.max_iter + 1):
        if r <= cfg.tol:
            return NewtonResult(x, r, it - 1)
        J = jacobian(x) if jacobian is not None else _fd_jacobian(F, x, fx)
        step, *_ = np.linalg.lstsq(J, -fx, rcond=None)
        lam = 1.0
        while True:
            x_new = x + lam * step
            f_new = np.asarray(F(x_new), dtype=float).ravel()
            r_new = float(np.linalg.norm(f_new))
            if np.isfinite(r_new) and r_new < r:
                break
            lam *= cfg.damping
            if lam * np.linalg.norm(step) < cfg.min_step:
                raise NewtonError(
                    f"step underflow after {it} iterations (residual {r:.3e})", x, r, it)
        x, fx, r = x_new, f_new, r_new
    if r <= cfg.tol:
        return NewtonResult(x, r, cfg.max_iter)
    raise NewtonError(f"no convergence in {cfg.max_iter} iterations (residual {r:.3e})",
                      x, r, cfg.max_iter)
