"""Existence conditions for describing functions and the H-beta stability certificate.

The certificate search looks for ``rho = rho^T > 0`` and ``beta`` such that

    H(s) = [rho, beta C_eR] (sI - A_bar)^-1 [I; 0]

is strictly positive real, ``(A_bar, B0)`` is controllable, ``(A_bar, C0)`` is
observable and ``A_rho^T rho A_rho - rho`` is negative definite.  Positive
realness is checked numerically on a logarithmic frequency grid refined around
the worst point, which is evidence rather than a proof.
"""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar

from .numerics import is_hurwitz, matrix_exponential, spectral_radius

__all__ = [
    "DFCondition",
    "HBetaCertificate",
    "StabilityReport",
    "SPRGrid",
    "open_loop_df_condition",
    "spr_check",
    "h_beta_search",
    "verify_certificate",
    "is_controllable",
    "is_observable",
    "assess_stability",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DFCondition:
    """Both clauses of the open-loop describing-function existence condition."""

    hurwitz: bool
    contraction: bool
    spectral_radius: float

    def __bool__(self):
        return self.hurwitz and self.contraction


def open_loop_df_condition(reset, omega):
    """Check that ``A_r`` is Hurwitz and ``A_rho expm(A_r pi/omega)`` is a contraction.

    The result is truthy only when both clauses hold; the clauses are also
    reported separately because a Clegg integrator fails the first (its
    ``A_r`` is zero) while passing the second.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    rho = spectral_radius(reset.A_rho @ matrix_exponential(reset.A_r, np.pi / omega))
    return DFCondition(is_hurwitz(reset.A_r), rho < 1.0, rho)


@dataclass(frozen=True)
class SPRGrid:
    """Frequency grid used for the positive-realness sweep."""

    omega_min: float = 1e-3
    omega_max: float = 1e6
    points: int = 1000
    refine: bool = True


def _hermitian_min(C0, A, B0, omega):
    n = A.shape[0]
    H = C0 @ np.linalg.solve(1j * omega * np.eye(n) - A, B0)
    return float(np.min(np.linalg.eigvalsh(0.5 * (H + H.conj().T))))


def spr_check(C0, A_bar, B0, grid=SPRGrid()):
    """Smallest eigenvalue of the Hermitian part of ``H(j omega)`` over the grid.

    Returns ``-inf`` when ``A_bar`` is not Hurwitz, since ``H`` cannot be
    strictly positive real then.  A positive value is numerical evidence of
    positive realness on the swept band.
    """
    C0, A_bar, B0 = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (C0, A_bar, B0))
    if not is_hurwitz(A_bar):
        return -np.inf
    w = np.logspace(np.log10(grid.omega_min), np.log10(grid.omega_max), grid.points)
    vals = np.array([_hermitian_min(C0, A_bar, B0, wk) for wk in w])
    k = int(np.argmin(vals))
    best = float(vals[k])
    if grid.refine and 0 < k < w.size - 1:
        lo, hi = np.log10(w[k - 1]), np.log10(w[k + 1])
        res = minimize_scalar(lambda lw: _hermitian_min(C0, A_bar, B0, 10.0**lw),
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10})
        best = min(best, float(res.fun))
    return best


def is_controllable(A, B, tol=1e-8):
    """Popov-Belevitch-Hautus rank test of ``(A, B)``.

    ``A`` is first balanced by a diagonal similarity (companion realizations
    have entries spanning many decades), then ``[A - lambda I, B]`` must have
    full row rank at every eigenvalue of ``A``, counting singular values above
    ``tol`` times the norm of ``[A, B]``.
    """
    A = np.asarray(A, dtype=float)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n = A.shape[0]
    _, (scale_vec, _) = scipy.linalg.matrix_balance(A, permute=False, separate=True)
    A = A * scale_vec[None, :] / scale_vec[:, None]
    B = B / scale_vec[:, None]
    B = B / max(np.linalg.norm(B, 2), 1e-300) * np.linalg.norm(A, 2)
    scale = np.linalg.norm(np.hstack([A, B]), 2)
    for lam in np.linalg.eigvals(A):
        s = np.linalg.svd(np.hstack([A - lam * np.eye(n), B]), compute_uv=False)
        if s[n - 1] <= tol * scale:
            return False
    return True


def is_observable(A, C, tol=1e-8):
    return is_controllable(np.asarray(A).T, np.atleast_2d(C).T, tol)


@dataclass(frozen=True)
class HBetaCertificate:
    rho: np.ndarray
    beta: np.ndarray
    spr_margin: float

    def scaled(self, c):
        """Certificate with ``(c rho, c beta)``; valid whenever the original is, for ``c > 0``."""
        return HBetaCertificate(c * self.rho, c * self.beta, c * self.spr_margin)


def _hbeta_matrices(sys, rho, beta):
    n_r = sys.n_r
    C_eR = sys.CeR_bar[:, n_r:]
    C0 = np.hstack([np.atleast_2d(rho), np.asarray(beta, dtype=float).reshape(n_r, 1) @ C_eR])
    B0 = np.vstack([np.eye(n_r), np.zeros((sys.n_p, n_r))])
    return C0, B0


def verify_certificate(sys, rho, beta, grid=SPRGrid()):
    """Independently re-check every condition of a candidate ``(rho, beta)``.

    Returns
    -------
    dict
        Keys ``rho_pd``, ``jump``, ``spr_margin``, ``controllable``,
        ``observable`` and ``ok``.
    """
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    Arho = sys.reset.A_rho
    sym = np.allclose(rho, rho.T)
    rho_pd = sym and float(np.min(np.linalg.eigvalsh(rho))) > 0
    jump = float(np.max(np.linalg.eigvalsh(0.5 * ((Arho.T @ rho @ Arho - rho) +
                                                    (Arho.T @ rho @ Arho - rho).T))))
    C0, B0 = _hbeta_matrices(sys, rho, beta)
    margin = spr_check(C0, sys.A_bar, B0, grid)
    ctrb = is_controllable(sys.A_bar, B0)
    obsv = is_observable(sys.A_bar, C0)
    ok = bool(rho_pd and jump < 0 and margin > 0 and ctrb and obsv)
    return {"rho_pd": rho_pd, "jump": jump, "spr_margin": margin,
            "controllable": ctrb, "observable": obsv, "ok": ok}


def _beta_grid():
    mags = [10.0**k for k in range(-3, 4)]
    return [0.0] + mags + [-m for m in mags]


def _rho_grid():
    """Coarse grid of 2x2 SPD matrices parameterized by ``(a, b, c)``."""
    vals = [0.1, 1.0, 10.0]
    out = []
    for a, c in itertools.product(vals, vals):
        for b in (-0.5, 0.0, 0.5):
            off = b * np.sqrt(a * c)
            out.append(np.array([[a, off], [off, c]]))
    return out


def h_beta_search(sys, grid=SPRGrid(), betas=None):
    """Search for an H-beta certificate; returns ``None`` when none is found.

    For one reset state ``rho`` is fixed to 1 (the conditions are invariant
    under positive scaling) and ``beta`` is scanned over a signed logarithmic
    grid, then refined around the best grid point.  For two reset states
    ``rho`` runs over a coarse grid of symmetric positive-definite matrices and
    ``beta`` over the product of the scalar grids.  An identity jump matrix
    can never satisfy the strict jump inequality; see :func:`assess_stability`.
    """
    n_r = sys.n_r
    if n_r > 2:
        raise NotImplementedError("exhaustive certificate search supports n_r <= 2")
    if not is_hurwitz(sys.A_bar):
        return None
    beta_vals = _beta_grid() if betas is None else list(betas)
    if n_r == 1:
        rhos = [np.eye(1)]
        beta_list = [np.array([b]) for b in beta_vals]
    else:
        rhos = _rho_grid()
        beta_list = [np.array(b) for b in itertools.product(beta_vals, repeat=2)]

    coarse = SPRGrid(grid.omega_min, grid.omega_max, min(grid.points, 200), False)
    scored = []
    for rho in rhos:
        Arho = sys.reset.A_rho
        if np.max(np.linalg.eigvalsh(Arho.T @ rho @ Arho - rho)) >= 0:
            continue
        for beta in beta_list:
            C0, B0 = _hbeta_matrices(sys, rho, beta)
            scored.append((spr_check(C0, sys.A_bar, B0, coarse), rho, beta))
    if not scored:
        return None
    scored.sort(key=lambda s: -s[0])

    if n_r == 1 and betas is None:
        # The margin is a narrow ridge in beta, so the decade grid alone can
        # miss it: scan densely in log|beta| per sign, then polish the best
        # few scan points with a bounded scalar search.
        rho = np.eye(1)

        def margin(sgn, lb):
            C0, B0 = _hbeta_matrices(sys, rho, np.array([sgn * 10.0**lb]))
            return spr_check(C0, sys.A_bar, B0, coarse)

        lbs = np.linspace(-5.0, 3.0, 161)
        dense = [(margin(sgn, lb), sgn, lb) for sgn in (1.0, -1.0) for lb in lbs]
        dense.sort(key=lambda s: -s[0])
        step = lbs[1] - lbs[0]
        for m0, sgn, lb0 in dense[:4]:
            res = minimize_scalar(lambda lb: -margin(sgn, lb),
                                  bounds=(lb0 - step, lb0 + step), method="bounded",
                                  options={"xatol": 1e-6})
            best_m, best_lb = (-res.fun, res.x) if -res.fun > m0 else (m0, lb0)
            scored.append((best_m, rho, np.array([sgn * 10.0**best_lb])))
        scored.sort(key=lambda s: -s[0])

    for coarse_margin, rho, beta in scored[:5]:
        if coarse_margin <= 0:
            break
        chk = verify_certificate(sys, rho, beta, grid)
        if chk["ok"]:
            return HBetaCertificate(np.array(rho), np.array(beta, dtype=float),
                                    chk["spr_margin"])
    return None


@dataclass(frozen=True)
class StabilityReport:
    """Outcome of :func:`assess_stability`.

    ``status`` is ``"certified"``, ``"reduces to LTI"`` (identity jump with a
    Hurwitz flow matrix), ``"unstable"`` or ``"no certificate found"``.
    """

    status: str
    certificate: HBetaCertificate | None = None
    searched: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status in ("certified", "reduces to LTI")


def assess_stability(sys, grid=SPRGrid()):
    """Certificate search with the identity-jump case reduced to linear stability."""
    if sys.is_identity_reset:
        status = "reduces to LTI" if is_hurwitz(sys.A_bar) else "unstable"
        return StabilityReport(status)
    searched = {"omega": (grid.omega_min, grid.omega_max, grid.points),
                "beta": _beta_grid()}
    if not is_hurwitz(sys.A_bar):
        return StabilityReport("unstable", None, searched)
    cert = h_beta_search(sys, grid)
    if cert is None:
        warnings.warn("no H-beta certificate found; steady-state results are not guaranteed "
                      "to be unique", RuntimeWarning, stacklevel=2)
        return StabilityReport("no certificate found", None, searched)
    return StabilityReport("certified", cert, searched)
