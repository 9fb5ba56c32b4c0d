"""Exact periodic steady state of the closed loop under a single sinusoid.

All computations are carried out per unit input amplitude and in the phase
variable ``theta = omega * t``.  Between resets the state is

    x(theta) = expm(A_bar (theta - theta_k) / omega) (xi_k + psi(theta_k)) - psi(theta)

where ``psi`` is the harmonic particular solution.  A steady state with ``q``
resets per half period is fixed by its first reset phase and the ``q``
inter-reset intervals; the post-reset state ``xi_s`` then follows from the
half-period antisymmetry ``xi_{s+q} = -xi_s`` as a linear solve.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from .numerics import NewtonConfig, NewtonError, matrix_exponential, newton_solve

__all__ = [
    "HarmonicBasis",
    "SteadyStateSolution",
    "SolverConfig",
    "SteadyStateError",
    "harmonic_basis",
    "psi",
    "solve_steady_state",
    "solve_with_reset_phases",
    "evaluate_steady_state",
    "evaluate_derivative",
    "signal",
]

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


class SteadyStateError(RuntimeError):
    """No admissible periodic solution was found."""

    def __init__(self, message, best_residual=math.inf):
        super().__init__(message)
        self.best_residual = best_residual


@dataclass(frozen=True)
class HarmonicBasis:
    omega: float
    F: np.ndarray
    channel: str
    A: np.ndarray = field(repr=False)

    def psi(self, theta):
        """``psi`` at phase(s) ``theta``; shape ``(n,)`` or ``(len(theta), n)``."""
        th = np.asarray(theta, dtype=float)
        wF = self.omega * self.F
        AF = self.A @ self.F
        if th.ndim == 0:
            return np.cos(th) * wF + np.sin(th) * AF
        return np.cos(th)[:, None] * wF[None, :] + np.sin(th)[:, None] * AF[None, :]


def _channel_name(channel):
    if channel in ("reference", "r", 0):
        return "reference"
    if channel in ("disturbance", "d", 1):
        return "disturbance"
    raise ValueError(f"unknown channel {channel!r}")


def harmonic_basis(sys, omega, channel="reference"):
    channel = _channel_name(channel)
    A = sys.A_bar
    b = sys.channel_vector(channel)
    W = omega**2 * np.eye(sys.n) + A @ A
    F = np.linalg.solve(W, b)
    return HarmonicBasis(float(omega), F, channel, A)


def psi(sys, basis, t):
    """Harmonic particular solution at time(s) ``t`` (seconds)."""
    return basis.psi(basis.omega * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class SolverConfig:
    """Settings of the steady-state solver.

    ``lambda_min`` is the smallest admissible reset interval in seconds; when
    ``None`` it defaults to ``1e-6`` of the excitation period.
    """

    lambda_min: float | None = None
    q_max_cap: int = 51
    tol: float = 1e-11
    accept_tol: float = 1e-9
    seed_periods: int = 20
    max_seed_periods: int = 5000
    samples_per_period: int = 256

    def lambda_min_for(self, omega):
        lam = self.lambda_min if self.lambda_min is not None else 1e-6 * TWO_PI / omega
        if lam <= 0:
            raise ValueError("lambda_min must be positive")
        return lam


@dataclass(frozen=True)
class SteadyStateSolution:
    """Periodic steady state per unit input amplitude.

    ``xi[i]`` is the post-reset state at ``t_s + sum(tau[:i])``; the solution
    over the second half period follows from ``x(t + pi/omega) = -x(t)``.
    """

    omega: float
    channel: str
    kappa: float
    cos_sign: int
    t_s: float
    q: int
    tau: tuple
    xi: tuple
    residual: float
    basis: HarmonicBasis = field(repr=False)
    no_reset: bool = False

    @property
    def period(self):
        return TWO_PI / self.omega

    @property
    def reset_phases(self):
        """Reset phases ``omega * t`` over one half period, starting at ``omega * t_s``."""
        d = np.concatenate([[0.0], np.cumsum(self.tau)[:-1]]) if self.q else np.zeros(0)
        return self.omega * (self.t_s + d)

    @property
    def reset_instants(self):
        """All reset instants in ``[t_s, t_s + 2*pi/omega)``."""
        if self.q == 0:
            return np.zeros(0)
        half = self.t_s + np.concatenate([[0.0], np.cumsum(self.tau)[:-1]])
        return np.concatenate([half, half + np.pi / self.omega])

    def anchors(self):
        """``(phase_start, z_start)`` per half-period interval, with ``z = xi + psi``."""
        phases = self.reset_phases
        return phases, np.array([self.xi[i] + self.basis.psi(phases[i]) for i in range(self.q)])


# -- residual assembly -------------------------------------------------------

class _Problem:
    """Per-(system, omega, channel) data shared by residual evaluations."""

    def __init__(self, sys, omega, channel):
        self.sys = sys
        self.omega = float(omega)
        self.channel = _channel_name(channel)
        self.basis = harmonic_basis(sys, omega, channel)
        self.Ahat = sys.A_bar / self.omega
        self.bhat = sys.channel_vector(self.channel) / self.omega
        self.Arho = sys.Arho_bar
        self.c_R, self.d_R = sys.output_row("e_R", self.channel)
        self.n = sys.n
        amp = abs(sys.linear_response(self.omega, "e_R", self.channel))
        self.scale = amp if amp > 1e-300 else 1.0

    def expm(self, dtheta):
        return matrix_exponential(self.Ahat, dtheta)

    def e_R(self, theta, x):
        return float(self.c_R @ x + self.d_R * math.sin(theta))

    def orbit(self, phi_s, deltas):
        """Post-reset states and pre-reset states for given reset phases."""
        q = len(deltas)
        n = self.n
        M = np.eye(n)
        c = np.zeros(n)
        phases = phi_s + np.concatenate([[0.0], np.cumsum(deltas)])
        Phis = [self.expm(d) for d in deltas]
        psis = [self.basis.psi(p) for p in phases]
        # xi_i = Arho (Phi_i (xi_{i-1} + psi_{i-1}) - psi_i) = M_i xi_s + c_i
        for i in range(q):
            M = self.Arho @ Phis[i] @ M
            c = self.Arho @ (Phis[i] @ (c + psis[i]) - psis[i + 1])
        xi_s = np.linalg.solve(np.eye(n) + M, -c)
        xis = [xi_s]
        pre = []
        for i in range(q):
            xm = Phis[i] @ (xis[-1] + psis[i]) - psis[i + 1]
            pre.append(xm)
            xis.append(self.Arho @ xm)
        return phases, xis, pre

    def residual(self, p, q):
        phi_s = p[0]
        deltas = np.concatenate([p[1:], [np.pi - np.sum(p[1:])]]) if q > 1 else np.array([np.pi])
        phases, _, pre = self.orbit(phi_s, deltas)
        return np.array([self.e_R(phases[i + 1], pre[i]) for i in range(q)]) / self.scale

    def full_residual(self, phi_s, deltas):
        """Norm of the joint system: reset conditions, closure and interval sum."""
        phases, xis, pre = self.orbit(phi_s, deltas)
        E = [self.e_R(phases[i + 1], pre[i]) / self.scale for i in range(len(deltas))]
        closure = np.linalg.norm(xis[-1] + xis[0]) / max(1.0, np.linalg.norm(xis[0]))
        return float(np.linalg.norm(np.concatenate([E, [closure, np.sum(deltas) - np.pi]])))


# -- candidate construction ----------------------------------------------------

def _single_reset_phase(prob):
    """Closed-form reset phase for one reset per half period.

    With ``delta = pi`` the reset condition is linear in ``psi(phi)`` and hence
    of the form ``a cos(phi) + b sin(phi) = 0``, with one root in ``[0, pi)``.
    """
    n = prob.n
    Phi = prob.expm(np.pi)
    Arho = prob.Arho
    I = np.eye(n)
    # x^-(phi + pi) = K psi(phi)
    K = Phi @ (I - np.linalg.solve(I + Arho @ Phi, Arho @ (Phi + I))) + I
    k = prob.c_R @ K
    a = prob.omega * (k @ prob.basis.F)
    b = k @ (prob.sys.A_bar @ prob.basis.F) - prob.d_R
    return math.atan2(-a, b) % np.pi


def _canonical(phi_s, deltas):
    """Rotate so the first reset phase is the smallest one modulo pi."""
    phases = (phi_s + np.concatenate([[0.0], np.cumsum(deltas)[:-1]])) % np.pi
    k = int(np.argmin(phases))
    return float(phases[k]), np.roll(np.asarray(deltas, dtype=float), -k)


def _interior_crossings(prob, phases, xis, samples=96):
    """Count sign changes of e_R strictly inside each reset interval.

    Besides a uniform grid, the samples are graded geometrically towards both
    ends of the interval, where e_R vanishes and spurious crossings cluster.
    Between samples of equal sign, an extremum of the opposite sign counts as
    a pair of crossings.
    """
    count = 0
    graded = np.logspace(-8, -1, 36)
    c_R, d_R, Ahat, bhat = prob.c_R, prob.d_R, prob.Ahat, prob.bhat
    for i in range(len(phases) - 1):
        a, b = phases[i], phases[i + 1]
        span = b - a
        if span <= 0:
            return 10**6
        edge = min(1e-7 * span, 1e-9) + 1e-6 * span
        th = np.unique(np.concatenate([
            np.linspace(a + edge, b - edge, samples),
            a + np.maximum(span * graded, edge),
            b - np.maximum(span * graded, edge),
        ]))
        z = xis[i] + prob.basis.psi(a)

        def state(t, z=z, a=a):
            return prob.expm(t - a) @ z - prob.basis.psi(t)

        def slope(t):
            x = state(t)
            return float(c_R @ (Ahat @ x + bhat * math.sin(t)) + d_R * math.cos(t))

        X = [state(t) for t in th]
        vals = np.array([prob.e_R(t, x) for t, x in zip(th, X)])
        slopes = np.array([c_R @ (Ahat @ x + bhat * math.sin(t)) + d_R * math.cos(t)
                           for t, x in zip(th, X)])
        s = np.sign(vals)
        count += int(np.sum(s[1:] * s[:-1] < 0))
        for k in np.flatnonzero((s[1:] * s[:-1] > 0) & (slopes[1:] * slopes[:-1] < 0)):
            tm = brentq(slope, th[k], th[k + 1], xtol=1e-14, rtol=1e-15)
            if prob.e_R(tm, state(tm)) * s[k] < 0:
                count += 2
    return count


def _build_solution(prob, phi_s, deltas, residual):
    phi_s, deltas = _canonical(phi_s, deltas)
    phases, xis, _ = prob.orbit(phi_s, deltas)
    w = prob.omega
    return SteadyStateSolution(
        omega=w,
        channel=prob.channel,
        kappa=math.sin(phi_s),
        cos_sign=1 if math.cos(phi_s) >= 0 else -1,
        t_s=phi_s / w,
        q=len(deltas),
        tau=tuple(float(d / w) for d in deltas),
        xi=tuple(np.asarray(x) for x in xis),
        residual=float(residual),
        basis=prob.basis,
    )


def _inadmissible(prob, phi_s, deltas, lam_phase):
    """Reason why a candidate is not a steady state, or ``None`` if it is one."""
    if np.min(deltas) < lam_phase:
        return (f"reset interval {np.min(deltas) / prob.omega:.3e} s is below lambda_min "
                f"{lam_phase / prob.omega:.3e} s")
    phases, xis, _ = prob.orbit(phi_s, deltas)
    n = _interior_crossings(prob, phases, xis)
    if n:
        return f"e_R has {n} zero crossing(s) between the candidate reset instants"
    return None


def _propagate_resets(prob, x0, theta0, n_periods, samples_per_period):
    """Event-driven propagation with exact flows; returns reset phases and final state.

    A reset is detected as a sign change of ``e_R`` between samples, or as an
    extremum of ``e_R`` inside a step whose value has the opposite sign (a
    pair of crossings closer than the step).
    """
    h = TWO_PI / samples_per_period
    Phi_fine = [prob.expm(h * 2.0**-k) for k in range(21)]
    basis = prob.basis
    c_R, d_R, Ahat, bhat = prob.c_R, prob.d_R, prob.Ahat, prob.bhat

    def slope(t, x):
        return float(c_R @ (Ahat @ x + bhat * math.sin(t)) + d_R * math.cos(t))

    theta = theta0
    x = np.array(x0, dtype=float)
    z = x + basis.psi(theta)
    g = prob.e_R(theta, x)
    dg = slope(theta, x)
    resets = []
    theta_end = theta0 + TWO_PI * n_periods
    guard = 1e-9 * TWO_PI
    just_reset = False
    fine = 0
    while theta < theta_end - 1e-15:
        # right after a reset, steps grow geometrically from h * 2**-20 so that
        # closely spaced crossings are not stepped over
        step = min(h * 2.0**-fine if fine else h, theta_end - theta)
        Phi = Phi_fine[fine] if step == h * 2.0**-fine else prob.expm(step)
        fine = fine - 1 if fine > 1 else 0
        z_next = Phi @ z
        th_next = theta + step
        x_next = z_next - basis.psi(th_next)
        g_next = prob.e_R(th_next, x_next)
        dg_next = slope(th_next, x_next)
        z0, t0 = z, theta

        def f(t):
            return prob.e_R(t, prob.expm(t - t0) @ z0 - basis.psi(t))

        t_hit, g_hit = th_next, g_next
        if g * g_next > 0 and not just_reset and dg * dg_next < 0:
            tm = brentq(lambda t: slope(t, prob.expm(t - t0) @ z0 - basis.psi(t)),
                        t0, th_next, xtol=1e-14, rtol=1e-15)
            gm = f(tm)
            if gm * g < 0:
                t_hit, g_hit = tm, gm
        if g * g_hit < 0:
            a = t0
            if just_reset:
                # skip the roundoff-level neighbourhood of the previous reset
                a = t0 + guard
                if f(a) * g_hit >= 0:
                    theta, z, g, dg, just_reset = th_next, z_next, g_next, dg_next, False
                    continue
            ts = brentq(f, a, t_hit, xtol=1e-14, rtol=1e-15)
            xm = prob.expm(ts - t0) @ z0 - basis.psi(ts)
            xp = prob.Arho @ xm
            resets.append(ts)
            # direction of e_R right after the jump decides the reference sign
            s_p = slope(ts, xp)
            g = s_p if s_p != 0 else -g
            dg = s_p
            theta = ts
            z = xp + basis.psi(ts)
            just_reset = True
            fine = 20
            continue
        theta, z, dg, just_reset = th_next, z_next, dg_next, False
        if g_next != 0:
            g = g_next
    return np.array(resets), z - basis.psi(theta), theta


def _seed_from_trace(resets, theta_end):
    """Extract (phi_s, deltas) from the resets of the last simulated period."""
    last = resets[resets >= theta_end - TWO_PI]
    if last.size == 0 or last.size % 2:
        return None
    prev = resets[(resets >= theta_end - 2 * TWO_PI) & (resets < theta_end - TWO_PI)]
    k = int(np.argmin(last % np.pi))
    phi_s = float(last[k] % TWO_PI)
    rel = np.mod(last - last[k], TWO_PI)
    rel[rel > TWO_PI - 1e-9] = 0.0
    rel = np.sort(rel)
    first = rel[rel < np.pi - 1e-9]
    q = first.size
    if 2 * q != last.size:
        return None
    deltas = np.diff(np.concatenate([first, [np.pi]]))
    drift = np.inf
    if prev.size == last.size:
        drift = float(np.max(np.abs(np.sort(prev % TWO_PI) - np.sort(last % TWO_PI))))
    return phi_s, deltas, drift


def _polish(prob, phi_s, deltas, cfg):
    q = len(deltas)
    p0 = np.concatenate([[phi_s], deltas[:-1]])
    try:
        p = newton_solve(lambda p: prob.residual(p, q), p0,
                         NewtonConfig(tol=cfg.tol, max_iter=60)).x
    except NewtonError as exc:
        # a stall at the roundoff floor is still a converged pattern
        if exc.residual > cfg.accept_tol:
            raise
        p = exc.x
    deltas = np.concatenate([p[1:], [np.pi - np.sum(p[1:])]]) if q > 1 else np.array([np.pi])
    return float(p[0]), deltas


def solve_steady_state(sys, omega, channel="reference", cfg=SolverConfig()):
    """Periodic steady state for a unit sinusoid on ``channel`` at ``omega`` rad/s.

    Tries the closed-form single-reset candidate first.  When it is not
    admissible (extra zero crossings of ``e_R`` inside a reset interval), the
    loop is propagated event by event from the linear steady state until the
    reset pattern settles, and the pattern is polished with Newton's method.

    Raises
    ------
    SteadyStateError
        If no admissible solution is found for any ``q <= cfg.q_max_cap``.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    prob = _Problem(sys, omega, channel)
    lam_phase = cfg.lambda_min_for(omega) * prob.omega

    if abs(sys.linear_response(prob.omega, "e_R", prob.channel)) < 1e-14 and not np.any(prob.c_R):
        log.info("no reset activity at omega=%g: e_R vanishes identically", omega)
        return SteadyStateSolution(prob.omega, prob.channel, 0.0, 1, 0.0, 0, (), (), 0.0,
                                   prob.basis, no_reset=True)

    phi1 = _single_reset_phase(prob)
    d1 = np.array([np.pi])
    r1 = prob.full_residual(phi1, d1)
    if _inadmissible(prob, phi1, d1, lam_phase) is None:
        return _build_solution(prob, phi1, d1, r1)
    best = r1

    # seed from exact event-driven propagation, starting at the linear steady state
    x = -prob.basis.psi(0.0)
    x[: sys.n_r] = 0.0
    theta = 0.0
    all_resets = np.zeros(0)
    periods = 0
    chunk = cfg.seed_periods
    reason = "reset pattern did not settle"
    rejected = 0
    while periods < cfg.max_seed_periods and rejected < 2:
        resets, x, theta = _propagate_resets(prob, x, theta, chunk, cfg.samples_per_period)
        all_resets = np.concatenate([all_resets, resets])
        periods += chunk
        seed = _seed_from_trace(all_resets, theta)
        all_resets = all_resets[all_resets >= theta - 2 * TWO_PI]
        chunk = min(2 * chunk, 400)
        if seed is None:
            continue
        phi_s, deltas, drift = seed
        q = len(deltas)
        if q > cfg.q_max_cap:
            raise SteadyStateError(f"reset count {q} exceeds q_max_cap={cfg.q_max_cap}", best)
        if drift > 1e-3:
            continue
        try:
            phi_p, d_p = _polish(prob, phi_s, deltas, cfg)
        except NewtonError as exc:
            best = min(best, exc.residual)
            reason = f"Newton polish failed for q={q}: {exc}"
            log.debug(reason)
            rejected += drift < 1e-8
            continue
        r = prob.full_residual(phi_p, d_p)
        best = min(best, r)
        reason = _inadmissible(prob, phi_p, d_p, lam_phase)
        if reason is None:
            return _build_solution(prob, phi_p, d_p, r)
        rejected += drift < 1e-8
    raise SteadyStateError(
        f"no admissible steady state at omega={omega:g} rad/s ({prob.channel}): {reason}; "
        f"best residual {best:.3e}", best)


def solve_with_reset_phases(sys, omega, channel, phi_s, deltas):
    """Steady state for prescribed reset phases (used for approximations)."""
    prob = _Problem(sys, omega, channel)
    deltas = np.asarray(deltas, dtype=float)
    return _build_solution(prob, phi_s, deltas, prob.full_residual(phi_s, deltas))


# -- evaluation ---------------------------------------------------------------

def _locate(sol, theta):
    """Map phases to (interval index, sign, local phase) over the periodic orbit."""
    phases = sol.reset_phases
    th = np.asarray(theta, dtype=float)
    rel = np.mod(th - phases[0], TWO_PI)
    sign = np.where(rel > np.pi, -1.0, 1.0)
    # left-continuous: theta == reset phase belongs to the interval ending there
    rel = np.where(rel == 0.0, TWO_PI, rel)
    sign = np.where(rel > np.pi, -1.0, 1.0)
    rel_h = np.where(rel > np.pi, rel - np.pi, rel)
    starts = phases - phases[0]
    idx = np.searchsorted(starts, rel_h, side="left") - 1
    idx = np.clip(idx, 0, sol.q - 1)
    return idx, sign, rel_h - starts[idx]


def evaluate_steady_state(sol, sys, t, amplitude=1.0):
    """Steady-state state vector(s) at time(s) ``t``; shape ``(n,)`` or ``(len(t), n)``."""
    t_arr = np.asarray(t, dtype=float)
    theta = np.atleast_1d(sol.omega * t_arr)
    basis = sol.basis
    if sol.q == 0:
        X = -basis.psi(theta)
    else:
        idx, sign, local = _locate(sol, theta)
        phases, Z = sol.anchors()
        Ahat = sys.A_bar / sol.omega
        X = np.empty((theta.size, sys.n))
        for i in range(sol.q):
            m = np.flatnonzero(idx == i)
            if m.size:
                X[m] = scipy.linalg.expm(local[m, None, None] * Ahat[None]) @ Z[i]
        X -= basis.psi(theta - np.where(sign < 0, np.pi, 0.0))
        X *= sign[:, None]
    X *= amplitude
    return X[0] if t_arr.ndim == 0 else X


def evaluate_derivative(sol, sys, t, amplitude=1.0):
    """Time derivative of the steady state (flow equation, left limits at resets)."""
    X = evaluate_steady_state(sol, sys, t, amplitude)
    t_arr = np.asarray(t, dtype=float)
    b = sys.channel_vector(sol.channel)
    w = amplitude * np.sin(sol.omega * t_arr)
    return X @ sys.A_bar.T + np.multiply.outer(w, b)


def signal(sol, sys, name, t, amplitude=1.0):
    """Steady-state value of ``y``, ``e``, ``u`` or ``e_R`` at time(s) ``t``."""
    c, d = sys.output_row(name, sol.channel)
    X = evaluate_steady_state(sol, sys, t, amplitude)
    return X @ c + d * amplitude * np.sin(sol.omega * np.asarray(t, dtype=float))
