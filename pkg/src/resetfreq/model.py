"""Plants, linear controllers, reset elements and the closed-loop assembly.

The loop has the structure::

    r -->(+)-- e --> C_L1 -- e_R --> [reset element] -- u_R -->(+)--> C_L2 -- u -->(+)--> G --+--> y
          ^-                                 |                  ^                  ^ d      |
          |                                  +--> [parallel] ---+                           |
          +-----------------------------------------------------------------------------------+

``parallel`` is an optional linear branch driven by ``e_R`` whose output adds to
``u_R``.  It is how controllers such as a PID with a Clegg integrator in
parallel form are expressed without putting non-resetting states inside the
reset element.  The disturbance ``d`` enters at the plant input and ``u`` is
the controller output (``d`` excluded).

The closed-loop state is ordered ``[x_r; zeta]`` with
``zeta = [x_L1; x_parallel; x_L2; x_plant]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

__all__ = [
    "LinearSystem",
    "ResetElement",
    "ClosedLoopResetSystem",
    "realize_transfer_function",
    "series",
    "unity",
    "clegg",
    "fore",
    "build_closed_loop",
    "base_response",
    "SingularResolventError",
]


class SingularResolventError(np.linalg.LinAlgError):
    """Raised when ``j*omega*I - A`` (or a similar factor) is singular."""


def _frozen(a, shape=None, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    if shape is not None:
        arr = arr.reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix entries must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LinearSystem:
    """Continuous-time state-space model ``x' = Ax + Bu, y = Cx + Du``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0] if A.size else 0
        A = A.reshape(n, n)
        B = np.asarray(self.B, dtype=float)
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        p, m = D.shape
        B = B.reshape(n, m)
        C = np.asarray(self.C, dtype=float).reshape(p, n)
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B))
        object.__setattr__(self, "C", _frozen(C))
        object.__setattr__(self, "D", _frozen(D))

    @property
    def n_states(self):
        return self.A.shape[0]

    @property
    def is_strictly_proper(self):
        return bool(np.all(self.D == 0.0))

    def is_stable(self):
        if self.n_states == 0:
            return True
        return bool(np.all(np.linalg.eigvals(self.A).real < 0.0))

    def response(self, omega):
        """Frequency response at ``omega`` (rad/s); scalar for SISO systems."""
        return base_response(self, omega)


def base_response(sys, omega):
    """Evaluate ``C (j omega I - A)^-1 B + D``.

    Returns a complex scalar for SISO systems and a complex matrix otherwise.

    Raises
    ------
    SingularResolventError
        If ``j omega`` coincides (numerically) with an eigenvalue of ``A``.
    """
    n = sys.n_states
    if n == 0:
        H = sys.D.astype(complex)
    else:
        M = 1j * omega * np.eye(n) - sys.A
        if np.linalg.cond(M) > 1e14:
            raise SingularResolventError(
                f"jwI - A is singular at omega={omega!r}: omega is on an imaginary-axis eigenvalue")
        H = sys.C @ np.linalg.solve(M, sys.B) + sys.D
    if H.shape == (1, 1):
        return complex(H[0, 0])
    return H


def realize_transfer_function(numerator, denominator):
    """Controllable canonical realization of ``num(s)/den(s)``.

    Coefficients are given in descending powers of ``s``.  The state vector is
    ordered so that ``A`` is the companion matrix with the (normalised)
    denominator coefficients in its first row.

    Examples
    --------
    >>> sys = realize_transfer_function([1], [1, 0])
    >>> sys.A, sys.B, sys.C, sys.D
    (array([[0.]]), array([[1.]]), array([[1.]]), array([[0.]]))
    """
    num = np.trim_zeros(np.atleast_1d(np.asarray(numerator, dtype=float)), "f")
    den = np.trim_zeros(np.atleast_1d(np.asarray(denominator, dtype=float)), "f")
    if den.size == 0:
        raise ValueError("denominator must have a nonzero leading coefficient")
    if num.size == 0:
        num = np.zeros(1)
    if num.size > den.size:
        raise ValueError(
            f"improper transfer function: numerator degree {num.size - 1} exceeds "
            f"denominator degree {den.size - 1}")
    lead = den[0]
    den = den / lead
    num = num / lead
    n = den.size - 1
    num = np.concatenate([np.zeros(den.size - num.size), num])
    D = num[0]
    if n == 0:
        return LinearSystem(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), [[D]])
    # strictly proper remainder: num - D*den
    rem = num[1:] - D * den[1:]
    A = np.zeros((n, n))
    A[0, :] = -den[1:]
    A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    C = rem.reshape(1, n)
    return LinearSystem(A, B, C, [[D]])


def unity(gain=1.0):
    """Static gain as a zero-state system."""
    return realize_transfer_function([gain], [1.0])


def series(*systems):
    """Series connection ``systems[-1] * ... * systems[0]`` of SISO systems."""
    if not systems:
        return unity()
    out = systems[0]
    for nxt in systems[1:]:
        n1, n2 = out.n_states, nxt.n_states
        A = np.block([
            [out.A, np.zeros((n1, n2))],
            [nxt.B @ out.C, nxt.A],
        ])
        B = np.vstack([out.B, nxt.B @ out.D])
        C = np.hstack([nxt.D @ out.C, nxt.C])
        D = nxt.D @ out.D
        out = LinearSystem(A, B, C, D)
    return out


@dataclass(frozen=True)
class ResetElement:
    """Linear filter whose state jumps to ``A_rho @ x_r`` when its input crosses zero."""

    A_r: np.ndarray
    B_r: np.ndarray
    C_r: np.ndarray
    D_r: float
    A_rho: np.ndarray

    def __post_init__(self):
        A_r = np.atleast_2d(np.asarray(self.A_r, dtype=float))
        n = A_r.shape[0]
        if A_r.shape != (n, n) or n == 0:
            raise ValueError(f"A_r must be square and nonempty, got shape {A_r.shape}")
        object.__setattr__(self, "A_r", _frozen(A_r))
        object.__setattr__(self, "B_r", _frozen(self.B_r, (n, 1)))
        object.__setattr__(self, "C_r", _frozen(self.C_r, (1, n)))
        object.__setattr__(self, "D_r", float(np.asarray(self.D_r, dtype=float).reshape(())))
        object.__setattr__(self, "A_rho", _frozen(np.atleast_2d(self.A_rho), (n, n)))

    @property
    def n_r(self):
        return self.A_r.shape[0]

    @property
    def base(self):
        """Base linear system (the reset law removed)."""
        return LinearSystem(self.A_r, self.B_r, self.C_r, [[self.D_r]])

    @property
    def is_identity_reset(self):
        return bool(np.array_equal(self.A_rho, np.eye(self.n_r)))


def clegg(gain=1.0, feedthrough=0.0):
    """Clegg integrator ``gain/s`` (plus optional feedthrough) with full reset."""
    return ResetElement([[0.0]], [[1.0]], [[gain]], feedthrough, [[0.0]])


def fore(omega_r, gamma):
    """First-order reset element ``1/(s/omega_r + 1)`` with ``A_rho = gamma``."""
    return ResetElement([[-omega_r]], [[omega_r]], [[1.0]], 0.0, [[gamma]])


@dataclass(frozen=True)
class ClosedLoopResetSystem:
    """Closed-loop hybrid system in the ``[x_r; zeta]`` coordinates.

    Flow ``x' = A_bar x + B_bar w`` while ``e_R != 0``, jump ``x+ = Arho_bar x``
    when ``e_R = 0``, with ``w = [r, d]``, ``y = C_bar x``,
    ``u = Cu_bar x + Du_bar r`` and ``e_R = CeR_bar x + D_eR r``.
    """

    A_bar: np.ndarray
    B_bar: np.ndarray
    C_bar: np.ndarray
    Cu_bar: np.ndarray
    CeR_bar: np.ndarray
    D_eR: float
    Du_bar: float
    Arho_bar: np.ndarray
    n_r: int
    n_p: int
    plant: LinearSystem = field(repr=False)
    reset: ResetElement = field(repr=False)
    C_L1: LinearSystem = field(repr=False)
    C_L2: LinearSystem = field(repr=False)
    parallel: LinearSystem | None = field(default=None, repr=False)

    @property
    def n(self):
        return self.n_r + self.n_p

    @property
    def is_identity_reset(self):
        return self.reset.is_identity_reset

    def channel_vector(self, channel):
        """Column of ``B_bar`` for ``"reference"`` or ``"disturbance"``."""
        return self.B_bar[:, _channel_index(channel)]

    def output_row(self, signal, channel="reference"):
        """``(c, d)`` such that ``signal = c @ x + d * w_channel`` (per unit input)."""
        ref = _channel_index(channel) == 0
        if signal == "y":
            return self.C_bar[0], 0.0
        if signal == "e":
            return -self.C_bar[0], 1.0 if ref else 0.0
        if signal == "u":
            return self.Cu_bar[0], self.Du_bar if ref else 0.0
        if signal == "e_R":
            return self.CeR_bar[0], self.D_eR if ref else 0.0
        raise ValueError(f"unknown signal {signal!r}; expected one of y, e, u, e_R")

    def linear_response(self, omega, signal, channel="reference"):
        """Response of the base linear loop (reset law removed) from a channel to a signal."""
        c, d = self.output_row(signal, channel)
        M = 1j * omega * np.eye(self.n) - self.A_bar
        return complex(c @ np.linalg.solve(M, self.channel_vector(channel)) + d)

    def plant_response(self, omega):
        return base_response(self.plant, omega)


def _channel_index(channel):
    if channel in ("reference", "r", 0):
        return 0
    if channel in ("disturbance", "d", 1):
        return 1
    raise ValueError(f"unknown channel {channel!r}; expected 'reference' or 'disturbance'")


def _check_siso(sys, name):
    if sys.B.shape[1] != 1 or sys.C.shape[0] != 1:
        raise ValueError(f"{name} must be SISO, got {sys.C.shape[0]}x{sys.B.shape[1]}")


def build_closed_loop(C_L1, reset, C_L2, plant, parallel=None, balance=True):
    """Assemble the closed-loop reset system.

    Parameters
    ----------
    C_L1, C_L2 : LinearSystem
        Proper linear controllers before and after the reset element.
    reset : ResetElement
    plant : LinearSystem
        Strictly proper plant ``G``.
    parallel : LinearSystem, optional
        Linear branch from ``e_R`` whose output is summed with ``u_R``.
    balance : bool, default True
        Rescale the linear states by a power-of-two diagonal similarity.  The
        reset states are never rescaled.

    Notes
    -----
    The feedthrough of ``C_L1`` enters only through ``D_eR``.  The feedthrough
    from ``u_R`` to ``u`` is that of ``C_L2``; ``Du_bar`` collects both the
    path through the reset element and (when a parallel branch has a
    feedthrough) the direct linear path from ``r`` to ``u``.
    """
    for sys, name in ((C_L1, "C_L1"), (C_L2, "C_L2"), (plant, "plant")):
        _check_siso(sys, name)
    if parallel is None:
        parallel = unity(0.0)
    _check_siso(parallel, "parallel")
    if not plant.is_strictly_proper:
        raise ValueError("plant must be strictly proper (D = 0)")

    A1, B1, C1, D1 = C_L1.A, C_L1.B, C_L1.C, C_L1.D[0, 0]
    Ap_, Bp_, Cp_, Dp_ = parallel.A, parallel.B, parallel.C, parallel.D[0, 0]
    A2, B2, C2, D2 = C_L2.A, C_L2.B, C_L2.C, C_L2.D[0, 0]
    Ag, Bg, Cg = plant.A, plant.B, plant.C
    n1, npar, n2, ng = A1.shape[0], Ap_.shape[0], A2.shape[0], Ag.shape[0]
    n_p = n1 + npar + n2 + ng
    s1, spar, s2, sg = (slice(0, n1), slice(n1, n1 + npar),
                        slice(n1 + npar, n1 + npar + n2), slice(n1 + npar + n2, n_p))

    # e_R = C_eR zeta + D_eR r, with e = r - y
    C_eR = np.zeros((1, n_p))
    C_eR[:, s1] = C1
    C_eR[:, sg] = -D1 * Cg
    D_eR = D1
    # u = C_u zeta + D_u r + D_uR u_R
    C_u = np.zeros((1, n_p))
    C_u[:, spar] = D2 * Cp_
    C_u[:, s2] = C2
    C_u += D2 * Dp_ * C_eR
    D_u = D2 * Dp_ * D_eR
    D_uR = D2

    A = np.zeros((n_p, n_p))
    A[s1, s1] = A1
    A[s1, sg] = -B1 @ Cg
    A[spar, :] = Bp_ @ C_eR
    A[spar, spar] += Ap_
    A[s2, :] = B2 @ (Dp_ * C_eR)
    A[s2, spar] += B2 @ Cp_
    A[s2, s2] += A2
    A[sg, :] = Bg @ C_u
    A[sg, sg] += Ag
    B = np.zeros((n_p, 2))
    B[s1, 0] = B1[:, 0]
    B[spar, 0] = Bp_[:, 0] * D_eR
    B[s2, 0] = B2[:, 0] * Dp_ * D_eR
    B[sg, 0] = Bg[:, 0] * D_u
    B[sg, 1] = Bg[:, 0]
    B_u = np.zeros((n_p, 1))
    B_u[s2] = B2
    B_u[sg] = Bg * D2
    C = np.zeros((1, n_p))
    C[:, sg] = Cg

    Ar, Br, Cr, Dr = reset.A_r, reset.B_r, reset.C_r, reset.D_r
    n_r = reset.n_r
    A_bar = np.block([
        [Ar, Br @ C_eR],
        [B_u @ Cr, A + Dr * (B_u @ C_eR)],
    ])
    B_bar = np.vstack([np.zeros((n_r, 2)), B])
    B_bar[:n_r, 0] += Br[:, 0] * D_eR
    B_bar[n_r:, 0] += B_u[:, 0] * Dr * D_eR
    C_bar = np.hstack([np.zeros((1, n_r)), C])
    Cu_bar = np.hstack([D_uR * Cr, C_u + D_uR * Dr * C_eR])
    CeR_bar = np.hstack([np.zeros((1, n_r)), C_eR])
    Du_bar = D_u + D_uR * Dr * D_eR
    Arho_bar = np.block([
        [reset.A_rho, np.zeros((n_r, n_p))],
        [np.zeros((n_p, n_r)), np.eye(n_p)],
    ])
    if balance:
        # diagonal similarity on the linear states only, so x_r and the jump
        # map keep their meaning; companion realizations are otherwise badly
        # scaled (entries spanning ten decades for the CgLp loops)
        _, (sc, _) = scipy.linalg.matrix_balance(A_bar, permute=False, separate=True)
        sc = sc / sc[:n_r].mean() if n_r else sc
        sc[:n_r] = 1.0
        A_bar = A_bar * sc[None, :] / sc[:, None]
        B_bar = B_bar / sc[:, None]
        C_bar = C_bar * sc[None, :]
        Cu_bar = Cu_bar * sc[None, :]
        CeR_bar = CeR_bar * sc[None, :]
    return ClosedLoopResetSystem(
        A_bar=_frozen(A_bar), B_bar=_frozen(B_bar), C_bar=_frozen(C_bar),
        Cu_bar=_frozen(Cu_bar), CeR_bar=_frozen(CeR_bar), D_eR=float(D_eR),
        Du_bar=float(Du_bar), Arho_bar=_frozen(Arho_bar), n_r=n_r, n_p=n_p,
        plant=plant, reset=reset, C_L1=C_L1, C_L2=C_L2, parallel=parallel,
    )
