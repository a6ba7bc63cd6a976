"""Classical Calogero-Moser dynamics: eigenvalue solutions, Lax diagnostics,
scattering fits, and an RK4 reference integrator.

Complex positions, momenta, coupling and frequency are supported throughout.
The regime is read off the sign of omega^2: positive (harmonic), negative
(hyperbolic), zero (isolated). The eigenvalue solution only involves
cos(omega t) and sin(omega t)/omega, both entire in omega^2, so no branch
choice is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

DELTA_COLLIDE = 1e-6


class CollisionError(RuntimeError):
    """Particles approached within DELTA_COLLIDE."""


@dataclass(frozen=True)
class CMSystem:
    """n-body Calogero-Moser data: positions, momenta, coupling, frequency."""

    q0: np.ndarray
    p0: np.ndarray
    g: complex
    omega: complex = 0j

    @staticmethod
    def make(q0, p0, g, omega=0.0):
        q0 = np.array(q0, dtype=complex).reshape(-1)
        p0 = np.array(p0, dtype=complex).reshape(-1)
        if q0.size != p0.size:
            raise ValueError("positions and momenta must have equal length")
        if q0.size < 1:
            raise ValueError("at least one particle required")
        if _min_separation(q0) < DELTA_COLLIDE:
            raise CollisionError("initial positions closer than DELTA_COLLIDE")
        q0.setflags(write=False)
        p0.setflags(write=False)
        return CMSystem(q0, p0, complex(g), complex(omega))

    @property
    def n(self):
        return self.q0.size


@dataclass(frozen=True)
class LaxPair:
    """Lax matrices at a phase-space point.

    For omega = 0 the spectrum of L is conserved along trajectories. For
    omega != 0 the plain L-spectrum rotates; the conserved set is the
    spectrum of (L + i omega Q)(L - i omega Q), see ``conserved_spectrum``.
    """

    L: np.ndarray
    M: np.ndarray


@dataclass(frozen=True)
class ScatteringResult:
    """Permutation and asymptotic line fits of an isolated scattering process.

    ``permutation[k] = j`` means the outgoing line of trajectory k coincides
    with the incoming line of trajectory j. ``horizon`` is the (possibly
    auto-extended) fit time actually used.
    """

    permutation: tuple
    p_in: np.ndarray
    q_in: np.ndarray
    p_out: np.ndarray
    q_out: np.ndarray
    residual: float
    horizon: float


def _min_separation(q):
    n = q.size
    if n < 2:
        return np.inf
    d = np.abs(q[:, None] - q[None, :]) + np.diag([np.inf] * n)
    return float(np.min(d))


def lax_matrices(q, p, g):
    """Lax pair (L, M) at a phase-space point; distinct positions required."""
    q = np.asarray(q, dtype=complex).reshape(-1)
    p = np.asarray(p, dtype=complex).reshape(-1)
    if _min_separation(q) < DELTA_COLLIDE:
        raise CollisionError("coincident positions in lax_matrices")
    n = q.size
    L = np.diag(p.astype(complex))
    M = np.zeros((n, n), dtype=complex)
    for j in range(n):
        acc = 0j
        for k in range(n):
            if k == j:
                continue
            d = q[j] - q[k]
            L[j, k] = 1j * g / d
            M[j, k] = -g / d**2
            acc += g / d**2
        M[j, j] = acc
    return LaxPair(L, M)


def conserved_spectrum(q, p, g, omega=0.0):
    """Sorted spectrum of the regime-appropriate conserved Lax quantity.

    Eigenvalues of L when omega = 0, else of (L + i omega Q)(L - i omega Q);
    both are constant along trajectories in their regime.
    """
    L = lax_matrices(q, p, g).L
    if omega == 0:
        return np.sort_complex(np.linalg.eigvals(L))
    Q = np.diag(np.asarray(q, dtype=complex))
    B = (L + 1j * omega * Q) @ (L - 1j * omega * Q)
    return np.sort_complex(np.linalg.eigvals(B))


def _propagator(omega, t):
    """(cos(omega t), sin(omega t)/omega) as entire functions of omega^2."""
    w2 = omega * omega
    x = w2 * t * t
    if abs(x) < 1e-12:
        return 1.0 - x / 2.0, t * (1.0 - x / 6.0)
    w = np.sqrt(w2)
    return np.cos(w * t), np.sin(w * t) / w


def cm_solve(system, t):
    """Positions at time t as eigenvalues of the propagated Lax matrix.

    The eigenvalues come back as an unordered set; use ``cm_solve_path`` for
    continuously labeled trajectories.
    """
    fc, fs = _propagator(system.omega, t)
    L0 = lax_matrices(system.q0, system.p0, system.g).L
    lam = np.diag(system.q0) * fc + L0 * fs
    return np.linalg.eigvals(lam)


def cm_solve_path(system, times):
    """Continuous trajectories on a grid of times, shape (n, len(times)).

    Eigenvalues at consecutive grid points are matched by minimal-cost
    assignment; the grid must be fine enough that particles move less than
    half their minimal gap between samples.
    """
    times = np.asarray(times, dtype=float)
    L0 = lax_matrices(system.q0, system.p0, system.g).L
    Q0 = np.diag(system.q0)
    out = np.empty((system.n, times.size), dtype=complex)
    prev = system.q0
    for i, t in enumerate(times):
        fc, fs = _propagator(system.omega, t)
        vals = np.linalg.eigvals(Q0 * fc + L0 * fs)
        prev = _match_order(prev, vals)
        out[:, i] = prev
    return out


def _match_order(reference, values):
    cost = np.abs(reference[:, None] - values[None, :]) ** 2
    _, cols = linear_sum_assignment(cost)
    return values[cols]


def cm_energy(system, q, p):
    """Calogero-Moser Hamiltonian value at a phase-space point."""
    q = np.asarray(q, dtype=complex)
    p = np.asarray(p, dtype=complex)
    h = 0.5 * np.sum(p**2 + system.omega**2 * q**2)
    n = q.size
    for k in range(n):
        for j in range(n):
            if j != k:
                h += 0.5 * system.g**2 / (q[k] - q[j]) ** 2
    return complex(h)


def _cm_derivative(system, y):
    n = system.n
    q, p = y[:n], y[n:]
    dq = p
    dp = -system.omega**2 * q
    if n > 1:
        diff = q[:, None] - q[None, :]
        np.fill_diagonal(diff, 1.0)
        inv3 = diff**-3
        np.fill_diagonal(inv3, 0.0)
        dp = dp + 2.0 * system.g**2 * np.sum(inv3, axis=1)
    return np.concatenate([dq, dp])


def cm_ode_path(system, t, dt):
    """RK4 reference integration; returns (times, q path, p path)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    steps = max(1, int(round(abs(t) / dt)))
    h = t / steps if t != 0 else 0.0
    n = system.n
    y = np.concatenate([system.q0, system.p0]).astype(complex)
    times = np.linspace(0.0, t, steps + 1)
    qs = np.empty((n, steps + 1), dtype=complex)
    ps = np.empty((n, steps + 1), dtype=complex)
    qs[:, 0], ps[:, 0] = system.q0, system.p0
    for i in range(steps):
        k1 = _cm_derivative(system, y)
        k2 = _cm_derivative(system, y + 0.5 * h * k1)
        k3 = _cm_derivative(system, y + 0.5 * h * k2)
        k4 = _cm_derivative(system, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise RuntimeError(f"integration unstable at t={times[i + 1]:.6g}; reduce dt")
        if _min_separation(y[:n]) < DELTA_COLLIDE:
            raise CollisionError(
                f"particles collided at t={times[i + 1]:.6g} "
                f"(min separation {_min_separation(y[:n]):.3e})"
            )
        qs[:, i + 1], ps[:, i + 1] = y[:n], y[n:]
    return times, qs, ps


def cm_ode(system, t, dt):
    """Positions at time t from the RK4 reference route."""
    _, qs, _ = cm_ode_path(system, t, dt)
    return qs[:, -1]


def _fit_lines(system, t_lo, t_hi, samples=60):
    """Least-squares linear fits q_k(t) ~ p_k t + q_k over [t_lo, t_hi]."""
    ts = np.linspace(t_lo, t_hi, samples)
    path = cm_solve_path(system, ts)
    design = np.vstack([ts, np.ones_like(ts)]).T
    coef, *_ = np.linalg.lstsq(design, path.T, rcond=None)
    fitted = design @ coef
    resid = float(np.max(np.abs(fitted - path.T)))
    return coef[0], coef[1], resid  # momenta, offsets, fit residual


def scattering_permutation(system, T, max_doublings=12):
    """Asymptotic scattering data of an isolated system.

    T is grown automatically until the pairwise interaction is below the fit
    tolerance. Returns the trajectory permutation between incoming and
    outgoing asymptotic lines, with the fitted momenta and offsets.
    """
    if abs(system.omega) > 1e-12:
        raise ValueError("scattering analysis requires the isolated regime (omega = 0)")
    T = float(T)
    for _ in range(max_doublings + 1):
        q_far = cm_solve_path(system, [-T, T])
        gap = min(_min_separation(q_far[:, 0]), _min_separation(q_far[:, 1]))
        pscale = max(float(np.max(np.abs(system.p0))), 1e-9)
        tol = 1e-4 * pscale * T
        # interaction force scale over the fit window must be negligible
        if abs(system.g) ** 2 / max(gap, 1e-12) ** 3 * T**2 < 0.1 * tol:
            break
        T *= 2.0
    p_out, q_out, r1 = _fit_lines(system, 0.8 * T, T)
    p_in, q_in, r2 = _fit_lines(system, -T, -0.8 * T)
    residual = max(r1, r2)
    if residual > tol:
        raise RuntimeError(
            f"asymptotic fit residual {residual:.3e} above tolerance {tol:.3e}; "
            "increase T"
        )
    cost = (
        np.abs(p_out[:, None] - p_in[None, :]) ** 2
        + np.abs(q_out[:, None] - q_in[None, :]) ** 2 / max(T, 1.0) ** 2
    )
    _, cols = linear_sum_assignment(cost)
    mismatch = float(np.max(np.abs(p_out - p_in[cols])))
    if mismatch > tol:
        raise RuntimeError(
            f"asymptotic momenta mismatch {mismatch:.3e} above tolerance {tol:.3e}"
        )
    return ScatteringResult(
        tuple(int(c) for c in cols), p_in, q_in, p_out, q_out, residual, T
    )
