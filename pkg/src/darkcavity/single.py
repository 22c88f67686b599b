"""Single-excitation dynamics when the cavity loss dominates.

Amplitudes follow

    dC10/dt = -(mu/2) C10 + i sum_j conj(W_j) C0j exp(-i D_j t)
    dC0j/dt = i W_j C10 exp(i D_j t) - g_j C0j

with W_j the Rabi couplings and D_j the detunings (all in meV, time in fs, so
every rate carries a 1/HBAR). Internally time is measured in s = t / HBAR,
which makes the generator a plain matrix in meV.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .core import HBAR, QubitEnsemble, SingleExcitationState, Trajectory


class PreconditionError(ValueError):
    pass


class DegenerateCouplingError(ValueError):
    pass


class IntegrationError(RuntimeError):
    pass


def collective_rabi(rabi) -> float:
    if isinstance(rabi, QubitEnsemble):
        return rabi.collective_rabi
    return float(np.sqrt(np.sum(np.abs(np.asarray(rabi, complex)) ** 2)))


# ----------------------------------------------------------------------------
# resonant closed form
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ResonantSolution:
    """Two collective modes exp(K t / HBAR) shared by C10 and F."""

    sigma: complex
    K1: complex
    K2: complex
    A: complex
    B: complex

    @classmethod
    def build(cls, mu: float, omega_n: float, c10_0: complex, f0: complex):
        sigma = np.sqrt(complex(omega_n ** 2 - mu ** 2 / 16))
        K1 = 1j * sigma - mu / 4
        K2 = -1j * sigma - mu / 4
        # C10 = A e^{K1 s} + B e^{K2 s};  C10'(0) = -mu/2 C10(0) + i F0
        d0 = -mu / 2 * c10_0 + 1j * f0
        if abs(K1 - K2) > 1e-300:
            A = (d0 - K2 * c10_0) / (K1 - K2)
            B = c10_0 - A
        else:
            A, B = complex("nan"), complex("nan")
        return cls(complex(sigma), complex(K1), complex(K2), complex(A), complex(B))


def resonant_solution(initial: SingleExcitationState, mu: float, rabi) -> ResonantSolution:
    rabi = np.asarray(rabi, complex)
    return ResonantSolution.build(mu, collective_rabi(rabi), initial.c10,
                                  initial.coupling_amplitude(rabi))


def _sin_over(sigma: complex, s: np.ndarray) -> np.ndarray:
    """sin(sigma s) / sigma, safe at sigma -> 0."""
    x = sigma * s
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    body = np.where(small, 1 - x * x / 6 + x ** 4 / 120, np.sin(safe) / safe)
    return s * body


def _check_resonant(detunings, gamma=None):
    if detunings is not None and np.any(np.asarray(detunings) != 0):
        raise PreconditionError("closed-form evolution requires zero detunings")
    if gamma is not None and np.any(np.asarray(gamma) != 0):
        raise PreconditionError("closed-form evolution requires zero qubit relaxation")


def evolve_resonant_analytic(initial: SingleExcitationState, mu: float, rabi, t,
                             detunings=None):
    """Exact resonant evolution.

    Returns a SingleExcitationState for scalar ``t`` (fs) and a Trajectory for an
    array of times.
    """
    _check_resonant(detunings)
    rabi = np.asarray(rabi, complex)
    if rabi.shape != initial.c0.shape:
        raise ValueError("Rabi list and state size differ")
    scalar = np.ndim(t) == 0
    s = np.atleast_1d(np.asarray(t, float)) / HBAR
    wn2 = float(np.sum(np.abs(rabi) ** 2))
    a = initial.c10
    f0 = initial.coupling_amplitude(rabi)
    sigma = np.sqrt(complex(wn2 - mu * mu / 16))
    b = 1j * f0 - mu * a / 4
    cs = np.cos(sigma * s)
    sn = _sin_over(sigma, s)
    env = np.exp(-mu * s / 4)
    c10 = env * (a * cs + b * sn)
    dc10 = env * (-mu / 4 * (a * cs + b * sn) - a * sigma * sigma * sn + b * cs)
    if wn2 > 0:
        f = -1j * (dc10 + mu / 2 * c10)
        c0 = initial.c0[None, :] + np.outer(f - f0, rabi) / wn2
    else:
        c0 = np.repeat(initial.c0[None, :], len(s), axis=0)
    traj = Trajectory.from_excited(s * HBAR, np.column_stack([c10, c0]), initial)
    return traj[0] if scalar else traj


def asymptotic_state(initial: SingleExcitationState, rabi) -> SingleExcitationState:
    """Long-time limit on resonance: the bright part is gone, the dark part stays."""
    rabi = np.asarray(rabi, complex)
    wn2 = float(np.sum(np.abs(rabi) ** 2))
    if wn2 == 0:
        raise DegenerateCouplingError("collective Rabi frequency is zero")
    f0 = initial.coupling_amplitude(rabi)
    c0 = initial.c0 - rabi * f0 / wn2
    ground = abs(initial.c00) ** 2 + initial.excited_norm - float(np.sum(np.abs(c0) ** 2))
    phase = initial.c00 / abs(initial.c00) if initial.c00 != 0 else 1.0
    return SingleExcitationState(np.sqrt(max(ground, 0.0)) * phase, 0.0, c0)


def bright_dark_decompose(initial: SingleExcitationState, rabi):
    """Split into (bright, dark); the photon and ground amplitudes go to bright."""
    rabi = np.asarray(rabi, complex)
    wn2 = float(np.sum(np.abs(rabi) ** 2))
    if wn2 > 0:
        c0b = rabi * initial.coupling_amplitude(rabi) / wn2
    else:
        c0b = np.zeros_like(initial.c0)
    bright = SingleExcitationState(initial.c00, initial.c10, c0b)
    dark = SingleExcitationState(0.0, 0.0, initial.c0 - c0b)
    return bright, dark


def is_dark(state: SingleExcitationState, rabi, tol: float = 1e-9) -> bool:
    rabi = np.asarray(rabi, complex)
    wn = collective_rabi(rabi)
    f = state.coupling_amplitude(rabi)
    return bool(abs(state.c10) <= tol and abs(f) <= tol * wn)


# ----------------------------------------------------------------------------
# general (detuned, relaxing) case
# ----------------------------------------------------------------------------

def generator(mu: float, rabi, detunings=None, gamma0=None) -> np.ndarray:
    """(N+1)x(N+1) matrix G with d/ds (C10, C~0j) = G (C10, C~0j), s = t/HBAR.

    C~0j = C0j exp(-i D_j t) is the co-rotating qubit amplitude.
    """
    rabi = np.asarray(rabi, complex)
    n = len(rabi)
    det = np.zeros(n) if detunings is None else np.asarray(detunings, float)
    gam = np.zeros(n) if gamma0 is None else np.asarray(gamma0, float)
    if det.shape != (n,) or gam.shape != (n,):
        raise ValueError("detuning / relaxation lists must match the Rabi list")
    G = np.zeros((n + 1, n + 1), complex)
    G[0, 0] = -mu / 2
    G[0, 1:] = 1j * np.conj(rabi)
    G[1:, 0] = 1j * rabi
    G[np.arange(1, n + 1), np.arange(1, n + 1)] = -1j * det - gam
    return G


def rotate_out(times, excited_rot: np.ndarray, detunings) -> np.ndarray:
    """Co-rotating -> interaction-picture qubit amplitudes, in place on a copy."""
    out = np.array(excited_rot, complex)
    if detunings is not None and np.any(detunings):
        s = np.asarray(times, float)[:, None] / HBAR
        out[:, 1:] *= np.exp(1j * np.asarray(detunings, float)[None, :] * s)
    return out


def rotate_in(t0: float, state: SingleExcitationState, detunings) -> np.ndarray:
    v = state.excited_vector.copy()
    if detunings is not None and np.any(detunings):
        v[1:] *= np.exp(-1j * np.asarray(detunings, float) * t0 / HBAR)
    return v


def evolve_detuned_numeric(initial: SingleExcitationState, mu: float, rabi, detunings=None,
                           gamma0=None, t_grid=None, rtol: float = 1e-12,
                           atol: float = 1e-14) -> Trajectory:
    """Adaptive high-order Runge-Kutta integration of the linear system.

    ``gamma0`` are the qubit amplitude relaxation rates in meV (default zero).
    The first grid point is the time at which ``initial`` is given.
    """
    if t_grid is None:
        raise ValueError("t_grid is required")
    t = np.asarray(t_grid, float)
    if t.ndim != 1 or len(t) < 1 or (len(t) > 1 and np.any(np.diff(t) <= 0)):
        raise ValueError("t_grid must be strictly increasing")
    G = generator(mu, rabi, detunings, gamma0)
    if G.shape[0] != initial.n + 1:
        raise ValueError("Rabi list and state size differ")
    y0 = rotate_in(t[0], initial, detunings)
    if len(t) == 1:
        ys = y0[None, :]
    else:
        s = t / HBAR
        sol = solve_ivp(lambda _s, y: G @ y, (s[0], s[-1]), y0, method="DOP853",
                        t_eval=s, rtol=rtol, atol=atol)
        if not sol.success:
            reached = sol.t[-1] * HBAR if len(sol.t) else t[0]
            raise IntegrationError(
                f"integration failed at t={reached:.6g} fs (of {t[-1]:.6g}): {sol.message}; "
                f"max |G|={np.abs(G).max():.3g} meV")
        ys = sol.y.T
    return Trajectory.from_excited(t, rotate_out(t, ys, detunings), initial)
