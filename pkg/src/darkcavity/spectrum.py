"""Emission spectra from the two-time photon correlator.

With no dephasing at zero temperature the noise-averaged correlator reduces to
K(t, tau) = conj(C10(t)) C10(t + tau), and

    S(nu) = (1/pi) Re int_0^inf dtau e^{i nu tau} int_0^inf dt K(t, tau).

Frequencies are energies in meV measured from the cavity mode unless the
result is flagged absolute. Spectra are relative (no detector constant).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .core import HBAR


class SpanError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    nu: np.ndarray  # meV
    S: np.ndarray  # 1/meV^2
    absolute: bool = False  # nu includes the cavity energy

    def __post_init__(self):
        nu = np.asarray(self.nu, float)
        S = np.asarray(self.S, float)
        if nu.shape != S.shape or nu.ndim != 1:
            raise ValueError("nu and S must be 1-D arrays of equal length")
        if len(nu) > 1 and np.any(np.diff(nu) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "S", S)


@dataclass(frozen=True)
class Peak:
    position: float
    height: float
    fwhm: float


def _sigma(omega_r: float, mu: float, n: int) -> complex:
    return np.sqrt(complex(n * abs(omega_r) ** 2 - mu * mu / 16))


def c10_single_excited(t, omega_r: float, mu: float, n: int):
    """C10(t) for equal couplings with one qubit excited initially (t in fs)."""
    s = np.asarray(t, float) / HBAR
    sig = _sigma(omega_r, mu, n)
    x = sig * s
    small = np.abs(x) < 1e-8
    sinc = np.where(small, 1.0 + 0j, np.sin(np.where(small, 1.0, x)) / np.where(small, 1.0, x))
    return 1j * np.conj(omega_r) * np.exp(-mu * s / 4) * s * sinc


def correlator_analytic(t, tau, omega_r: float, mu: float, n: int):
    """K(t, tau) for the one-qubit-excited, equal-coupling, resonant case."""
    if n * abs(omega_r) ** 2 <= mu * mu / 16:
        warnings.warn("overdamped: N |W_R|^2 <= mu^2/16, Sigma is imaginary",
                      RuntimeWarning, stacklevel=2)
    t = np.asarray(t, float)
    tau = np.asarray(tau, float)
    return np.conj(c10_single_excited(t, omega_r, mu, n)) * \
        c10_single_excited(t + tau, omega_r, mu, n)


def spectrum_analytic(nu, omega_r: float, mu: float, n: int, omega: float = 0.0,
                      absolute: bool = False) -> SpectrumResult:
    nu = np.asarray(nu, float)
    x = nu - omega if absolute else nu
    w2 = abs(omega_r) ** 2
    den = (x * x - (n * w2 - mu * mu / 8)) ** 2 + mu * mu / 4 * (n * w2 - mu * mu / 16)
    return SpectrumResult(nu, w2 / (2 * np.pi) / den, absolute)


def _trap_weights(m: int, h: float) -> np.ndarray:
    w = np.full(m, h)
    if m > 0:
        w[0] = w[-1] = h / 2
    return w


def time_correlation(c10, dt: float, n_t: int, n_tau: int) -> np.ndarray:
    """G(tau_k) = int_0^{T} conj(C10(t)) C10(t + tau_k) dt by the trapezoid rule.

    ``dt`` in the integration variable's units; grid indices are uniform.
    """
    c = np.asarray(c10, complex)
    w = _trap_weights(n_t, dt)
    # correlate conjugates its second argument: sum_n c[n+k] conj(w_n c_n)
    return signal.correlate(c[:n_t + n_tau - 1], w * c[:n_t], mode="valid", method="fft")


def spectrum_numeric(times, c10, nu, T_max: float, tau_max: float,
                     omega: float = 0.0, absolute: bool = False) -> SpectrumResult:
    """Trapezoid double integral of conj(C10(t)) C10(t+tau) on a uniform grid.

    ``times`` and the cutoffs are in fs; ``times`` must start at 0 and cover
    T_max + tau_max.
    """
    t = np.asarray(times, float)
    c = np.asarray(c10, complex)
    if t.shape != c.shape or t.ndim != 1 or len(t) < 2:
        raise ValueError("times and C10 must be matching 1-D arrays")
    dt = t[1] - t[0]
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0):
        raise ValueError("spectrum_numeric needs a uniform time grid")
    n_t = int(round(T_max / dt)) + 1
    n_tau = int(round(tau_max / dt)) + 1
    if abs(t[0]) > 1e-12 * dt or n_t + n_tau - 1 > len(t):
        raise SpanError(f"trajectory covers [{t[0]:.6g}, {t[-1]:.6g}] fs; "
                        f"need [0, {T_max + tau_max:.6g}]")
    ds = dt / HBAR
    G = time_correlation(c, ds, n_t, n_tau)
    tau = np.arange(n_tau) * ds
    nu = np.asarray(nu, float)
    x = nu - omega if absolute else nu
    wt = _trap_weights(n_tau, ds)
    S = np.empty(len(x))
    for i0 in range(0, len(x), 256):
        xs = x[i0:i0 + 256]
        S[i0:i0 + 256] = (np.exp(1j * np.outer(xs, tau)) @ (wt * G)).real / np.pi
    return SpectrumResult(nu, S, absolute)


def peak_summary(spec: SpectrumResult, min_rel_height: float = 1e-3) -> list[Peak]:
    """Local maxima with parabolic refinement and interpolated half-height width."""
    nu, S = spec.nu, spec.S
    if len(S) < 3 or not np.any(S > 0):
        return []
    top = S.max()
    idx = np.flatnonzero((S[1:-1] > S[:-2]) & (S[1:-1] >= S[2:])) + 1
    peaks = []
    for i in idx:
        if S[i] < min_rel_height * top:
            continue
        y0, y1, y2 = S[i - 1], S[i], S[i + 1]
        h = nu[i + 1] - nu[i]
        den = y0 - 2 * y1 + y2
        off = 0.5 * (y0 - y2) / den if den != 0 else 0.0
        pos = nu[i] + off * h
        height = y1 - 0.25 * (y0 - y2) * off
        half = height / 2
        left = i
        while left > 0 and S[left] > half:
            left -= 1
        right = i
        while right < len(S) - 1 and S[right] > half:
            right += 1
        if S[left] > half or S[right] > half:
            width = float("nan")
        else:
            xl = np.interp(half, [S[left], S[left + 1]], [nu[left], nu[left + 1]])
            xr = np.interp(half, [S[right], S[right - 1]], [nu[right], nu[right - 1]])
            width = float(xr - xl)
        peaks.append(Peak(float(pos), float(height), width))
    return peaks
