"""Ensembles with spread transition frequencies.

The finite-N problem is a constant (N+1)x(N+1) linear system, so its Laplace
poles are exactly the generator eigenvalues and the propagator is an eigen
expansion. The continuum formulas below describe the two limits of a dense
detuning distribution: broad (golden-rule decay of the photon) and narrow
(slightly shifted, slightly damped collective Rabi oscillation).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, stats

from .core import HBAR, QubitEnsemble, SingleExcitationState, Trajectory
from .single import evolve_detuned_numeric, generator, rotate_in, rotate_out


class PoleCollisionError(ValueError):
    pass


class EigenbasisWarning(RuntimeWarning):
    pass


# ----------------------------------------------------------------------------
# finite-N normal modes
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NormalModeSet:
    """Poles p_k (meV; divide by HBAR for 1/fs) and right eigenvectors."""

    roots: np.ndarray
    vectors: np.ndarray
    weights: np.ndarray | None = None  # expansion of an initial state, if given

    @property
    def rates_per_fs(self) -> np.ndarray:
        return self.roots / HBAR

    @property
    def condition(self) -> float:
        return float(np.linalg.cond(self.vectors))

    def slowest_decay(self, exclude_below: float = 0.0) -> complex:
        """Root with the least negative real part among those with |Re p| > exclude_below."""
        re = -self.roots.real
        mask = re > exclude_below
        if not np.any(mask):
            raise ValueError("no decaying roots above the threshold")
        k = np.flatnonzero(mask)[np.argmin(re[mask])]
        return complex(self.roots[k])


def normal_modes(mu: float, rabi, detunings, gamma0=None,
                 initial: SingleExcitationState | None = None) -> NormalModeSet:
    G = generator(mu, rabi, detunings, gamma0)
    lam, V = np.linalg.eig(G)
    order = np.lexsort((lam.imag, lam.real))
    lam, V = lam[order], V[:, order]
    w = None
    if initial is not None:
        w = np.linalg.solve(V, rotate_in(0.0, initial, detunings))
    return NormalModeSet(lam, V, w)


def laplace_denominator(p, mu: float, rabi, detunings):
    """p + mu/2 + sum_j |W_j|^2 / (i D_j + p); p in meV."""
    p = np.asarray(p, complex)
    w2 = np.abs(np.asarray(rabi, complex)) ** 2
    d = 1j * np.asarray(detunings, float)
    den = d[None, :] + p.reshape(-1)[:, None]
    if np.any(den == 0):
        raise PoleCollisionError("p coincides with -i*Delta_j")
    out = p.reshape(-1) + mu / 2 + (w2[None, :] / den).sum(axis=1)
    return out.reshape(p.shape) if p.ndim else complex(out[0])


def denominator_scale(p, mu: float, rabi, detunings) -> float:
    """Magnitude of the largest term in laplace_denominator, for relative residuals."""
    w2 = np.abs(np.asarray(rabi, complex)) ** 2
    d = 1j * np.asarray(detunings, float)
    return float(max(abs(p), mu / 2, np.max(w2 / np.abs(d + p))))


def eigenmode_evolution(initial: SingleExcitationState, mu: float, rabi, detunings,
                        t_grid, gamma0=None, cond_max: float = 1e12,
                        degeneracy_tol: float = 1e-10) -> Trajectory:
    """Propagate by eigen expansion; falls back to the ODE integrator when the
    eigenbasis is ill conditioned or the spectrum is nearly degenerate."""
    t = np.asarray(t_grid, float)
    modes = normal_modes(mu, rabi, detunings, gamma0)
    lam, V = modes.roots, modes.vectors
    scale = max(np.abs(lam).max(), 1e-300)
    gaps = np.abs(lam[:, None] - lam[None, :])
    np.fill_diagonal(gaps, np.inf)
    cond = modes.condition
    if cond > cond_max or gaps.min() < degeneracy_tol * scale:
        warnings.warn(f"eigenbasis unsuitable (cond={cond:.3g}, min gap={gaps.min():.3g}); "
                      "using ODE integration", EigenbasisWarning, stacklevel=2)
        return evolve_detuned_numeric(initial, mu, rabi, detunings, gamma0, t)
    w = np.linalg.solve(V, rotate_in(t[0], initial, detunings))
    s = (t - t[0]) / HBAR
    ys = (np.exp(np.outer(s, lam)) * w[None, :]) @ V.T
    return Trajectory.from_excited(t, rotate_out(t, ys, detunings), initial)


# ----------------------------------------------------------------------------
# continuum limit
# ----------------------------------------------------------------------------

def _one(x):
    return np.ones_like(np.asarray(x, float))


@dataclass(frozen=True, eq=False)
class SpectralDensity:
    """Detuning distribution f (normalized to 2*delta_m) and coupling shape rho.

    D(x) = |rho(x)|^2 f(x). ``support`` bounds the integration range; ``edges``
    lists interior points where f is not smooth.
    """

    delta_m: float
    shape: Callable
    coupling: Callable = _one
    support: float = 0.0
    edges: tuple = ()
    name: str = "custom"

    def __post_init__(self):
        if not self.delta_m > 0:
            raise ValueError("delta_m must be positive")
        if self.support <= 0:
            object.__setattr__(self, "support", 10.0 * self.delta_m)

    @classmethod
    def gaussian(cls, delta_m: float) -> "SpectralDensity":
        return cls(delta_m, lambda x: 2 / np.sqrt(np.pi) * np.exp(-(np.asarray(x) / delta_m) ** 2),
                   support=12.0 * delta_m, name="gaussian")

    @classmethod
    def flat(cls, delta_m: float) -> "SpectralDensity":
        return cls(delta_m, lambda x: (np.abs(np.asarray(x, float)) <= delta_m).astype(float),
                   support=delta_m, edges=(-delta_m, delta_m), name="flat")

    def D(self, x):
        x = np.asarray(x, float)
        return np.abs(self.coupling(x)) ** 2 * self.shape(x)

    def moment(self, k: int) -> float:
        L = self.support
        pts = [e for e in self.edges if -L < e < L] or None
        val, _ = integrate.quad(lambda x: x ** k * self.D(x), -L, L, points=pts,
                                limit=400, epsabs=1e-13 * self.delta_m ** (k + 1),
                                epsrel=1e-12)
        return float(val)

    def normalization(self) -> float:
        return self.moment(0)

    def principal_value(self, spacing: float | None = None) -> float:
        """PV integral of D(x)/x on a grid symmetric about 0 (odd parts cancel pairwise)."""
        h = self.delta_m / 2000 if spacing is None else spacing
        k = np.arange(1, int(np.ceil(self.support / h)) + 1)
        x = k * h
        return float(h * np.sum((self.D(x) - self.D(-x)) / x))

    def sample(self, n: int) -> np.ndarray:
        """n deterministic detunings at the midpoint quantiles of f."""
        u = (np.arange(n) + 0.5) / n
        if self.name == "gaussian":
            return stats.norm.ppf(u) * self.delta_m / np.sqrt(2)
        if self.name == "flat":
            return -self.delta_m + 2 * self.delta_m * u
        x = np.linspace(-self.support, self.support, 200001)
        cdf = integrate.cumulative_trapezoid(self.shape(x), x, initial=0.0)
        return np.interp(u, cdf / cdf[-1], x)


@dataclass(frozen=True)
class GoldenRulePole:
    pole: complex  # meV
    regime_ratio: float  # W_N^2 / (2 delta_m^2)
    regime_ok: bool

    @property
    def decay_rate(self) -> float:
        """Amplitude decay rate of C10 in meV."""
        return -self.pole.real


def golden_rule_pole(mu: float, omega_n: float, density: SpectralDensity,
                     regime_limit: float = 0.1) -> GoldenRulePole:
    dm = density.delta_m
    ratio = omega_n ** 2 / (2 * dm ** 2)
    if ratio > regime_limit:
        warnings.warn(f"strong-broadening regime violated: W_N^2/(2 D_m^2) = {ratio:.3g}",
                      RuntimeWarning, stacklevel=2)
    d0 = float(density.D(0.0))
    pv = density.principal_value()
    p0 = -mu / 2 - np.pi * omega_n ** 2 / (2 * dm) * d0 + 1j * omega_n ** 2 / (2 * dm) * pv
    return GoldenRulePole(complex(p0), ratio, ratio <= regime_limit)


@dataclass(frozen=True)
class WeakBroadening:
    """Leading corrections for a distribution much narrower than W_N.

    ``d_omega_s``, ``d_omega_as`` and ``kappa_plus/minus`` are the moment
    integrals M2/(4 D_m W_N), -M1/(2 D_m) and mu/4 + pi W_N^2 D(+-W_N)/(4 D_m).
    Expanding the pole condition for |p| >> D_m gives poles at

        p = +-i (W_N + d_omega_s) + i d_omega_as / 2 - kappa

    i.e. the collective frequency is pushed up, away from the qubit band. The
    pole near +i W_N resonates with qubits at detuning -W_N, hence kappa_minus.
    """

    omega_n: float
    d_omega_s: float
    d_omega_as: float
    kappa_plus: float
    kappa_minus: float
    regime_ratio: float
    regime_ok: bool

    @property
    def kappa(self) -> float:
        return 0.5 * (self.kappa_plus + self.kappa_minus)

    @property
    def rabi_frequency(self) -> float:
        return self.omega_n + self.d_omega_s

    def poles(self) -> tuple[complex, complex]:
        w, a = self.rabi_frequency, self.d_omega_as / 2
        return (complex(-self.kappa_minus, w + a), complex(-self.kappa_plus, -w + a))


def weak_broadening_params(mu: float, omega_n: float, density: SpectralDensity,
                           regime_limit: float = 10.0) -> WeakBroadening:
    dm = density.delta_m
    ratio = omega_n ** 2 / (2 * dm ** 2)
    if ratio < regime_limit:
        warnings.warn(f"weak-broadening regime not reached: W_N^2/(2 D_m^2) = {ratio:.3g}",
                      RuntimeWarning, stacklevel=2)
    s = density.moment(2) / (4 * dm * omega_n)
    a = -density.moment(1) / (2 * dm)
    kp = mu / 4 + np.pi * omega_n ** 2 / (4 * dm) * float(density.D(omega_n))
    km = mu / 4 + np.pi * omega_n ** 2 / (4 * dm) * float(density.D(-omega_n))
    return WeakBroadening(float(omega_n), float(s), float(a), float(kp), float(km),
                          ratio, ratio >= regime_limit)


def continuous_envelope(c10_0: complex, f0: complex, params: WeakBroadening, t,
                        rabi=None, detunings=None, c0_0=None):
    """Damped collective oscillation for a narrow symmetric distribution.

    C10(t) = [C10(0) cos(w s) + i F(0)/W_N sin(w s)] exp(-kappa s), s = t/HBAR,
    w = params.rabi_frequency. When per-qubit data are given, also returns C0j(t)
    from integrating the qubit equations against this C10.
    """
    s = np.asarray(t, float) / HBAR
    omega_n = params.omega_n
    w = params.rabi_frequency
    k = params.kappa
    c10 = (c10_0 * np.cos(w * s) + 1j * f0 / omega_n * np.sin(w * s)) * np.exp(-k * s)
    if rabi is None:
        return c10
    rabi = np.asarray(rabi, complex)
    det = np.zeros(len(rabi)) if detunings is None else np.asarray(detunings, float)
    c0_0 = np.zeros(len(rabi), complex) if c0_0 is None else np.asarray(c0_0, complex)
    a = (c10_0 + f0 / omega_n) / 2
    b = (c10_0 - f0 / omega_n) / 2
    sc = np.atleast_1d(s)[:, None]
    out = np.zeros((sc.shape[0], len(rabi)), complex)
    for amp, sign in ((a, 1), (b, -1)):
        lam = 1j * det[None, :] + sign * 1j * w - k
        out += amp * np.expm1(lam * sc) / lam
    c0 = c0_0[None, :] + 1j * rabi[None, :] * out
    return c10, (c0 if np.ndim(t) else c0[0])


# ----------------------------------------------------------------------------
# random ensembles and band systems
# ----------------------------------------------------------------------------

def uniform_random_detunings(n: int, delta_m: float, seed: int) -> np.ndarray:
    """n detunings drawn uniformly from [-delta_m, delta_m]."""
    return np.random.default_rng(seed).uniform(-delta_m, delta_m, n)


@dataclass(frozen=True, eq=False)
class BandSystem:
    """Conduction levels W_j > 0, valence levels -W_a (W_a > 0), dipole couplings (meV)."""

    conduction: np.ndarray
    valence: np.ndarray
    dipole: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.conduction, float))
        v = np.atleast_1d(np.asarray(self.valence, float))
        d = np.atleast_2d(np.asarray(self.dipole, complex))
        if d.shape != (len(c), len(v)):
            raise ValueError(f"dipole matrix shape {d.shape} != ({len(c)}, {len(v)})")
        object.__setattr__(self, "conduction", c)
        object.__setattr__(self, "valence", v)
        object.__setattr__(self, "dipole", d)

    @property
    def transition_energies(self) -> np.ndarray:
        return self.conduction[:, None] + self.valence[None, :]


def flatten_band_transitions(band: BandSystem, cavity_energy: float) -> QubitEnsemble:
    """One effective two-level emitter per allowed interband pair (j, a)."""
    j, a = np.nonzero(band.dipole)
    if len(j) == 0:
        raise ValueError("band system has no allowed transitions")
    det = band.transition_energies[j, a] - cavity_energy
    return QubitEnsemble(det, band.dipole[j, a])
