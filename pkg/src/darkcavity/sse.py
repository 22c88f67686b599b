"""Stochastic Schroedinger equation in the single-excitation manifold.

Between noise kicks the excited amplitudes follow the non-Hermitian drift
(decay rates gamma_10 = mu/2, gamma_0j = gamma_j/2 + gamma_el_j). Noise enters
additively:

    dC00 = -i sqrt(D00 dt) xi_0,      D00 = sum_j gamma_j <|C0j|^2> + mu <|C10|^2>
    dC0j = -i sqrt(D0j dt) xi_j,      D0j = 2 gamma_el_j <|C0j|^2>

with xi complex standard normal (variance 1/2 per quadrature) and <.> the
ensemble mean. The ensemble-mean norm is then conserved up to the step
quadrature error. At zero temperature nothing feeds back from C00 into the
excited manifold. The alternative dephasing form D0j = 2 gamma_el is available
through ``SSESpec.dephasing_noise = "constant"``; it does not conserve the norm.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .core import HBAR, QubitEnsemble, RelaxationSpec, SingleExcitationState, Trajectory
from .single import generator, rotate_in, rotate_out

CHUNK = 256
DEPHASING_FORMS = ("amplitude-weighted", "constant")


class StabilityError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class SSESpec:
    mu: float
    relaxation: RelaxationSpec
    dephasing_noise: str = "amplitude-weighted"
    temperature: float = 0.0

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("cavity decay must be >= 0")
        if self.temperature != 0:
            raise ValueError("only zero-temperature reservoirs are supported")
        if self.dephasing_noise not in DEPHASING_FORMS:
            raise ValueError(f"dephasing_noise must be one of {DEPHASING_FORMS}")


def decay_rates(spec: SSESpec) -> tuple[float, float, np.ndarray]:
    """(gamma_00, gamma_10, gamma_0j) in meV."""
    r = spec.relaxation
    return 0.0, spec.mu / 2, r.inelastic / 2 + r.elastic


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circular complex Gaussian with E|xi|^2 = 1."""
    z = rng.standard_normal(shape + (2,) if isinstance(shape, tuple) else (shape, 2))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2)


@dataclass(frozen=True, eq=False)
class NoiseRealization:
    seed: int
    dt: float  # fs
    xi: np.ndarray  # (steps, channels) unit complex normals; channel 0 feeds C00

    def increments(self, D) -> np.ndarray:
        """Scaled kicks sqrt(D dt / HBAR) xi for a per-channel diffusion D (meV)."""
        return np.sqrt(np.asarray(D) * self.dt / HBAR) * self.xi


def noise_realization(seed: int, dt: float, steps: int, channels: int) -> NoiseRealization:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    return NoiseRealization(seed, dt, complex_normal(rng, (steps, channels)))


def _max_rate(spec: SSESpec, rabi, detunings) -> float:
    r = spec.relaxation
    vals = [spec.mu, float(np.max(r.inelastic, initial=0)), float(np.max(r.elastic, initial=0)),
            float(np.sqrt(np.sum(np.abs(rabi) ** 2))),
            float(np.max(np.abs(detunings), initial=0))]
    return max(vals) / HBAR


class _Stepper:
    """Exact drift propagators and the ensemble-mean noise intensities.

    The noise intensities depend on ensemble means |C|^2. These follow from the
    second-moment matrix R = E[x x^dagger] of the excited amplitudes, which obeys
    the closed linear equation dR/ds = A R + R A^dagger + diag(0, D0j(R)) and is
    integrated exactly alongside. With no dephasing R is just the drift-only
    outer product, so the intensities are those of the noiseless run.
    """

    def __init__(self, spec: SSESpec, rabi, detunings, x0: np.ndarray):
        _, _, g0 = decay_rates(spec)
        self.A = generator(spec.mu, rabi, detunings, g0)
        n1 = self.A.shape[0]
        self.n1 = n1
        self.mu = spec.mu
        self.gamma = spec.relaxation.inelastic
        self.gel = spec.relaxation.elastic
        self.constant = spec.dephasing_noise == "constant"
        eye = np.eye(n1)
        L = np.kron(self.A, eye) + np.kron(eye, np.conj(self.A))
        src = np.zeros(n1 * n1, complex)
        jj = np.arange(1, n1) * (n1 + 1)
        if self.constant:
            src[jj] = 2 * self.gel
        else:
            L[jj, jj] += 2 * self.gel
        # affine system for vec(R) with a constant source, as one augmented matrix
        self.L = np.zeros((n1 * n1 + 1, n1 * n1 + 1), complex)
        self.L[:-1, :-1] = L
        self.L[:-1, -1] = src
        self.R = np.concatenate([np.outer(x0, np.conj(x0)).ravel(), [1.0]])
        self._cache: dict[float, tuple] = {}

    def props(self, h: float):
        key = round(h, 15)
        if key not in self._cache:
            s = h / HBAR
            self._cache[key] = (expm(self.A * s).T, expm(self.L * s / 2))
        return self._cache[key]

    def _diag(self, r):
        return r[:-1].reshape(self.n1, self.n1).diagonal().real

    def intensities(self, h: float):
        """Advance R over one step; return D00*ds and D0j*ds integrated by Simpson."""
        _, Lh = self.props(h)
        r0 = self.R
        rm = Lh @ r0
        r1 = Lh @ rm
        self.R = r1
        avg = (self._diag(r0) + 4 * self._diag(rm) + self._diag(r1)) / 6
        s = h / HBAR
        d00 = (self.mu * avg[0] + avg[1:] @ self.gamma) * s
        d0j = 2 * self.gel * s if self.constant else 2 * self.gel * avg[1:] * s
        return max(d00, 0.0), np.clip(d0j, 0.0, None)

    def step(self, x: np.ndarray, c00: np.ndarray, xi: np.ndarray, h: float):
        """Advance a batch (B, N+1) of excited amplitudes and (B,) ground amplitudes."""
        P, _ = self.props(h)
        d00, d0j = self.intensities(h)
        x1 = x @ P
        c00 = c00 - 1j * np.sqrt(d00) * xi[:, 0]
        x1[:, 1:] -= 1j * np.sqrt(d0j)[None, :] * xi[:, 1:]
        return x1, c00


def _substeps(t: np.ndarray, dt: float) -> list[tuple[int, float]]:
    out = []
    for a, b in zip(t[:-1], t[1:]):
        n = max(1, int(np.ceil((b - a) / dt - 1e-9)))
        out.append((n, (b - a) / n))
    return out


def _integrate(initial: SingleExcitationState, spec: SSESpec, rabi, detunings,
               t: np.ndarray, dt: float, rngs: list[np.random.Generator]):
    n = initial.n
    B = len(rngs)
    x0 = rotate_in(t[0], initial, detunings)
    stepper = _Stepper(spec, rabi, detunings, x0)
    plan = _substeps(t, dt)
    total = sum(k for k, _ in plan)
    x = np.repeat(x0[None, :], B, axis=0)
    c00 = np.full(B, initial.c00, complex)
    X = np.empty((len(t), B, n + 1), complex)
    C00 = np.empty((len(t), B), complex)
    X[0], C00[0] = x, c00
    buf = np.empty((CHUNK, B, n + 1), complex)
    used = CHUNK
    done = 0
    for k, (m, h) in enumerate(plan):
        for _ in range(m):
            if used == CHUNK:
                steps = min(CHUNK, total - done)
                for b, rng in enumerate(rngs):
                    buf[:steps, b, :] = complex_normal(rng, (steps, n + 1))
                used = 0
            x, c00 = stepper.step(x, c00, buf[used], h)
            used += 1
            done += 1
        X[k + 1], C00[k + 1] = x, c00
    return X, C00


def _check(spec, ensemble, initial, t, dt):
    if spec.relaxation.n != ensemble.n or initial.n != ensemble.n:
        raise ValueError("relaxation, ensemble and state sizes differ")
    if t.ndim != 1 or len(t) < 1 or (len(t) > 1 and np.any(np.diff(t) <= 0)):
        raise ValueError("t_grid must be strictly increasing")
    rate = _max_rate(spec, ensemble.rabi, ensemble.detunings)
    if dt * rate > 0.1:
        raise StabilityError(f"dt * max rate = {dt * rate:.3g} > 0.1; reduce dt below "
                             f"{0.1 / rate:.4g} fs")


def sse_trajectory(initial: SingleExcitationState, spec: SSESpec, ensemble: QubitEnsemble,
                   t_grid, seed: int, dt: float | None = None) -> Trajectory:
    """One noise realization; the same seed reproduces it bit for bit."""
    t = np.asarray(t_grid, float)
    dt = _default_dt(spec, ensemble) if dt is None else dt
    _check(spec, ensemble, initial, t, dt)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    X, C00 = _integrate(initial, spec, ensemble.rabi, ensemble.detunings, t, dt, [rng])
    ex = rotate_out(t, X[:, 0, :], ensemble.detunings)
    return Trajectory(t, C00[:, 0], ex[:, 0], ex[:, 1:])


def _default_dt(spec, ensemble) -> float:
    return 0.01 / _max_rate(spec, ensemble.rabi, ensemble.detunings) if \
        _max_rate(spec, ensemble.rabi, ensemble.detunings) > 0 else 1.0


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    times: np.ndarray
    c00: np.ndarray  # (K, T)
    c10: np.ndarray  # (K, T)
    c0: np.ndarray  # (K, T, N)
    seed: int

    def __len__(self) -> int:
        return self.c00.shape[0]

    def __getitem__(self, k: int) -> Trajectory:
        return Trajectory(self.times, self.c00[k], self.c10[k], self.c0[k])

    def __iter__(self):
        return (self[k] for k in range(len(self)))


def sample_trajectories(initial: SingleExcitationState, spec: SSESpec, ensemble: QubitEnsemble,
                        t_grid, n_traj: int, seed: int, dt: float | None = None,
                        batch: int = 1024) -> TrajectoryEnsemble:
    """n_traj realizations, each with its own Philox stream spawned from ``seed``."""
    if n_traj < 1:
        raise ValueError("need at least one trajectory")
    t = np.asarray(t_grid, float)
    dt = _default_dt(spec, ensemble) if dt is None else dt
    _check(spec, ensemble, initial, t, dt)
    children = np.random.SeedSequence(seed).spawn(n_traj)
    c00 = np.empty((n_traj, len(t)), complex)
    c10 = np.empty((n_traj, len(t)), complex)
    c0 = np.empty((n_traj, len(t), initial.n), complex)
    for b0 in range(0, n_traj, batch):
        rngs = [np.random.Generator(np.random.Philox(c)) for c in children[b0:b0 + batch]]
        X, C00 = _integrate(initial, spec, ensemble.rabi, ensemble.detunings, t, dt, rngs)
        for j in range(X.shape[1]):
            ex = rotate_out(t, X[:, j, :], ensemble.detunings)
            c10[b0 + j] = ex[:, 0]
            c0[b0 + j] = ex[:, 1:]
            c00[b0 + j] = C00[:, j]
    return TrajectoryEnsemble(t, c00, c10, c0, seed)


def ensemble_average(trajectories, observable) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error of ``observable(trajectory)`` at every time point."""
    trajs = list(trajectories)
    if len(trajs) < 2:
        raise ValueError("need at least two trajectories")
    t0 = trajs[0].times
    for tr in trajs[1:]:
        if tr.times.shape != t0.shape or np.any(tr.times != t0):
            raise GridMismatchError("trajectories are on different time grids")
    vals = np.array([np.asarray(observable(tr)) for tr in trajs])
    mean = vals.mean(axis=0)
    err = vals.std(axis=0, ddof=1) / np.sqrt(len(trajs))
    return mean, err
