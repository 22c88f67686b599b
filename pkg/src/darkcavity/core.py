"""Shared domain types, unit conventions and subset combinatorics.

Energies are in meV and times in fs throughout. A rate quoted as an energy E
corresponds to E / HBAR per fs.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb
import numpy as np

HBAR = 658.2119569  # meV * fs


def to_rate(energy):
    """Energy in meV -> angular rate in 1/fs."""
    return np.asarray(energy) / HBAR if np.ndim(energy) else energy / HBAR


def to_energy(rate):
    """Angular rate in 1/fs -> energy in meV."""
    return np.asarray(rate) * HBAR if np.ndim(rate) else rate * HBAR


def lifetime_to_energy(tau_fs: float) -> float:
    """Decay time 1/mu in fs -> mu expressed in meV."""
    return HBAR / tau_fs


def energy_to_lifetime(energy: float) -> float:
    return HBAR / energy


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class QubitEnsemble:
    """N two-level emitters: detunings and complex Rabi couplings (meV)."""

    detunings: np.ndarray
    rabi: np.ndarray
    positions: np.ndarray | None = None

    def __post_init__(self):
        rabi = _frozen(np.atleast_1d(self.rabi), complex)
        det = _frozen(np.atleast_1d(self.detunings), float)
        if rabi.ndim != 1 or len(rabi) < 1:
            raise ValueError("need at least one qubit")
        if det.shape != rabi.shape:
            raise ValueError(f"{len(det)} detunings for {len(rabi)} Rabi values")
        if not np.all(np.isfinite(rabi)) or not np.all(np.isfinite(det)):
            raise ValueError("Rabi frequencies and detunings must be finite")
        if not np.any(np.abs(rabi) > 0):
            raise ValueError("at least one qubit must couple to the cavity")
        object.__setattr__(self, "rabi", rabi)
        object.__setattr__(self, "detunings", det)
        if self.positions is not None:
            pos = _frozen(np.atleast_1d(self.positions), float)
            if pos.shape != rabi.shape:
                raise ValueError("positions must match the number of qubits")
            object.__setattr__(self, "positions", pos)

    @classmethod
    def resonant(cls, rabi, positions=None) -> "QubitEnsemble":
        rabi = np.atleast_1d(rabi)
        return cls(np.zeros(len(rabi)), rabi, positions)

    @classmethod
    def identical(cls, n: int, rabi: complex, detuning: float = 0.0) -> "QubitEnsemble":
        return cls(np.full(n, detuning), np.full(n, rabi, dtype=complex))

    @property
    def n(self) -> int:
        return len(self.rabi)

    @property
    def collective_rabi(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.rabi) ** 2)))

    @property
    def is_resonant(self) -> bool:
        return not np.any(self.detunings)


@dataclass(frozen=True)
class CavitySpec:
    decay: float  # mu, meV
    frequency: float = 1.0  # omega, meV; bookkeeping only

    def __post_init__(self):
        if not self.decay >= 0:
            raise ValueError(f"cavity decay must be >= 0, got {self.decay}")
        if not self.frequency > 0:
            raise ValueError("cavity frequency must be positive")

    @classmethod
    def from_lifetime(cls, tau_fs: float, frequency: float = 1.0) -> "CavitySpec":
        return cls(lifetime_to_energy(tau_fs), frequency)


@dataclass(frozen=True, eq=False)
class RelaxationSpec:
    """Per-qubit inelastic (gamma_j) and elastic (pure dephasing) rates in meV."""

    inelastic: np.ndarray
    elastic: np.ndarray

    def __post_init__(self):
        g = _frozen(np.atleast_1d(self.inelastic), float)
        ge = _frozen(np.atleast_1d(self.elastic), float)
        if g.shape != ge.shape:
            raise ValueError("inelastic and elastic rate arrays differ in length")
        if np.any(g < 0) or np.any(ge < 0):
            raise ValueError("relaxation rates must be nonnegative")
        object.__setattr__(self, "inelastic", g)
        object.__setattr__(self, "elastic", ge)

    @classmethod
    def none(cls, n: int) -> "RelaxationSpec":
        return cls(np.zeros(n), np.zeros(n))

    @property
    def n(self) -> int:
        return len(self.inelastic)

    @property
    def t1(self) -> np.ndarray:
        """Population lifetimes in fs."""
        with np.errstate(divide="ignore"):
            return HBAR / self.inelastic

    @property
    def t2(self) -> np.ndarray:
        """Coherence lifetimes in fs."""
        with np.errstate(divide="ignore"):
            return HBAR / (self.inelastic / 2 + self.elastic)


@dataclass(frozen=True, eq=False)
class SingleExcitationState:
    """Amplitudes of ground, one-photon and one-excited-qubit states."""

    c00: complex
    c10: complex
    c0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c00", complex(self.c00))
        object.__setattr__(self, "c10", complex(self.c10))
        object.__setattr__(self, "c0", _frozen(np.atleast_1d(self.c0), complex))

    @classmethod
    def qubit_excited(cls, n: int, j: int = 0) -> "SingleExcitationState":
        c0 = np.zeros(n, complex)
        c0[j] = 1.0
        return cls(0.0, 0.0, c0)

    @classmethod
    def photon(cls, n: int) -> "SingleExcitationState":
        return cls(0.0, 1.0, np.zeros(n, complex))

    @classmethod
    def bright(cls, rabi) -> "SingleExcitationState":
        """Normalized qubit state with C_0j proportional to Omega_Rj."""
        rabi = np.asarray(rabi, complex)
        return cls(0.0, 0.0, rabi / np.linalg.norm(rabi))

    @classmethod
    def from_vector(cls, vec, c00: complex = 0.0) -> "SingleExcitationState":
        vec = np.asarray(vec, complex)
        return cls(c00, vec[0], vec[1:])

    @property
    def n(self) -> int:
        return len(self.c0)

    @property
    def excited_vector(self) -> np.ndarray:
        """(C_10, C_01, ..., C_0N)."""
        return np.concatenate([[self.c10], self.c0])

    @property
    def qubit_population(self) -> float:
        return float(np.sum(np.abs(self.c0) ** 2))

    @property
    def excited_norm(self) -> float:
        return abs(self.c10) ** 2 + self.qubit_population

    @property
    def norm(self) -> float:
        return abs(self.c00) ** 2 + self.excited_norm

    def coupling_amplitude(self, rabi) -> complex:
        """F = sum_j conj(Omega_Rj) C_0j."""
        return complex(np.vdot(np.asarray(rabi, complex), self.c0))

    def __add__(self, other: "SingleExcitationState") -> "SingleExcitationState":
        return SingleExcitationState(self.c00 + other.c00, self.c10 + other.c10,
                                     self.c0 + other.c0)


# ----------------------------------------------------------------------------
# subsets of qubits, ranked in colexicographic order
# ----------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class SubsetIndex:
    n: int
    p: int
    rank: int

    def __post_init__(self):
        if not 0 <= self.p <= self.n:
            raise ValueError(f"subset size {self.p} outside [0, {self.n}]")
        if not 0 <= self.rank < comb(self.n, self.p):
            raise ValueError(f"rank {self.rank} outside [0, C({self.n},{self.p}))")

    @property
    def members(self) -> tuple[int, ...]:
        return subset_unrank(self.rank, self.n, self.p)


def subset_rank(members, n: int) -> SubsetIndex:
    """Colex rank of a subset of {1..n}.

    The rank of {c_1 < ... < c_p} is sum_i C(c_i - 1, i).
    """
    s = sorted(set(int(m) for m in members))
    if len(s) != len(list(members)):
        raise ValueError("duplicate members")
    if s and (s[0] < 1 or s[-1] > n):
        raise ValueError(f"members must lie in 1..{n}: {s}")
    r = sum(comb(c - 1, i + 1) for i, c in enumerate(s))
    return SubsetIndex(n, len(s), r)


def subset_unrank(rank: int, n: int, p: int) -> tuple[int, ...]:
    if not 0 <= rank < comb(n, p):
        raise ValueError(f"rank {rank} outside [0, C({n},{p}))")
    out = [0] * p
    m = n
    k = p
    while k > 0:
        m -= 1
        c = comb(m, k)
        if rank >= c:
            rank -= c
            out[k - 1] = m + 1
            k -= 1
    return tuple(out)


def neighbors_up(s: SubsetIndex) -> list[tuple[SubsetIndex, int]]:
    """Supersets obtained by exciting one more qubit, with the added qubit."""
    members = s.members
    have = set(members)
    return [(subset_rank(members + (j,), s.n), j)
            for j in range(1, s.n + 1) if j not in have]


def neighbors_down(s: SubsetIndex) -> list[tuple[SubsetIndex, int]]:
    """Subsets obtained by de-exciting one qubit, with the removed qubit."""
    members = s.members
    return [(subset_rank([m for m in members if m != j], s.n), j) for j in members]


def all_subsets(n: int, p: int) -> list[SubsetIndex]:
    return [SubsetIndex(n, p, r) for r in range(comb(n, p))]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Amplitudes on a time grid: times (fs), c00 (T,), c10 (T,), c0 (T, N)."""

    times: np.ndarray
    c00: np.ndarray
    c10: np.ndarray
    c0: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, float)
        if t.ndim != 1:
            raise ValueError("times must be one-dimensional")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        c0 = np.asarray(self.c0, complex)
        if c0.ndim != 2 or c0.shape[0] != len(t):
            raise ValueError("c0 must have shape (len(times), N)")
        for name, v in (("times", t), ("c00", np.asarray(self.c00, complex)),
                        ("c10", np.asarray(self.c10, complex)), ("c0", c0)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    def __len__(self) -> int:
        return len(self.times)

    def __getitem__(self, k: int) -> SingleExcitationState:
        return SingleExcitationState(self.c00[k], self.c10[k], self.c0[k])

    @property
    def states(self) -> list[SingleExcitationState]:
        return [self[k] for k in range(len(self))]

    @property
    def n(self) -> int:
        return self.c0.shape[1]

    @property
    def photon_population(self) -> np.ndarray:
        return np.abs(self.c10) ** 2

    @property
    def qubit_populations(self) -> np.ndarray:
        return np.abs(self.c0) ** 2

    @property
    def qubit_population(self) -> np.ndarray:
        return self.qubit_populations.sum(axis=1)

    @property
    def excited_norm(self) -> np.ndarray:
        return self.photon_population + self.qubit_population

    @property
    def norm(self) -> np.ndarray:
        return np.abs(self.c00) ** 2 + self.excited_norm

    def coupling_amplitude(self, rabi) -> np.ndarray:
        """F(t) = sum_j conj(Omega_Rj) C_0j(t)."""
        return self.c0 @ np.conj(np.asarray(rabi, complex))

    @classmethod
    def from_excited(cls, times, excited: np.ndarray,
                     initial: SingleExcitationState) -> "Trajectory":
        """Build from (T, N+1) excited amplitudes, restoring C_00 by norm balance.

        The ground amplitude keeps the phase of C_00(0); its modulus absorbs the
        excited-manifold loss.
        """
        excited = np.asarray(excited, complex)
        lost = initial.excited_norm - np.sum(np.abs(excited) ** 2, axis=1)
        mod = np.sqrt(np.clip(abs(initial.c00) ** 2 + lost, 0.0, None))
        phase = initial.c00 / abs(initial.c00) if initial.c00 != 0 else 1.0
        return cls(times, mod * phase, excited[:, 0], excited[:, 1:])
