"""Fixed-M excitation blocks for identical resonant qubits.

A block holds all states with n photons and an excited subset S of p qubits,
n + p = M. With equal couplings W and zero detuning the amplitudes obey

    dC_{n,S}/dt = -(n mu/2) C_{n,S}
                  + i [ W sqrt(n+1) sum_{j in S} C_{n+1, S-j}
                      + conj(W) sqrt(n) sum_{j not in S} C_{n-1, S+j} ]

(time in fs through s = t/HBAR). Noise terms are dropped: in the highest block
they have zero correlators at zero temperature.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .core import HBAR, SubsetIndex, subset_rank

MAX_LAYER = 100_000


class BasisError(ValueError):
    pass


def _binom_table(n: int) -> np.ndarray:
    B = np.zeros((n + 1, n + 2), dtype=np.int64)
    for m in range(n + 1):
        for k in range(min(m, n + 1) + 1):
            B[m, k] = comb(m, k)
    return B


def _layer_members(n: int, p: int) -> np.ndarray:
    """All p-subsets of 1..n as rows, ordered by colex rank."""
    if p == 0:
        return np.zeros((1, 0), dtype=np.int64)
    rows = np.array(list(combinations(range(1, n + 1), p)), dtype=np.int64)
    B = _binom_table(n)
    ranks = B[rows - 1, np.arange(1, p + 1)[None, :]].sum(axis=1)
    out = np.empty_like(rows)
    out[ranks] = rows
    return out


@dataclass(frozen=True, eq=False)
class MultiphotonBlock:
    """Basis of the n + p = M block, layers ordered p = 0, 1, ..., min(M, N)."""

    N: int
    M: int
    amplitudes: np.ndarray | None = None
    offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.N < 1 or self.M < 0:
            raise BasisError("need N >= 1 and M >= 0")
        pmax = min(self.M, self.N)
        sizes = [comb(self.N, p) for p in range(pmax + 1)]
        if max(sizes) > MAX_LAYER:
            raise BasisError(f"layer size {max(sizes)} exceeds cap {MAX_LAYER}")
        object.__setattr__(self, "offsets", np.concatenate([[0], np.cumsum(sizes)]))
        if self.amplitudes is None:
            object.__setattr__(self, "amplitudes", np.zeros(self.dim, complex))
        else:
            a = np.asarray(self.amplitudes, complex)
            if a.shape != (self.dim,):
                raise BasisError(f"amplitude vector has shape {a.shape}, basis has {self.dim}")
            object.__setattr__(self, "amplitudes", a)

    @property
    def pmax(self) -> int:
        return min(self.M, self.N)

    @property
    def dim(self) -> int:
        return int(self.offsets[-1])

    @property
    def basis(self) -> list[tuple[int, SubsetIndex]]:
        return [(self.M - p, SubsetIndex(self.N, p, r))
                for p in range(self.pmax + 1) for r in range(comb(self.N, p))]

    def layer(self, p: int) -> slice:
        return slice(int(self.offsets[p]), int(self.offsets[p + 1]))

    def index(self, members) -> int:
        s = subset_rank(members, self.N)
        if s.p > self.pmax:
            raise BasisError(f"subset of size {s.p} not in block M={self.M}")
        return int(self.offsets[s.p]) + s.rank

    def photons(self) -> np.ndarray:
        """Photon number of every basis state."""
        return np.concatenate([np.full(comb(self.N, p), self.M - p)
                               for p in range(self.pmax + 1)])

    def with_amplitudes(self, amps) -> "MultiphotonBlock":
        return MultiphotonBlock(self.N, self.M, amps)

    def from_subsets(self, entries: dict) -> "MultiphotonBlock":
        """Amplitudes given as {members: amplitude}; normalized."""
        a = np.zeros(self.dim, complex)
        for members, amp in entries.items():
            a[self.index(members)] += amp
        nrm = np.linalg.norm(a)
        if nrm == 0:
            raise BasisError("initial amplitudes are all zero")
        return self.with_amplitudes(a / nrm)


def build_block(N: int, M: int) -> MultiphotonBlock:
    return MultiphotonBlock(N, M)


def _down_links(N: int, p: int):
    """For every p-subset (by rank) and member position, rank of the subset minus it."""
    rows = _layer_members(N, p)
    B = _binom_table(N)
    k = np.arange(p)[None, :]
    t_keep = B[rows - 1, k + 1]  # member stays at position k
    t_shift = B[rows - 1, k]  # member moves down to position k-1
    pre = np.cumsum(t_keep, axis=1) - t_keep
    suf = np.cumsum(t_shift[:, ::-1], axis=1)[:, ::-1] - t_shift
    return pre + suf  # shape (C(N,p), p)


def block_generator(block: MultiphotonBlock, omega_r: complex, mu: float) -> sp.csr_matrix:
    """Sparse generator in meV: d/ds amplitudes = G amplitudes."""
    N, M = block.N, block.M
    rows, cols, vals = [], [], []
    for p in range(1, block.pmax + 1):
        down = _down_links(N, p)
        hi = block.offsets[p] + np.repeat(np.arange(down.shape[0]), p)
        lo = block.offsets[p - 1] + down.ravel()
        g = np.sqrt(M - p + 1)
        rows += [hi, lo]
        cols += [lo, hi]
        vals += [np.full(len(hi), 1j * omega_r * g), np.full(len(hi), 1j * np.conj(omega_r) * g)]
    diag = -block.photons() * mu / 2
    rows.append(np.arange(block.dim))
    cols.append(np.arange(block.dim))
    vals.append(diag.astype(complex))
    G = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(block.dim, block.dim))
    return G.tocsr()


def evolve_block(block: MultiphotonBlock, omega_r: complex, mu: float, t_grid,
                 initial=None) -> np.ndarray:
    """Amplitude vectors on ``t_grid`` (fs, starting at the initial time)."""
    v = block.amplitudes if initial is None else np.asarray(initial, complex)
    if v.shape != (block.dim,):
        raise BasisError("initial vector does not match the block basis")
    G = block_generator(block, omega_r, mu)
    t = np.asarray(t_grid, float)
    out = np.empty((len(t), block.dim), complex)
    out[0] = v
    for k in range(1, len(t)):
        out[k] = expm_multiply(G * ((t[k] - t[k - 1]) / HBAR), out[k - 1])
    return out


def layer_populations(block: MultiphotonBlock, amps) -> np.ndarray:
    """Probability in each qubit layer p = 0..pmax; works on (dim,) or (T, dim)."""
    a = np.abs(np.asarray(amps)) ** 2
    return np.stack([a[..., block.layer(p)].sum(axis=-1) for p in range(block.pmax + 1)],
                    axis=-1)


def qubit_layer_population(block: MultiphotonBlock, amps) -> np.ndarray:
    """Probability that no photon is present (all M excitations in qubits)."""
    return layer_populations(block, amps)[..., block.M] if block.M <= block.N else \
        np.zeros(np.shape(amps)[:-1])


def subset_sums(block: MultiphotonBlock, amps) -> np.ndarray:
    """F_n = sum over p = M - n subsets of C_{n,S}, n = 0..M (zero if p > N)."""
    a = np.asarray(amps, complex)
    out = np.zeros(a.shape[:-1] + (block.M + 1,), complex)
    for p in range(block.pmax + 1):
        out[..., block.M - p] = a[..., block.layer(p)].sum(axis=-1)
    return out


# ----------------------------------------------------------------------------
# permutation-symmetric reduction
# ----------------------------------------------------------------------------

def reduced_generator(N: int, M: int, omega_r: complex, mu: float) -> np.ndarray:
    A = np.zeros((M + 1, M + 1), complex)
    for n in range(M + 1):
        A[n, n] = -n * mu / 2
        if n < M:
            A[n, n + 1] = 1j * omega_r * np.sqrt(n + 1) * (N - M + n + 1)
        if n > 0:
            A[n, n - 1] = 1j * np.conj(omega_r) * np.sqrt(n) * (M - n + 1)
    return A


def reduced_Fn_evolve(F0, omega_r: complex, mu: float, N: int, M: int, t_grid) -> np.ndarray:
    """Subset sums F_n(t), n = 0..M, on ``t_grid`` (fs)."""
    F0 = np.asarray(F0, complex)
    if F0.shape != (M + 1,):
        raise ValueError(f"F0 must have length M+1 = {M + 1}")
    A = reduced_generator(N, M, omega_r, mu)
    t = np.asarray(t_grid, float)
    return np.array([sla.expm(A * (tk - t[0]) / HBAR) @ F0 for tk in t])


def reduced_eigenvalues(N: int, M: int, omega_r: complex, mu: float) -> np.ndarray:
    """Eigenvalues (meV) of the subset-sum dynamics; these are true block modes."""
    ev = np.linalg.eigvals(reduced_generator(N, M, omega_r, mu))
    return ev[np.lexsort((ev.imag, ev.real))]


def m2_cubic(N: int, omega_r: complex, mu: float) -> np.ndarray:
    """Coefficients of G(G + mu/2)(G + mu) + 2N|W|^2 G + 2(N-1)|W|^2 mu."""
    w2 = abs(omega_r) ** 2
    return np.array([1.0, 1.5 * mu, mu * mu / 2 + 2 * N * w2, 2 * (N - 1) * w2 * mu])


def block_eigenvalues_M2(N: int, omega_r: complex, mu: float) -> np.ndarray:
    """Roots of the two-excitation cubic G(G+mu/2)(G+mu) + 2N|W|^2 G + 2(N-1)|W|^2 mu.

    This is the commonly used form of the M = 2 cubic. Its lossless limit
    gives +-i sqrt(2N)|W| whereas the exact block (see ``reduced_eigenvalues``)
    has +-i sqrt(4N-2)|W|, i.e. the exact characteristic polynomial is
    G(G+mu/2)(G+mu) + (4N-2)|W|^2 G + 2(N-1)|W|^2 mu.
    """
    c = m2_cubic(N, omega_r, mu)
    r = np.roots(c).astype(complex)
    dc = np.polyder(c)
    for _ in range(3):  # Newton polish
        d = np.polyval(dc, r)
        ok = d != 0
        r[ok] = r[ok] - np.polyval(c, r[ok]) / d[ok]
    return r[np.lexsort((r.imag, r.real))]


def cubic_residual(N: int, omega_r: complex, mu: float, roots) -> np.ndarray:
    """|P(G)| / (sum of |terms|) at each root."""
    c = m2_cubic(N, omega_r, mu)
    r = np.asarray(roots, complex)
    terms = np.abs(c[None, :] * r[:, None] ** np.arange(3, -1, -1)[None, :]).sum(axis=1)
    res = np.abs(np.polyval(c, r))
    return np.divide(res, terms, out=np.where(res == 0, 0.0, np.inf), where=terms > 0)


# ----------------------------------------------------------------------------
# dark states of the all-qubit layer
# ----------------------------------------------------------------------------

def inclusion_matrix(N: int, M: int) -> np.ndarray:
    """Row per (M-1)-subset T, column per M-subset S, entry 1 if T is inside S."""
    W = np.zeros((comb(N, M - 1), comb(N, M)))
    if M == 0:
        return W
    down = _down_links(N, M)
    W[down.ravel(), np.repeat(np.arange(down.shape[0]), M)] = 1.0
    return W


@dataclass(frozen=True, eq=False)
class DarkSubspace:
    N: int
    M: int
    basis: np.ndarray  # (C(N, M), d), orthonormal columns
    note: str = ""

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def embed(self, block: MultiphotonBlock, coeffs) -> np.ndarray:
        v = np.zeros(block.dim, complex)
        v[block.layer(self.M)] = self.basis @ np.asarray(coeffs, complex)
        return v


def dark_subspace(N: int, M: int, rank_tol: float = 1e-10) -> DarkSubspace:
    """Orthonormal nullspace of the inclusion constraints (no photon emitted)."""
    if M < 1 or M > N:
        raise BasisError("need 1 <= M <= N")
    note = "" if N >= 2 * M else f"N={N} < 2M={2 * M}: constraints have full column rank"
    W = inclusion_matrix(N, M)
    _, s, vh = np.linalg.svd(W)
    rank = int(np.sum(s > rank_tol * s[0])) if len(s) else 0
    basis = vh[rank:].conj().T
    return DarkSubspace(N, M, basis.astype(complex), note)


@dataclass(frozen=True, eq=False)
class Decomposition:
    dark: np.ndarray
    bright: np.ndarray
    retained_fraction: float


def decompose_bright_dark(block: MultiphotonBlock, amps=None,
                          dark: DarkSubspace | None = None) -> Decomposition:
    """Orthogonal split of an all-qubit-layer state into dark and bright parts.

    ``retained_fraction`` is |dark|^2 / |psi|^2, the share that never radiates.
    """
    a = block.amplitudes if amps is None else np.asarray(amps, complex)
    if block.M > block.N:
        raise BasisError("block has no all-qubit layer")
    top = block.layer(block.M)
    rest = np.ones(block.dim, bool)
    rest[top] = False
    if np.any(np.abs(a[rest]) > 1e-14):
        raise BasisError("initial state must populate only the zero-photon layer")
    dark = dark_subspace(block.N, block.M) if dark is None else dark
    Q = dark.basis
    d = np.zeros(block.dim, complex)
    d[top] = Q @ (Q.conj().T @ a[top])
    nrm = float(np.vdot(a, a).real)
    return Decomposition(d, a - d, float(np.vdot(d, d).real) / nrm)


def disjoint_uniform_asymptotics(N: int, M: int) -> tuple[float, float]:
    """Late-time amplitude magnitudes for an equal superposition of L = N/M
    disjoint M-subsets: (1/sqrt(L))(N-M)/(N-M+1) on the initial subsets and
    (1/sqrt(L))/(N-M+1) on every other M-subset.

    The second amplitude enters with a negative sign. Both agree with the dark
    projection for M = 2; for other M the dark projection is not uniform off
    the initial subsets and these numbers are only indicative.
    """
    if N % M:
        raise BasisError(f"M={M} does not divide N={N}")
    L = N // M
    if L == 1:
        return 1.0, 0.0
    return (N - M) / (N - M + 1) / np.sqrt(L), 1.0 / (N - M + 1) / np.sqrt(L)


# ----------------------------------------------------------------------------
# named initial states (zero-photon layer)
# ----------------------------------------------------------------------------

def preset_state(name: str, N: int, M: int) -> MultiphotonBlock:
    blk = build_block(N, M)
    if M > N:
        raise BasisError("preset states live in the all-qubit layer; need M <= N")
    if name == "pair-excited":
        return blk.from_subsets({tuple(range(1, M + 1)): 1.0})
    if name == "symmetric":
        a = np.zeros(blk.dim, complex)
        a[blk.layer(M)] = 1.0
        return blk.with_amplitudes(a / np.linalg.norm(a))
    if name == "antisymmetric":
        if M != 2 or N < 4:
            raise BasisError("antisymmetric preset is defined for M = 2, N >= 4")
        return blk.from_subsets({(1, 4): 1.0, (2, 3): -1.0})
    if name == "disjoint-uniform":
        if N % M:
            raise BasisError(f"M={M} does not divide N={N}")
        return blk.from_subsets({tuple(range(k * M + 1, (k + 1) * M + 1)): 1.0
                                 for k in range(N // M)})
    raise BasisError(f"unknown preset {name!r}")


PRESETS = ("pair-excited", "symmetric", "antisymmetric", "disjoint-uniform")
