"""Brute-force reference: explicit operator algebra in a truncated Fock space.

The normally ordered exponential ``:exp(-a^dagger M a):`` equals the one-body
exponential ``exp(a^dagger log(I - M) a)``. Its many-body matrix is built on
number-conserving sectors, exponentiated, and sandwiched between the state
vector. Nothing here touches permanents, so it is an independent check of
the counting module.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb, factorial

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply
from scipy.stats import poisson

from .counting import CountingDistribution, JointDistribution
from .lattice import CoherentProduct, FockPattern, SymmetricSuperposition
from .permanent import CapacityError

MAX_DIM = 100_000
DENSE_DIM = 100
COHERENT_TAIL = 1e-12
SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class TruncatedFockSpace:
    """Occupation vectors of ``n_sites`` modes with exactly ``n_particles`` atoms,
    each mode holding at most ``n_max``."""

    n_sites: int
    n_particles: int
    n_max: int

    @property
    def basis(self) -> np.ndarray:
        return _sector(self.n_sites, self.n_particles, self.n_max)[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def index(self, occupations) -> int:
        basis, keys, powers = _sector(self.n_sites, self.n_particles, self.n_max)
        key = int(np.asarray(occupations) @ powers)
        pos = int(np.searchsorted(keys, key))
        if pos >= keys.size or keys[pos] != key:
            raise KeyError(f"{occupations} is not in the truncated space")
        return pos

    def one_body(self, B) -> sp.csr_matrix:
        """Sparse matrix of ``sum_ij B_ij a_i^dagger a_j`` on this sector."""
        rows, cols, amps, pair_i, pair_j = _hopping(self.n_sites, self.n_particles, self.n_max)
        data = amps * np.asarray(B)[pair_i, pair_j]
        return sp.csr_matrix((data, (rows, cols)), shape=(self.dim, self.dim))


def sector_dim(n_sites: int, n_particles: int) -> int:
    return comb(n_particles + n_sites - 1, n_particles)


@lru_cache(maxsize=64)
def _sector(n_sites, n_particles, n_max):
    if sector_dim(n_sites, n_particles) > MAX_DIM:
        raise CapacityError(
            f"sector with {n_particles} atoms on {n_sites} sites exceeds {MAX_DIM} states"
        )
    combos = np.array(
        list(combinations_with_replacement(range(n_sites), n_particles)), dtype=np.int64
    ).reshape(-1, n_particles) if n_particles else np.zeros((1, 0), dtype=np.int64)
    occ = np.zeros((combos.shape[0], n_sites), dtype=np.int64)
    rows = np.repeat(np.arange(combos.shape[0]), n_particles)
    np.add.at(occ, (rows, combos.ravel()), 1)
    occ = occ[np.all(occ <= n_max, axis=1)]
    powers = (n_particles + 1) ** np.arange(n_sites, dtype=np.int64)
    keys = occ @ powers
    order = np.argsort(keys)
    return occ[order], keys[order], powers


@lru_cache(maxsize=64)
def _hopping(n_sites, n_particles, n_max):
    occ, keys, powers = _sector(n_sites, n_particles, n_max)
    src = np.arange(occ.shape[0])
    rows, cols, amps, pi, pj = [], [], [], [], []
    for i in range(n_sites):
        for j in range(n_sites):
            if i == j:
                mask = occ[:, j] > 0
                rows.append(src[mask])
                cols.append(src[mask])
                amps.append(occ[mask, j].astype(float))
            else:
                mask = (occ[:, j] > 0) & (occ[:, i] < n_max)
                target = keys[mask] + powers[i] - powers[j]
                rows.append(np.searchsorted(keys, target))
                cols.append(src[mask])
                amps.append(np.sqrt(occ[mask, j] * (occ[mask, i] + 1.0)))
            pi.append(np.full(rows[-1].size, i))
            pj.append(np.full(rows[-1].size, j))
    return tuple(np.concatenate(x) for x in (rows, cols, amps, pi, pj))


# ---------------------------------------------------------------------------
# states as sector vectors


def coherent_cutoff(mu: float, tail: float = COHERENT_TAIL) -> int:
    """Largest total atom number kept for a coherent product of mean ``mu``."""
    return int(poisson.isf(tail, mu)) + 1 if mu > 0 else 0


def _sector_vectors(state, n_sites, n_total=None):
    """Yield ``(space, vector)`` for every number sector the state touches.

    Coherent products are truncated at ``n_total`` atoms in total, by default
    where the Poisson tail drops below ``COHERENT_TAIL``.
    """
    if isinstance(state, FockPattern):
        occ = state.occupations
        if occ.size != n_sites:
            raise ValueError("state size does not match the matrices")
        space = TruncatedFockSpace(n_sites, state.n_particles, state.n_particles)
        v = np.zeros(space.dim, dtype=complex)
        v[space.index(occ)] = 1.0
        yield space, v
    elif isinstance(state, SymmetricSuperposition):
        if state.n_sites != n_sites:
            raise ValueError("state size does not match the matrices")
        space = TruncatedFockSpace(n_sites, state.n_particles, state.n_particles)
        hardcore = np.all(space.basis <= 1, axis=1)
        v = np.where(hardcore, 1.0 / np.sqrt(comb(n_sites, state.n_particles)), 0.0).astype(complex)
        yield space, v
    elif isinstance(state, CoherentProduct):
        alpha = state.amplitudes
        if alpha.size != n_sites:
            raise ValueError("state size does not match the matrices")
        mu = state.mean_number
        top = coherent_cutoff(mu) if n_total is None else int(n_total)
        total = sum(sector_dim(n_sites, P) for P in range(top + 1))
        if total > MAX_DIM:
            raise CapacityError(f"coherent truncation needs {total} states (limit {MAX_DIM})")
        log_norm = -0.5 * mu
        for P in range(top + 1):
            space = TruncatedFockSpace(n_sites, P, P)
            occ = space.basis
            fact = np.array([np.sqrt(float(factorial(int(k)))) for k in range(P + 1)])
            amp = np.prod(np.where(occ > 0, alpha[None, :] ** occ, 1.0) / fact[occ], axis=1)
            yield space, np.exp(log_norm) * amp
    else:
        raise TypeError(f"unsupported state {type(state).__name__}")


# ---------------------------------------------------------------------------
# the generating function


def _log_one_minus(M):
    """A logarithm of ``I - M`` and the directions where ``I - M`` is singular.

    Any branch works: only ``exp(B) = I - M`` matters, since the second
    quantisation of ``exp(B)`` is ``exp(a^dagger B a)``. Hermitian ``M`` goes
    through its eigendecomposition, with ``log(1 - mu) = log|1 - mu| + i pi``
    for ``mu > 1`` (reached at the interpolation nodes ``lam = 1 - s``).
    Eigenvalues within ``SINGULAR_TOL`` of one are returned separately as
    projector directions.
    """
    n = M.shape[0]
    if np.allclose(M, M.conj().T, atol=1e-14, rtol=0):
        M = 0.5 * (M + M.conj().T)
        mu, V = np.linalg.eigh(M)
        singular = np.abs(1.0 - mu) < SINGULAR_TOL
        b = np.log((1.0 - np.where(singular, 0.0, mu)).astype(complex))
        B = (V * b) @ V.conj().T
        return B, V[:, singular]
    if np.min(np.abs(np.linalg.eigvals(np.eye(n) - M))) < SINGULAR_TOL:
        raise ValueError("I - M is singular for complex weights; the limit is not handled")
    return scipy.linalg.logm(np.eye(n) - M), np.zeros((n, 0))


def _expect_exp(space, B, singular, vec, path="auto"):
    H = space.one_body(B)
    dense = space.dim <= DENSE_DIM if path == "auto" else path == "dense"
    if singular.shape[1]:
        if not dense:
            raise CapacityError("singular directions are only handled on the dense path")
        Hd = H.toarray()
        # projector onto states with no atom in the singular modes
        N = space.one_body(singular @ singular.conj().T).toarray()
        nv, W = np.linalg.eigh(0.5 * (N + N.conj().T))
        keep = W[:, np.abs(nv) < 0.5]
        proj = keep @ keep.conj().T
        Ev = proj @ _dense_exp(Hd, proj @ vec)
        return np.vdot(vec, Ev)
    if dense:
        return np.vdot(vec, _dense_exp(H.toarray(), vec))
    return np.vdot(vec, expm_multiply(H.tocsc(), vec))


def _dense_exp(H, vec):
    if np.allclose(H, H.conj().T, atol=1e-13, rtol=0):
        w, U = np.linalg.eigh(0.5 * (H + H.conj().T))
        return U @ (np.exp(w) * (U.conj().T @ vec))
    return scipy.linalg.expm(H) @ vec


def oracle_generating(matrices, weights, state, n_total=None, path="auto") -> complex:
    """``<psi| :exp(-sum_k w_k a^dagger A_k a): |psi>`` by explicit exponentiation.

    ``n_total`` overrides the atom-number cutoff used for coherent products.
    ``path`` forces the dense eigendecomposition or the sparse action
    (``"dense"`` / ``"sparse"``); ``"auto"`` picks by sector size.
    """
    if path not in ("auto", "dense", "sparse"):
        raise ValueError(f"unknown path {path!r}")
    mats = [np.asarray(A, dtype=complex) for A in matrices]
    M = sum(w * A for w, A in zip(weights, mats))
    B, singular = _log_one_minus(M)
    total = 0j
    for space, vec in _sector_vectors(state, M.shape[0], n_total):
        if space.n_particles == 0:
            total += np.vdot(vec, vec)
            continue
        total += _expect_exp(space, B, singular, vec, path)
    return complex(total)


def _n_nodes(state):
    if isinstance(state, FockPattern):
        return state.n_particles + 1
    if isinstance(state, SymmetricSuperposition):
        return state.n_particles + 1
    return coherent_cutoff(state.mean_number) + 1


def oracle_distribution(A, state) -> CountingDistribution:
    """Counting distribution from oracle values of ``Q(1 - s)`` on roots of unity."""
    A = np.asarray(getattr(A, "entries", A), dtype=complex)
    K = _n_nodes(state)
    s = np.exp(2j * np.pi * np.arange(K) / K)
    vals = np.array([oracle_generating([A], [1 - sk], state) for sk in s])
    return CountingDistribution.validated(np.fft.fft(vals) / K)


def oracle_joint_distribution(A1, A2, state) -> JointDistribution:
    A1 = np.asarray(getattr(A1, "entries", A1), dtype=complex)
    A2 = np.asarray(getattr(A2, "entries", A2), dtype=complex)
    K = _n_nodes(state)
    roots = np.exp(2j * np.pi * np.arange(K) / K)
    vals = np.array(
        [[oracle_generating([A1, A2], [1 - s, 1 - t], state) for t in roots] for s in roots]
    )
    return JointDistribution.validated(np.fft.fft2(vals) / K**2)
