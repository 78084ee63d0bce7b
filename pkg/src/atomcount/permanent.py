"""Matrix permanents by Ryser's formula with Gray-code subset updates.

Cost is O(2^k k) per k x k matrix. Batched entry points evaluate many
matrices (or a matrix polynomial at many nodes) in one compiled call; the
batch loop is parallel, each permanent keeps a fixed summation order so
results do not depend on the thread count.
"""
from __future__ import annotations

import os

import numba
import numpy as np

if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "omp"

MAX_ORDER = 24


class CapacityError(ValueError):
    """Problem size exceeds the exponential-cost bound."""


@numba.njit(cache=True)
def _ryser(M):
    n = M.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    rowsum = np.zeros(n, dtype=np.complex128)
    total = 0.0 + 0.0j
    gray = 0
    size = 0
    for k in range(1, 1 << n):
        j = 0
        while not (k >> j) & 1:
            j += 1
        bit = 1 << j
        if gray & bit:
            for i in range(n):
                rowsum[i] -= M[i, j]
            size -= 1
        else:
            for i in range(n):
                rowsum[i] += M[i, j]
            size += 1
        gray ^= bit
        prod = rowsum[0]
        for i in range(1, n):
            prod *= rowsum[i]
        if size & 1:
            total -= prod
        else:
            total += prod
    if n & 1:
        return -total
    return total


@numba.njit(cache=True, parallel=True)
def _ryser_batch(Ms):
    out = np.empty(Ms.shape[0], dtype=np.complex128)
    for b in numba.prange(Ms.shape[0]):
        out[b] = _ryser(Ms[b])
    return out


@numba.njit(cache=True)
def _ryser_linear_poly(U, V):
    # per(U + s V) as polynomial coefficients in s; row sums are u_i + s v_i
    n = U.shape[0]
    coeffs = np.zeros(n + 1, dtype=np.complex128)
    if n == 0:
        coeffs[0] = 1.0
        return coeffs
    ru = np.zeros(n, dtype=np.complex128)
    rv = np.zeros(n, dtype=np.complex128)
    prod = np.zeros(n + 1, dtype=np.complex128)
    gray = 0
    size = 0
    for k in range(1, 1 << n):
        j = 0
        while not (k >> j) & 1:
            j += 1
        bit = 1 << j
        if gray & bit:
            for i in range(n):
                ru[i] -= U[i, j]
                rv[i] -= V[i, j]
            size -= 1
        else:
            for i in range(n):
                ru[i] += U[i, j]
                rv[i] += V[i, j]
            size += 1
        gray ^= bit
        prod[:] = 0.0
        prod[0] = ru[0]
        prod[1] = rv[0]
        for i in range(1, n):
            for d in range(i + 1, 0, -1):
                prod[d] = prod[d] * ru[i] + prod[d - 1] * rv[i]
            prod[0] = prod[0] * ru[i]
        if size & 1:
            coeffs -= prod
        else:
            coeffs += prod
    if n & 1:
        return -coeffs
    return coeffs


def _check_square(M, bound=MAX_ORDER):
    M = np.ascontiguousarray(M, dtype=np.complex128)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {M.shape}")
    if M.shape[-1] > bound:
        raise CapacityError(f"permanent of order {M.shape[-1]} exceeds the bound {bound}")
    return M


def permanent(M) -> complex:
    """Permanent of a square complex matrix (order at most 24)."""
    M = _check_square(M)
    if M.ndim != 2:
        raise ValueError("permanent expects a single matrix")
    return complex(_ryser(M))


def permanents(Ms) -> np.ndarray:
    """Permanents of a stack of matrices with shape ``(B, k, k)``."""
    Ms = _check_square(Ms)
    return _ryser_batch(Ms.reshape(-1, Ms.shape[-1], Ms.shape[-1])).reshape(Ms.shape[:-2])


def linear_permanent_poly(U, V, bound=MAX_ORDER) -> np.ndarray:
    """Coefficients ``c_0..c_k`` of ``per(U + s V)``, built with polynomial row sums."""
    U = _check_square(U, bound)
    V = _check_square(V, bound)
    if U.shape != V.shape:
        raise ValueError("U and V must have the same shape")
    return _ryser_linear_poly(U, V)


def naive_permanent(M) -> complex:
    """Sum over all permutations; reference for small matrices only."""
    from itertools import permutations

    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    rows = np.arange(n)
    return complex(sum(np.prod(M[rows, list(p)]) for p in permutations(range(n))))
