"""Counting distributions from a correlation matrix and a many-body state.

Hard-core Fock states go through permanents: the no-click generating
function is ``Q(lam) = per(I - lam A')`` on the occupied block, and the
click-number distribution is read off as the coefficients of
``Q(1 - s) = per((I - A') + s A')``. Coherent products give Poissonians.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np
from scipy import stats
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .lattice import CoherentProduct, FockPattern, SymmetricSuperposition
from .permanent import MAX_ORDER, CapacityError, linear_permanent_poly, permanent, permanents
from .propagation import CorrelationMatrix, InvariantViolation

MAX_JOINT_ORDER = 18
NEGATIVE_TOL = 1e-10
SUM_TOL = 1e-9
# off-diagonal entries below this fraction of the largest diagonal are dropped
# before splitting the matrix into independent blocks
DEFAULT_NEGLIGIBLE = 1e-6
# coefficient errors grow like cond * 5e-17; 1e8 caps them near 5e-9 (degree <= 10)
CHEBYSHEV_MAX_COND = 1e8


class ConditioningError(RuntimeError):
    """Interpolation system too ill-conditioned for the requested accuracy."""


class UndefinedCorrelation(ValueError):
    """Correlation requested for a distribution with zero variance."""


def _clean(p, what):
    p = np.asarray(p)
    if np.iscomplexobj(p):
        if np.max(np.abs(p.imag), initial=0.0) > NEGATIVE_TOL:
            raise InvariantViolation(f"{what}: probabilities have imaginary parts")
        p = p.real
    p = np.array(p, dtype=float)
    if p.size and p.min() < -NEGATIVE_TOL:
        raise InvariantViolation(f"{what}: negative probability {p.min():.3g}")
    if abs(p.sum() - 1.0) > SUM_TOL:
        raise InvariantViolation(f"{what}: probabilities sum to {p.sum():.12g}")
    p[p < 0] = 0.0
    return p


@dataclass(frozen=True)
class CountingDistribution:
    probabilities: np.ndarray

    @classmethod
    def validated(cls, p) -> "CountingDistribution":
        return cls(_clean(p, "counting distribution"))

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.probabilities.size)

    @property
    def mean(self) -> float:
        return float(self.support @ self.probabilities)

    @property
    def variance(self) -> float:
        m = self.support
        return float(((m - self.mean) ** 2) @ self.probabilities)

    def __len__(self):
        return self.probabilities.size


@dataclass(frozen=True)
class JointDistribution:
    """``p(m, n)`` for two detectors.

    ``factors`` is set when the table is a product of two independent
    distributions; the covariance is then zero by construction.
    """

    probabilities: np.ndarray
    factors: tuple[CountingDistribution, CountingDistribution] | None = None

    @classmethod
    def validated(cls, p, factors=None) -> "JointDistribution":
        return cls(_clean(p, "joint distribution"), factors)

    def marginal(self, axis: int) -> CountingDistribution:
        """Distribution at detector 1 (``axis=0``) or detector 2 (``axis=1``)."""
        if self.factors is not None:
            return self.factors[axis]
        return CountingDistribution(self.probabilities.sum(axis=1 - axis))

    @property
    def covariance(self) -> float:
        if self.factors is not None:
            return 0.0
        p = self.probabilities
        m = np.arange(p.shape[0])
        n = np.arange(p.shape[1])
        mm = m @ p.sum(axis=1)
        nn = n @ p.sum(axis=0)
        return float((m - mm) @ p @ (n - nn))


@dataclass(frozen=True)
class Moments:
    mean: float | tuple[float, float]
    variance: float | tuple[float, float]
    covariance: float | None = None
    correlation: float | None = None
    pearson: float | None = None


def moments_and_corr(dist) -> Moments:
    """Mean and variance; for joint tables also covariance and correlation.

    The correlation is the covariance divided by the product of the two
    variances (not their square roots). ``pearson`` carries the usual
    normalisation for comparison.
    """
    if isinstance(dist, CountingDistribution):
        return Moments(dist.mean, dist.variance)
    d1, d2 = dist.marginal(0), dist.marginal(1)
    v1, v2 = d1.variance, d2.variance
    cov = dist.covariance
    if v1 * v2 <= 0:
        raise UndefinedCorrelation("correlation undefined: a detector has zero variance")
    return Moments((d1.mean, d2.mean), (v1, v2), cov, cov / (v1 * v2), cov / np.sqrt(v1 * v2))


# ---------------------------------------------------------------------------
# generating polynomials


@dataclass(frozen=True)
class GeneratingPolynomial:
    """Coefficients ``c_k`` of ``Q(lam) = sum_k c_k lam^k``."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if abs(c[0] - 1.0) > 1e-9:
            raise InvariantViolation(f"Q(0) = {c[0]} instead of 1")
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def __call__(self, lam):
        return np.polynomial.polynomial.polyval(lam, self.coefficients)

    def distribution(self) -> CountingDistribution:
        """Expand ``Q(1 - s)`` in powers of ``s``."""
        c = self.coefficients
        P = c.size - 1
        p = np.zeros(P + 1, dtype=complex)
        for k in range(P + 1):
            p[k] = (-1) ** k * sum(c[m] * comb(m, k) for m in range(k, P + 1))
        return CountingDistribution.validated(p)


def _as_array(A) -> np.ndarray:
    if isinstance(A, CorrelationMatrix):
        return A.entries
    return np.asarray(A, dtype=complex)


def _occupied(occupations, n):
    if isinstance(occupations, FockPattern):
        occ = occupations.occupations
    else:
        occ = np.asarray(occupations).ravel()
    if occ.size != n or not np.all((occ == 0) | (occ == 1)):
        raise ValueError("occupations must be a 0/1 vector matching the matrix size")
    return np.flatnonzero(occ)


def blocks(mats, negligible=DEFAULT_NEGLIGIBLE):
    """Index sets of the independent blocks of one or more square matrices.

    Two sites share a block when any matrix couples them by more than
    ``negligible`` times the largest diagonal entry.
    """
    n = mats[0].shape[0]
    if n == 0:
        return []
    scale = max(np.max(np.abs(np.diag(M)), initial=0.0) for M in mats)
    link = np.zeros((n, n), dtype=bool)
    for M in mats:
        link |= np.abs(M) > negligible * scale
    np.fill_diagonal(link, False)
    ncomp, labels = connected_components(csr_matrix(link), directed=False)
    return [np.flatnonzero(labels == c) for c in range(ncomp)]


def _chebyshev_nodes(n):
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(np.pi * (2 * k + 1) / (2 * n)))


def _poly_coefficients(U, V, method):
    """Coefficients of ``per(U + s V)`` for one block."""
    k = U.shape[0]
    if k > MAX_ORDER:
        raise CapacityError(f"block of {k} coupled sites exceeds the bound {MAX_ORDER}")
    if k == 1:
        return np.array([U[0, 0], V[0, 0]])
    if method == "symbolic":
        return linear_permanent_poly(U, V)
    if method == "fourier":
        s = np.exp(2j * np.pi * np.arange(k + 1) / (k + 1))
        vals = permanents(U[None] + s[:, None, None] * V[None])
        # numpy's forward transform carries exp(-2 pi i jm/K) = s_j^-m
        return np.fft.fft(vals) / (k + 1)
    if method == "chebyshev":
        s = _chebyshev_nodes(k + 1)
        # Hermitian blocks at real s have real permanents; the imaginary part is noise
        vals = permanents(U[None] + s[:, None, None] * V[None]).real
        vander = np.vander(s, increasing=True)
        cond = np.linalg.cond(vander)
        if cond > CHEBYSHEV_MAX_COND:
            raise ConditioningError(
                f"Chebyshev interpolation of degree {k} is ill-conditioned (cond {cond:.2e}); "
                "use the fourier or symbolic method"
            )
        return np.linalg.solve(vander, vals)
    raise ValueError(f"unknown method {method!r}")


def _block_product(A, idx_blocks, method, shift_identity):
    total = np.array([1.0 + 0j])
    for b in idx_blocks:
        Ab = A[np.ix_(b, b)]
        eye = np.eye(len(b))
        if shift_identity:
            c = _poly_coefficients(eye - Ab, Ab, method)
        else:
            c = _poly_coefficients(eye.astype(complex), -Ab, method)
        total = np.convolve(total, c)
    return total


def generating_polynomial(A, occupations, method="fourier", negligible=DEFAULT_NEGLIGIBLE):
    """``Q(lam) = per(I - lam A')`` for a hard-core pattern."""
    A = _as_array(A)
    occ = _occupied(occupations, A.shape[0])
    Ap = A[np.ix_(occ, occ)]
    c = _block_product(Ap, blocks([Ap], negligible), method, shift_identity=False)
    return GeneratingPolynomial(c)


def fock_probabilities(A, occupations, method="fourier", negligible=DEFAULT_NEGLIGIBLE):
    """Click-number distribution of a hard-core Fock pattern.

    ``method`` selects how the polynomial ``per((I - A') + s A')`` is
    recovered: ``fourier`` samples it on roots of unity (well conditioned),
    ``chebyshev`` on Chebyshev nodes in [0, 1] (monomial recovery from real
    nodes is ill-conditioned, so blocks beyond order 10 are refused),
    ``symbolic`` carries polynomial row sums through Ryser's formula.
    Off-diagonal couplings below ``negligible`` (relative to the largest
    diagonal entry) are dropped so independent blocks factorise; this is
    what makes large-detector runs on more than 24 sites possible.
    """
    A = _as_array(A)
    occ = _occupied(occupations, A.shape[0])
    Ap = A[np.ix_(occ, occ)]
    p = _block_product(Ap, blocks([Ap], negligible), method, shift_identity=True)
    return CountingDistribution.validated(p)


def binomial_distribution(n: int, a: float) -> CountingDistribution:
    """Closed form for unit filling with equal diagonal and no interference."""
    return CountingDistribution.validated(stats.binom.pmf(np.arange(n + 1), n, a))


def trinomial_distribution(n: int, a: float) -> JointDistribution:
    """Closed form for two symmetric detectors each catching a fraction ``a``."""
    from scipy.special import gammaln

    m = np.arange(n + 1)[:, None]
    k = np.arange(n + 1)[None, :]
    rest = n - m - k
    ok = rest >= 0
    safe = np.where(ok, rest, 0)
    with np.errstate(divide="ignore"):
        logp = (
            gammaln(n + 1) - gammaln(m + 1) - gammaln(k + 1) - gammaln(safe + 1)
            + (m + k) * np.log(a) + safe * np.log1p(-2 * a)
        )
    p = np.where(ok, np.exp(logp), 0.0)
    return JointDistribution.validated(p)


# ---------------------------------------------------------------------------
# coherent products


def coherent_mean(A, amplitudes) -> float:
    """``alpha^dagger A alpha``, checked to be real and non-negative."""
    A = _as_array(A)
    if isinstance(amplitudes, CoherentProduct):
        amplitudes = amplitudes.amplitudes
    a = np.asarray(amplitudes, dtype=complex)
    mu = np.vdot(a, A @ a)
    scale = max(1.0, float(np.abs(a) @ np.abs(A) @ np.abs(a)))
    if abs(mu.imag) > 1e-10 * scale:
        raise InvariantViolation(f"alpha^dagger A alpha is not real: {mu}")
    if mu.real < -NEGATIVE_TOL:
        raise InvariantViolation(f"alpha^dagger A alpha is negative: {mu.real}")
    return max(mu.real, 0.0)


def poisson_distribution(mu: float, tail=1e-17) -> CountingDistribution:
    if mu == 0:
        return CountingDistribution(np.array([1.0]))
    # stop once the remaining tail, weighted by m^2, is far below rounding
    top = int(np.ceil(mu + 6 * np.sqrt(mu))) + 4
    while top**2 * np.exp(stats.poisson.logpmf(top, mu)) > tail:
        top += 1
    return CountingDistribution.validated(stats.poisson.pmf(np.arange(top + 1), mu))


def coherent_probabilities(A, amplitudes) -> CountingDistribution:
    return poisson_distribution(coherent_mean(A, amplitudes))


def joint_coherent_probabilities(A1, A2, amplitudes) -> JointDistribution:
    d1 = coherent_probabilities(A1, amplitudes)
    d2 = coherent_probabilities(A2, amplitudes)
    return JointDistribution.validated(np.outer(d1.probabilities, d2.probabilities), (d1, d2))


def _bulk_values(A):
    A = _as_array(A)
    a_d = float(np.mean(np.diag(A).real))
    a_nn = float(np.mean(np.diag(A, 1).real)) if A.shape[0] > 1 else 0.0
    return a_d, a_nn


def supersolid_mean_nn(A, beta, gamma, n: int) -> float:
    """Nearest-neighbour approximation to the mean for alternating amplitudes.

    ``A_d`` and ``A_NN`` are bulk averages of the diagonal and first
    super-diagonal of ``A``; the bond count ``n`` assumes a closed chain.
    """
    a_d, a_nn = _bulk_values(A)
    b2, g2 = abs(beta) ** 2, abs(gamma) ** 2
    return 0.5 * n * a_d * (b2 + g2) + 2 * n * a_nn * float(np.real(np.conj(beta) * gamma))


def homogeneous_mean_nn(A, alpha, n: int) -> float:
    a_d, a_nn = _bulk_values(A)
    a2 = abs(alpha) ** 2
    return n * a_d * a2 + 2 * n * a_nn * a2


# ---------------------------------------------------------------------------
# symmetric superposition of all hard-core patterns

INTERPRETATIONS = ("overlap", "disjoint", "real_pairs", "real_pairs_ordered")
MAX_SUPERPOSITION_SITES = 12


def _binom(n, k):
    return comb(n, k) if n >= 0 and 0 <= k <= n else 0


def _principal_sum(A, m):
    idx = list(combinations(range(A.shape[0]), m))
    if not idx:
        return 0.0
    mats = np.stack([A[np.ix_(I, I)] for I in idx])
    return complex(permanents(mats).sum())


def _pair_families(n, m, ordered):
    """Families of ``m`` mutually disjoint pairs ``i < j``."""
    pairs = list(combinations(range(n), 2))

    def grow(start, used, chosen):
        if len(chosen) == m:
            yield tuple(chosen)
            return
        for k in range(0 if ordered else start, len(pairs)):
            i, j = pairs[k]
            if i in used or j in used:
                continue
            yield from grow(k + 1, used | {i, j}, chosen + [pairs[k]])

    yield from grow(0, frozenset(), [])


def _second_term(A, m, interpretation):
    n = A.shape[0]
    if interpretation == "disjoint":
        total = 0j
        for I in combinations(range(n), m):
            rest = [k for k in range(n) if k not in I]
            Js = list(combinations(rest, m))
            if Js:
                total += permanents(np.stack([A[np.ix_(I, J)] for J in Js])).sum()
        return total
    ordered = interpretation == "real_pairs_ordered"
    re = A.real
    k_m = sum(np.prod([re[i, j] for i, j in fam]) for fam in _pair_families(n, m, ordered))
    return 2**m * k_m


def superposition_generating(A, n_particles, n_sites=None, interpretation="overlap"):
    """``Q(lam)`` for the symmetric superposition of all ``n_particles``-patterns.

    The coefficient of ``(-lam)^m`` is

    ``C(Ns,Np)^-1 * sum_{|I|=|J|=m} C(Ns - |I u J|, Np - m) per(A[I, J])``

    for ``interpretation="overlap"``, the default, which is the complete
    expansion. The other readings keep only the ``I = J`` term plus a
    second term built from disjoint ``I, J``: ``disjoint`` uses the full
    permanents, ``real_pairs`` and ``real_pairs_ordered`` use ``2^m`` times
    products of ``Re A_ij`` over unordered or ordered families of disjoint
    pairs. Binomials with negative arguments count as zero.
    """
    A = _as_array(A)
    ns = A.shape[0] if n_sites is None else n_sites
    if ns != A.shape[0]:
        raise ValueError("n_sites must equal the matrix dimension")
    if not 0 < n_particles <= ns:
        raise ValueError("need 0 < n_particles <= n_sites")
    if ns > MAX_SUPERPOSITION_SITES:
        raise CapacityError(f"superposition over {ns} sites exceeds {MAX_SUPERPOSITION_SITES}")
    if interpretation not in INTERPRETATIONS:
        raise ValueError(f"unknown interpretation {interpretation!r}")
    norm = comb(ns, n_particles)
    c = np.zeros(n_particles + 1, dtype=complex)
    c[0] = 1.0
    for m in range(1, n_particles + 1):
        if interpretation == "overlap":
            f = 0j
            subsets = list(combinations(range(ns), m))
            for I in subsets:
                mats = np.stack([A[np.ix_(I, J)] for J in subsets])
                unions = np.array([len(set(I) | set(J)) for J in subsets])
                weights = np.array([_binom(ns - u, n_particles - m) for u in unions], dtype=float)
                f += weights @ permanents(mats)
            f /= norm
        else:
            f = _binom(ns - m, n_particles - m) / norm * _principal_sum(A, m)
            w2 = _binom(ns - 2 * m, n_particles - m)
            if w2:
                f += w2 / norm * _second_term(A, m, interpretation)
        c[m] = (-1) ** m * f
    return GeneratingPolynomial(c)


def superposition_probabilities(A, n_particles, interpretation="overlap") -> CountingDistribution:
    return superposition_generating(A, n_particles, interpretation=interpretation).distribution()


def rank_interpretations(instances, reference, lambdas=(0.25, 0.5, 0.75, 1.0)):
    """Largest ``|Q - Q_ref|`` per interpretation over ``(A, n_particles)`` instances.

    ``reference(A, n_particles, lam)`` supplies the trusted value.
    """
    report = {}
    for interp in INTERPRETATIONS:
        worst = 0.0
        for A, npart in instances:
            Q = superposition_generating(A, npart, interpretation=interp)
            for lam in lambdas:
                worst = max(worst, abs(Q(lam) - reference(A, npart, lam)))
        report[interp] = worst
    return report


# ---------------------------------------------------------------------------
# two detectors


def joint_fock_probabilities(A1, A2, occupations, negligible=DEFAULT_NEGLIGIBLE, check_psd=True):
    """``p(m, n)`` from ``per((I - A1' - A2') + s A1' + t A2')``.

    The bivariate polynomial is sampled on a grid of roots of unity and
    recovered with a two-dimensional FFT, block by block.
    """
    A1, A2 = _as_array(A1), _as_array(A2)
    if A1.shape != A2.shape:
        raise ValueError("detector matrices must have the same shape")
    if check_psd:
        for A in (A1, A2):
            if np.max(np.abs(A - A.conj().T)) > 1e-12 or np.linalg.eigvalsh(A).min() < -1e-10:
                raise InvariantViolation("detector matrices must be Hermitian PSD")
    occ = _occupied(occupations, A1.shape[0])
    B1, B2 = A1[np.ix_(occ, occ)], A2[np.ix_(occ, occ)]
    table = np.ones((1, 1), dtype=complex)
    for b in blocks([B1, B2], negligible):
        k = len(b)
        if k > MAX_JOINT_ORDER:
            raise CapacityError(f"block of {k} coupled sites exceeds the joint bound {MAX_JOINT_ORDER}")
        X, Y = B1[np.ix_(b, b)], B2[np.ix_(b, b)]
        base = np.eye(k) - X - Y
        roots = np.exp(2j * np.pi * np.arange(k + 1) / (k + 1))
        s = roots[:, None, None, None]
        t = roots[None, :, None, None]
        mats = base + s * X + t * Y
        vals = permanents(mats.reshape(-1, k, k)).reshape(k + 1, k + 1)
        coeffs = np.fft.fft2(vals) / (k + 1) ** 2
        table = _convolve2d(table, coeffs)
    return JointDistribution.validated(table)


def fock_moments(A1, occupations, A2=None) -> Moments:
    """Second moments of a 0/1 Fock pattern straight from the matrices.

    With ``A'`` restricted to occupied sites,
    ``var = tr A' + tr A'^2 - 2 sum_i A'_ii^2`` and
    ``cov = tr(A1' A2') - 2 sum_i A1'_ii A2'_ii``. Unlike moments read off a
    probability table these keep full relative precision when the detected
    fraction is tiny.
    """
    A1 = _as_array(A1)
    occ = _occupied(occupations, A1.shape[0])
    B1 = A1[np.ix_(occ, occ)]

    def single(B):
        d = B.diagonal().real
        return float(d.sum()), float(d.sum() + np.vdot(B, B).real - 2 * d @ d)

    m1, v1 = single(B1)
    if A2 is None:
        return Moments(m1, v1)
    B2 = _as_array(A2)[np.ix_(occ, occ)]
    m2, v2 = single(B2)
    cov = float(np.trace(B1 @ B2).real - 2 * B1.diagonal().real @ B2.diagonal().real)
    if v1 * v2 <= 0:
        raise UndefinedCorrelation("correlation undefined: a detector has zero variance")
    return Moments((m1, m2), (v1, v2), cov, cov / (v1 * v2), cov / np.sqrt(v1 * v2))


def _convolve2d(a, b):
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1), dtype=complex)
    for i in range(b.shape[0]):
        for j in range(b.shape[1]):
            out[i : i + a.shape[0], j : j + a.shape[1]] += b[i, j] * a
    return out
