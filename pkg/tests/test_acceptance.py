"""Acceptance suite: one test (or one xfail pair) per criterion.

Each test prints a ``PASS``/``FAIL`` line through the ``report`` fixture;
the lines are collected again in the terminal summary. Runtimes exclude the
one-time numba compilation, which a warm-up call absorbs.
"""
import time

import numpy as np
import pytest

from conftest import random_psd
from atomcount.counting import (
    binomial_distribution,
    blocks,
    coherent_mean,
    fock_probabilities,
    generating_polynomial,
    joint_fock_probabilities,
    moments_and_corr,
    superposition_generating,
    supersolid_mean_nn,
    trinomial_distribution,
)
from atomcount.fock_oracle import oracle_generating
from atomcount.lattice import (
    CoherentProduct,
    DetectorBox,
    FockPattern,
    LatticeGeometry,
    PhysicalParams,
    SymmetricSuperposition,
    make_pattern,
    make_supersolid,
)
from atomcount.propagation import (
    ExpansionContext,
    correlation_matrix,
    expanded_width,
    gaussian_phase_segment,
    quadrature_segment_oracle,
    time_of_flight,
)
from atomcount.scenarios import (
    CM,
    MM,
    evaluate,
    fig2_scenarios,
    fig3_scenarios,
    fig5_scenarios,
    fig6_scenarios,
    fig7_scenarios,
    sweep_rows,
    total_variation,
)

P = PhysicalParams()
LAMBDAS = (0.25, 0.5, 0.75, 1.0)


# ---------------------------------------------------------------------------
# 1, 2: closed forms


def test_criterion_1_binomial(rng, report):
    fock_probabilities(np.diag([0.3, 0.4]), [1, 1])
    a_values = rng.uniform(0.0, 1.0, size=50)
    worst = 0.0
    start = time.perf_counter()
    for n in range(1, 17):
        for a in a_values:
            p = fock_probabilities(a * np.eye(n), np.ones(n, dtype=int)).probabilities
            q = binomial_distribution(n, a).probabilities
            worst = max(worst, np.max(np.abs(p - q)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 1.0
    report("1", ok, f"max |dp| = {worst:.2e} (tol 1e-10) over N<=16 x 50 A_d in {elapsed:.2f} s (< 1 s)")
    assert ok


def test_criterion_2_trinomial(rng, report):
    joint_fock_probabilities(0.2 * np.eye(2), 0.2 * np.eye(2), [1, 1])
    worst_p = worst_sum = worst_cov = 0.0
    start = time.perf_counter()
    for n in range(1, 13):
        for a in rng.uniform(0.0, 0.5, size=5):
            A = a * np.eye(n)
            joint = joint_fock_probabilities(A, A, np.ones(n, dtype=int))
            p = joint.probabilities
            q = trinomial_distribution(n, a).probabilities
            worst_p = max(worst_p, np.max(np.abs(p - q)))
            worst_sum = max(worst_sum, abs(p.sum() - 1.0))
            worst_cov = max(worst_cov, abs(moments_and_corr(joint).covariance + n * a * a))
    elapsed = time.perf_counter() - start
    ok = max(worst_p, worst_sum, worst_cov) <= 1e-10 and elapsed < 10.0
    report("2", ok, f"max |dp| = {worst_p:.2e}, |sum-1| = {worst_sum:.2e}, "
                    f"|cov+N A_d^2| = {worst_cov:.2e} (tol 1e-10), N<=12, {elapsed:.2f} s (< 10 s)")
    assert ok


# ---------------------------------------------------------------------------
# 3: counting module against the Fock-space oracle

# total mean atom number of the coherent families, kept small where the
# number-truncated Fock space is large
COHERENT_NBAR = {1: 2.0, 2: 2.0, 3: 2.0, 4: 1.0, 5: 0.6, 6: 0.4, 7: 0.2, 8: 0.1}


def _families(A, rng):
    n = A.shape[0]
    occ = rng.integers(0, 2, n)
    if occ.sum() == 0:
        occ[rng.integers(n)] = 1
    nbar = COHERENT_NBAR[n]
    amp = rng.uniform(0.5, 1.0, n) * np.exp(2j * np.pi * rng.uniform(size=n))
    amp *= np.sqrt(nbar / np.sum(np.abs(amp) ** 2))
    ss = make_supersolid(LatticeGeometry((1, 1, n)), 0.6 * np.sqrt(nbar / n), 1.2 * np.sqrt(nbar / n))
    n_particles = int(rng.integers(1, n + 1))
    unit = np.ones(n, dtype=int)

    def poisson_q(state):
        mu = coherent_mean(A, state)
        return lambda lam: np.exp(-lam * mu)

    return {
        "unit filling": (FockPattern(unit), generating_polynomial(A, unit)),
        "pattern": (FockPattern(occ), generating_polynomial(A, occ)),
        "coherent": (CoherentProduct(amp), poisson_q(amp)),
        "superposition": (SymmetricSuperposition(n_particles, n), superposition_generating(A, n_particles)),
        "supersolid": (ss, poisson_q(ss)),
    }


def test_criterion_3_oracle_equivalence(rng, report):
    worst = {}
    start = time.perf_counter()
    for k in range(100):
        n = 1 + k % 8
        A = random_psd(rng, n)
        for family, (state, Q) in _families(A, rng).items():
            err = max(abs(oracle_generating([A], [lam], state) - Q(lam)) for lam in LAMBDAS)
            worst[family] = max(worst.get(family, 0.0), err)
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-8 and elapsed < 300.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report("3", ok, f"max |dQ| by family: {detail} (tol 1e-8), 100 matrices N_s<=8, {elapsed:.1f} s (< 300 s)")
    assert ok


# ---------------------------------------------------------------------------
# 4: closed-form segment integral against quadrature


def test_criterion_4_segment_integral(report):
    rng = np.random.default_rng(4)
    worst = 0.0
    start = time.perf_counter()
    for k in range(1000):
        w = rng.uniform(0.1, 3.0)
        a = rng.uniform(-6, 6) * w
        b = a + rng.uniform(0.05, 10) * w
        c = rng.uniform(-3, 3) * w
        qw = 50.0 * rng.choice([-1, 1]) if k % 10 == 0 else rng.uniform(-50, 50)
        ref = quadrature_segment_oracle(a, b, c, w, qw / w, tol=1e-13)
        val = gaussian_phase_segment(a, b, c, w, qw / w)
        worst = max(worst, abs(val - ref) / abs(ref))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 30.0
    report("4", ok, f"max relative error {worst:.1e} (tol 1e-9) on 1000 draws with |qw|<=50, {elapsed:.1f} s (< 30 s)")
    assert ok


# ---------------------------------------------------------------------------
# 5: correlation-matrix physics


def test_criterion_5a_whole_space_detector(report):
    geo = LatticeGeometry((3, 3, 2))
    width = ExpansionContext.at_distance(1 * CM, P).width
    E = correlation_matrix(geo, DetectorBox((0.0, 0.0, 1 * CM), (40 * width,) * 3, 1.0), P).entries
    diag = np.max(np.abs(E.diagonal() - 1.0))
    off = np.max(np.abs(E - np.diag(E.diagonal())))
    ok = diag <= 1e-8 and off < 1e-6
    report("5a", ok, f"max |A_ii - 1| = {diag:.1e} (tol 1e-8), max |A_ij| = {off:.1e} (< 1e-6)")
    assert ok


def test_criterion_5b_neighbour_ratio(report):
    geo = LatticeGeometry((1, 1, 7))
    dz_values = np.unique(np.concatenate([np.linspace(0.2 * MM, 1 * MM, 401), np.geomspace(0.2 * MM, 2 * CM, 200)]))
    worst, where = 0.0, None
    for dz in dz_values:
        E = correlation_matrix(geo, DetectorBox((0.0, 0.0, 1 * CM), (1 * CM, 1 * CM, dz), 1.0), P).entries
        ratio = np.max(np.abs(np.diag(E, 1)) / E.diagonal().real[:-1])
        if ratio > worst:
            worst, where = ratio, dz
    ok = worst < 0.05
    report("5b", ok, f"max |A_i,i+1|/A_ii = {worst:.3f} at dz = {where * 1e3:.3f} mm over "
                     f"{dz_values.size} heights in [0.2 mm, 2 cm] (< 0.05)")
    assert ok


def test_criterion_5c_expanded_width(report):
    width = expanded_width(time_of_flight(1 * CM, P), P)
    ok = abs(width - 0.8 * MM) <= 0.05 * 0.8 * MM
    report("5c", ok, f"omega_t = {width * 1e3:.4f} mm at z0 = 1 cm (0.8 mm +- 5%)")
    assert ok


# ---------------------------------------------------------------------------
# 6: Mott insulator versus superfluid in one large detector


def test_criterion_6_mi_sf_shape(report):
    checks = []
    mi_means, sf_means = [], []
    for z0, pair in fig2_scenarios().items():
        mi = evaluate(pair["MI"]).summary
        sf = evaluate(pair["SF"]).summary
        checks.append(abs(sf["mean"] - sf["variance"]) <= 1e-12 * max(1.0, sf["mean"]))
        checks.append(mi["variance"] < mi["mean"])
        mi_means.append(mi["mean"])
        sf_means.append(sf["mean"])
    n = LatticeGeometry((3, 3, 3)).n_sites
    sweeps = {label: sweep_rows(sc) for label, sc in fig3_scenarios().items()}
    mi_rows, sf_rows = np.array(sweeps["MI"]), np.array(sweeps["SF"])
    for means in (mi_means, sf_means, mi_rows[:, 1], sf_rows[:, 1]):
        checks.append(bool(np.all(np.diff(means) < 0)))
    checks.append(bool(np.all(mi_rows[:, 2] / n < sf_rows[:, 2] / n)))
    ok = all(checks)
    report("6", ok, f"SF mean = variance, MI subpoissonian at z0 = 1,3,5 cm "
                    f"(MI means {', '.join(f'{m:.2f}' for m in mi_means)}); means decrease; "
                    f"MI var/N below SF over {len(mi_rows)} sweep points")
    assert ok


# ---------------------------------------------------------------------------
# 7: two-detector correlation versus separation

DETECTOR_WIDTH = 2 * CM


@pytest.fixture(scope="module")
def fig5_rows():
    return {label: np.array(sweep_rows(sc)) for label, sc in fig5_scenarios().items()}


@pytest.mark.xfail(strict=True, reason="MI correlation plateaus near -1/N instead of vanishing; see decisions ledger")
def test_criterion_7_mi_correlation_decay(fig5_rows, report):
    rows = fig5_rows["MI"]
    xd, corr = rows[:, 0], np.abs(rows[:, 3])
    peak = corr[0]
    monotone = bool(np.all(np.diff(corr) <= 1e-12 * peak))
    far = corr[xd > DETECTOR_WIDTH]
    fraction = float(far.max() / peak)
    ok = corr.argmax() == 0 and monotone and fraction < 0.1
    report("7 (MI)", ok, f"|corr| peak {peak:.4f} at x_d = 0, monotone = {monotone}, "
                         f"max |corr| beyond x_d = 2 cm is {fraction:.0%} of peak (< 10%)")
    assert ok


def test_criterion_7_sf_correlation_zero(fig5_rows, report):
    corr = fig5_rows["SF"][:, 3]
    ok = bool(np.all(corr == 0.0))
    report("7 (SF)", ok, f"SF corr exactly 0 at all {corr.size} separations")
    assert ok


# ---------------------------------------------------------------------------
# 8: distinguishing occupation patterns

# total-variation distance checkerboard/block at the narrow preset detector,
# computed once from this implementation and frozen
TV_CHECKERBOARD_BLOCK = 1.778889940323196e-4


@pytest.fixture(scope="module")
def fig6_tv():
    p = {k: evaluate(sc).distribution.probabilities for k, sc in fig6_scenarios().items()}
    return total_variation(p["checkerboard"], p["block"])


@pytest.mark.xfail(strict=True, reason="a detector catching < 0.1 atoms on average cannot give TV > 0.1; see ledger")
def test_criterion_8a_patterns_distinguishable(fig6_tv, report):
    ok = fig6_tv > 0.1
    report("8a", ok, f"TV(checkerboard, block) = {fig6_tv:.3e} at dz = 0.02 mm (> 0.1 required)")
    assert ok


def test_criterion_8a_frozen_regression(fig6_tv):
    assert fig6_tv == pytest.approx(TV_CHECKERBOARD_BLOCK, rel=1e-6)


def test_criterion_8b_large_detector(report):
    p = {k: evaluate(sc).distribution.probabilities for k, sc in fig6_scenarios(dz=2 * CM).items()}
    tv = total_variation(p["checkerboard"], p["block"])
    ok = tv < 1e-3
    report("8b", ok, f"TV(checkerboard, block) = {tv:.2e} at dz = 2 cm (< 1e-3)")
    assert ok


# ---------------------------------------------------------------------------
# 9: supersolid


def test_criterion_9_nn_approximation(report):
    n = 12
    geo = LatticeGeometry((1, 1, n))
    beta, gamma = np.sqrt(0.5), np.sqrt(1.5)
    state = make_supersolid(geo, beta, gamma)
    errors, couplings = [], []
    for dz in np.linspace(2e-5, 4e-4, 2000):
        A = correlation_matrix(geo, DetectorBox((0.0, 0.0, 1 * CM), (1 * CM, 1 * CM, dz), 1.0), P).entries
        nn, nnn = np.abs(np.diag(A, 1)), np.abs(np.diag(A, 2))
        if nnn.max() < 0.01 * nn.min():
            exact = coherent_mean(A, state)
            errors.append(abs(supersolid_mean_nn(A, beta, gamma, n) - exact) / exact)
            couplings.append(nn.mean() / A[0, 0].real)
    ok = len(errors) > 0 and max(couplings) > 0.01 and max(errors) < 0.02
    report("9 (NN)", ok, f"{len(errors)} detector heights with next-nearest < 1% of A_NN "
                         f"(A_NN/A_d up to {max(couplings, default=0):.3f}); "
                         f"max relative error {max(errors, default=np.nan):.2e} (< 2%)")
    assert ok


@pytest.mark.parametrize("mode, n_sites", [("exact", None), ("far_field", 12)])
def test_criterion_9_supersolid_below_superfluid(mode, n_sites, report):
    scs = fig7_scenarios(mode) if n_sites is None else fig7_scenarios(mode, n_sites)
    ss = evaluate(scs["supersolid"]).summary["mean"]
    sf = evaluate(scs["superfluid"]).summary["mean"]
    n = scs["supersolid"].geometry.n_sites
    ok = ss < sf
    report(f"9 ({mode}, N={n})", ok, f"supersolid mean {ss:.4f} < superfluid mean {sf:.4f}")
    assert ok


# ---------------------------------------------------------------------------
# 10: performance


@pytest.mark.parametrize("n_occupied, budget", [(16, 10.0), (20, 300.0)])
def test_criterion_10_performance(n_occupied, budget, report):
    geo = LatticeGeometry((1, 1, n_occupied))
    det = DetectorBox((0.0, 0.0, 1 * CM), (1 * CM, 1 * CM, 0.02 * MM), 1.0)
    A = correlation_matrix(geo, det, P, mode="exact")
    occ = make_pattern("unit", geo).occupations
    assert len(blocks([A.entries])) == 1
    fock_probabilities(A.entries[:2, :2], [1, 1])
    start = time.perf_counter()
    dist = fock_probabilities(A, occ)
    elapsed = time.perf_counter() - start
    ok = elapsed < budget and dist.probabilities.size == n_occupied + 1
    report(f"10 (P={n_occupied})", ok, f"single coupled block, full polynomial in {elapsed:.2f} s (< {budget:g} s)")
    assert ok
