"""Scenario evaluation, figure presets and plot-data writers."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .config import Scenario, StateSpec, Sweep
from .counting import (
    CountingDistribution,
    JointDistribution,
    Moments,
    UndefinedCorrelation,
    coherent_probabilities,
    fock_moments,
    fock_probabilities,
    homogeneous_mean_nn,
    joint_coherent_probabilities,
    joint_fock_probabilities,
    moments_and_corr,
    superposition_probabilities,
    supersolid_mean_nn,
)
from .fock_oracle import oracle_distribution, oracle_joint_distribution
from .lattice import (
    CoherentProduct,
    DetectorBox,
    FockPattern,
    LatticeGeometry,
    PhysicalParams,
    SymmetricSuperposition,
)
from .propagation import CorrelationMatrix, InvariantViolation, correlation_matrix

FIGURES = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7")
ORACLE_MAX_SITES = 8
CM = 1e-2
MM = 1e-3


class UnsupportedScenario(ValueError):
    """Valid keys, but a combination the counting module does not cover."""


class MatrixInvariantError(InvariantViolation):
    """An invariant failed; ``matrices`` holds the correlation matrices involved."""

    def __init__(self, message, matrices):
        super().__init__(message)
        self.matrices = matrices


MOMENT_RTOL = 1e-8
RESOLVED_VARIANCE = 1e-4


@dataclass(frozen=True)
class Evaluation:
    matrices: list[CorrelationMatrix]
    distribution: CountingDistribution | JointDistribution
    state: object = None

    def moments(self) -> Moments:
        """Moments of the result.

        Fock patterns use the closed-form second moments, which stay accurate
        when the detected fraction is tiny; wherever the probability table
        resolves the variances the two routes must agree.
        """
        if not isinstance(self.state, FockPattern):
            return _table_moments(self.distribution)
        mats = [A.entries for A in self.matrices]
        try:
            m = fock_moments(mats[0], self.state.occupations, *mats[1:])
        except UndefinedCorrelation:
            m = _nan_corr(fock_moments(mats[0], self.state.occupations), fock_moments(mats[1], self.state.occupations))
        t = _table_moments(self.distribution)
        var = np.atleast_1d(m.variance)
        if np.all(var > RESOLVED_VARIANCE):
            a = np.r_[np.atleast_1d(m.mean), var, [m.covariance or 0.0]]
            b = np.r_[np.atleast_1d(t.mean), np.atleast_1d(t.variance), [t.covariance or 0.0]]
            if np.max(np.abs(a - b)) > MOMENT_RTOL * max(1.0, np.max(np.abs(a))):
                raise InvariantViolation("table moments disagree with closed-form moments")
        return m

    @property
    def summary(self) -> dict:
        m = self.moments()
        out = {"mean": m.mean, "variance": m.variance}
        if m.covariance is not None:
            out.update(covariance=m.covariance, corr=m.correlation, pearson=m.pearson)
        return out


def _nan_corr(m1, m2):
    nan = float("nan")
    return Moments((m1.mean, m2.mean), (m1.variance, m2.variance), nan, nan, nan)


def _table_moments(dist) -> Moments:
    try:
        return moments_and_corr(dist)
    except UndefinedCorrelation:
        m = _nan_corr(dist.marginal(0), dist.marginal(1))
        return Moments(m.mean, m.variance, dist.covariance, m.correlation, m.pearson)


def matrices_for(scenario: Scenario, mode: str | None = None) -> list[CorrelationMatrix]:
    mode = mode or scenario.mode
    out = []
    for det in scenario.detectors():
        A = correlation_matrix(scenario.geometry, det, scenario.params, mode, check=False)
        try:
            A.check()
        except InvariantViolation as exc:
            raise MatrixInvariantError(str(exc), [A]) from None
        out.append(A)
    return out


def distribution_for(state, mats, negligible=1e-6, oracle=False):
    """Counting distribution (one matrix) or joint table (two) for ``state``."""
    arrays = [getattr(A, "entries", A) for A in mats]
    if oracle:
        if len(arrays) == 1:
            return oracle_distribution(arrays[0], state)
        return oracle_joint_distribution(arrays[0], arrays[1], state)
    if isinstance(state, FockPattern):
        if len(arrays) == 1:
            return fock_probabilities(arrays[0], state.occupations, negligible=negligible)
        return joint_fock_probabilities(arrays[0], arrays[1], state.occupations, negligible)
    if isinstance(state, CoherentProduct):
        if len(arrays) == 1:
            return coherent_probabilities(arrays[0], state.amplitudes)
        return joint_coherent_probabilities(arrays[0], arrays[1], state.amplitudes)
    if isinstance(state, SymmetricSuperposition):
        if len(arrays) == 1:
            return superposition_probabilities(arrays[0], state.n_particles)
        raise UnsupportedScenario("two-detector statistics of a superposition are not implemented")
    raise UnsupportedScenario(f"unsupported state {type(state).__name__}")


def evaluate(scenario: Scenario, mode: str | None = None, oracle=False) -> Evaluation:
    mats = matrices_for(scenario, mode)
    state = scenario.state.build(scenario.geometry)
    try:
        dist = distribution_for(state, mats, scenario.negligible, oracle)
    except InvariantViolation as exc:
        raise MatrixInvariantError(str(exc), mats) from None
    return Evaluation(mats, dist, state)


def sweep_rows(scenario: Scenario, mode: str | None = None):
    """``(axis_value, mean, variance, corr)`` along the scenario's sweep axis.

    For two detectors the mean and variance refer to the first one.
    """
    rows = []
    for value in scenario.sweep.values():
        ev = evaluate(scenario.at(value), mode)
        try:
            summary = ev.summary
        except InvariantViolation as exc:
            raise MatrixInvariantError(str(exc), ev.matrices) from None
        mean, var = summary["mean"], summary["variance"]
        if isinstance(mean, tuple):
            mean, var = mean[0], var[0]
        rows.append((value, mean, var, summary.get("corr", float("nan"))))
    return rows


# ---------------------------------------------------------------------------
# writers


def fmt(x) -> str:
    return f"{float(x):.17g}"


def _padded(dists):
    n = max(len(d.probabilities) for d in dists)
    return [np.pad(d.probabilities, (0, n - len(d.probabilities))) for d in dists]


def write_distributions(path, dists: dict[str, CountingDistribution]):
    """``m,p`` for one distribution, ``m,p_<label>,...`` for several."""
    labels = list(dists)
    cols = _padded([dists[k] for k in labels])
    header = ["m", "p"] if len(labels) == 1 else ["m"] + [f"p_{k}" for k in labels]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for m in range(len(cols[0])):
            fh.write(",".join([str(m)] + [fmt(c[m]) for c in cols]) + "\n")
    return path


def write_joint(path, dist: JointDistribution):
    p = dist.probabilities
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("m,n,p\n")
        for m in range(p.shape[0]):
            for n in range(p.shape[1]):
                fh.write(f"{m},{n},{fmt(p[m, n])}\n")
    return path


def write_sweep(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("axis_value,mean,variance,corr\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def write_table(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def write_summary(path, summary: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def dump_matrices(out_dir, name, matrices):
    """Write the correlation matrices of a failed run for inspection."""
    if len(matrices):
        os.makedirs(out_dir, exist_ok=True)
    paths = []
    for k, A in enumerate(matrices):
        path = os.path.join(out_dir, f"{name}_A{k + 1}_dump.npy")
        np.save(path, np.asarray(getattr(A, "entries", A)))
        paths.append(path)
    return paths


def run_scenario(scenario: Scenario, out_dir, mode: str | None = None) -> dict:
    """Evaluate a scenario, write its CSV and summary JSON, return the summary."""
    os.makedirs(out_dir, exist_ok=True)
    name = scenario.name
    if scenario.sweep.axis != "none":
        rows = sweep_rows(scenario, mode)
        files = [write_sweep(os.path.join(out_dir, f"{name}_sweep.csv"), rows)]
        summary = {"sweep": scenario.sweep.axis,
                   "rows": [dict(zip(("axis_value", "mean", "variance", "corr"), r)) for r in rows]}
    else:
        ev = evaluate(scenario, mode)
        path = os.path.join(out_dir, f"{name}.csv")
        if isinstance(ev.distribution, JointDistribution):
            files = [write_joint(path, ev.distribution)]
        else:
            files = [write_distributions(path, {"": ev.distribution})]
        summary = ev.summary
    summary["files"] = [os.path.basename(f) for f in files]
    write_summary(os.path.join(out_dir, f"{name}_summary.json"), summary)
    return summary


def verify_scenario(scenario: Scenario, mode: str | None = None) -> float:
    """Max absolute probability difference between counting and oracle paths."""
    if scenario.geometry.n_sites > ORACLE_MAX_SITES:
        from .permanent import CapacityError

        raise CapacityError(
            f"oracle verification is limited to {ORACLE_MAX_SITES} sites, "
            f"scenario has {scenario.geometry.n_sites}"
        )
    values = scenario.sweep.values() if scenario.sweep.axis != "none" else [None]
    worst = 0.0
    for value in values:
        sc = scenario if value is None else scenario.at(value)
        fast = evaluate(sc, mode).distribution.probabilities
        ref = evaluate(sc, mode, oracle=True).distribution.probabilities
        shape = np.maximum(fast.shape, ref.shape)
        pad = lambda p: np.pad(p, [(0, s - n) for s, n in zip(shape, p.shape)])
        worst = max(worst, float(np.max(np.abs(pad(fast) - pad(ref)))))
    return worst


# ---------------------------------------------------------------------------
# figure presets


def _base(name, dims, detector, state, mode, params=None, pair=False, sweep=None):
    return Scenario(
        name=name, mode=mode, params=params or PhysicalParams(),
        geometry=LatticeGeometry(dims), state=state, detector=detector,
        pair=pair, sweep=sweep or Sweep(),
    )


MI = StateSpec("unit")
SF = StateSpec("coherent", alpha=1.0)


def fig1_rows(mode="exact", dz_values=None, n_chain=7):
    """Centre-site ``A_ii`` and ``|A_i,i+k|`` for a chain along z versus detector height."""
    if dz_values is None:
        dz_values = np.geomspace(1e-6, 2e-3, 34)
    geometry = LatticeGeometry((1, 1, n_chain))
    params = PhysicalParams()
    i = n_chain // 2
    rows = []
    for dz in dz_values:
        det = DetectorBox((0.0, 0.0, 1 * CM), (1 * CM, 1 * CM, dz), 1.0)
        A = correlation_matrix(geometry, det, params, mode).entries
        rows.append([dz, A[i, i].real] + [abs(A[i, i + k]) for k in (1, 2, 3)])
    return rows


def fig2_scenarios(mode="exact", z0_values=(1 * CM, 3 * CM, 5 * CM)):
    out = {}
    for z0 in z0_values:
        det = DetectorBox((0.0, 0.0, z0), (2 * MM, 2 * MM, 2 * CM), 1.0)
        out[z0] = {label: _base(f"fig2_{label}", (3, 3, 3), det, st, mode)
                   for label, st in (("MI", MI), ("SF", SF))}
    return out


def fig3_scenarios(mode="exact", start=1 * CM, stop=6 * CM, num=11):
    det = DetectorBox((0.0, 0.0, start), (2 * MM, 2 * MM, 2 * CM), 1.0)
    sweep = Sweep("z0", start, stop, num)
    return {label: _base(f"fig3_{label}", (3, 3, 3), det, st, mode, sweep=sweep)
            for label, st in (("MI", MI), ("SF", SF))}


def fig4_scenarios(mode="exact", xd_values=(0.0, 1 * CM)):
    out = {}
    for xd in xd_values:
        det = DetectorBox((xd, 0.0, 1 * CM), (2 * CM, 2 * CM, 2 * MM), 0.5)
        out[xd] = {label: _base(f"fig4_{label}", (4, 4, 1), det, st, mode, pair=True)
                   for label, st in (("MI", MI), ("SF", SF))}
    return out


def fig5_scenarios(mode="exact", stop=2.4 * CM, num=25):
    det = DetectorBox((0.0, 0.0, 1 * CM), (2 * CM, 2 * CM, 2 * MM), 0.5)
    sweep = Sweep("xd", 0.0, stop, num)
    return {label: _base(f"fig5_{label}", (4, 4, 1), det, st, mode, pair=True, sweep=sweep)
            for label, st in (("MI", MI), ("SF", SF))}


FIG6_SITES = 24


def fig6_scenarios(mode="exact", dz=0.02 * MM, n_sites=FIG6_SITES):
    det = DetectorBox((0.0, 0.0, 1 * CM), (0.1 * CM, 0.1 * CM, dz), 1.0)
    kinds = ("checkerboard", "block", "striped")
    return {k: _base(f"fig6_{k}", (1, 1, n_sites), det, StateSpec(k), mode) for k in kinds}


FIG7_SITES = 4


def fig7_scenarios(mode="exact", n_sites=FIG7_SITES):
    det = DetectorBox((0.0, 0.0, 1 * CM), (1 * CM, 1 * CM, 0.02 * MM), 1.0)
    ss = StateSpec("supersolid", beta=np.sqrt(0.5), gamma=np.sqrt(1.5))
    sf = StateSpec("coherent", alpha=1.0)
    return {label: _base(f"fig7_{label}", (1, 1, n_sites), det, st, mode)
            for label, st in (("supersolid", ss), ("superfluid", sf))}


def total_variation(p, q) -> float:
    p, q = _padded([CountingDistribution(np.asarray(p)), CountingDistribution(np.asarray(q))])
    return 0.5 * float(np.abs(p - q).sum())


def run_figure(name: str, out_dir, mode="exact") -> dict:
    """Write the plot data of one figure preset; return its summary."""
    if name not in FIGURES:
        raise ValueError(f"unknown figure {name!r}; choose from {FIGURES}")
    os.makedirs(out_dir, exist_ok=True)
    path = lambda f: os.path.join(out_dir, f)
    summary: dict = {"figure": name, "mode": mode}
    files = []

    if name == "fig1":
        rows = fig1_rows(mode)
        files.append(write_table(path("fig1.csv"), ["dz_m", "A_ii", "A_i_i1", "A_i_i2", "A_i_i3"], rows))
        summary["ratio_nn"] = {fmt(r[0]): r[2] / r[1] for r in rows}

    elif name == "fig2":
        for z0, pair in fig2_scenarios(mode).items():
            ev = {k: evaluate(sc) for k, sc in pair.items()}
            tag = f"fig2_z0_{round(z0 / CM)}cm"
            files.append(write_distributions(path(f"{tag}.csv"), {k: e.distribution for k, e in ev.items()}))
            summary[tag] = {k: e.summary for k, e in ev.items()}

    elif name == "fig3":
        n = LatticeGeometry((3, 3, 3)).n_sites
        for label, sc in fig3_scenarios(mode).items():
            rows = sweep_rows(sc)
            files.append(write_sweep(path(f"fig3_{label}.csv"), rows))
            summary[label] = {"z0_m": [r[0] for r in rows],
                              "mean_over_N": [r[1] / n for r in rows],
                              "variance_over_N": [r[2] / n for r in rows]}

    elif name == "fig4":
        for xd, pair in fig4_scenarios(mode).items():
            for label, sc in pair.items():
                ev = evaluate(sc)
                tag = f"fig4_{label}_xd_{round(xd / CM)}cm"
                files.append(write_joint(path(f"{tag}.csv"), ev.distribution))
                summary[tag] = ev.summary

    elif name == "fig5":
        for label, sc in fig5_scenarios(mode).items():
            rows = sweep_rows(sc)
            files.append(write_sweep(path(f"fig5_{label}.csv"), rows))
            summary[label] = {"xd_m": [r[0] for r in rows], "corr": [r[3] for r in rows]}

    elif name == "fig6":
        ev = {k: evaluate(sc) for k, sc in fig6_scenarios(mode).items()}
        files.append(write_distributions(path("fig6.csv"), {k: e.distribution for k, e in ev.items()}))
        summary.update({k: e.summary for k, e in ev.items()})
        p = {k: e.distribution.probabilities for k, e in ev.items()}
        summary["tv_checkerboard_block"] = total_variation(p["checkerboard"], p["block"])
        summary["tv_checkerboard_striped"] = total_variation(p["checkerboard"], p["striped"])

    elif name == "fig7":
        scs = fig7_scenarios(mode)
        ev = {k: evaluate(sc) for k, sc in scs.items()}
        files.append(write_distributions(path("fig7.csv"), {k: e.distribution for k, e in ev.items()}))
        summary.update({k: e.summary for k, e in ev.items()})
        A = ev["supersolid"].matrices[0].entries
        n = scs["supersolid"].geometry.n_sites
        summary["nn_mean_supersolid"] = supersolid_mean_nn(A, np.sqrt(0.5), np.sqrt(1.5), n)
        summary["nn_mean_superfluid"] = homogeneous_mean_nn(A, 1.0, n)

    summary["files"] = [os.path.basename(f) for f in files]
    write_summary(path(f"{name}_summary.json"), summary)
    return summary

