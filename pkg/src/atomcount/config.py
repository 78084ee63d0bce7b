"""Scenario files: flat ``key = value`` text with dotted keys and SI units.

Lengths carry an ``_m`` suffix so no unit conversion happens implicitly.
Lines starting with ``#`` are comments. Unknown keys are errors.

Recognised keys::

    name                      output file stem (default "scenario")
    mode                      exact | far_field
    params.mass_kg, params.hbar_js, params.g_ms2, params.wannier_width_m
    lattice.dims              e.g. "4, 4, 1"
    lattice.spacing_m
    state.kind                unit | checkerboard | striped | block | pattern |
                              coherent | supersolid | superposition
    state.occupations         for kind = pattern, e.g. "1, 0, 1, 1"
    state.alpha               coherent amplitude (homogeneous), complex allowed
    state.beta, state.gamma   supersolid amplitudes
    state.n_particles         superposition filling
    detector.x_m, detector.y_m, detector.z0_m
    detector.dx_m, detector.dy_m, detector.dz_m, detector.kappa
    detector.pair             false | symmetric (second detector mirrored at -x)
    sweep.axis                none | z0 | dz | xd
    sweep.start_m, sweep.stop_m, sweep.num
    counting.negligible       relative threshold for block decomposition
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .lattice import (
    DEFAULT_SPACING,
    DEFAULT_WANNIER_WIDTH,
    G_EARTH,
    HBAR,
    RB87_MASS,
    DetectorBox,
    FockPattern,
    LatticeGeometry,
    PhysicalParams,
    SymmetricSuperposition,
    homogeneous_coherent,
    make_pattern,
    make_supersolid,
)


class ConfigError(ValueError):
    """Malformed or inconsistent scenario description."""


STATE_KINDS = (
    "unit", "checkerboard", "striped", "block", "pattern",
    "coherent", "supersolid", "superposition",
)
SWEEP_AXES = ("none", "z0", "dz", "xd")


@dataclass(frozen=True)
class StateSpec:
    kind: str = "unit"
    occupations: tuple[int, ...] | None = None
    alpha: complex = 1.0
    beta: complex = 1.0
    gamma: complex = 1.0
    n_particles: int | None = None

    def build(self, geometry: LatticeGeometry):
        if self.kind in ("unit", "checkerboard", "striped", "block"):
            return make_pattern(self.kind, geometry)
        if self.kind == "pattern":
            if self.occupations is None or len(self.occupations) != geometry.n_sites:
                raise ConfigError("state.occupations must list one entry per site")
            return FockPattern(self.occupations)
        if self.kind == "coherent":
            return homogeneous_coherent(geometry, self.alpha)
        if self.kind == "supersolid":
            return make_supersolid(geometry, self.beta, self.gamma)
        if self.kind == "superposition":
            if self.n_particles is None:
                raise ConfigError("state.n_particles is required for a superposition")
            return SymmetricSuperposition(self.n_particles, geometry.n_sites)
        raise ConfigError(f"unknown state kind {self.kind!r}")


@dataclass(frozen=True)
class Sweep:
    axis: str = "none"
    start: float = 0.0
    stop: float = 0.0
    num: int = 1

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.num)


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    mode: str = "exact"
    params: PhysicalParams = field(default_factory=PhysicalParams)
    geometry: LatticeGeometry = field(default_factory=lambda: LatticeGeometry((1, 1, 1)))
    state: StateSpec = field(default_factory=StateSpec)
    detector: DetectorBox = field(
        default_factory=lambda: DetectorBox((0.0, 0.0, 0.01), (0.01, 0.01, 0.002))
    )
    pair: bool = False
    sweep: Sweep = field(default_factory=Sweep)
    negligible: float = 1e-6

    def detectors(self, detector: DetectorBox | None = None) -> list[DetectorBox]:
        d = self.detector if detector is None else detector
        if not self.pair:
            return [d]
        return [d, d.moved(x=-d.center[0])]

    def at(self, value: float) -> "Scenario":
        """Copy with the sweep axis fixed at ``value`` and the sweep removed."""
        axis = self.sweep.axis
        key = {"z0": "z0", "dz": "dz", "xd": "x"}.get(axis)
        if key is None:
            return self
        return replace(self, detector=self.detector.moved(**{key: value}), sweep=Sweep())


_FLOAT = float
_INT = int


def _complex(text: str) -> complex:
    return complex(text.replace(" ", "").replace("i", "j"))


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _bool_pair(text: str) -> bool:
    t = text.lower()
    if t in ("false", "no", "none", "0"):
        return False
    if t in ("symmetric", "true", "yes", "1"):
        return True
    raise ValueError(f"expected 'symmetric' or 'false', got {text!r}")


KEYS = {
    "name": str,
    "mode": str,
    "params.mass_kg": _FLOAT,
    "params.hbar_js": _FLOAT,
    "params.g_ms2": _FLOAT,
    "params.wannier_width_m": _FLOAT,
    "lattice.dims": _ints,
    "lattice.spacing_m": _FLOAT,
    "state.kind": str,
    "state.occupations": _ints,
    "state.alpha": _complex,
    "state.beta": _complex,
    "state.gamma": _complex,
    "state.n_particles": _INT,
    "detector.x_m": _FLOAT,
    "detector.y_m": _FLOAT,
    "detector.z0_m": _FLOAT,
    "detector.dx_m": _FLOAT,
    "detector.dy_m": _FLOAT,
    "detector.dz_m": _FLOAT,
    "detector.kappa": _FLOAT,
    "detector.pair": _bool_pair,
    "sweep.axis": str,
    "sweep.start_m": _FLOAT,
    "sweep.stop_m": _FLOAT,
    "sweep.num": _INT,
    "counting.negligible": _FLOAT,
}


def parse_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = KEYS[key](value.strip("\"'"))
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return values


def scenario_from_dict(v: dict) -> Scenario:
    try:
        params = PhysicalParams(
            mass=v.get("params.mass_kg", RB87_MASS),
            hbar=v.get("params.hbar_js", HBAR),
            g=v.get("params.g_ms2", G_EARTH),
            wannier_width=v.get("params.wannier_width_m", DEFAULT_WANNIER_WIDTH),
        )
        dims = v.get("lattice.dims", (1, 1, 1))
        if len(dims) > 3:
            raise ConfigError("lattice.dims takes at most three entries")
        dims = tuple(dims) + (1,) * (3 - len(dims))
        geometry = LatticeGeometry(dims, v.get("lattice.spacing_m", DEFAULT_SPACING))
        geometry.check_params(params)
        detector = DetectorBox(
            (v.get("detector.x_m", 0.0), v.get("detector.y_m", 0.0), v.get("detector.z0_m", 0.01)),
            (v.get("detector.dx_m", 0.01), v.get("detector.dy_m", 0.01), v.get("detector.dz_m", 0.002)),
            v.get("detector.kappa", 1.0),
        )
        kind = v.get("state.kind", "unit")
        if kind not in STATE_KINDS:
            raise ConfigError(f"state.kind must be one of {STATE_KINDS}, got {kind!r}")
        state = StateSpec(
            kind,
            v.get("state.occupations"),
            v.get("state.alpha", 1.0),
            v.get("state.beta", 1.0),
            v.get("state.gamma", 1.0),
            v.get("state.n_particles"),
        )
        state.build(geometry)
        axis = v.get("sweep.axis", "none")
        if axis not in SWEEP_AXES:
            raise ConfigError(f"sweep.axis must be one of {SWEEP_AXES}, got {axis!r}")
        sweep = Sweep(axis, v.get("sweep.start_m", 0.0), v.get("sweep.stop_m", 0.0), v.get("sweep.num", 1))
        if axis != "none" and sweep.num < 1:
            raise ConfigError("sweep.num must be positive")
        mode = v.get("mode", "exact")
        if mode not in ("exact", "far_field"):
            raise ConfigError(f"mode must be exact or far_field, got {mode!r}")
        scenario = Scenario(
            v.get("name", "scenario"), mode, params, geometry, state, detector,
            v.get("detector.pair", False), sweep, v.get("counting.negligible", 1e-6),
        )
        for value in sweep.values() if axis != "none" else ():
            scenario.at(value)  # validates every swept detector
        swept_z0 = sweep.values() if axis == "z0" else [detector.z0]
        if min(swept_z0) <= 0:
            raise ConfigError("detector.z0_m must be positive (the detector sits below the lattice)")
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return scenario


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return scenario_from_dict(parse_text(fh.read()))

