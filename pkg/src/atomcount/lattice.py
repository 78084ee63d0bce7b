"""Lattice geometries, physical constants and initial-state builders."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Rb-87
RB87_MASS = 1.443e-25
HBAR = 1.0546e-34
G_EARTH = 9.81
# back-solved so that the expanded width is 0.8 mm after a 1 cm fall
DEFAULT_WANNIER_WIDTH = 4.13e-8
DEFAULT_SPACING = 6.0e-6


@dataclass(frozen=True)
class PhysicalParams:
    mass: float = RB87_MASS
    hbar: float = HBAR
    g: float = G_EARTH
    wannier_width: float = DEFAULT_WANNIER_WIDTH

    def __post_init__(self):
        for name in ("mass", "hbar", "g", "wannier_width"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class LatticeGeometry:
    """Rectangular lattice of ``nx * ny * nz`` sites centred on the origin.

    Sites are ordered row-major with x fastest: index = ix + nx*(iy + ny*iz).
    """

    dims: tuple[int, int, int]
    spacing: float = DEFAULT_SPACING

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if len(dims) != 3 or any(n < 1 for n in dims):
            raise ValueError(f"dims must be three positive integers, got {self.dims!r}")
        if not np.isfinite(self.spacing) or self.spacing <= 0:
            raise ValueError(f"spacing must be positive, got {self.spacing!r}")
        object.__setattr__(self, "dims", dims)

    @property
    def n_sites(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def ndim(self) -> int:
        """Number of axes with more than one site."""
        return sum(n > 1 for n in self.dims)

    def check_params(self, params: PhysicalParams) -> None:
        if not params.wannier_width < self.spacing / 4:
            raise ValueError(
                "Wannier functions overlap: need wannier_width < spacing/4 "
                f"({params.wannier_width:g} >= {self.spacing / 4:g})"
            )


def site_positions(geometry: LatticeGeometry) -> np.ndarray:
    """Return the ``(N, 3)`` array of site positions in metres."""
    axes = [(np.arange(n) - (n - 1) / 2.0) * geometry.spacing for n in geometry.dims]
    # indexing="ij" on (z, y, x) then reversing columns keeps x fastest
    zz, yy, xx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])


def site_index(geometry: LatticeGeometry, ix: int, iy: int = 0, iz: int = 0) -> int:
    nx, ny, _ = geometry.dims
    return ix + nx * (iy + ny * iz)


def _grid_indices(geometry: LatticeGeometry) -> np.ndarray:
    nx, ny, nz = geometry.dims
    iz, iy, ix = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    return np.column_stack([ix.ravel(), iy.ravel(), iz.ravel()])


# ---------------------------------------------------------------------------
# many-body states


@dataclass(frozen=True)
class CoherentProduct:
    """Product of on-site coherent states with amplitudes ``alpha``."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).ravel()
        if not np.all(np.isfinite(a)):
            raise ValueError("coherent amplitudes must be finite")
        object.__setattr__(self, "amplitudes", a)

    @property
    def n_sites(self) -> int:
        return self.amplitudes.size

    @property
    def mean_number(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


@dataclass(frozen=True)
class FockPattern:
    """Hard-core Fock state with occupations in {0, 1}."""

    occupations: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.occupations).ravel()
        if n.size == 0 or not np.all((n == 0) | (n == 1)):
            raise ValueError("occupations must be a non-empty 0/1 vector")
        object.__setattr__(self, "occupations", n.astype(np.int64))

    @property
    def n_sites(self) -> int:
        return self.occupations.size

    @property
    def n_particles(self) -> int:
        return int(self.occupations.sum())

    @property
    def occupied(self) -> np.ndarray:
        return np.flatnonzero(self.occupations)


@dataclass(frozen=True)
class SymmetricSuperposition:
    """Equal-weight superposition of every hard-core pattern with ``n_particles``
    atoms on ``n_sites`` sites."""

    n_particles: int
    n_sites: int

    def __post_init__(self):
        if not 0 < self.n_particles <= self.n_sites:
            raise ValueError(
                f"need 0 < n_particles <= n_sites, got {self.n_particles}, {self.n_sites}"
            )


ManyBodyState = CoherentProduct | FockPattern | SymmetricSuperposition


def unit_filling(geometry: LatticeGeometry) -> FockPattern:
    return FockPattern(np.ones(geometry.n_sites, dtype=np.int64))


def make_pattern(kind: str, geometry: LatticeGeometry) -> FockPattern:
    """Occupation patterns: ``unit``, ``checkerboard``, ``striped`` or ``block``.

    * checkerboard: site occupied when the sum of its grid indices is even.
    * striped: every second line along the first non-trivial axis is occupied.
      In 1D this degrades to pairs, ``1,1,0,0,...``.
    * block: 1D only; first half of the chain occupied, second half empty.
    """
    idx = _grid_indices(geometry)
    if kind == "unit":
        return unit_filling(geometry)
    if kind == "checkerboard":
        return FockPattern((idx.sum(axis=1) % 2 == 0).astype(np.int64))
    if kind == "striped":
        axes = [a for a, n in enumerate(geometry.dims) if n > 1]
        if len(axes) >= 2:
            # lines run along the first axis; alternate along the second
            return FockPattern((idx[:, axes[1]] % 2 == 0).astype(np.int64))
        if len(axes) == 1:
            return FockPattern(((idx[:, axes[0]] // 2) % 2 == 0).astype(np.int64))
        raise ValueError("striped pattern needs at least two sites along one axis")
    if kind == "block":
        if geometry.ndim != 1 or geometry.n_sites % 2:
            raise ValueError(
                f"block pattern needs a 1D chain with an even number of sites, got dims {geometry.dims}"
            )
        n = geometry.n_sites
        occ = np.zeros(n, dtype=np.int64)
        occ[: n // 2] = 1
        return FockPattern(occ)
    raise ValueError(f"unknown pattern kind {kind!r}")


def homogeneous_coherent(geometry: LatticeGeometry, alpha: complex) -> CoherentProduct:
    return CoherentProduct(np.full(geometry.n_sites, alpha, dtype=complex))


def make_supersolid(geometry: LatticeGeometry, beta: complex, gamma: complex) -> CoherentProduct:
    """Alternating amplitudes on the two sublattices.

    Sites are labelled 1-based in the alpha_{2i} = beta, alpha_{2i-1} = gamma
    convention, so 0-based index k with k odd gets beta and k even gets gamma.
    In higher dimensions parity is that of the summed grid indices.
    """
    idx = _grid_indices(geometry)
    odd = idx.sum(axis=1) % 2 == 1
    amps = np.where(odd, complex(beta), complex(gamma))
    return CoherentProduct(amps)


@dataclass(frozen=True)
class DetectorBox:
    """Axis-aligned detector with efficiency factor ``kappa``.

    ``center`` is measured from the lattice centre with z pointing along the
    fall, so a detector at ``(0, 0, z0)`` sits a height ``z0`` below the lattice.
    """

    center: tuple[float, float, float]
    edges: tuple[float, float, float]
    kappa: float = 1.0

    def __post_init__(self):
        center = tuple(float(c) for c in self.center)
        edges = tuple(float(e) for e in self.edges)
        if len(center) != 3 or len(edges) != 3:
            raise ValueError("center and edges need three components")
        if not all(np.isfinite(center)):
            raise ValueError(f"detector center must be finite, got {center}")
        if not all(np.isfinite(e) and e > 0 for e in edges):
            raise ValueError(f"detector edges must be positive, got {edges}")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in [0, 1], got {self.kappa}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "edges", edges)

    @property
    def z0(self) -> float:
        return self.center[2]

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - 0.5 * np.asarray(self.edges)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + 0.5 * np.asarray(self.edges)

    def moved(self, **changes) -> "DetectorBox":
        """Copy with selected fields replaced; ``x``, ``y``, ``z0``, ``dx``, ``dy``,
        ``dz`` address single components."""
        center = list(self.center)
        edges = list(self.edges)
        for key, axis in (("x", 0), ("y", 1), ("z0", 2)):
            if key in changes:
                center[axis] = changes.pop(key)
        for key, axis in (("dx", 0), ("dy", 1), ("dz", 2)):
            if key in changes:
                edges[axis] = changes.pop(key)
        kappa = changes.pop("kappa", self.kappa)
        if changes:
            raise TypeError(f"unknown detector fields {sorted(changes)}")
        return DetectorBox(tuple(center), tuple(edges), kappa)
