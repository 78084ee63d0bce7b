"""Free fall of Wannier wave packets and the detector correlation matrix.

All coordinates used for the integrals are co-falling: the z axis points
along gravity and is measured from the point the lattice centre has fallen
to at time ``t``. A mode launched from site ``r_i`` is then a Gaussian centred
at ``r_i`` whose width is ``sqrt(width**2 + wannier_width**2)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import wofz

from .lattice import DetectorBox, LatticeGeometry, PhysicalParams, site_positions
from .quadrature import adaptive_quad, adaptive_quad_complex

SQRT_PI = np.sqrt(np.pi)


class InvariantViolation(RuntimeError):
    """A computed object broke one of its mathematical invariants."""


@dataclass(frozen=True)
class ExpansionContext:
    t: float
    width: float
    fall: float

    @classmethod
    def at_time(cls, t: float, params: PhysicalParams) -> "ExpansionContext":
        return cls(t=t, width=expanded_width(t, params), fall=0.5 * params.g * t * t)

    @classmethod
    def at_distance(cls, z0: float, params: PhysicalParams) -> "ExpansionContext":
        return cls.at_time(time_of_flight(z0, params), params)


def time_of_flight(z0: float, params: PhysicalParams) -> float:
    """Time for the cloud centre to fall a distance ``z0``."""
    if not np.isfinite(z0) or z0 <= 0:
        raise ValueError(f"fall distance must be positive, got {z0!r}")
    return float(np.sqrt(2.0 * z0 / params.g))


def expanded_width(t: float, params: PhysicalParams) -> float:
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t!r}")
    return params.hbar * t / (params.mass * params.wannier_width)


# ---------------------------------------------------------------------------
# one-dimensional Gaussian-times-phase integrals


def _tail(u, y):
    # exp(-u^2 - 2iuy) w(-y + iu), finite and bounded for u >= 0
    return np.exp(-u * u - 2j * u * y) * wofz(-y + 1j * u)


def _erf_difference(ua, ub, y):
    """``exp(-y^2) * (erf(ub + iy) - erf(ua + iy))`` without overflow."""
    ua, ub, y = np.broadcast_arrays(
        np.asarray(ua, dtype=float), np.asarray(ub, dtype=float), np.asarray(y, dtype=float)
    )
    ta = _tail(np.abs(ua), y)
    tb = _tail(np.abs(ub), y)
    both_pos = ua >= 0
    both_neg = ub <= 0
    mixed = ~(both_pos | both_neg)
    out = np.where(both_pos, ta - tb, np.conj(tb - ta))
    return np.where(mixed, 2.0 * np.exp(-y * y) - tb - np.conj(ta), out)


def centered_segment(lo, hi, w, q):
    """Integral of ``exp(-x^2/w^2 - i q x)`` over ``[lo, hi]`` (vectorised)."""
    w = np.asarray(w, dtype=float)
    y = 0.5 * np.asarray(q, dtype=float) * w
    return 0.5 * SQRT_PI * w * _erf_difference(np.asarray(lo) / w, np.asarray(hi) / w, y)


def gaussian_phase_segment(a: float, b: float, c: float, w: float, q: float) -> complex:
    """Closed form of the integral of ``exp(-(x-c)^2/w^2) exp(-i q x)`` over ``[a, b]``."""
    vals = (a, b, c, w, q)
    if not all(np.isfinite(v) for v in vals):
        raise ValueError(f"non-finite input {vals}")
    if not a < b:
        raise ValueError(f"need a < b, got {a}, {b}")
    if w <= 0:
        raise ValueError(f"need w > 0, got {w}")
    return complex(np.exp(-1j * q * c) * centered_segment(a - c, b - c, w, q))


def quadrature_segment_oracle(a, b, c, w, q, tol=1e-12, max_intervals=20000, path="contour") -> complex:
    """Same integral as :func:`gaussian_phase_segment` by adaptive Gauss-Kronrod.

    ``path="real"`` integrates along the real axis. Its tolerance is relative
    to the integral of the bare Gaussian envelope, which stays meaningful
    when oscillations make the result itself tiny but cannot resolve results
    far below that scale. ``path="contour"`` (default) shifts the segment
    by ``-i q w^2 / 2`` into the complex plane, where the horizontal leg is a
    real Gaussian and the two vertical legs barely oscillate, so the
    tolerance applies to the summed magnitudes of the three legs and small
    results keep their relative accuracy. Both run in extended precision.
    """
    if not a < b or w <= 0 or tol <= 0:
        raise ValueError("need a < b, w > 0, tol > 0")
    if path not in ("real", "contour"):
        raise ValueError(f"unknown path {path!r}")
    # quadrature runs on the centred variable; the phase exp(-iqc) is exact
    lo, hi = a - c, b - c
    if path == "contour":
        return complex(np.exp(-1j * q * c) * _contour_segment(lo, hi, w, q, tol, max_intervals))
    # extended precision keeps the tolerance from underflowing far in the tails
    scale, _ = adaptive_quad(lambda x: np.exp(-(x / w) ** 2), lo, hi, rel_tol=1e-6, dtype=np.longdouble)
    n_osc = abs(q) * (hi - lo) / np.pi
    splits = int(min(max(1, n_osc), 2000))
    val, _ = adaptive_quad_complex(
        lambda x: np.exp(-(x / w) ** 2 - 1j * q * x),
        lo, hi, rel_tol=0.0, abs_tol=tol * scale,
        initial_splits=splits, max_intervals=max_intervals, dtype=np.longdouble,
    )
    return complex(np.exp(-1j * q * c) * val)


def _contour_segment(lo, hi, w, q, tol, max_intervals):
    ld = np.longdouble
    w, q = ld(w), ld(q)
    y = q * w * w / 2
    horizontal, _ = adaptive_quad(
        lambda x: np.exp(-(x / w) ** 2), lo, hi, rel_tol=tol, dtype=ld, max_intervals=max_intervals
    )
    horizontal *= np.exp(-(q * w) ** 2 / 4)
    if y == 0:
        return complex(horizontal)

    def vertical(x0):
        # z = x0 - i s for s between 0 and y, dz = -i ds
        x0 = ld(x0)

        def f(s):
            return np.exp(-(x0 / w) ** 2 + (s / w) ** 2 - q * s + 1j * (2 * x0 * s / w**2 - q * x0))

        s0, s1 = (ld(0), y) if y > 0 else (y, ld(0))
        sign = 1 if y > 0 else -1
        mag, _ = adaptive_quad(lambda s: np.abs(f(s)), s0, s1, rel_tol=1e-6, dtype=ld,
                               max_intervals=max_intervals)
        n_osc = abs(2 * x0 * y) / (np.pi * w**2)
        val, _ = adaptive_quad_complex(
            f, s0, s1, rel_tol=0.0, abs_tol=tol * mag, dtype=ld, max_intervals=max_intervals,
            initial_splits=int(min(max(1, n_osc), 2000)),
        )
        return -1j * sign * val

    return vertical(lo) + complex(horizontal) - vertical(hi)


# ---------------------------------------------------------------------------
# correlation matrix


@dataclass(frozen=True)
class CorrelationMatrix:
    entries: np.ndarray
    mode: str
    context: ExpansionContext
    detector: DetectorBox

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def check(self, herm_tol=1e-12, psd_tol=1e-10) -> "CorrelationMatrix":
        A = self.entries
        kappa = self.detector.kappa
        if np.max(np.abs(A - A.conj().T), initial=0.0) > herm_tol:
            raise InvariantViolation("correlation matrix is not Hermitian")
        d = np.diag(A)
        if np.max(np.abs(d.imag), initial=0.0) > herm_tol:
            raise InvariantViolation("correlation matrix diagonal is not real")
        if np.any(d.real < -herm_tol) or np.any(d.real > kappa + herm_tol):
            raise InvariantViolation("diagonal entries outside [0, kappa]")
        if np.linalg.eigvalsh(A).min(initial=np.inf) < -psd_tol:
            raise InvariantViolation("correlation matrix is not positive semidefinite")
        return self


def _positions(geometry) -> np.ndarray:
    if isinstance(geometry, LatticeGeometry):
        return site_positions(geometry)
    pos = np.asarray(geometry, dtype=float)
    if pos.ndim != 2 or pos.shape[1] != 3:
        raise ValueError("positions must have shape (N, 3)")
    return pos


def _window(detector: DetectorBox, ctx: ExpansionContext):
    shift = np.array([0.0, 0.0, ctx.fall])
    return detector.lower - shift, detector.upper - shift


def _exact_entries(pos, lo, hi, ctx, params):
    omega = params.wannier_width
    w2 = ctx.width**2 + omega**2
    w = np.sqrt(w2)
    n = len(pos)
    iu, ju = np.triu_indices(n)
    A = np.ones(iu.size, dtype=complex)
    for ax in range(3):
        a, b = pos[iu, ax], pos[ju, ax]
        c = 0.5 * (a + b)
        q = (a - b) * ctx.width / (omega * w2)
        seg = centered_segment(lo[ax] - c, hi[ax] - c, w, q)
        A *= np.exp(-((a - b) ** 2) / (4 * w2)) * seg / (SQRT_PI * w)
    out = np.zeros((n, n), dtype=complex)
    out[iu, ju] = A
    out[ju, iu] = np.conj(A)
    out[np.diag_indices(n)] = out.diagonal().real
    return out


def _far_field_entries(pos, lo, hi, ctx, params):
    omega = params.wannier_width
    wt = ctx.width
    n = len(pos)
    A = np.ones((n, n), dtype=complex)
    for ax in range(3):
        a = pos[:, ax][:, None]
        b = pos[:, ax][None, :]
        q = (a - b) / (omega * wt)
        # envelope centred on site i, phase referenced to the fall point
        seg = np.exp(-1j * q * a) * centered_segment(lo[ax] - a, hi[ax] - a, wt, q)
        A = A * seg / (SQRT_PI * wt)
    A = 0.5 * (A + A.conj().T)
    A[np.diag_indices(n)] = A.diagonal().real
    return A


def correlation_matrix(
    geometry,
    detector: DetectorBox,
    params: PhysicalParams,
    mode: str = "exact",
    t: float | None = None,
    check: bool = True,
) -> CorrelationMatrix:
    """Detector overlap matrix ``kappa * integral of conj(phi_i) phi_j`` over the box.

    ``geometry`` is a :class:`LatticeGeometry` or an explicit ``(N, 3)`` array of
    site positions. The detection time defaults to the arrival time of the
    cloud centre at the detector plane ``z0 = detector.center[2]``.
    """
    pos = _positions(geometry)
    if isinstance(geometry, LatticeGeometry):
        geometry.check_params(params)
    ctx = ExpansionContext.at_time(
        time_of_flight(detector.z0, params) if t is None else t, params
    )
    if ctx.width <= 0:
        raise ValueError("expanded width must be positive (t > 0)")
    lo, hi = _window(detector, ctx)
    if mode == "exact":
        entries = _exact_entries(pos, lo, hi, ctx, params)
    elif mode == "far_field":
        entries = _far_field_entries(pos, lo, hi, ctx, params)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    result = CorrelationMatrix(detector.kappa * entries, mode, ctx, detector)
    return result.check() if check else result


# ---------------------------------------------------------------------------
# explicit mode functions, used by the quadrature reference


def mode_axis_factor(x, centre, ctx: ExpansionContext, params: PhysicalParams):
    """One Cartesian factor of the propagated Wannier mode.

    The product of the three factors is the full mode; the factors carry
    ``(pi^(1/4) sqrt(i*width + omega))^-1`` each.
    """
    omega = params.wannier_width
    wt = ctx.width
    w2 = wt**2 + omega**2
    d2 = (np.asarray(x) - centre) ** 2
    pref = 1.0 / (np.pi**0.25 * np.sqrt(1j * wt + omega))
    return pref * np.exp(-d2 / (2 * w2)) * np.exp(-1j * d2 * wt / (2 * omega * w2))


def gravity_phase(ctx: ExpansionContext, params: PhysicalParams) -> complex:
    """Site-independent phase picked up during the fall."""
    m, g, t = params.mass, params.g, ctx.t
    return complex(np.exp(-1j * m * g**2 * t**3 / (24 * params.hbar)))


def quadrature_correlation_matrix(
    geometry, detector: DetectorBox, params: PhysicalParams, tol=1e-13, global_phase=True
) -> np.ndarray:
    """Reference ``A`` from tensorised adaptive quadrature of the mode products."""
    pos = _positions(geometry)
    ctx = ExpansionContext.at_distance(detector.z0, params)
    lo, hi = _window(detector, ctx)
    phase = gravity_phase(ctx, params) if global_phase else 1.0
    w = np.sqrt(ctx.width**2 + params.wannier_width**2)
    n = len(pos)
    A = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            val = detector.kappa
            for ax in range(3):
                ci, cj = pos[i, ax], pos[j, ax]
                # the fall phase rides on the z factor of each mode
                pi_ = phase if ax == 2 else 1.0

                def f(x, ci=ci, cj=cj, pi_=pi_):
                    return np.conj(pi_ * mode_axis_factor(x, ci, ctx, params)) * (
                        pi_ * mode_axis_factor(x, cj, ctx, params)
                    )

                q = abs(ci - cj) * ctx.width / (params.wannier_width * w**2)
                splits = int(min(max(1, q * (hi[ax] - lo[ax]) / np.pi), 4000))
                # envelope is far below tol outside +-40 w
                a_ax = max(lo[ax], min(ci, cj) - 40 * w)
                b_ax = min(hi[ax], max(ci, cj) + 40 * w)
                if a_ax >= b_ax:
                    val = 0.0
                    break
                seg, _ = adaptive_quad_complex(
                    f, a_ax, b_ax, rel_tol=0.0, abs_tol=tol, initial_splits=splits
                )
                val = val * seg
            A[i, j] = val
    return A
