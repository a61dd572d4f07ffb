"""Chart sizes, boundary radii, constant-total-power slices and size ratios.

Grids are laid in alpha-beta-gamma (Clarke) coordinates by default.  The
Clarke map is orthonormal, so areas and volumes are unchanged, but phase
current limits such as |P[i]| <= 0.25 then no longer coincide with grid
planes; in nominal coordinates those ties inflate a 201^3 grid volume by
about 3 %.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import ndimage

from ._parallel import pmap
from .errors import (
    DegenerateChartError,
    InvalidGridError,
    InvalidInputError,
    UnboundedDirectionError,
)
from .feasibility import capacity_vectors, feasible_mask
from .model import (
    CLARKE,
    NEUTRAL_GAIN,
    ConverterDesign,
    DirectionSpec,
    current_magnitudes,
    unit_clarke_direction,
)

DEFAULT_AREA_GRID = 801
DEFAULT_VOLUME_GRID = 201
DEFAULT_ANGLES = 720
DEFAULT_SPHERE = (180, 360)

_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class GridSpec:
    resolution: int = DEFAULT_AREA_GRID
    half_width: float = 1.0

    def __post_init__(self) -> None:
        if int(self.resolution) != self.resolution or self.resolution < 21 or self.resolution % 2 == 0:
            raise InvalidGridError(f"grid resolution must be an odd integer >= 21, got {self.resolution}")
        if not (math.isfinite(self.half_width) and self.half_width > 0):
            raise InvalidGridError("grid half width must be positive")

    @property
    def spacing(self) -> float:
        return self.half_width / (self.resolution // 2)

    @property
    def axis(self) -> np.ndarray:
        half = self.resolution // 2
        return np.arange(-half, half + 1) * self.spacing


@dataclass(frozen=True)
class ChartMetrics:
    value: float
    kind: str  # "cca" or "ccv"
    method: str  # "grid" or "boundary-integral"
    resolution: tuple[int, ...]

    @property
    def cca(self) -> float | None:
        return self.value if self.kind == "cca" else None

    @property
    def ccv(self) -> float | None:
        return self.value if self.kind == "ccv" else None


@dataclass(frozen=True)
class BoundaryTrace:
    """Boundary radius samples along one family of rays.

    ``angles`` are psi for planar and cylindrical traces and theta for
    spherical traces (which then share the fixed ``psi``).  Cylindrical rays
    with no feasible point carry ``nan``.
    """

    mode: str
    angles: np.ndarray
    radii: np.ndarray
    label: str
    psi: float | None = None
    p_total: float | None = None

    def powers(self) -> np.ndarray:
        """Boundary points as per-phase powers, shape (n, 3)."""
        return trace_points(self) @ CLARKE

    def clarke_points(self) -> np.ndarray:
        return trace_points(self)


@dataclass(frozen=True)
class IsolatedFeature:
    kind: str  # "point" or "segment"
    wire: int
    start: tuple[float, float]
    end: tuple[float, float]


@dataclass
class SliceMask:
    """Feasibility of a constant-total-power plane, indexed ``mask[i, j]``
    at ``(alpha, beta) = (axis[i], axis[j])``."""

    p_total: float
    axis: np.ndarray
    mask: np.ndarray
    components: int
    holes: int
    features: list[IsolatedFeature] = field(default_factory=list)

    @property
    def spacing(self) -> float:
        return float(self.axis[1] - self.axis[0])

    @property
    def cca(self) -> float:
        return float(self.mask.sum()) * self.spacing**2


# ---------------------------------------------------------------------------
# rays through the origin
# ---------------------------------------------------------------------------


def _ray_radii(design: ConverterDesign, c: np.ndarray) -> np.ndarray:
    """Largest feasible radius for rays whose unit-radius wire currents are ``c``.

    Currents grow linearly along a ray, so each allocation admits
    ``r = min_i cap_i / c_i`` and the chart boundary is the best allocation.
    """
    c = np.atleast_2d(c)
    if design.is_idealised:
        total = c.sum(axis=-1)
        with np.errstate(divide="ignore"):
            r = np.where(total > 0, design.base_current / total, np.inf)
    else:
        caps, _ = capacity_vectors(design)
        r = np.empty(len(c))
        fast = np.zeros(len(c), dtype=bool)
        if design.reconfigurable and design.m == 4:
            # every wire needs its own leg, so the best pairing is sorted-to-sorted
            fast = np.all(c > 0, axis=-1)
            alpha = design.base_current * np.sort(np.asarray(design.legs))
            r[fast] = np.min(alpha / np.sort(c[fast], axis=-1), axis=-1)
        rest = np.flatnonzero(~fast)
        step = max(1, _CHUNK_ELEMENTS // (4 * len(caps)))
        for lo in range(0, len(rest), step):
            idx = rest[lo : lo + step]
            cc = c[idx][:, None, :]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(cc > 0, caps[None, :, :] / cc, np.inf)
            r[idx] = ratio.min(axis=-1).max(axis=-1)
    if np.any(np.isinf(r)):
        raise UnboundedDirectionError("a ray carries no current on any wire")
    return r


def _ray_currents(psi: Any, theta: Any, v0: float) -> np.ndarray:
    return current_magnitudes(unit_clarke_direction(psi, theta) @ CLARKE, v0)


def _cylindrical_radius(design: ConverterDesign, psi: float, p_total: float, v0: float) -> float:
    """Outer boundary radius in a constant-total-power plane.

    Phase powers are affine in r and the neutral current is linear, so each
    allocation is feasible on an interval of r; the answer is the largest
    interval end over allocations (``nan`` if none is feasible).
    """
    base = np.full(3, p_total / 3.0)
    slope = np.array([math.cos(psi), math.sin(psi)]) @ CLARKE[:2]
    if design.is_idealised:
        return _idealised_cylindrical(base, slope, design.base_current * v0)

    caps, _ = capacity_vectors(design)
    pcap = caps[:, :3] * v0
    lo = np.zeros(len(caps))
    hi = np.full(len(caps), np.inf)
    ok = np.ones(len(caps), dtype=bool)
    for i in range(3):
        if slope[i] == 0.0:
            ok &= abs(base[i]) <= pcap[:, i]
            continue
        a = (-pcap[:, i] - base[i]) / slope[i]
        b = (pcap[:, i] - base[i]) / slope[i]
        lo = np.maximum(lo, np.minimum(a, b))
        hi = np.minimum(hi, np.maximum(a, b))
    hi = np.minimum(hi, caps[:, 3] * v0 / NEUTRAL_GAIN)
    ok &= lo <= hi
    if not ok.any():
        return math.nan
    return float(hi[ok].max())


def _idealised_cylindrical(base: np.ndarray, slope: np.ndarray, limit: float) -> float:
    # f(r) = sum |base + r slope| + gain r is convex piecewise linear
    def f(r: float) -> float:
        return float(np.abs(base + r * slope).sum() + NEUTRAL_GAIN * r)

    knots = [0.0]
    for b, s in zip(base, slope):
        if s != 0.0 and -b / s > 0.0:
            knots.append(-b / s)
    knots = sorted(set(knots))
    inside = [t for t in knots if f(t) <= limit]
    if not inside:
        return math.nan
    t = inside[-1]
    nxt = [k for k in knots if k > t]
    probe = nxt[0] if nxt else t + 1.0
    rate = (f(probe) - f(t)) / (probe - t)
    return t + (limit - f(t)) / rate


def boundary_radius(design: ConverterDesign, d: DirectionSpec, v0: float = 1.0) -> float:
    """Exact maximal feasible radius along ``d``."""
    if d.mode == "cylindrical":
        return _cylindrical_radius(design, d.psi, d.p_total, v0)
    return float(_ray_radii(design, _ray_currents(d.psi, d.polar, v0))[0])


def zero_power_loci(psi: float, wire: int) -> list[float]:
    """Polar angles in [0, pi] where the wire current vanishes at azimuth ``psi``.

    Phase ``i`` carries ``r (A sin(theta) + B cos(theta))`` with B > 0, which
    has exactly one root in (0, pi).  The neutral vanishes on the balanced
    axis, theta in {0, pi}.
    """
    if wire == 4:
        return [0.0, math.pi]
    if wire not in (1, 2, 3):
        raise InvalidInputError(f"wire must be in 1..4, got {wire}")
    col = CLARKE[:, wire - 1]
    a = col[0] * math.cos(psi) + col[1] * math.sin(psi)
    return [math.atan2(col[2], -a)]


def boundary_trace(
    design: ConverterDesign,
    mode: str = "planar",
    n: int = DEFAULT_ANGLES,
    psi: float = 0.0,
    p_total: float | None = None,
    v0: float = 1.0,
) -> BoundaryTrace:
    """Sample the boundary radius over a full sweep.

    Planar and cylindrical sweeps cover psi in [0, 2 pi); spherical sweeps
    cover theta in [0, pi] at fixed ``psi`` and also sample the zero-power
    loci exactly, where lower-dimensional parts of the chart can reach out
    beyond the neighbouring rays.
    """
    if n < 4:
        raise InvalidInputError("a boundary trace needs at least 4 samples")
    label = design.name
    if mode == "planar":
        angles = np.arange(n) * (2.0 * math.pi / n)
        radii = _ray_radii(design, _ray_currents(angles, math.pi / 2.0, v0))
        return BoundaryTrace(mode, angles, radii, label)
    if mode == "cylindrical":
        if p_total is None:
            raise InvalidInputError("cylindrical traces need p_total")
        angles = np.arange(n) * (2.0 * math.pi / n)
        radii = np.array([_cylindrical_radius(design, a, p_total, v0) for a in angles])
        return BoundaryTrace(mode, angles, radii, label, p_total=p_total)
    if mode == "spherical":
        psi = float(psi) % (2.0 * math.pi)
        loci = {}
        for wire in (1, 2, 3):
            for t in zero_power_loci(psi, wire):
                loci.setdefault(t, []).append(wire)
        angles = np.unique(np.concatenate([np.linspace(0.0, math.pi, n), list(loci)]))
        powers = unit_clarke_direction(psi, angles) @ CLARKE
        for k, t in enumerate(angles):
            for wire in loci.get(float(t), ()):
                powers[k, wire - 1] = 0.0
        radii = _ray_radii(design, current_magnitudes(powers, v0))
        return BoundaryTrace(mode, angles, radii, label, psi=psi)
    raise InvalidInputError(f"unknown mode {mode!r}")


def trace_points(trace: BoundaryTrace) -> np.ndarray:
    """Boundary points in alpha-beta-gamma coordinates, shape (n, 3)."""
    r = trace.radii
    if trace.mode == "planar":
        return r[:, None] * unit_clarke_direction(trace.angles)
    if trace.mode == "cylindrical":
        gamma = np.full_like(r, trace.p_total / math.sqrt(3.0))
        return np.stack([r * np.cos(trace.angles), r * np.sin(trace.angles), gamma], axis=-1)
    return r[:, None] * unit_clarke_direction(trace.psi, trace.angles)


# ---------------------------------------------------------------------------
# chart sizes
# ---------------------------------------------------------------------------


def cca_boundary_integral(design: ConverterDesign, n_angles: int = DEFAULT_ANGLES, v0: float = 1.0) -> ChartMetrics:
    """Standalone chart area from the polar area formula over midpoint angles.

    Standalone charts are star-shaped about the origin, so the area is
    one half of the integral of r^2 over the angle.
    """
    if n_angles < 90:
        raise InvalidInputError("n_angles must be >= 90")
    dpsi = 2.0 * math.pi / n_angles
    psi = (np.arange(n_angles) + 0.5) * dpsi
    r = _ray_radii(design, _ray_currents(psi, math.pi / 2.0, v0))
    return ChartMetrics(0.5 * float(np.sum(r * r)) * dpsi, "cca", "boundary-integral", (n_angles,))


def ccv_spherical_integral(
    design: ConverterDesign, n_theta: int = DEFAULT_SPHERE[0], n_psi: int = DEFAULT_SPHERE[1], v0: float = 1.0
) -> ChartMetrics:
    if n_theta < 90 or n_psi < 90:
        raise InvalidInputError("n_theta and n_psi must be >= 90")
    dtheta = math.pi / n_theta
    dpsi = 2.0 * math.pi / n_psi
    theta = (np.arange(n_theta) + 0.5) * dtheta
    psi = (np.arange(n_psi) + 0.5) * dpsi

    def band(t: float) -> float:
        r = _ray_radii(design, _ray_currents(psi, t, v0))
        return float(np.sum(r**3)) * math.sin(t)

    total = math.fsum(pmap(band, theta))
    return ChartMetrics(total * dtheta * dpsi / 3.0, "ccv", "boundary-integral", (n_theta, n_psi))


def _plane_powers(axis: np.ndarray, coords: str, p_total: float = 0.0) -> tuple[np.ndarray, float]:
    """Powers over a 2D grid in a constant-total plane and the area per cell."""
    a, b = np.meshgrid(axis, axis, indexing="ij")
    h = float(axis[1] - axis[0])
    if coords == "clarke":
        powers = np.stack([a, b], axis=-1) @ CLARKE[:2]
        if p_total:
            powers = powers + p_total / 3.0
        return powers, h * h
    if coords == "nominal":
        # grid over (P1, P2); the plane's area element is sqrt(3) dP1 dP2
        return np.stack([a, b, p_total - a - b], axis=-1), h * h * math.sqrt(3.0)
    raise InvalidInputError(f"unknown coordinates {coords!r}")


def cca_grid(
    design: ConverterDesign, grid: GridSpec | int = DEFAULT_AREA_GRID, coords: str = "clarke", v0: float = 1.0
) -> ChartMetrics:
    """Standalone chart area as cell area times the count of feasible nodes."""
    if not isinstance(grid, GridSpec):
        grid = GridSpec(grid)
    powers, cell = _plane_powers(grid.axis, coords)
    count = int(feasible_mask(design, powers, v0).sum())
    return ChartMetrics(count * cell, "cca", "grid", (grid.resolution, grid.resolution))


def ccv_grid(
    design: ConverterDesign, grid: GridSpec | int = DEFAULT_VOLUME_GRID, coords: str = "clarke", v0: float = 1.0
) -> ChartMetrics:
    """Interconnected chart volume from a 3D grid, evaluated layer by layer."""
    if not isinstance(grid, GridSpec):
        grid = GridSpec(grid)
    if coords not in ("clarke", "nominal"):
        raise InvalidInputError(f"unknown coordinates {coords!r}")
    axis = grid.axis
    a, b = np.meshgrid(axis, axis, indexing="ij")

    def layer(z: float) -> int:
        if coords == "clarke":
            pts = np.stack([a, b, np.full_like(a, z)], axis=-1) @ CLARKE
        else:
            pts = np.stack([a, b, np.full_like(a, z)], axis=-1)
        return int(feasible_mask(design, pts, v0).sum())

    count = sum(pmap(layer, axis))
    n = grid.resolution
    return ChartMetrics(count * grid.spacing**3, "ccv", "grid", (n, n, n))


def size_ratio(metric_a: ChartMetrics | float, metric_b: ChartMetrics | float, kind: str | None = None) -> float:
    """Scale factor by which design ``a`` must grow to match design ``b``."""
    if isinstance(metric_a, ChartMetrics) and isinstance(metric_b, ChartMetrics):
        if metric_a.kind != metric_b.kind:
            raise InvalidInputError("cannot compare an area with a volume")
        kind = kind or metric_a.kind
    kinds = {"area": 2, "cca": 2, "volume": 3, "ccv": 3}
    if kind not in kinds:
        raise InvalidInputError(f"kind must be 'area' or 'volume', got {kind!r}")
    a = metric_a.value if isinstance(metric_a, ChartMetrics) else float(metric_a)
    b = metric_b.value if isinstance(metric_b, ChartMetrics) else float(metric_b)
    if not a > 0:
        raise DegenerateChartError(f"reference chart has zero measure ({a!r})")
    return (b / a) ** (1.0 / kinds[kind])


# ---------------------------------------------------------------------------
# constant-total-power slices
# ---------------------------------------------------------------------------


def slice_powers(p_total: float, grid: GridSpec) -> np.ndarray:
    """Per-phase powers at the nodes of a slice grid, shape (n, n, 3)."""
    return _plane_powers(grid.axis, "clarke", p_total)[0]


def slice_chart(
    design: ConverterDesign, p_total: float, grid: GridSpec | int = DEFAULT_AREA_GRID, v0: float = 1.0
) -> SliceMask:
    """Exact feasibility over the plane of fixed total power.

    Feasible nodes are grouped into 4-connected components; holes are
    infeasible 4-connected regions that do not reach the grid border.
    Lower-dimensional parts of the chart found on the zero-current loci
    are reported as isolated features when no nearby node is feasible.
    """
    if not isinstance(grid, GridSpec):
        grid = GridSpec(grid)
    if not (math.isfinite(p_total) and abs(p_total) <= 1.0):
        raise InvalidInputError(f"|p_total| must be <= 1, got {p_total!r}")
    mask = feasible_mask(design, slice_powers(p_total, grid), v0, exact=True)
    _, components = ndimage.label(mask)
    holes = _count_holes(mask)
    features = _locus_features(design, p_total, grid, mask, v0)
    return SliceMask(float(p_total), grid.axis, mask, int(components), holes, features)


def _count_holes(mask: np.ndarray) -> int:
    labels, n = ndimage.label(~mask)
    if n == 0:
        return 0
    border = np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]]))
    return n - int(np.count_nonzero(border))


def _locus_features(
    design: ConverterDesign, p_total: float, grid: GridSpec, mask: np.ndarray, v0: float
) -> list[IsolatedFeature]:
    axis = grid.axis
    h = grid.spacing
    half = grid.resolution // 2
    near = ndimage.binary_dilation(mask, structure=np.ones((3, 3), dtype=bool))
    features: list[IsolatedFeature] = []

    # neutral locus: the balanced point at the slice origin
    if mask[half, half] and not np.any(
        [mask[half - 1, half], mask[half + 1, half], mask[half, half - 1], mask[half, half + 1]]
    ):
        features.append(IsolatedFeature("point", 4, (0.0, 0.0), (0.0, 0.0)))

    # phase loci: P[i] = 0 is a straight line in the slice
    span = 3.0 * grid.half_width
    t = np.linspace(-span, span, 8 * grid.resolution + 1)
    for wire in (1, 2, 3):
        j, k = [x for x in range(3) if x != wire - 1]
        powers = np.zeros((len(t), 3))
        powers[:, j] = (p_total + t) / 2.0
        powers[:, k] = (p_total - t) / 2.0
        ab = powers @ CLARKE[:2].T
        inside = np.all(np.abs(ab) <= grid.half_width, axis=-1)
        powers, ab = powers[inside], ab[inside]
        if not len(powers):
            continue
        ok = feasible_mask(design, powers, v0, exact=True)
        idx = np.clip(np.rint(ab / h).astype(int) + half, 0, grid.resolution - 1)
        isolated = ok & ~near[idx[:, 0], idx[:, 1]]
        for lo, hi in _runs(isolated):
            kind = "point" if hi == lo else "segment"
            features.append(
                IsolatedFeature(kind, wire, tuple(float(x) for x in ab[lo]), tuple(float(x) for x in ab[hi]))
            )
    return features


def _runs(flags: np.ndarray) -> list[tuple[int, int]]:
    out = []
    start = None
    for i, f in enumerate(flags):
        if f and start is None:
            start = i
        elif not f and start is not None:
            out.append((start, i - 1))
            start = None
    if start is not None:
        out.append((start, len(flags) - 1))
    return out
