"""Indicator functions deciding membership of a design's capability chart.

All comparisons are exact ``<=`` on floats.  Wire capacities are the
correctly rounded sum of the leg capacities on each wire, so the same
allocation always yields bit-identical capacities no matter which code
path produced it.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import CapacityGuardError, InvalidInputError, WrongIndicatorError
from .model import N_WIRES, Allocation, ConverterDesign, as_powers, current_magnitudes, wire_capacities

MAX_ENUMERATED_LEGS = 12
MAX_CAPACITY_VECTORS = 1_000_000


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    witness: Allocation | None = None
    binding_wire: int | None = None

    def __bool__(self) -> bool:
        return self.feasible


def _compositions(k: int, parts: int = N_WIRES):
    """All ordered ways to split ``k`` identical legs over ``parts`` wires."""
    for bars in itertools.combinations(range(k + parts - 1), parts - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(k + parts - 1 - prev - 1)
        yield tuple(out)


@functools.lru_cache(maxsize=256)
def capacity_vectors(design: ConverterDesign) -> tuple[np.ndarray, tuple[Allocation, ...]]:
    """Distinct wire-capacity vectors reachable by reconfiguration.

    Legs with identical capacity are interchangeable, so allocations are
    enumerated as per-value compositions rather than all 4**m switch states.
    Returns ``(caps, allocations)`` with ``caps`` of shape (K, 4).
    """
    if design.is_idealised:
        raise WrongIndicatorError("the idealised design has no allocations; use indicator_idealised")
    if not design.reconfigurable:
        alloc = Allocation(design.wiring)
        return wire_capacities(design, alloc)[None, :], (alloc,)
    groups: dict[float, list[int]] = {}
    for j, a in enumerate(design.legs):
        groups.setdefault(a, []).append(j)
    values = sorted(groups)
    count = math.prod(math.comb(len(groups[v]) + 3, 3) for v in values)
    if count > MAX_CAPACITY_VECTORS:
        raise CapacityGuardError(
            f"{design.m} legs give {count} allocations, beyond the enumeration limit; "
            "use indicator_uniform for uniform designs"
        )
    per_group = [list(_compositions(len(groups[v]))) for v in values]

    caps = []
    allocs = []
    seen = set()
    for combo in itertools.product(*per_group):
        wires = [0] * design.m
        cap = []
        for w in range(N_WIRES):
            terms = []
            for v, comp in zip(values, combo):
                terms.extend([v] * comp[w])
            cap.append(design.base_current * math.fsum(terms))
        key = tuple(cap)
        if key in seen:
            continue
        seen.add(key)
        for v, comp in zip(values, combo):
            idx = iter(groups[v])
            for w in range(N_WIRES):
                for _ in range(comp[w]):
                    wires[next(idx)] = w + 1
        caps.append(cap)
        allocs.append(Allocation(tuple(wires)))
    return np.array(caps), tuple(allocs)


def _binding(mags: np.ndarray, caps: np.ndarray) -> int:
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(mags > 0, mags / caps, 0.0)
    return int(np.argmax(ratio)) + 1


# ---------------------------------------------------------------------------
# point indicators
# ---------------------------------------------------------------------------


def indicator_fixed(design: ConverterDesign, powers: Any, v0: float = 1.0) -> FeasibilityResult:
    if design.reconfigurable:
        raise WrongIndicatorError("indicator_fixed needs a hard-wired design")
    mags = current_magnitudes(as_powers(powers), v0)
    caps = wire_capacities(design)
    return FeasibilityResult(bool(np.all(mags <= caps)), None, _binding(mags, caps))


def indicator_enumerated(design: ConverterDesign, powers: Any, v0: float = 1.0) -> FeasibilityResult:
    """Ground truth: feasible iff some allocation covers every wire current."""
    if not design.reconfigurable or design.is_idealised:
        raise WrongIndicatorError("indicator_enumerated needs a reconfigurable design")
    if design.m > MAX_ENUMERATED_LEGS:
        raise CapacityGuardError(
            f"{design.m} legs exceeds the enumeration limit of {MAX_ENUMERATED_LEGS}; "
            "use indicator_uniform for uniform designs"
        )
    mags = current_magnitudes(as_powers(powers), v0)
    caps, allocs = capacity_vectors(design)
    ok = np.all(mags <= caps, axis=1)
    if not ok.any():
        return FeasibilityResult(False)
    k = int(np.argmax(ok))
    return FeasibilityResult(True, allocs[k], _binding(mags, caps[k]))


def indicator_four_leg(design: ConverterDesign, powers: Any, v0: float = 1.0) -> bool:
    """Sorted currents dominated by sorted leg capacities.

    Exact whenever all four wire currents are non-zero; with a zero-current
    wire two legs may share a wire, which this test does not consider.
    """
    if design.is_idealised or design.m != 4 or not design.reconfigurable:
        raise WrongIndicatorError("indicator_four_leg needs a reconfigurable four-leg design")
    mags = np.sort(current_magnitudes(as_powers(powers), v0))
    alpha = design.base_current * np.sort(np.asarray(design.legs))
    return bool(np.all(mags <= alpha))


def indicator_uniform(m: int, powers: Any, v0: float = 1.0, base_current: float = 1.0) -> bool:
    """Uniform legs: the per-wire leg counts ceil(m |I|) must fit in ``m``."""
    if m < 1:
        raise InvalidInputError("m must be >= 1")
    mags = current_magnitudes(as_powers(powers), v0)
    return bool(_uniform_mask(m, mags, base_current))


def indicator_idealised(powers: Any, v0: float = 1.0, base_current: float = 1.0) -> bool:
    """Continuously allocatable capacity: total wire current within rating."""
    mags = current_magnitudes(as_powers(powers), v0)
    return bool(_idealised_mask(mags, base_current))


def indicator(design: ConverterDesign, powers: Any, v0: float = 1.0) -> bool:
    """Exact membership test dispatching on the design kind."""
    if design.is_idealised:
        return indicator_idealised(powers, v0, design.base_current)
    if not design.reconfigurable:
        return indicator_fixed(design, powers, v0).feasible
    if design.is_uniform:
        return indicator_uniform(design.m, powers, v0, design.base_current)
    return indicator_enumerated(design, powers, v0).feasible


# ---------------------------------------------------------------------------
# vectorised masks over arrays of currents
# ---------------------------------------------------------------------------


def _uniform_mask(m: int, mags: np.ndarray, base_current: float, unit: float | None = None) -> np.ndarray:
    # k legs of size u give capacity fl(k * u), the same value fsum produces
    # in enumeration; count legs per wire against exactly those capacities
    if unit is None:
        unit = 1.0 / m
    need = np.maximum(np.ceil(mags * (m / base_current)), 0.0)
    below = need - 1.0
    # float rounding of m*|I| can straddle k/m by one leg
    over = mags > base_current * (need * unit)
    under = (below >= 0) & (mags <= base_current * (below * unit))
    need = need + over - under
    return need.sum(axis=-1) <= m


def _idealised_mask(mags: np.ndarray, base_current: float) -> np.ndarray:
    return mags.sum(axis=-1) <= base_current


def _four_leg_mask(design: ConverterDesign, mags: np.ndarray) -> np.ndarray:
    alpha = design.base_current * np.sort(np.asarray(design.legs))
    return np.all(np.sort(mags, axis=-1) <= alpha, axis=-1)


def feasible_mask(design: ConverterDesign, powers: Any, v0: float = 1.0, exact: bool = False) -> np.ndarray:
    """Boolean membership for powers of shape (..., 3).

    ``exact=True`` is the ground truth over every allocation.  The default
    evaluates the full-dimensional part of the chart, which is what areas
    and volumes measure: an allocation that leaves a wire without capacity
    only admits points where that wire carries exactly zero current, a
    measure-zero set, so such allocations are skipped.  For four legs this is
    the sorted comparison.  Uniform designs keep the ceiling count, whose
    extra lower-dimensional nodes vanish as the grid is refined.
    """
    mags = current_magnitudes(powers, v0)
    if design.is_idealised:
        return _idealised_mask(mags, design.base_current)
    if design.reconfigurable and design.is_uniform:
        return _uniform_mask(design.m, mags, design.base_current, design.legs[0])
    if not exact and design.reconfigurable and design.m == 4:
        return _four_leg_mask(design, mags)
    caps, _ = capacity_vectors(design)
    if not exact:
        caps = caps[np.all(caps > 0, axis=1)]
    out = np.zeros(mags.shape[:-1], dtype=bool)
    for cap in caps:
        out |= np.all(mags <= cap, axis=-1)
    return out
