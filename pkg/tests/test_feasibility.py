import itertools
import math

import numpy as np
import pytest

from ccchart.errors import CapacityGuardError, WrongIndicatorError
from ccchart.feasibility import (
    capacity_vectors,
    feasible_mask,
    indicator,
    indicator_enumerated,
    indicator_fixed,
    indicator_four_leg,
    indicator_idealised,
    indicator_uniform,
)
from ccchart.model import ConverterDesign, current_magnitudes, wire_capacities
from ccchart.sizing import I4_OPT, S4_OPT, fixed_uniform, preset, uniform

S4 = ConverterDesign(S4_OPT, name="s4opt")
I4 = ConverterDesign(I4_OPT, name="i4opt")
UFIX4 = fixed_uniform(4)
UFIX3 = fixed_uniform(3)
RECONF = [S4, I4, uniform(4), uniform(5), ConverterDesign((0.1, 0.2, 0.3, 0.4))]


def cube41() -> np.ndarray:
    """The 41^3 lattice over [-1, 1]^3 with exact i/20 coordinates."""
    axis = np.arange(-20, 21) / 20.0
    return np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)


def enumerated_mask(design, powers):
    """Exhaustive allocation check, vectorised over points."""
    mags = current_magnitudes(powers)
    caps, _ = capacity_vectors(design)
    out = np.zeros(len(mags), dtype=bool)
    for cap in caps:
        out |= np.all(mags <= cap, axis=-1)
    return out


def all_allocations_mask(design, powers):
    """Brute force over all 4^m leg assignments, no deduplication."""
    from ccchart.model import Allocation

    mags = current_magnitudes(powers)
    out = np.zeros(len(mags), dtype=bool)
    for wires in itertools.product(range(1, 5), repeat=design.m):
        cap = wire_capacities(design, Allocation(wires))
        out |= np.all(mags <= cap, axis=-1)
    return out


# examples ------------------------------------------------------------------


def test_fixed_examples():
    r = indicator_fixed(UFIX4, (0.25, 0.25, 0.25))
    assert r.feasible and r.witness is None
    r = indicator_fixed(UFIX4, (0.2, -0.2, 0.0))
    assert not r.feasible and r.binding_wire == 4


def test_fixed_three_leg_needs_zero_neutral():
    assert indicator_fixed(UFIX3, (1 / 3, 1 / 3, 1 / 3)).feasible
    assert not indicator_fixed(UFIX3, (0.1, 0.1, 0.1001)).feasible
    rng = np.random.default_rng(3)
    p = rng.uniform(-0.3, 0.3, size=(200, 3))
    assert not any(indicator_fixed(UFIX3, x).feasible for x in p)


def test_fixed_rejects_reconfigurable():
    with pytest.raises(WrongIndicatorError):
        indicator_fixed(S4, (0, 0, 0))


def test_enumerated_stacks_neutral():
    r = indicator_enumerated(uniform(4), (0.2, -0.2, 0.0))
    assert r.feasible
    cap = wire_capacities(uniform(4), r.witness)
    assert np.all(current_magnitudes(np.array([0.2, -0.2, 0.0])) <= cap)
    assert cap[3] == pytest.approx(0.5)


@pytest.mark.parametrize("design", RECONF)
def test_origin_is_feasible(design):
    assert indicator_enumerated(design, (0, 0, 0)).feasible
    if design.m == 4:
        assert indicator_four_leg(design, (0, 0, 0))


def test_witness_only_when_feasible():
    r = indicator_enumerated(S4, (0.9, 0.9, 0.9))
    assert not r.feasible and r.witness is None


def test_enumeration_guard():
    with pytest.raises(CapacityGuardError):
        indicator_enumerated(uniform(13), (0.0, 0.0, 0.0))
    # uniform designs beyond the guard still work through the fast path
    assert indicator(uniform(15), (0.0, 0.0, 0.0)) is not None
    assert indicator_uniform(15, (0.2, -0.2, 0.0))


def test_four_leg_examples():
    assert indicator_four_leg(S4, (0.2, -0.2, 0.0))
    assert indicator_enumerated(S4, (0.2, -0.2, 0.0)).feasible
    # a zero phase current lets two legs share a wire; the fast path misses it
    assert not indicator_four_leg(uniform(4), (0.2, -0.2, 0.0))
    assert indicator_enumerated(uniform(4), (0.2, -0.2, 0.0)).feasible


def test_four_leg_rejects_other_designs():
    for d in (uniform(5), UFIX4, preset("omega")):
        with pytest.raises(WrongIndicatorError):
            indicator_four_leg(d, (0, 0, 0))


def test_uniform_examples():
    assert indicator_uniform(4, (0.2, -0.2, 0.0))
    assert not indicator_uniform(3, (0.3, -0.3, 0.0))
    assert indicator_uniform(3, (1 / 3, 1 / 3, 1 / 3))


def test_idealised_examples():
    assert indicator_idealised((1 / 3, 1 / 3, 1 / 3))
    assert indicator_idealised((0.5, 0.0, 0.0))
    assert not indicator_idealised((0.4, 0.4, 0.4))
    # the balanced point is the only feasible one at full total power
    rng = np.random.default_rng(11)
    d = rng.normal(size=(500, 3))
    d -= d.mean(axis=1, keepdims=True)
    d *= 1e-3 / np.linalg.norm(d, axis=1, keepdims=True)
    assert not any(indicator_idealised(1 / 3 + x) for x in d)


def test_idealised_scales_with_base_current():
    assert indicator_idealised((1.0, 0.0, 0.0), base_current=2.0)
    assert not indicator_idealised((1.0, 0.0, 0.0))


# oracle equivalences --------------------------------------------------------


@pytest.mark.parametrize("m", [2, 3, 4, 5, 6])
def test_uniform_matches_enumeration_on_41_cube(m):
    pts = cube41()
    d = uniform(m)
    fast = feasible_mask(d, pts)
    exact = enumerated_mask(d, pts)
    assert np.array_equal(fast, exact)
    # the pointwise API agrees on a sample
    idx = np.random.default_rng(m).choice(len(pts), 400, replace=False)
    for i in idx:
        assert indicator_uniform(m, pts[i]) == exact[i] == indicator_enumerated(d, pts[i]).feasible


@pytest.mark.parametrize("design", [S4, I4, ConverterDesign((0.1, 0.2, 0.3, 0.4))])
def test_four_leg_matches_enumeration_off_loci(design):
    pts = cube41()
    mags = current_magnitudes(pts)
    keep = mags.min(axis=1) > 1e-6
    fast = np.all(np.sort(mags, axis=1) <= np.sort(design.legs), axis=1)
    exact = enumerated_mask(design, pts)
    assert np.array_equal(fast[keep], exact[keep])
    idx = np.flatnonzero(keep)[:: 97]
    for i in idx:
        assert indicator_four_leg(design, pts[i]) == exact[i]


@pytest.mark.parametrize("design", [ConverterDesign((0.1, 0.2, 0.3, 0.4)), ConverterDesign((0.15, 0.15, 0.3, 0.4)), uniform(5)])
def test_deduplicated_enumeration_is_exhaustive(design):
    pts = cube41()[::7]
    assert np.array_equal(enumerated_mask(design, pts), all_allocations_mask(design, pts))


def test_capacity_vectors_are_distinct_and_complete():
    caps, allocs = capacity_vectors(uniform(6))
    assert len({tuple(c) for c in caps}) == len(caps)
    # compositions of 6 legs into 4 wires
    assert len(caps) == math.comb(6 + 3, 3)
    for cap, alloc in zip(caps, allocs):
        assert np.array_equal(cap, wire_capacities(uniform(6), alloc))


# properties -----------------------------------------------------------------


@pytest.mark.parametrize("design", [S4, I4, uniform(5), uniform(8), preset("omega")])
def test_twelve_element_symmetry(design):
    rng = np.random.default_rng(5)
    pts = rng.uniform(-0.6, 0.6, size=(1000, 3))
    base = feasible_mask(design, pts, exact=True)
    assert 0 < base.sum() < len(pts)
    for perm in itertools.permutations(range(3)):
        for sign in (1.0, -1.0):
            assert np.array_equal(feasible_mask(design, sign * pts[:, list(perm)], exact=True), base)


@pytest.mark.parametrize("design", [S4, I4, uniform(7), UFIX4, preset("omega")])
def test_star_shaped(design):
    rng = np.random.default_rng(9)
    pts = rng.uniform(-0.7, 0.7, size=(1000, 3))
    ok = feasible_mask(design, pts, exact=True)
    lam = np.linspace(0.0, 1.0, 21)
    for p in pts[ok]:
        assert feasible_mask(design, lam[:, None] * p, exact=True).all()


@pytest.mark.parametrize("m,k", [(2, 2), (3, 2), (4, 3), (5, 2)])
def test_uniform_refinement_nests(m, k):
    pts = cube41()
    coarse = feasible_mask(uniform(m), pts)
    fine = feasible_mask(uniform(k * m), pts)
    assert np.all(fine[coarse])


@pytest.mark.parametrize("design", [S4, I4, uniform(6), UFIX4, UFIX3])
def test_dominated_by_ideal(design):
    pts = cube41()
    ok = feasible_mask(design, pts, exact=True)
    assert np.all(feasible_mask(preset("omega"), pts)[ok])


def test_measurement_mode_drops_degenerate_allocations():
    pts = cube41()
    assert feasible_mask(UFIX3, pts).sum() == 0
    # the exact mask keeps the balanced axis
    exact = feasible_mask(UFIX3, pts, exact=True)
    bal = np.all(pts == pts[:, :1], axis=1) & (np.abs(pts[:, 0]) <= 1 / 3)
    assert np.array_equal(exact, bal)


def test_mask_agrees_with_indicator_dispatch():
    rng = np.random.default_rng(2)
    pts = rng.uniform(-0.5, 0.5, size=(300, 3))
    for d in (S4, UFIX4, UFIX3, uniform(3), preset("omega")):
        mask = feasible_mask(d, pts, exact=True)
        assert [indicator(d, p) for p in pts] == list(mask)


def test_uniform_tie_points_use_exact_capacities():
    # 3 * 0.1 != 0.3 in floats; the fast path must follow the enumerated capacities
    d = uniform(10)
    for p in [(0.3, -0.3, 0.0), (0.7, 0.0, 0.0), (0.1, 0.2, -0.3), (0.3, 0.3, 0.3)]:
        assert indicator_uniform(10, p) == indicator_enumerated(d, p).feasible
