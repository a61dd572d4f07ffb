import itertools
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest

from ccchart.errors import InvalidInputError, InvalidStepError
from ccchart.geometry import cca_boundary_integral, ccv_spherical_integral
from ccchart.model import ConverterDesign
from ccchart.sizing import (
    I4_OPT,
    S4_OPT,
    SizingProblem,
    enumerate_simplex,
    objective_values,
    optimize_sizing,
    preset,
    uniform,
)


@lru_cache(maxsize=None)
def partitions(n, k):
    """Partitions of n into exactly k positive parts."""
    if n == 0 and k == 0:
        return 1
    if n <= 0 or k <= 0:
        return 0
    return partitions(n - 1, k - 1) + partitions(n - k, k)


def test_simplex_examples():
    assert list(enumerate_simplex(2, 0.5)) == [(0.5, 0.5)]
    assert list(enumerate_simplex(2, 0.25)) == [(0.25, 0.75), (0.5, 0.5)]
    assert list(enumerate_simplex(1, 0.01)) == [(1.0,)]


def test_simplex_count_matches_partitions():
    got = list(enumerate_simplex(4, 0.01))
    assert len(got) == partitions(100, 4) == 7153
    assert len(set(got)) == len(got)


@pytest.mark.parametrize("m,k", [(3, 20), (4, 20), (5, 25)])
def test_simplex_is_every_sorted_vector(m, k):
    got = list(enumerate_simplex(m, Fraction(1, k)))
    brute = sorted({tuple(sorted(c)) for c in itertools.product(range(1, k), repeat=m) if sum(c) == k})
    assert [tuple(round(x * k) for x in a) for a in got] == brute
    assert got == sorted(got)
    for a in got:
        assert abs(sum(a) - 1) < 1e-12 and all(x > 0 for x in a)


@pytest.mark.parametrize("step", [0.03, 0.0, 1.5, "abc", -0.5, 0.3])
def test_bad_steps(step):
    with pytest.raises(InvalidStepError):
        list(enumerate_simplex(3, step))


def test_coarse_step_has_no_candidates():
    with pytest.raises(InvalidStepError):
        optimize_sizing(SizingProblem(5, step=0.5))


def test_problem_validation():
    with pytest.raises(InvalidInputError):
        SizingProblem(4, objective="area")
    with pytest.raises(InvalidInputError):
        SizingProblem(0)
    with pytest.raises(InvalidStepError):
        SizingProblem(4, step=0.07)


def test_presets_match_table():
    assert preset("s4opt").legs == S4_OPT == (0.12, 0.22, 0.26, 0.4)
    assert preset("I4Opt").legs == I4_OPT == (0.13, 0.21, 0.3, 0.36)
    assert preset("ufix4").wiring == (1, 2, 3, 4) and not preset("ufix4").reconfigurable
    assert preset("ufix3").wiring == (1, 2, 3)
    assert preset("u7") == uniform(7) and preset("u7").m == 7
    assert preset("omega").is_idealised
    for bad in ("u0", "s5opt", "", "uu"):
        with pytest.raises(InvalidInputError):
            preset(bad)


def test_single_leg():
    res = optimize_sizing(SizingProblem(1))
    assert res.alpha == (1.0,) and res.candidates == 1


def test_ties_go_to_first_vector():
    # three legs cannot cover four live wires, so every candidate scores zero
    res = optimize_sizing(SizingProblem(3, step=0.1))
    assert res.metric == 0.0
    assert res.alpha == next(iter(enumerate_simplex(3, 0.1)))


def test_objective_matches_geometry():
    alphas = [S4_OPT, I4_OPT, (0.25,) * 4, (0.1, 0.2, 0.3, 0.4)]
    vals = objective_values(SizingProblem(4, "cca"), np.array(alphas))
    for a, v in zip(alphas, vals):
        assert v == pytest.approx(cca_boundary_integral(ConverterDesign(a)).value, rel=1e-12)
    p5 = (0.1, 0.15, 0.2, 0.25, 0.3)
    v5 = objective_values(SizingProblem(5, "cca"), np.array([p5]))[0]
    assert v5 == pytest.approx(cca_boundary_integral(ConverterDesign(p5)).value, rel=1e-12)
    vv = objective_values(SizingProblem(4, "ccv", n_theta=90, n_psi=180), np.array([I4_OPT]))[0]
    assert vv == pytest.approx(ccv_spherical_integral(ConverterDesign(I4_OPT), 90, 180).value, rel=1e-9)


def test_objective_permutation_invariant():
    problem = SizingProblem(4, "cca")
    perms = np.array(list(itertools.permutations(S4_OPT)))
    vals = objective_values(problem, perms)
    assert np.ptp(vals) == 0.0
    base = cca_boundary_integral(ConverterDesign(S4_OPT)).value
    for p in perms[:5]:
        assert cca_boundary_integral(ConverterDesign(tuple(p))).value == pytest.approx(base, rel=1e-12)


def test_area_optimum_coarse():
    res = optimize_sizing(SizingProblem(4, "cca", step=0.02))
    assert np.max(np.abs(np.array(res.alpha) - S4_OPT)) <= 0.04 + 1e-12
    uniform_value = objective_values(SizingProblem(4, "cca"), np.array([(0.25,) * 4]))[0]
    assert res.metric >= uniform_value
    assert res.metric <= cca_boundary_integral(preset("omega")).value
    assert res.top[0] == (res.alpha, res.metric)
    assert all(a[1] >= b[1] for a, b in zip(res.top, res.top[1:]))
    assert all(v >= res.metric * 0.995 for _, v in res.near_ties)


def test_volume_optimum_coarse():
    res = optimize_sizing(SizingProblem(4, "ccv", step=0.05, n_theta=90, n_psi=180))
    assert np.max(np.abs(np.array(res.alpha) - I4_OPT)) <= 0.1 + 1e-12
    assert res.metric <= ccv_spherical_integral(preset("omega"), 90, 180).value


def test_five_leg_search_beats_uniform():
    res = optimize_sizing(SizingProblem(5, "cca", step=0.05, n_angles=180))
    u = objective_values(SizingProblem(5, "cca", n_angles=180), np.array([(0.2,) * 5]))[0]
    assert res.metric >= u


def test_validation_grid_agrees():
    res = optimize_sizing(SizingProblem(4, "cca", step=0.05), validate=True)
    assert res.validation is not None and res.validation.method == "grid"
    assert res.validation.value == pytest.approx(res.metric, rel=0.02)


def test_result_design():
    res = optimize_sizing(SizingProblem(2, step=0.5))
    d = res.design()
    assert d.legs == (0.5, 0.5) and d.reconfigurable and d.name == "opt_cca_m2"
