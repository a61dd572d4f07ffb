"""Benchmark designs and the leg-capacity search."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from ._parallel import pmap
from .errors import CapabilityChartError, InvalidInputError, InvalidStepError
from .geometry import (
    DEFAULT_ANGLES,
    DEFAULT_SPHERE,
    ChartMetrics,
    _ray_currents,
    _ray_radii,
    cca_grid,
    ccv_grid,
)
from .model import ConverterDesign

# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

S4_OPT = (0.12, 0.22, 0.26, 0.4)
I4_OPT = (0.13, 0.21, 0.3, 0.36)

PRESET_HELP = "s4opt, i4opt, ufix3, ufix4, omega, or u<m> (e.g. u8)"


def uniform(m: int, name: str | None = None) -> ConverterDesign:
    if m < 1:
        raise InvalidInputError("m must be >= 1")
    return ConverterDesign(legs=(1.0 / m,) * m, name=name or f"u{m}")


def fixed_uniform(m: int, name: str | None = None) -> ConverterDesign:
    """Hard-wired equal legs, one per wire starting at phase 1."""
    if m not in (3, 4):
        raise InvalidInputError("fixed uniform designs have 3 or 4 legs")
    return ConverterDesign(
        legs=(1.0 / m,) * m, reconfigurable=False, wiring=tuple(range(1, m + 1)), name=name or f"ufix{m}"
    )


def preset(name: str) -> ConverterDesign:
    key = name.strip().lower()
    if key == "s4opt":
        return ConverterDesign(S4_OPT, name="s4opt")
    if key == "i4opt":
        return ConverterDesign(I4_OPT, name="i4opt")
    if key in ("ufix3", "ufix4"):
        return fixed_uniform(int(key[-1]))
    if key == "omega":
        return ConverterDesign.idealised("omega")
    match = re.fullmatch(r"u(\d+)", key)
    if match and int(match.group(1)) >= 1:
        return uniform(int(match.group(1)))
    raise InvalidInputError(f"unknown preset {name!r}; expected {PRESET_HELP}")


# ---------------------------------------------------------------------------
# search
# ---------------------------------------------------------------------------


def _step_denominator(step: float | str | Fraction) -> int:
    try:
        frac = Fraction(repr(step)) if isinstance(step, float) else Fraction(step)
    except (ValueError, ZeroDivisionError):
        raise InvalidStepError(f"invalid step {step!r}") from None
    if frac <= 0 or frac > 1 or (1 / frac).denominator != 1:
        raise InvalidStepError(f"step {step!r} does not divide 1")
    return int(1 / frac)


def enumerate_simplex(m: int, step: float | str | Fraction) -> Iterator[tuple[float, ...]]:
    """Non-decreasing capacity vectors on the ``step`` lattice, in lexicographic order."""
    k = _step_denominator(step)
    if m < 1:
        raise InvalidInputError("m must be >= 1")

    def parts(remaining: int, count: int, low: int) -> Iterator[tuple[int, ...]]:
        if count == 1:
            if remaining >= low:
                yield (remaining,)
            return
        for first in range(low, remaining // count + 1):
            for rest in parts(remaining - first, count - 1, first):
                yield (first,) + rest

    for p in parts(k, m, 1):
        yield tuple(x / k for x in p)


@dataclass(frozen=True)
class SizingProblem:
    m: int
    objective: str = "cca"
    step: float | str | Fraction = "0.01"
    n_angles: int = DEFAULT_ANGLES
    n_theta: int = DEFAULT_SPHERE[0]
    n_psi: int = DEFAULT_SPHERE[1]
    top_k: int = 10

    def __post_init__(self) -> None:
        if self.objective not in ("cca", "ccv"):
            raise InvalidInputError(f"objective must be 'cca' or 'ccv', got {self.objective!r}")
        if self.m < 1:
            raise InvalidInputError("m must be >= 1")
        _step_denominator(self.step)


@dataclass
class SizingResult:
    alpha: tuple[float, ...]
    metric: float
    objective: str
    candidates: int
    top: list[tuple[tuple[float, ...], float]] = field(default_factory=list)
    near_ties: list[tuple[tuple[float, ...], float]] = field(default_factory=list)
    validation: ChartMetrics | None = None

    def design(self, name: str | None = None) -> ConverterDesign:
        return ConverterDesign(self.alpha, name=name or f"opt_{self.objective}_m{len(self.alpha)}")


class SizingError(CapabilityChartError):
    pass


def _directions(problem: SizingProblem) -> tuple[np.ndarray, np.ndarray, int]:
    """Unit-radius wire currents, quadrature weights and the radius power."""
    if problem.objective == "cca":
        dpsi = 2.0 * math.pi / problem.n_angles
        psi = (np.arange(problem.n_angles) + 0.5) * dpsi
        return _ray_currents(psi, math.pi / 2.0, 1.0), np.full(len(psi), 0.5 * dpsi), 2
    dtheta = math.pi / problem.n_theta
    dpsi = 2.0 * math.pi / problem.n_psi
    theta = (np.arange(problem.n_theta) + 0.5) * dtheta
    psi = (np.arange(problem.n_psi) + 0.5) * dpsi
    tt, pp = np.meshgrid(theta, psi, indexing="ij")
    c = _ray_currents(pp.ravel(), tt.ravel(), 1.0)
    w = np.sin(tt.ravel()) * dtheta * dpsi / 3.0
    return c, w, 3


def objective_values(problem: SizingProblem, alphas: np.ndarray) -> np.ndarray:
    """Boundary-integral CCA or CCV for each row of ``alphas``."""
    c, w, power = _directions(problem)
    alphas = np.atleast_2d(np.asarray(alphas, dtype=float))

    if alphas.shape[1] == 4:
        # four legs: sorted pairing on rays that load every wire
        full = np.all(c > 0, axis=-1)
        cs = np.sort(c[full], axis=-1)
        wf = w[full]
        rest = np.flatnonzero(~full)

        def batch(lo: int) -> np.ndarray:
            a = np.sort(alphas[lo : lo + 32], axis=-1)
            r = np.min(a[:, None, :] / cs[None, :, :], axis=-1)
            vals = (r**power) @ wf
            for i, alpha in enumerate(a):
                if len(rest):
                    rr = _ray_radii(ConverterDesign(tuple(alpha)), c[rest])
                    vals[i] += float((rr**power) @ w[rest])
            return vals

        return np.concatenate(pmap(batch, range(0, len(alphas), 32)))

    def single(alpha: np.ndarray) -> float:
        try:
            r = _ray_radii(ConverterDesign(tuple(alpha)), c)
        except CapabilityChartError as exc:
            raise SizingError(f"evaluation failed at alpha={tuple(alpha)}: {exc}") from exc
        return float((r**power) @ w)

    return np.array(pmap(single, list(alphas)))


def optimize_sizing(problem: SizingProblem, validate: bool = False) -> SizingResult:
    """Exhaustive search of the capacity simplex.

    Ties go to the lexicographically smallest sorted vector, which is the
    first one enumerated.  Candidates within 0.5 % of the optimum are kept
    as ``near_ties``.
    """
    candidates = list(enumerate_simplex(problem.m, problem.step))
    if not candidates:
        raise InvalidStepError(f"step {problem.step!r} is too coarse for {problem.m} positive legs")
    values = objective_values(problem, np.array(candidates))
    best = int(np.argmax(values))
    order = sorted(range(len(candidates)), key=lambda i: (-values[i], i))
    top = [(candidates[i], float(values[i])) for i in order[: problem.top_k]]
    threshold = values[best] * (1.0 - 0.005)
    ties = [(candidates[i], float(values[i])) for i in order if values[i] >= threshold and i != best]
    result = SizingResult(candidates[best], float(values[best]), problem.objective, len(candidates), top, ties)
    if validate:
        design = result.design()
        result.validation = cca_grid(design) if problem.objective == "cca" else ccv_grid(design)
    return result
