"""Converter designs, allocations and the power <-> current mappings.

Powers are per-unit active power per phase, currents are per-unit wire
current magnitudes.  Wires are numbered 1..4 with wire 4 the neutral.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import InvalidInputError

N_WIRES = 4

# phase rotation operator e^{j 2 pi / 3}
A_OP = complex(-0.5, math.sqrt(3.0) / 2.0)

SQRT_2_3 = math.sqrt(2.0 / 3.0)
SQRT_3_2 = math.sqrt(3.0 / 2.0)

# orthonormal Clarke matrix; rows are the alpha, beta, gamma axes
CLARKE = SQRT_2_3 * np.array(
    [
        [1.0, -0.5, -0.5],
        [0.0, math.sqrt(3.0) / 2.0, -math.sqrt(3.0) / 2.0],
        [1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0)],
    ]
)

# neutral-current magnitude per unit of alpha-beta radius, |I_N| = NEUTRAL_GAIN * r / |V0|
NEUTRAL_GAIN = SQRT_3_2

SUM_TOLERANCE = 1e-9


def _as_finite(values: Any, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be finite, got {values!r}")
    return arr


def _check_v0(v0: float) -> float:
    v0 = float(v0)
    if not math.isfinite(v0) or v0 <= 0.0:
        raise InvalidInputError(f"phase voltage magnitude must be > 0, got {v0!r}")
    return v0


# ---------------------------------------------------------------------------
# designs and allocations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConverterDesign:
    """A converter built from ``m`` half-bridge legs.

    ``legs`` are per-unit capacities of ``base_current`` summing to one.
    A fixed (non-reconfigurable) design carries ``wiring``, the 1-based wire
    each leg is hard-wired to.  The idealised converter has no discrete legs
    and is built with :meth:`idealised`.
    """

    legs: tuple[float, ...]
    reconfigurable: bool = True
    wiring: tuple[int, ...] | None = None
    base_current: float = 1.0
    name: str = "design"
    is_idealised: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "legs", tuple(float(a) for a in self.legs))
        if self.wiring is not None:
            object.__setattr__(self, "wiring", tuple(int(w) for w in self.wiring))
        if not math.isfinite(self.base_current) or self.base_current <= 0:
            raise InvalidInputError(f"base_current must be > 0, got {self.base_current!r}")
        if self.is_idealised:
            if self.legs or self.wiring is not None or not self.reconfigurable:
                raise InvalidInputError("the idealised design has no legs or wiring")
            return
        if len(self.legs) < 1:
            raise InvalidInputError("a design needs at least one leg")
        if any(not math.isfinite(a) or a <= 0 for a in self.legs):
            raise InvalidInputError(f"leg capacities must be positive, got {self.legs}")
        if abs(math.fsum(self.legs) - 1.0) > SUM_TOLERANCE:
            raise InvalidInputError(f"leg capacities must sum to 1, got {math.fsum(self.legs)!r}")
        if self.reconfigurable:
            if self.wiring is not None:
                raise InvalidInputError("reconfigurable designs must not carry a fixed wiring")
        else:
            if self.wiring is None:
                raise InvalidInputError("fixed designs need a wiring")
            if len(self.wiring) != len(self.legs):
                raise InvalidInputError("wiring must name one wire per leg")
            if any(w not in (1, 2, 3, 4) for w in self.wiring):
                raise InvalidInputError(f"wiring entries must be in 1..4, got {self.wiring}")

    @classmethod
    def idealised(cls, name: str = "omega", base_current: float = 1.0) -> "ConverterDesign":
        return cls(legs=(), reconfigurable=True, base_current=base_current, name=name, is_idealised=True)

    @property
    def m(self) -> int:
        return len(self.legs)

    @property
    def is_uniform(self) -> bool:
        return not self.is_idealised and len(set(self.legs)) == 1

    def scaled(self, factor: float) -> "ConverterDesign":
        """Same design with the base current multiplied by ``factor``."""
        return ConverterDesign(
            legs=self.legs,
            reconfigurable=self.reconfigurable,
            wiring=self.wiring,
            base_current=self.base_current * factor,
            name=self.name,
            is_idealised=self.is_idealised,
        )

    # JSON schema ---------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "name": self.name,
            "legs": list(self.legs),
            "reconfigurable": self.reconfigurable,
        }
        if self.wiring is not None:
            out["wiring"] = list(self.wiring)
        if self.base_current != 1.0:
            out["base_current"] = self.base_current
        if self.is_idealised:
            out["idealised"] = True
        return out

    @classmethod
    def from_dict(cls, data: Any) -> "ConverterDesign":
        if not isinstance(data, dict):
            raise InvalidInputError("design JSON must be an object")
        try:
            if data.get("idealised", False):
                return cls.idealised(
                    name=str(data.get("name", "omega")),
                    base_current=float(data.get("base_current", 1.0)),
                )
            legs = data["legs"]
            reconf = data["reconfigurable"]
            if not isinstance(legs, list) or not isinstance(reconf, bool):
                raise InvalidInputError("'legs' must be a list and 'reconfigurable' a bool")
            if not all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in legs):
                raise InvalidInputError("'legs' entries must be numbers")
            wiring = data.get("wiring")
            if wiring is not None and (
                not isinstance(wiring, list) or not all(isinstance(w, int) and not isinstance(w, bool) for w in wiring)
            ):
                raise InvalidInputError("'wiring' must be a list of integers")
            return cls(
                legs=tuple(legs),
                reconfigurable=reconf,
                wiring=tuple(wiring) if wiring is not None else None,
                base_current=float(data.get("base_current", 1.0)),
                name=str(data.get("name", "design")),
            )
        except KeyError as exc:
            raise InvalidInputError(f"design JSON is missing field {exc}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidInputError):
                raise
            raise InvalidInputError(f"invalid design JSON: {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ConverterDesign":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"design file is not valid JSON: {exc}") from None
        return cls.from_dict(data)


def load_design(path: str | Path) -> ConverterDesign:
    return ConverterDesign.from_json(Path(path).read_text())


def save_design(design: ConverterDesign, path: str | Path) -> None:
    Path(path).write_text(design.to_json() + "\n")


@dataclass(frozen=True)
class Allocation:
    """Selector-switch state: ``wires[j]`` is the 1-based wire fed by leg ``j``."""

    wires: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        if any(w not in (1, 2, 3, 4) for w in self.wires):
            raise InvalidInputError(f"allocation wires must be in 1..4, got {self.wires}")

    @classmethod
    def from_matrix(cls, matrix: Any) -> "Allocation":
        b = np.asarray(matrix)
        if b.ndim != 2 or b.shape[0] != N_WIRES:
            raise InvalidInputError(f"allocation matrix must be 4 x m, got shape {b.shape}")
        if not np.all((b == 0) | (b == 1)) or not np.all(b.sum(axis=0) == 1):
            raise InvalidInputError("allocation matrix must be binary with unit column sums")
        return cls(tuple(int(i) + 1 for i in np.argmax(b, axis=0)))

    @property
    def m(self) -> int:
        return len(self.wires)

    @property
    def matrix(self) -> np.ndarray:
        b = np.zeros((N_WIRES, self.m), dtype=int)
        b[np.asarray(self.wires) - 1, np.arange(self.m)] = 1
        return b


def wire_capacities(design: ConverterDesign, allocation: Allocation | None = None) -> np.ndarray:
    """Capacity connected to each of the four wires, ``I_base * B @ alpha``."""
    if design.is_idealised:
        raise InvalidInputError("the idealised design has no discrete allocation")
    if allocation is None:
        if design.wiring is None:
            raise InvalidInputError("a reconfigurable design needs an explicit allocation")
        allocation = Allocation(design.wiring)
    elif not design.reconfigurable and allocation.wires != design.wiring:
        raise InvalidInputError("a fixed design only admits its own wiring")
    if allocation.m != design.m:
        raise InvalidInputError(f"allocation has {allocation.m} legs, design has {design.m}")
    caps = [math.fsum(a for a, w in zip(design.legs, allocation.wires) if w == wire) for wire in range(1, 5)]
    return design.base_current * np.array(caps)


# ---------------------------------------------------------------------------
# powers, currents and coordinates
# ---------------------------------------------------------------------------


def clarke(powers: Any) -> np.ndarray:
    """alpha-beta-gamma coordinates of per-phase powers (last axis of length 3)."""
    p = _as_finite(powers, "powers")
    return p @ CLARKE.T


def clarke_inverse(phat: Any) -> np.ndarray:
    p = _as_finite(phat, "clarke coordinates")
    return p @ CLARKE


def current_magnitudes(powers: Any, v0: float = 1.0) -> np.ndarray:
    """|I| on all four wires for powers of shape (..., 3); returns (..., 4).

    Phase magnitudes are |P|/|V0| exactly.  The neutral magnitude uses
    sqrt(((a-b)^2 + (b-c)^2 + (c-a)^2) / 2) on the sorted powers, which is
    exactly zero for balanced injections and invariant under phase
    permutation and sign reversal, so feasibility decisions share those
    symmetries bit-for-bit.
    """
    v0 = _check_v0(v0)
    p = np.asarray(powers, dtype=float)
    s = np.sort(p, axis=-1)
    d1 = s[..., 1] - s[..., 0]
    d2 = s[..., 2] - s[..., 1]
    d3 = s[..., 2] - s[..., 0]
    neutral = np.sqrt((d1 * d1 + d2 * d2 + d3 * d3) / 2.0)
    out = np.concatenate([np.abs(p), neutral[..., None]], axis=-1)
    if v0 != 1.0:
        out = out / v0
    return out


@dataclass(frozen=True)
class OperatingPoint:
    powers: tuple[float, float, float]
    phase_voltage_mag: float = 1.0

    def __post_init__(self) -> None:
        p = _as_finite(self.powers, "powers")
        if p.shape != (3,):
            raise InvalidInputError("an operating point has exactly three phase powers")
        object.__setattr__(self, "powers", tuple(float(x) for x in p))
        _check_v0(self.phase_voltage_mag)

    @property
    def clarke(self) -> np.ndarray:
        return clarke(self.powers)

    @property
    def total(self) -> float:
        return self.powers[0] + self.powers[1] + self.powers[2]

    def currents(self) -> "CurrentSet":
        return powers_to_currents(self.powers, self.phase_voltage_mag)


@dataclass(frozen=True)
class CurrentSet:
    phasors: tuple[complex, complex, complex, complex]
    magnitudes: tuple[float, float, float, float] = field(default=(0.0, 0.0, 0.0, 0.0))

    @property
    def neutral(self) -> complex:
        return self.phasors[3]

    @property
    def neutral_mag(self) -> float:
        return self.magnitudes[3]


def powers_to_currents(powers: Sequence[float], v0: float = 1.0) -> CurrentSet:
    """Wire current phasors for in-phase power injections into a stiff grid."""
    p = _as_finite(powers, "powers")
    if p.shape != (3,):
        raise InvalidInputError("powers must have exactly three entries")
    v0 = _check_v0(v0)
    phase = [complex(p[0]) / v0, p[1] * A_OP / v0, p[2] * A_OP.conjugate() / v0]
    neutral = -(phase[0] + phase[1] + phase[2])
    mags = current_magnitudes(p, v0)
    return CurrentSet(
        phasors=(phase[0], phase[1], phase[2], neutral),
        magnitudes=tuple(float(x) for x in mags),
    )


# ---------------------------------------------------------------------------
# directions
# ---------------------------------------------------------------------------

MODES = ("planar", "spherical", "cylindrical")


@dataclass(frozen=True)
class DirectionSpec:
    """A ray (planar, spherical) or an in-slice ray (cylindrical).

    Angles are radians; ``psi`` is reduced into [0, 2 pi).
    """

    mode: str
    psi: float
    theta: float | None = None
    p_total: float | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise InvalidInputError(f"unknown direction mode {self.mode!r}")
        if not math.isfinite(self.psi):
            raise InvalidInputError("psi must be finite")
        object.__setattr__(self, "psi", float(self.psi) % (2.0 * math.pi))
        if self.mode == "spherical":
            if self.theta is None or self.p_total is not None:
                raise InvalidInputError("spherical directions need theta and no p_total")
            if not (0.0 <= self.theta <= math.pi):
                raise InvalidInputError(f"theta must lie in [0, pi], got {self.theta}")
        elif self.mode == "cylindrical":
            if self.p_total is None or self.theta is not None:
                raise InvalidInputError("cylindrical directions need p_total and no theta")
            if not math.isfinite(self.p_total):
                raise InvalidInputError("p_total must be finite")
        elif self.theta is not None or self.p_total is not None:
            raise InvalidInputError("planar directions take only psi")

    @property
    def polar(self) -> float:
        return math.pi / 2.0 if self.theta is None else self.theta


def unit_clarke_direction(psi: Any, theta: Any = math.pi / 2.0) -> np.ndarray:
    """Unit vectors in alpha-beta-gamma space, shape broadcast(psi, theta) + (3,)."""
    psi = np.asarray(psi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    # exact zeros on the poles and the equator keep balanced rays balanced
    st = np.where(theta == math.pi, 0.0, np.sin(theta))
    ct = np.where(theta == math.pi / 2.0, 0.0, np.cos(theta))
    return np.stack(np.broadcast_arrays(st * np.cos(psi), st * np.sin(psi), ct), axis=-1)


def direction_to_powers(d: DirectionSpec, r: float) -> np.ndarray:
    """Per-phase powers at radius ``r`` along direction ``d``."""
    if not math.isfinite(r) or r < 0:
        raise InvalidInputError(f"radius must be finite and >= 0, got {r!r}")
    if d.mode == "cylindrical":
        inplane = r * np.array([math.cos(d.psi), math.sin(d.psi)])
        return d.p_total / 3.0 + inplane @ CLARKE[:2]
    return clarke_inverse(r * unit_clarke_direction(d.psi, d.polar))


def as_powers(values: Iterable[float]) -> np.ndarray:
    p = _as_finite(list(values), "powers")
    if p.shape != (3,):
        raise InvalidInputError("powers must have exactly three entries")
    return p
