"""Result files: fixed-precision CSV and JSON with an embedded run config."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .geometry import BoundaryTrace, IsolatedFeature, SliceMask

META_PREFIX = "# ccchart "


class MalformedResultError(ValueError):
    pass


def fmt(x: float) -> str:
    """Nine significant digits; the one numeric format used in every output."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return format(float(x), ".9g")


def rounded(obj: Any) -> Any:
    """Copy of ``obj`` with floats cut to nine significant digits (nan -> None)."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(format(x, ".9g"))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [rounded(v) for v in obj]
    return obj


def write_json(path: Path, payload: dict[str, Any]) -> None:
    path.write_text(json.dumps(rounded(payload), indent=2, sort_keys=True) + "\n")


def read_json(path: Path) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedResultError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise MalformedResultError(f"{path}: expected a JSON object")
    return data


def _meta_line(meta: dict[str, Any]) -> str:
    return META_PREFIX + json.dumps(rounded(meta), sort_keys=True)


# ---------------------------------------------------------------------------
# boundary traces
# ---------------------------------------------------------------------------


def write_boundary_csv(path: Path, trace: BoundaryTrace, meta: dict[str, Any]) -> None:
    meta = dict(meta, kind="boundary", mode=trace.mode, psi=trace.psi, p_total=trace.p_total, label=trace.label)
    with open(path, "w", newline="") as fh:
        fh.write(_meta_line(meta) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        if trace.mode == "spherical":
            writer.writerow(["theta_rad", "psi_rad", "r_pu"])
            for a, r in zip(trace.angles, trace.radii):
                writer.writerow([fmt(a), fmt(trace.psi), fmt(r)])
        else:
            writer.writerow(["theta_rad", "r_pu"])
            for a, r in zip(trace.angles, trace.radii):
                writer.writerow([fmt(a), fmt(r)])


def _split_meta(path: Path) -> tuple[dict[str, Any], list[str]]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise MalformedResultError(f"{path}: {exc}") from None
    if not lines or not lines[0].startswith(META_PREFIX):
        raise MalformedResultError(f"{path}: missing ccchart metadata line")
    try:
        meta = json.loads(lines[0][len(META_PREFIX) :])
    except json.JSONDecodeError as exc:
        raise MalformedResultError(f"{path}: bad metadata: {exc}") from None
    return meta, lines[1:]


def read_boundary_csv(path: Path) -> tuple[BoundaryTrace, dict[str, Any]]:
    meta, lines = _split_meta(path)
    if meta.get("kind") != "boundary" or not lines:
        raise MalformedResultError(f"{path}: not a boundary trace")
    header = lines[0].split(",")
    expected = ["theta_rad", "psi_rad", "r_pu"] if meta.get("mode") == "spherical" else ["theta_rad", "r_pu"]
    if header != expected:
        raise MalformedResultError(f"{path}: unexpected header {header}")
    try:
        rows = np.array([[float(x) for x in line.split(",")] for line in lines[1:] if line], dtype=float)
    except ValueError as exc:
        raise MalformedResultError(f"{path}: {exc}") from None
    if rows.ndim != 2 or rows.shape[1] != len(expected) or len(rows) < 2:
        raise MalformedResultError(f"{path}: malformed rows")
    trace = BoundaryTrace(
        mode=meta["mode"],
        angles=rows[:, 0],
        radii=rows[:, -1],
        label=str(meta.get("label", "")),
        psi=meta.get("psi"),
        p_total=meta.get("p_total"),
    )
    return trace, meta


# ---------------------------------------------------------------------------
# slices
# ---------------------------------------------------------------------------


def slice_summary(sl: SliceMask) -> dict[str, Any]:
    return {
        "p_ttl": sl.p_total,
        "components": sl.components,
        "holes": sl.holes,
        "cca_of_slice": sl.cca,
        "features": [
            {"kind": f.kind, "wire": f.wire, "start": list(f.start), "end": list(f.end)} for f in sl.features
        ],
        "resolution": len(sl.axis),
        "half_width": float(sl.axis[-1]),
    }


def write_slice(csv_path: Path, json_path: Path, sl: SliceMask, meta: dict[str, Any]) -> None:
    meta = dict(meta, kind="slice", p_ttl=sl.p_total)
    with open(csv_path, "w", newline="") as fh:
        fh.write(_meta_line(meta) + "\n")
        fh.write("phat1,phat2,feasible\n")
        labels = [fmt(x) for x in sl.axis]
        for i, a in enumerate(labels):
            row = sl.mask[i]
            fh.writelines(f"{a},{b},{int(v)}\n" for b, v in zip(labels, row))
    payload = dict(slice_summary(sl), config=meta.get("config"), design=meta.get("design"), csv=csv_path.name)
    write_json(json_path, payload)


def read_slice(json_path: Path) -> tuple[SliceMask, dict[str, Any]]:
    info = read_json(json_path)
    for key in ("p_ttl", "components", "holes", "csv"):
        if key not in info:
            raise MalformedResultError(f"{json_path}: missing {key!r}")
    csv_path = Path(json_path).with_name(info["csv"])
    meta, lines = _split_meta(csv_path)
    if meta.get("kind") != "slice" or not lines or lines[0] != "phat1,phat2,feasible":
        raise MalformedResultError(f"{csv_path}: not a slice mask")
    try:
        rows = np.array([[float(x) for x in line.split(",")] for line in lines[1:] if line], dtype=float)
    except ValueError as exc:
        raise MalformedResultError(f"{csv_path}: {exc}") from None
    n = int(round(math.sqrt(len(rows))))
    if n * n != len(rows) or n < 2:
        raise MalformedResultError(f"{csv_path}: mask is not square")
    axis = rows[::n, 0]
    mask = rows[:, 2].reshape(n, n).astype(bool)
    features = [
        IsolatedFeature(f["kind"], int(f["wire"]), tuple(f["start"]), tuple(f["end"]))
        for f in info.get("features", [])
    ]
    sl = SliceMask(float(info["p_ttl"]), axis, mask, int(info["components"]), int(info["holes"]), features)
    return sl, info
