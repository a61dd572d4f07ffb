"""``ccchart`` command-line front end.

Exit codes: 0 success, 1 computation or I/O failure, 2 missing design file
or unknown preset (or bad usage), 3 invalid design schema, 4 conflicting flags, 5 malformed
result file passed to ``render``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import io, svg
from ._parallel import worker_count
from .errors import CapabilityChartError, InvalidInputError
from .geometry import (
    DEFAULT_ANGLES,
    DEFAULT_AREA_GRID,
    DEFAULT_SPHERE,
    DEFAULT_VOLUME_GRID,
    ChartMetrics,
    GridSpec,
    boundary_trace,
    cca_boundary_integral,
    cca_grid,
    ccv_grid,
    ccv_spherical_integral,
    size_ratio,
    slice_chart,
)
from .model import ConverterDesign, load_design
from .sizing import PRESET_HELP, SizingProblem, optimize_sizing, preset

EXIT_OK, EXIT_FAILED, EXIT_NO_FILE, EXIT_SCHEMA, EXIT_CONFLICT, EXIT_MALFORMED = range(6)
SUBCOMMANDS = ("area", "volume", "boundary", "slice", "optimize", "ratio", "render")
REFERENCES = ("omega", "ufix4")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    subcommand: str
    designs: list[list[str]] = field(default_factory=list)
    mode: str | None = None
    grid: int | None = None
    angles: int | None = None
    psi_deg: float | None = None
    p_total: float | None = None
    step: str | None = None
    objective: str | None = None
    legs: int | None = None
    coords: str = "clarke"
    ratio: bool = False
    validate: bool = False
    top_k: int = 10
    files: list[str] = field(default_factory=list)
    out: str = "."
    svg: bool = False
    threads: int = 1

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


class _DesignAction(argparse.Action):
    """Keeps --preset and --design in command-line order."""

    def __call__(self, parser, namespace, values, option_string=None):
        items = list(getattr(namespace, self.dest) or [])
        items.append([self.const, values])
        setattr(namespace, self.dest, items)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", dest="designs", action=_DesignAction, const="preset", metavar="NAME",
                        help=f"built-in design: {PRESET_HELP}")
    common.add_argument("--design", dest="designs", action=_DesignAction, const="design", metavar="FILE",
                        help="design JSON file")
    common.add_argument("--grid", type=int, help="grid points per axis (odd, >= 21)")
    common.add_argument("--angles", type=int, help="boundary samples (area, boundary) or azimuths (volume)")
    common.add_argument("--mode", choices=("planar", "spherical", "cylindrical"))
    common.add_argument("--psi", type=float, metavar="DEG", help="azimuth of a spherical trace")
    common.add_argument("--ptotal", type=float, metavar="PU", help="total power of a slice or cylindrical trace")
    common.add_argument("--step", type=str, metavar="PU", help="sizing lattice step (default 0.02)")
    common.add_argument("--objective", choices=("cca", "ccv"))
    common.add_argument("--legs", type=int, help="number of legs to size")
    common.add_argument("--coords", choices=("clarke", "nominal"), default="clarke",
                        help="grid coordinates for area/volume")
    common.add_argument("--ratio", action="store_true", help="also report the size ratio of two designs")
    common.add_argument("--validate", action="store_true", help="re-check the optimum on a full grid")
    common.add_argument("--top-k", type=int, default=10)
    common.add_argument("--out", default=".", metavar="DIR")
    common.add_argument("--svg", action="store_true", help="also write SVG renderings")

    parser = argparse.ArgumentParser(prog="ccchart", description="Capability charts of reconfigurable converters.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "render":
            p.add_argument("files", nargs="*", help="result files written by ccchart")
    return parser


# ---------------------------------------------------------------------------
# configuration checks
# ---------------------------------------------------------------------------


def _config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        subcommand=args.subcommand,
        designs=args.designs or [],
        mode=args.mode,
        grid=args.grid,
        angles=args.angles,
        psi_deg=args.psi,
        p_total=args.ptotal,
        step=args.step,
        objective=args.objective,
        legs=args.legs,
        coords=args.coords,
        ratio=args.ratio,
        validate=args.validate,
        top_k=args.top_k,
        files=list(getattr(args, "files", []) or []),
        out=args.out,
        svg=args.svg,
        threads=worker_count(),
    )


def _conflict(msg: str) -> CliError:
    return CliError(msg, EXIT_CONFLICT)


def check_flags(cfg: RunConfig) -> None:
    sub = cfg.subcommand
    allowed = {
        "area": {"grid", "angles", "coords", "ratio"},
        "volume": {"grid", "angles", "coords", "ratio"},
        "boundary": {"angles", "mode", "psi_deg", "p_total"},
        "slice": {"grid", "p_total"},
        "optimize": {"step", "objective", "legs", "angles", "validate", "top_k"},
        "ratio": {"angles", "objective"},
        "render": set(),
    }[sub]
    defaults = RunConfig(sub)
    for name in ("grid", "angles", "mode", "psi_deg", "p_total", "step", "objective", "legs",
                 "coords", "ratio", "validate", "top_k"):
        if name not in allowed and getattr(cfg, name) != getattr(defaults, name):
            flag = {"psi_deg": "psi", "p_total": "ptotal", "top_k": "top-k"}.get(name, name)
            raise _conflict(f"--{flag} cannot be used with '{sub}'")

    if sub == "boundary":
        mode = cfg.mode or "planar"
        if cfg.p_total is not None and mode != "cylindrical":
            raise _conflict(f"--ptotal cannot be used with {mode} mode")
        if cfg.psi_deg is not None and mode != "spherical":
            raise _conflict(f"--psi cannot be used with {mode} mode")
        if mode == "cylindrical" and cfg.p_total is None:
            raise _conflict("cylindrical mode needs --ptotal")
    if sub == "slice" and cfg.p_total is None:
        raise _conflict("slice needs --ptotal")
    if sub == "optimize" and cfg.designs:
        raise _conflict("optimize sizes a new design; drop --preset/--design")
    if sub in ("area", "volume", "boundary", "slice", "ratio") and not cfg.designs:
        raise _conflict(f"'{sub}' needs at least one --preset or --design")
    if (sub == "ratio" or cfg.ratio) and len(cfg.designs) != 2:
        raise _conflict("a size ratio needs exactly two designs (larger chart first)")
    if sub == "render" and not (cfg.files or cfg.designs):
        raise _conflict("render needs result files or a design")


def load_designs(cfg: RunConfig) -> list[ConverterDesign]:
    out = []
    for kind, value in cfg.designs:
        if kind == "preset":
            try:
                out.append(preset(value))
            except InvalidInputError as exc:
                raise CliError(str(exc), EXIT_NO_FILE) from None
            continue
        path = Path(value)
        if not path.is_file():
            raise CliError(f"design file not found: {value}", EXIT_NO_FILE)
        try:
            out.append(load_design(path))
        except CapabilityChartError as exc:
            raise CliError(f"{value}: {exc}", EXIT_SCHEMA) from None
        except (OSError, UnicodeDecodeError) as exc:
            raise CliError(f"{value}: {exc}", EXIT_NO_FILE) from None
    return out


def _meta(cfg: RunConfig, design: ConverterDesign | None = None) -> dict[str, Any]:
    meta: dict[str, Any] = {"config": cfg.to_dict()}
    if design is not None:
        meta["design"] = design.to_dict()
    return meta


def _tag(x: float) -> str:
    return io.fmt(x).replace("-", "m")


def _svg_meta(meta: dict[str, Any]) -> str:
    return json.dumps(io.rounded(meta), sort_keys=True)


def _references(label: str) -> list[ConverterDesign]:
    return [preset(n) for n in REFERENCES if n != label]


def _write_text(path: Path, text: str, written: list[Path]) -> None:
    path.write_text(text)
    written.append(path)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _relative(a: float, b: float) -> float | None:
    if b == 0:
        return 0.0 if a == 0 else None
    return abs(a - b) / abs(b)


def run_area(cfg: RunConfig, designs: list[ConverterDesign], out: Path, written: list[Path]) -> None:
    grid = GridSpec(cfg.grid or DEFAULT_AREA_GRID)
    n = cfg.angles or DEFAULT_ANGLES
    metrics = []
    for d in designs:
        g = cca_grid(d, grid, cfg.coords)
        b = cca_boundary_integral(d, n)
        metrics.append((g, b))
        payload = dict(
            _meta(cfg, d),
            name=d.name,
            cca=b.value,
            cca_grid=g.value,
            cca_boundary=b.value,
            relative_difference=_relative(g.value, b.value),
            grid_resolution=list(g.resolution),
            coords=cfg.coords,
            angles=n,
        )
        path = out / f"{d.name}_cca.json"
        io.write_json(path, payload)
        written.append(path)
        print(f"{d.name}: cca grid {io.fmt(g.value)}  boundary {io.fmt(b.value)}")
        if cfg.svg:
            tr = boundary_trace(d, "planar", n)
            for coords in ("clarke", "nominal"):
                text = svg.boundary_svg(tr, coords, _references(d.name), _svg_meta(_meta(cfg, d)))
                _write_text(out / f"{d.name}_boundary_planar_{coords}.svg", text, written)
    if cfg.ratio:
        _write_ratio(cfg, designs, metrics, "cca", out, written)


def run_volume(cfg: RunConfig, designs: list[ConverterDesign], out: Path, written: list[Path]) -> None:
    grid = GridSpec(cfg.grid or DEFAULT_VOLUME_GRID)
    n_theta, n_psi = (cfg.angles // 2, cfg.angles) if cfg.angles else DEFAULT_SPHERE
    metrics = []
    for d in designs:
        g = ccv_grid(d, grid, cfg.coords)
        b = ccv_spherical_integral(d, n_theta, n_psi)
        metrics.append((g, b))
        payload = dict(
            _meta(cfg, d),
            name=d.name,
            ccv=b.value,
            ccv_grid=g.value,
            ccv_spherical=b.value,
            relative_difference=_relative(g.value, b.value),
            grid_resolution=list(g.resolution),
            coords=cfg.coords,
            angles=[n_theta, n_psi],
        )
        path = out / f"{d.name}_ccv.json"
        io.write_json(path, payload)
        written.append(path)
        print(f"{d.name}: ccv grid {io.fmt(g.value)}  spherical {io.fmt(b.value)}")
    if cfg.ratio:
        _write_ratio(cfg, designs, metrics, "ccv", out, written)


def _write_ratio(
    cfg: RunConfig,
    designs: list[ConverterDesign],
    metrics: list[tuple[ChartMetrics | None, ChartMetrics]],
    kind: str,
    out: Path,
    written: list[Path],
) -> None:
    """Ratio of the first design's chart over the second's, as a linear scale."""
    (g1, b1), (g2, b2) = metrics
    payload = dict(
        _meta(cfg),
        kind=kind,
        larger=designs[0].to_dict(),
        reference=designs[1].to_dict(),
        metric_larger=b1.value,
        metric_reference=b2.value,
        eta=size_ratio(b2, b1),
    )
    if g1 is not None and g2 is not None:
        payload["eta_grid"] = size_ratio(g2, g1)
    path = out / f"ratio_{kind}_{designs[0].name}_{designs[1].name}.json"
    io.write_json(path, payload)
    written.append(path)
    print(f"eta_{'A' if kind == 'cca' else 'V'}({designs[1].name} -> {designs[0].name}) = {io.fmt(payload['eta'])}")


def run_ratio(cfg: RunConfig, designs: list[ConverterDesign], out: Path, written: list[Path]) -> None:
    kind = cfg.objective or "cca"
    if kind == "cca":
        metrics = [(None, cca_boundary_integral(d, cfg.angles or DEFAULT_ANGLES)) for d in designs]
    else:
        n_theta, n_psi = (cfg.angles // 2, cfg.angles) if cfg.angles else DEFAULT_SPHERE
        metrics = [(None, ccv_spherical_integral(d, n_theta, n_psi)) for d in designs]
    _write_ratio(cfg, designs, metrics, kind, out, written)


def _boundary_name(d: ConverterDesign, mode: str, cfg: RunConfig) -> str:
    if mode == "spherical":
        return f"{d.name}_boundary_spherical_psi{_tag(cfg.psi_deg or 0.0)}"
    if mode == "cylindrical":
        return f"{d.name}_boundary_cylindrical_p{_tag(cfg.p_total)}"
    return f"{d.name}_boundary_planar"


def run_boundary(cfg: RunConfig, designs: list[ConverterDesign], out: Path, written: list[Path]) -> None:
    mode = cfg.mode or "planar"
    n = cfg.angles or (DEFAULT_SPHERE[0] + 1 if mode == "spherical" else DEFAULT_ANGLES)
    for d in designs:
        tr = boundary_trace(d, mode, n, psi=math.radians(cfg.psi_deg or 0.0), p_total=cfg.p_total)
        stem = _boundary_name(d, mode, cfg)
        path = out / f"{stem}.csv"
        io.write_boundary_csv(path, tr, _meta(cfg, d))
        written.append(path)
        print(f"{d.name}: {len(tr.radii)} boundary samples -> {path.name}")
        if cfg.svg:
            _render_trace(tr, _meta(cfg, d), out / stem, written)


def run_slice(cfg: RunConfig, designs: list[ConverterDesign], out: Path, written: list[Path]) -> None:
    grid = GridSpec(cfg.grid or DEFAULT_AREA_GRID)
    for d in designs:
        sl = slice_chart(d, cfg.p_total, grid)
        stem = f"{d.name}_slice_p{_tag(cfg.p_total)}"
        csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
        io.write_slice(csv_path, json_path, sl, _meta(cfg, d))
        written.extend([csv_path, json_path])
        print(f"{d.name}: P_Ttl={io.fmt(sl.p_total)} components {sl.components} holes {sl.holes}")
        if cfg.svg:
            _render_slice(sl, d.name, _meta(cfg, d), out / stem, written)


def run_optimize(cfg: RunConfig, designs: list[ConverterDesign], out: Path, written: list[Path]) -> None:
    legs = cfg.legs or 4
    objective = cfg.objective or "cca"
    kwargs: dict[str, Any] = {}
    if cfg.angles:
        if objective == "cca":
            kwargs["n_angles"] = cfg.angles
        else:
            kwargs.update(n_theta=cfg.angles // 2, n_psi=cfg.angles)
    problem = SizingProblem(legs, objective, cfg.step or "0.02", top_k=cfg.top_k, **kwargs)
    res = optimize_sizing(problem, validate=cfg.validate)
    design = res.design()
    stem = f"opt_{objective}_m{legs}"
    payload = dict(
        design.to_dict(),
        **_meta(cfg),
        objective=objective,
        metric=res.metric,
        step=str(problem.step),
        candidates=res.candidates,
        near_ties=[{"alpha": list(a), "metric": v} for a, v in res.near_ties],
    )
    if res.validation is not None:
        payload["validation"] = {"value": res.validation.value, "resolution": list(res.validation.resolution)}
    path = out / f"{stem}.json"
    io.write_json(path, payload)
    written.append(path)
    top_path = out / f"{stem}_top.csv"
    with open(top_path, "w", newline="") as fh:
        fh.write(io._meta_line(dict(_meta(cfg), kind="top")) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"alpha{i + 1}" for i in range(legs)] + ["metric"])
        for alpha, value in res.top:
            writer.writerow([io.fmt(a) for a in alpha] + [io.fmt(value)])
    written.append(top_path)
    alpha = ", ".join(io.fmt(a) for a in res.alpha)
    print(f"alpha* = ({alpha})  {objective} = {io.fmt(res.metric)}  over {res.candidates} candidates")


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def _render_trace(tr, meta: dict[str, Any], stem: Path, written: list[Path]) -> None:
    refs = _references(tr.label)
    text_meta = _svg_meta(meta)
    if tr.mode == "spherical":
        _write_text(stem.with_name(stem.name + ".svg"), svg.boundary_svg(tr, "clarke", refs, text_meta), written)
        return
    for coords in ("clarke", "nominal"):
        text = svg.boundary_svg(tr, coords, refs, text_meta)
        _write_text(stem.with_name(f"{stem.name}_{coords}.svg"), text, written)


def _render_slice(sl, label: str, meta: dict[str, Any], stem: Path, written: list[Path]) -> None:
    refs = _references(label)
    for coords in ("clarke", "nominal"):
        text = svg.slice_svg(sl, label, coords, refs, _svg_meta(meta))
        _write_text(stem.with_name(f"{stem.name}_{coords}.svg"), text, written)


def _render_constraints(d: ConverterDesign, meta: dict[str, Any], out: Path, written: list[Path]) -> None:
    if d.reconfigurable or d.is_idealised:
        raise InvalidInputError(f"{d.name}: constraint figures need a hard-wired design")
    _write_text(out / f"{d.name}_constraints.svg", svg.constraints_svg(d, _svg_meta(meta)), written)


def run_render(cfg: RunConfig, designs: list[ConverterDesign], out: Path, written: list[Path]) -> None:
    for d in designs:
        _render_constraints(d, _meta(cfg, d), out, written)
    for name in cfg.files:
        path = Path(name)
        if not path.is_file():
            raise CliError(f"result file not found: {name}", EXIT_MALFORMED)
        stem = out / path.stem
        try:
            if path.suffix == ".csv":
                tr, source = io.read_boundary_csv(path)
                _render_trace(tr, dict(_meta(cfg), source=source), stem, written)
            elif path.suffix == ".json":
                data = io.read_json(path)
                if "p_ttl" in data:
                    sl, info = io.read_slice(path)
                    label = str((info.get("design") or {}).get("name", path.stem))
                    source = {k: info.get(k) for k in ("config", "design")}
                    _render_slice(sl, label, dict(_meta(cfg), source=source), stem, written)
                elif "legs" in data or data.get("idealised"):
                    d = ConverterDesign.from_dict(data)
                    _render_constraints(d, _meta(cfg, d), out, written)
                else:
                    raise io.MalformedResultError(f"{name}: not a ccchart result")
            else:
                raise io.MalformedResultError(f"{name}: unknown result type")
        except (io.MalformedResultError, KeyError, TypeError) as exc:
            raise CliError(f"malformed result file: {exc}", EXIT_MALFORMED) from None
        except InvalidInputError as exc:
            raise CliError(f"malformed result file {name}: {exc}", EXIT_MALFORMED) from None


RUNNERS = {
    "area": run_area,
    "volume": run_volume,
    "boundary": run_boundary,
    "slice": run_slice,
    "optimize": run_optimize,
    "ratio": run_ratio,
    "render": run_render,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _config(args)
    written: list[Path] = []
    try:
        check_flags(cfg)
        designs = load_designs(cfg)
        out = Path(cfg.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise CliError(f"cannot create output directory {out}: {exc}", EXIT_FAILED) from None
        RUNNERS[cfg.subcommand](cfg, designs, out, written)
    except CliError as exc:
        print(f"ccchart: error: {exc}", file=sys.stderr)
        return exc.code
    except (CapabilityChartError, OSError) as exc:
        print(f"ccchart: error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
