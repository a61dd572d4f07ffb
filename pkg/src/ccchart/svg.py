"""Static SVG renderings of boundaries, slices and constraint geometry.

Output is plain text built with fixed number formatting, so identical
inputs always give byte-identical files.
"""

from __future__ import annotations

import math
from html import escape
from typing import Iterable, Sequence

import numpy as np

from .geometry import BoundaryTrace, SliceMask, boundary_trace, trace_points
from .model import CLARKE, NEUTRAL_GAIN, ConverterDesign

SIZE = 520
MARGIN = 64
COLOURS = {"main": "#c0392b", "fill": "#5dade2", "ref": "#222222", "phase": "#7f8c8d", "neutral": "#27ae60"}
TICK_STEPS = (0.05, 0.1, 0.2, 0.25, 0.5, 1.0)


def _n(x: float) -> str:
    return f"{x:.3f}"


class Canvas:
    def __init__(self, lim: float, xlabel: str, ylabel: str, title: str, xmin: float | None = None):
        self.lim = lim
        self.xmin = -lim if xmin is None else xmin
        self.items: list[str] = []
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.title = title

    def px(self, x: float, y: float) -> tuple[float, float]:
        span = SIZE - 2 * MARGIN
        sx = MARGIN + (x - self.xmin) / (self.lim - self.xmin) * span
        sy = SIZE - MARGIN - (y + self.lim) / (2 * self.lim) * span
        return sx, sy

    def polyline(self, pts: np.ndarray, colour: str, dashed: bool = False, width: float = 1.6):
        for seg in _finite_segments(pts):
            if len(seg) < 2:
                continue
            coords = " ".join(f"{_n(a)},{_n(b)}" for a, b in (self.px(x, y) for x, y in seg))
            dash = ' stroke-dasharray="6,4"' if dashed else ""
            self.items.append(
                f'<polyline points="{coords}" fill="none" stroke="{colour}" stroke-width="{width}"{dash}/>'
            )

    def polygon(self, pts: Sequence[tuple[float, float]], colour: str):
        coords = " ".join(f"{_n(a)},{_n(b)}" for a, b in (self.px(x, y) for x, y in pts))
        self.items.append(f'<polygon points="{coords}" fill="{colour}" stroke="none"/>')

    def marker(self, x: float, y: float, colour: str):
        a, b = self.px(x, y)
        self.items.append(f'<circle cx="{_n(a)}" cy="{_n(b)}" r="3" fill="{colour}"/>')

    def render(self, metadata: str = "") -> str:
        out = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
        ]
        if metadata:
            out.append(f"<metadata>{escape(metadata)}</metadata>")
        out.append(f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>')
        out.extend(self._axes())
        out.extend(self.items)
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def _axes(self) -> list[str]:
        lo, hi = MARGIN, SIZE - MARGIN
        out = [f'<rect x="{lo}" y="{lo}" width="{hi - lo}" height="{hi - lo}" fill="none" stroke="#444"/>']
        step = next((s for s in TICK_STEPS if 2 * self.lim / s <= 10), TICK_STEPS[-1])
        k0 = math.ceil(self.xmin / step - 1e-9)
        k1 = math.floor(self.lim / step + 1e-9)
        for k in range(k0, k1 + 1):
            v = k * step
            x, _ = self.px(v, 0.0)
            out.append(f'<line x1="{_n(x)}" y1="{hi}" x2="{_n(x)}" y2="{hi + 5}" stroke="#444"/>')
            out.append(f'<text x="{_n(x)}" y="{hi + 18}" font-size="11" text-anchor="middle">{v:g}</text>')
        for k in range(math.ceil(-self.lim / step - 1e-9), math.floor(self.lim / step + 1e-9) + 1):
            v = k * step
            _, y = self.px(0.0, v)
            out.append(f'<line x1="{lo - 5}" y1="{_n(y)}" x2="{lo}" y2="{_n(y)}" stroke="#444"/>')
            out.append(f'<text x="{lo - 8}" y="{_n(y + 4)}" font-size="11" text-anchor="end">{v:g}</text>')
        out.append(
            f'<text x="{SIZE / 2:.1f}" y="{SIZE - 18}" font-size="13" text-anchor="middle">{escape(self.xlabel)}</text>'
        )
        out.append(
            f'<text x="18" y="{SIZE / 2:.1f}" font-size="13" text-anchor="middle" '
            f'transform="rotate(-90 18 {SIZE / 2:.1f})">{escape(self.ylabel)}</text>'
        )
        out.append(f'<text x="{SIZE / 2:.1f}" y="30" font-size="14" text-anchor="middle">{escape(self.title)}</text>')
        return out


def _finite_segments(pts: np.ndarray) -> list[np.ndarray]:
    ok = np.all(np.isfinite(pts), axis=1)
    segs, cur = [], []
    for p, good in zip(pts, ok):
        if good:
            cur.append(p)
        elif cur:
            segs.append(np.array(cur))
            cur = []
    if cur:
        segs.append(np.array(cur))
    return segs


def _limit(arrays: Iterable[np.ndarray]) -> float:
    m = 0.0
    for a in arrays:
        a = np.asarray(a)
        if a.size and np.any(np.isfinite(a)):
            m = max(m, float(np.nanmax(np.abs(a))))
    return max(0.1, math.ceil(m * 1.1 * 20) / 20)


# planar views -------------------------------------------------------------


def _to_view(ab: np.ndarray, coords: str, p_total: float) -> np.ndarray:
    """Map alpha-beta slice coordinates to plot coordinates."""
    if coords == "clarke":
        return ab
    # nominal view plots (P1, P2); P3 follows from the fixed total
    return ab @ CLARKE[:2, :2] + p_total / 3.0


def _labels(coords: str) -> tuple[str, str]:
    if coords == "clarke":
        return "P̂[1] (pu)", "P̂[2] (pu)"
    return "P[1] (pu)", "P[2] (pu)"


def _closed(pts: np.ndarray) -> np.ndarray:
    return np.vstack([pts, pts[:1]])


def boundary_svg(
    trace: BoundaryTrace, coords: str = "clarke", references: Sequence[ConverterDesign] = (), metadata: str = ""
) -> str:
    """Boundary polyline over dashed reference boundaries."""
    refs = []
    for d in references:
        if trace.mode == "spherical":
            refs.append(boundary_trace(d, "spherical", 361, psi=trace.psi))
        elif trace.mode == "cylindrical":
            refs.append(boundary_trace(d, "cylindrical", 720, p_total=trace.p_total))
        else:
            refs.append(boundary_trace(d, "planar", 720))

    if trace.mode == "spherical":
        def view(t: BoundaryTrace) -> np.ndarray:
            return np.stack([t.radii * np.sin(t.angles), t.radii * np.cos(t.angles)], axis=-1)

        xlabel, ylabel = "r sinθ along ψ (pu)", "P̂[3] (pu)"
        title = f"{trace.label}: spherical boundary, ψ = {math.degrees(trace.psi):g}°"
    else:
        p_total = trace.p_total or 0.0

        def view(t: BoundaryTrace) -> np.ndarray:
            return _to_view(trace_points(t)[:, :2], coords, p_total)

        xlabel, ylabel = _labels(coords)
        kind = "standalone" if trace.mode == "planar" else f"P_Ttl = {p_total:g} pu"
        title = f"{trace.label}: {kind} boundary ({'αβγ' if coords == 'clarke' else 'nominal'})"

    main = view(trace)
    ref_pts = [view(t) for t in refs]
    canvas = Canvas(_limit([main, *ref_pts]), xlabel, ylabel, title, xmin=0.0 if trace.mode == "spherical" else None)
    closed = trace.mode != "spherical"
    for pts in ref_pts:
        canvas.polyline(_closed(pts) if closed else pts, COLOURS["ref"], dashed=True, width=1.2)
    canvas.polyline(_closed(main) if closed else main, COLOURS["main"])
    return canvas.render(metadata)


def slice_svg(
    sl: SliceMask, label: str, coords: str = "clarke", references: Sequence[ConverterDesign] = (), metadata: str = ""
) -> str:
    """Filled feasible cells of a slice, isolated features as markers."""
    h = sl.spacing
    refs = [_to_view(trace_points(boundary_trace(d, "cylindrical", 720, p_total=sl.p_total))[:, :2], coords, sl.p_total) for d in references]
    corners = _to_view(np.array([[sl.axis[0], sl.axis[0]], [sl.axis[-1], sl.axis[-1]]]), coords, sl.p_total)
    feasible = np.argwhere(sl.mask)
    spread = [sl.axis[feasible[:, 0]], sl.axis[feasible[:, 1]]] if len(feasible) else []
    lim_pts = [_to_view(np.stack(spread, axis=-1), coords, sl.p_total)] if spread else []
    lim = _limit([*lim_pts, *refs]) if (lim_pts or refs) else _limit([corners])
    xlabel, ylabel = _labels(coords)
    title = f"{label}: P_Ttl = {sl.p_total:g} pu, {_count(sl.components, 'component')}, {_count(sl.holes, 'hole')}"
    canvas = Canvas(lim, xlabel, ylabel, title)

    # one parallelogram per run of feasible cells along the beta axis
    for i in range(len(sl.axis)):
        row = sl.mask[i]
        if not row.any():
            continue
        edges = np.flatnonzero(np.diff(np.concatenate([[0], row.astype(int), [0]])))
        for lo, hi in zip(edges[::2], edges[1::2]):
            a0, a1 = sl.axis[i] - h / 2, sl.axis[i] + h / 2
            b0, b1 = sl.axis[lo] - h / 2, sl.axis[hi - 1] + h / 2
            quad = _to_view(np.array([[a0, b0], [a1, b0], [a1, b1], [a0, b1]]), coords, sl.p_total)
            canvas.polygon([tuple(p) for p in quad], COLOURS["fill"])
    for pts in refs:
        canvas.polyline(_closed(pts), COLOURS["ref"], dashed=True, width=1.2)
    for f in sl.features:
        ends = _to_view(np.array([f.start, f.end]), coords, sl.p_total)
        if f.kind == "point":
            canvas.marker(ends[0, 0], ends[0, 1], COLOURS["main"])
        else:
            canvas.polyline(ends, COLOURS["main"], width=2.0)
    return canvas.render(metadata)


def _count(n: int, noun: str) -> str:
    return f"{n} {noun}" if n == 1 else f"{n} {noun}s"


def constraints_svg(design: ConverterDesign, metadata: str = "") -> str:
    """Per-wire constraint curves of a fixed design in the standalone plane.

    Phase limits bound a hexagon in (P1, P2) and the neutral limit an
    ellipse; the idealised boundary is drawn dashed for comparison.
    """
    from .feasibility import capacity_vectors
    from .sizing import preset

    caps = capacity_vectors(design)[0][0]
    t = np.linspace(0.0, 2.0 * math.pi, 721)
    items = []
    c1, c2, c3 = caps[:3]
    if min(c1, c2, c3) > 0:
        items.append(("phase", _phase_polygon(c1, c2, c3)))
    if caps[3] > 0:
        r = caps[3] / NEUTRAL_GAIN
        ab = np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)
        items.append(("neutral", _to_view(ab, "nominal", 0.0)))
    omega = boundary_trace(preset("omega"), "planar", 720)
    ref = _to_view(trace_points(omega)[:, :2], "nominal", 0.0)
    canvas = Canvas(_limit([ref, *[p for _, p in items]]), "P[1] (pu)", "P[2] (pu)", f"{design.name}: wire constraints")
    canvas.polyline(_closed(ref), COLOURS["ref"], dashed=True, width=1.2)
    for kind, pts in items:
        canvas.polyline(_closed(pts), COLOURS[kind])
    return canvas.render(metadata)


def _phase_polygon(c1: float, c2: float, c3: float) -> np.ndarray:
    """Vertices of {|P1| <= c1, |P2| <= c2, |P1 + P2| <= c3} in (P1, P2)."""
    lines = [(1, 0, c1), (-1, 0, c1), (0, 1, c2), (0, -1, c2), (1, 1, c3), (-1, -1, c3)]
    verts = []
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            a1, b1, r1 = lines[i]
            a2, b2, r2 = lines[j]
            det = a1 * b2 - a2 * b1
            if det == 0:
                continue
            x = (r1 * b2 - r2 * b1) / det
            y = (a1 * r2 - a2 * r1) / det
            if all(a * x + b * y <= r + 1e-12 for a, b, r in lines):
                verts.append((x, y))
    verts = sorted(set((round(x, 12), round(y, 12)) for x, y in verts), key=lambda p: math.atan2(p[1], p[0]))
    return np.array(verts)
