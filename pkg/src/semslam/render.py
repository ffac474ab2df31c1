"""Deterministic raster (PGM) and vector (SVG) renders of grids and maps."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .ontology import UNKNOWN


class PaletteError(KeyError):
    pass


@dataclass(frozen=True)
class RenderSpec:
    layers: tuple[str, ...] = ("zones", "landmarks", "leaves", "fragments")
    px_per_cell: int = 10
    scale: float = 200.0  # px per km for SVG output
    gap: int = 10

    def __post_init__(self):
        if self.px_per_cell < 1 or self.scale <= 0 or self.gap < 0:
            raise ValueError("render sizes must be positive")


def default_palette(environments: Sequence[str]) -> dict[str, int]:
    """Evenly spaced gray levels per environment; Unknown is white."""
    envs = [e for e in environments if e != UNKNOWN]
    levels = np.linspace(20, 220, max(len(envs), 1))
    pal = {e: int(round(v)) for e, v in zip(envs, levels)}
    pal[UNKNOWN] = 255
    return pal


def _check_palette(grids, palette: Mapping[str, int]) -> None:
    missing = sorted({str(v) for g in grids for v in np.asarray(g).ravel()} - set(palette))
    if missing:
        raise PaletteError(f"palette lacks labels: {missing}")


def grid_pixels(labels, palette: Mapping[str, int], px: int = 10) -> np.ndarray:
    """Gray raster of a label grid, north up (grid row 0 is the bottom row)."""
    labels = np.asarray(labels, dtype=object)
    _check_palette([labels], palette)
    gray = np.vectorize(lambda v: palette[str(v)], otypes=[np.uint8])(labels)
    return np.kron(gray[::-1], np.ones((px, px), dtype=np.uint8))


def render_pgm(truth, pred=None, palette: Mapping[str, int] | None = None,
               spec: RenderSpec = RenderSpec()) -> bytes:
    """Binary PGM; truth and prediction side by side when both are given."""
    grids = [truth] if pred is None else [truth, pred]
    if palette is None:
        labels = sorted({str(v) for g in grids for v in np.asarray(g).ravel()})
        palette = default_palette(labels)
    _check_palette(grids, palette)
    tiles = [grid_pixels(g, palette, spec.px_per_cell) for g in grids]
    h = max(t.shape[0] for t in tiles)
    parts = []
    for k, t in enumerate(tiles):
        if k:
            parts.append(np.full((h, spec.gap), 255, dtype=np.uint8))
        parts.append(t)
    img = np.hstack(parts)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    return header + img.tobytes()


_PGM_HEADER = re.compile(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s")


def read_pgm(data: bytes) -> np.ndarray:
    m = _PGM_HEADER.match(data)
    if m is None:
        raise ValueError("not a binary PGM")
    w, h = int(m.group(1)), int(m.group(2))
    # exactly one whitespace byte ends the header; pixel bytes may look like whitespace
    return np.frombuffer(data[m.end():m.end() + w * h], dtype=np.uint8).reshape(h, w)


def _gray(v: int) -> str:
    return f"#{v:02x}{v:02x}{v:02x}"


def render_svg(scenario, landmarks=(), fragments=(), leaves=(), palette=None,
               spec: RenderSpec = RenderSpec()) -> str:
    """Vector map: truth zones, grid leaves, fragment hulls and believed landmarks."""
    w, h = scenario.bounds
    s = spec.scale
    if palette is None:
        palette = default_palette([z.label for z in scenario.zones])

    def pt(x, y):
        return f"{x * s:.3f},{(h - y) * s:.3f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w * s:.3f}" height="{h * s:.3f}">',
           f'<rect x="0" y="0" width="{w * s:.3f}" height="{h * s:.3f}" fill="#ffffff"/>']
    if "zones" in spec.layers:
        _check_palette([[z.label for z in scenario.zones]], palette)
        for z in scenario.zones:
            pts = " ".join(pt(*p) for p in z.polygon)
            out.append(f'<polygon points="{pts}" fill="{_gray(palette[z.label])}" '
                       f'fill-opacity="0.35" stroke="none"><title>{z.label}</title></polygon>')
    if "leaves" in spec.layers:
        for leaf in leaves:
            x0, y0, x1, y1 = leaf.rect
            out.append(f'<rect x="{x0 * s:.3f}" y="{(h - y1) * s:.3f}" width="{(x1 - x0) * s:.3f}" '
                       f'height="{(y1 - y0) * s:.3f}" fill="none" stroke="#404040" stroke-width="0.5">'
                       f'<title>{leaf.label}</title></rect>')
    if "fragments" in spec.layers:
        for f in fragments:
            hull = f.hull()
            if len(hull) < 3:
                continue
            pts = " ".join(pt(*p) for p in hull)
            out.append(f'<polygon points="{pts}" fill="none" stroke="#000000" stroke-width="1">'
                       f'<title>{f.label}</title></polygon>')
    if "landmarks" in spec.layers:
        for lm in landmarks:
            x, y = pt(lm.x, lm.y).split(",")
            out.append(f'<circle cx="{x}" cy="{y}" r="1.5" fill="#000000"><title>{lm.cls}</title></circle>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
