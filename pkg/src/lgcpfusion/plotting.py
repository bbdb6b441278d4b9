"""Heatmaps of per-cell rasters as SVG (default) or PNG.

Inactive cells are left transparent.  A colour bar on the right carries the
minimum and maximum of the raster.
"""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np
from matplotlib import colormaps
from PIL import Image, ImageDraw

from .grid import GridDomain

LEGEND_STEPS = 32


def _colors(values, vmin: float, vmax: float, palette: str) -> np.ndarray:
    """RGB bytes ``(n, 3)``; a constant raster maps to the palette midpoint."""
    cmap = colormaps[palette]
    v = np.asarray(values, dtype=float)
    t = np.full(v.shape, 0.5) if vmax <= vmin else (v - vmin) / (vmax - vmin)
    rgba = cmap(np.clip(t, 0.0, 1.0))
    return np.round(np.asarray(rgba)[..., :3] * 255).astype(np.uint8)


def _hex(rgb) -> str:
    return "#{:02x}{:02x}{:02x}".format(*(int(c) for c in rgb))


def _label(v: float) -> str:
    return f"{v:.4g}"


def _layout(grid: GridDomain, scale: int):
    w_map, h_map = grid.nx * scale, grid.ny * scale
    bar_x = w_map + 20
    return w_map, h_map, bar_x, bar_x + 110, max(h_map, 120) + 40


def render_heatmap(values, grid: GridDomain, path, palette: str = "viridis",
                   title: str | None = None, scale: int = 8, fmt: str | None = None) -> Path:
    """Write the raster ``values`` (one per active cell) as an image.

    The format comes from ``fmt`` or the file suffix (``.svg`` or ``.png``).
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_active,):
        raise ValueError(f"raster has {values.shape} values, grid has {grid.n_active} active cells")
    if not np.all(np.isfinite(values)):
        raise ValueError("raster contains non-finite values")
    if palette not in colormaps:
        raise ValueError(f"unknown palette {palette!r}")
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".") or "svg").lower()
    if fmt not in ("svg", "png"):
        raise ValueError(f"unsupported image format {fmt!r}")
    vmin, vmax = float(values.min()), float(values.max())
    rgb = _colors(values, vmin, vmax, palette)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "svg":
        path.write_text(_svg(grid, rgb, vmin, vmax, palette, title, scale))
    else:
        _png(grid, rgb, vmin, vmax, palette, title, scale).save(path, format="PNG")
    return path


def cell_box(grid: GridDomain, k: int, scale: int) -> tuple[int, int, int, int]:
    """Pixel box ``(x0, y0, x1, y1)`` of active cell ``k``; north is up."""
    ix, iy = grid.ixy[k]
    top = 20 + (grid.ny - 1 - iy) * scale
    return int(ix * scale), int(top), int((ix + 1) * scale), int(top + scale)


def _legend_colors(vmin, vmax, palette):
    t = np.linspace(vmax, vmin, LEGEND_STEPS)
    return _colors(t, vmin, vmax, palette)


def _svg(grid, rgb, vmin, vmax, palette, title, scale) -> str:
    w_map, h_map, bar_x, width, height = _layout(grid, scale)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">']
    if title:
        out.append(f'<text x="2" y="14" font-family="sans-serif" font-size="12">{escape(title)}</text>')
    out.append('<g shape-rendering="crispEdges">')
    for k in range(grid.n_active):
        x0, y0, x1, y1 = cell_box(grid, k, scale)
        out.append(f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" fill="{_hex(rgb[k])}"/>')
    out.append("</g>")
    step = h_map / LEGEND_STEPS
    out.append('<g class="legend" shape-rendering="crispEdges">')
    for i, c in enumerate(_legend_colors(vmin, vmax, palette)):
        out.append(f'<rect x="{bar_x}" y="{20 + i * step:.3f}" width="16" height="{step + 0.5:.3f}" '
                   f'fill="{_hex(c)}"/>')
    out.append("</g>")
    out.append(f'<text x="{bar_x + 20}" y="30" font-family="sans-serif" font-size="11" '
               f'class="max">max {_label(vmax)}</text>')
    out.append(f'<text x="{bar_x + 20}" y="{20 + h_map}" font-family="sans-serif" font-size="11" '
               f'class="min">min {_label(vmin)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _png(grid, rgb, vmin, vmax, palette, title, scale) -> Image.Image:
    w_map, h_map, bar_x, width, height = _layout(grid, scale)
    img = Image.new("RGBA", (width, height), (0, 0, 0, 0))
    draw = ImageDraw.Draw(img)
    if title:
        draw.text((2, 2), title, fill=(0, 0, 0, 255))
    for k in range(grid.n_active):
        x0, y0, x1, y1 = cell_box(grid, k, scale)
        draw.rectangle([x0, y0, x1 - 1, y1 - 1], fill=tuple(int(c) for c in rgb[k]) + (255,))
    step = h_map / LEGEND_STEPS
    for i, c in enumerate(_legend_colors(vmin, vmax, palette)):
        y0 = int(round(20 + i * step))
        y1 = int(round(20 + (i + 1) * step)) - 1
        draw.rectangle([bar_x, y0, bar_x + 15, max(y0, y1)], fill=tuple(int(v) for v in c) + (255,))
    draw.text((bar_x + 20, 20), f"max {_label(vmax)}", fill=(0, 0, 0, 255))
    draw.text((bar_x + 20, 10 + h_map), f"min {_label(vmin)}", fill=(0, 0, 0, 255))
    return img
