"""Readers and writers for rasters, point patterns, networks, units and observers.

Formats
-------
pattern CSV     ``x,y[,observer_id]``
raster ASCII    ESRI-style header (ncols, nrows, xllcorner, yllcorner, cellsize,
                NODATA_value) followed by rows from north to south
raster CSV      ``cell_ix,cell_iy,value`` (active cells only)
network         GeoJSON LineString / MultiLineString (bare geometry, Feature or
                FeatureCollection), planar coordinates
units CSV       ``unit_id,cell_ix,cell_iy``
observers CSV   ``observer_id,cx,cy,activity_level``
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .grid import (CovariateRaster, DomainError, GridDomain, ObserverRegistry,
                   PointPattern, PolylineNetwork, SurveyUnit)


class FormatError(ValueError):
    """Malformed input file; the message names the offending row."""


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# point patterns


def write_pattern(path, pattern: PointPattern) -> None:
    path = Path(path)
    marked = pattern.marks is not None
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "observer_id"] if marked else ["x", "y"])
        for k, (x, y) in enumerate(pattern.points):
            row = [_fmt(x), _fmt(y)]
            if marked:
                row.append(str(int(pattern.marks[k])))
            w.writerow(row)


def read_pattern(path, grid: GridDomain | None = None,
                 registry: ObserverRegistry | None = None) -> PointPattern:
    """Read a pattern CSV, validating against ``grid``/``registry`` if given."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: missing header")
    header = [h.strip() for h in rows[0]]
    if header not in (["x", "y"], ["x", "y", "observer_id"]):
        raise FormatError(f"{path}: header must be 'x,y[,observer_id]', got {','.join(header)}")
    marked = len(header) == 3
    pts, marks = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise FormatError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
        try:
            x, y = float(row[0]), float(row[1])
            if marked:
                marks.append(int(row[2]))
        except ValueError as exc:
            raise FormatError(f"{path}: row {lineno} is malformed ({exc})") from None
        if not (np.isfinite(x) and np.isfinite(y)):
            raise FormatError(f"{path}: row {lineno} has non-finite coordinates")
        pts.append((x, y))
    points = np.array(pts, dtype=float).reshape(-1, 2)
    if grid is not None and len(pts):
        cells = grid.locate(points)
        bad = np.flatnonzero(cells < 0)
        if bad.size:
            k = int(bad[0])
            raise FormatError(f"{path}: row {k + 2} point {pts[k]} lies outside the active cells")
    if registry is not None and marked:
        known = set(registry.ids.tolist())
        for k, m in enumerate(marks):
            if m not in known:
                raise FormatError(f"{path}: row {k + 2} references unknown observer {m}")
    return PointPattern(points, np.array(marks, dtype=np.int64) if marked else None)


# ---------------------------------------------------------------------------
# rasters


def write_raster_ascii(path, grid: GridDomain, values, nodata: float = -9999.0) -> None:
    arr = grid.to_array(values, fill=nodata)
    x0, y0 = grid.origin
    with Path(path).open("w") as fh:
        fh.write(f"ncols {grid.nx}\nnrows {grid.ny}\n")
        fh.write(f"xllcorner {_fmt(x0)}\nyllcorner {_fmt(y0)}\n")
        fh.write(f"cellsize {_fmt(grid.cell_size)}\nNODATA_value {_fmt(nodata)}\n")
        for row in arr[::-1]:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def read_raster_ascii(path, name: str | None = None) -> tuple[GridDomain, CovariateRaster]:
    """Read an ESRI ASCII grid; NODATA cells are inactive."""
    path = Path(path)
    lines = path.read_text().split("\n")
    header = {}
    k = 0
    keys = {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"}
    while k < len(lines) and len(header) < 6:
        parts = lines[k].split()
        if not parts:
            k += 1
            continue
        if parts[0].lower() not in keys or len(parts) != 2:
            raise FormatError(f"{path}: bad header line {k + 1}: {lines[k]!r}")
        header[parts[0].lower()] = parts[1]
        k += 1
    if set(header) != keys:
        raise FormatError(f"{path}: incomplete header, missing {sorted(keys - set(header))}")
    nx, ny = int(header["ncols"]), int(header["nrows"])
    nodata = float(header["nodata_value"])
    rows = []
    for lineno in range(k, len(lines)):
        parts = lines[lineno].split()
        if not parts:
            continue
        if len(parts) != nx:
            raise FormatError(f"{path}: row at line {lineno + 1} has {len(parts)} values, expected {nx}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise FormatError(f"{path}: non-numeric value at line {lineno + 1}") from None
    if len(rows) != ny:
        raise FormatError(f"{path}: found {len(rows)} rows, expected {ny}")
    arr = np.array(rows)[::-1]
    active = ~np.isclose(arr, nodata)
    grid = GridDomain(nx, ny, (float(header["xllcorner"]), float(header["yllcorner"])),
                      float(header["cellsize"]), active)
    values = arr[grid.ixy[:, 1], grid.ixy[:, 0]]
    return grid, CovariateRaster(name or path.stem, values)


def write_raster_csv(path, grid: GridDomain, values) -> None:
    values = np.asarray(values, dtype=float)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell_ix", "cell_iy", "value"])
        for (ix, iy), v in zip(grid.ixy, values):
            w.writerow([int(ix), int(iy), _fmt(v)])


def read_raster_csv(path, grid: GridDomain, name: str | None = None) -> CovariateRaster:
    """Read ``cell_ix,cell_iy,value``; every active cell must appear exactly once."""
    path = Path(path)
    values = np.full(grid.n_active, np.nan)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["cell_ix", "cell_iy", "value"]:
        raise FormatError(f"{path}: header must be 'cell_ix,cell_iy,value'")
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            ix, iy, v = int(row[0]), int(row[1]), float(row[2])
        except (ValueError, IndexError):
            raise FormatError(f"{path}: row {lineno} is malformed") from None
        if not (0 <= ix < grid.nx and 0 <= iy < grid.ny) or grid.index[iy, ix] < 0:
            raise FormatError(f"{path}: row {lineno} refers to inactive cell ({ix}, {iy})")
        values[grid.index[iy, ix]] = v
    if np.isnan(values).any():
        raise FormatError(f"{path}: {int(np.isnan(values).sum())} active cells have no value")
    return CovariateRaster(name or path.stem, values)


def resample_nearest(src_grid: GridDomain, src: CovariateRaster, dst_grid: GridDomain) -> CovariateRaster:
    """Resample a raster onto another grid by nearest active source cell centre."""
    from scipy.spatial import cKDTree
    _, idx = cKDTree(src_grid.centers).query(dst_grid.centers)
    return CovariateRaster(src.name, src.values[idx])


# ---------------------------------------------------------------------------
# networks, units, observers


def read_network_geojson(path, buffer_width: float) -> PolylineNetwork:
    data = json.loads(Path(path).read_text())
    geoms = []
    if data.get("type") == "FeatureCollection":
        geoms = [f["geometry"] for f in data["features"]]
    elif data.get("type") == "Feature":
        geoms = [data["geometry"]]
    else:
        geoms = [data]
    lines = []
    for g in geoms:
        if g["type"] == "LineString":
            lines.append(np.asarray(g["coordinates"], dtype=float)[:, :2])
        elif g["type"] == "MultiLineString":
            lines.extend(np.asarray(c, dtype=float)[:, :2] for c in g["coordinates"])
        else:
            raise FormatError(f"{path}: unsupported geometry type {g['type']!r}")
    if not lines:
        raise FormatError(f"{path}: no line geometries")
    return PolylineNetwork(tuple(lines), buffer_width)


def write_network_geojson(path, network: PolylineNetwork) -> None:
    features = [{"type": "Feature", "properties": {"id": k},
                 "geometry": {"type": "LineString", "coordinates": p.tolist()}}
                for k, p in enumerate(network.polylines)]
    Path(path).write_text(json.dumps({"type": "FeatureCollection", "features": features}, indent=1))


def write_units_csv(path, grid: GridDomain, units) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit_id", "cell_ix", "cell_iy"])
        for u in units:
            for c in u.cells:
                ix, iy = grid.ixy[c]
                w.writerow([u.id, int(ix), int(iy)])


def read_units_csv(path, grid: GridDomain) -> list[SurveyUnit]:
    path = Path(path)
    cells: dict[str, list[int]] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["unit_id", "cell_ix", "cell_iy"]:
            raise FormatError(f"{path}: header must be 'unit_id,cell_ix,cell_iy'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                uid, ix, iy = row[0], int(row[1]), int(row[2])
            except (ValueError, IndexError):
                raise FormatError(f"{path}: row {lineno} is malformed") from None
            if not (0 <= ix < grid.nx and 0 <= iy < grid.ny) or grid.index[iy, ix] < 0:
                raise FormatError(f"{path}: row {lineno} refers to inactive cell ({ix}, {iy})")
            cells.setdefault(uid, []).append(int(grid.index[iy, ix]))
    return [SurveyUnit(uid, c) for uid, c in cells.items()]


def write_registry_csv(path, registry: ObserverRegistry) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["observer_id", "cx", "cy", "activity_level"])
        for i, (cx, cy), lev in zip(registry.ids, registry.centroids, registry.levels):
            w.writerow([int(i), _fmt(cx), _fmt(cy), int(lev)])


def read_registry_csv(path) -> ObserverRegistry:
    path = Path(path)
    ids, cen, lev = [], [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["observer_id", "cx", "cy", "activity_level"]:
            raise FormatError(f"{path}: header must be 'observer_id,cx,cy,activity_level'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                ids.append(int(row[0]))
                cen.append((float(row[1]), float(row[2])))
                lev.append(int(row[3]))
            except (ValueError, IndexError):
                raise FormatError(f"{path}: row {lineno} is malformed") from None
    try:
        return ObserverRegistry(np.array(ids), np.array(cen).reshape(-1, 2), np.array(lev))
    except DomainError as exc:
        raise FormatError(f"{path}: {exc}") from None
