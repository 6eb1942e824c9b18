"""Versioned CSV/JSON tables, atomic writes and the SVG heatmap emitter."""

from __future__ import annotations

import json
import math
import os
import tempfile

import numpy as np

from .errors import IoError

SCHEMA = "xychain-geom v1"
HEADER = f"# {SCHEMA}"

COLUMNS = {
    "spectrum": ("k", "phi", "epsilon", "theta"),
    "series": ("L", "value", "sign"),
    "signmap": ("gamma", "h", "raw", "clamped", "sign", "singular"),
    "arcs": ("index", "h0", "residual", "n_points"),
    "cases": ("gamma", "h", "case"),
    "zeros": ("curve", "gamma", "h"),
    "em": ("L", "exact", "em_order1", "em_order3", "em_general"),
}


def format_value(v) -> str:
    """Shortest text that parses back to the same value."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def parse_value(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write(path, data: str | bytes) -> None:
    """Write through a temporary file in the target directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    mode = "wb" if isinstance(data, bytes) else "w"
    try:
        fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
        try:
            os.chmod(tmp, 0o666 & ~_umask())
            with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def csv_text(kind: str, rows) -> str:
    columns = COLUMNS[kind]
    lines = [HEADER, ",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"{kind} rows need {len(columns)} fields")
        lines.append(",".join(format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def json_text(kind: str, rows, extra: dict | None = None) -> str:
    columns = COLUMNS[kind]
    doc = {"schema": SCHEMA, "kind": kind, "columns": list(columns)}
    if extra:
        doc.update(extra)
    doc["records"] = [dict(zip(columns, (_jsonable(v) for v in row))) for row in rows]
    return json.dumps(doc, indent=1, allow_nan=True) + "\n"


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return int(bool(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def write_table(path, kind: str, rows, extra: dict | None = None) -> None:
    """Write rows as CSV, or as JSON when ``path`` ends in ``.json``."""
    rows = list(rows)
    if os.fspath(path).endswith(".json"):
        atomic_write(path, json_text(kind, rows, extra))
    else:
        atomic_write(path, csv_text(kind, rows))


def read_csv(path):
    """Read a versioned CSV; returns (columns, rows)."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not lines or lines[0] != HEADER:
        raise ValueError(f"{path}: missing '{HEADER}' header")
    columns = tuple(lines[1].split(","))
    rows = [tuple(parse_value(x) for x in line.split(",")) for line in lines[2:] if line]
    return columns, rows


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if doc.get("schema") != SCHEMA:
        raise ValueError(f"{path}: unexpected schema {doc.get('schema')!r}")
    columns = tuple(doc["columns"])
    rows = [tuple(rec[c] for c in columns) for rec in doc["records"]]
    return columns, rows


def json_document(obj) -> str:
    """JSON text of a result document; numpy scalars become plain numbers."""
    return json.dumps(obj, indent=1, allow_nan=True, default=_document_default) + "\n"


def _document_default(v):
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.integer, np.floating)):
        return v.item()
    raise TypeError(f"{type(v).__name__} is not JSON serializable")


def write_json(path, obj) -> None:
    atomic_write(path, json_document(obj))


# ---------------------------------------------------------------- SVG

_POS = (178, 24, 43)
_NEG = (33, 102, 172)


def _fill(value, sign, delta):
    if sign == 0 or not math.isfinite(value):
        return "#ffffff"
    t = min(1.0, abs(value) / delta)
    base = _POS if value > 0 else _NEG
    rgb = [round(255 + (c - 255) * t) for c in base]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def svg_heatmap(gammas, hs, values, signs, delta: float, bounds, size: int = 600,
                margin: int = 50, title: str = "") -> str:
    """Standalone SVG of a cell field.

    Cells are filled on a diverging scale by value in [-delta, delta] and left
    white where the sign is 0. Axis ticks sit at multiples of 0.5. The output
    depends only on the inputs.
    """
    g0, g1, h0, h1 = bounds
    values = np.asarray(values, dtype=float)
    signs = np.asarray(signs)
    ng, nh = values.shape
    cw, ch = size / ng, size / nh
    W = H = size + 2 * margin

    def x(g):
        return margin + (g - g0) / (g1 - g0) * size

    def y(h):
        return margin + size - (h - h0) / (h1 - h0) * size

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" shape-rendering="crispEdges">'
    ]
    if title:
        out.append(f'<title>{title}</title>')
    for i in range(ng):
        for j in range(nh):
            px = margin + i * cw
            py = margin + size - (j + 1) * ch
            out.append(
                f'<rect x="{px:.3f}" y="{py:.3f}" width="{cw:.3f}" height="{ch:.3f}" '
                f'fill="{_fill(values[i, j], signs[i, j], delta)}"/>'
            )
    out.append(
        f'<path d="M{margin} {margin}H{margin + size}V{margin + size}H{margin}Z" '
        'fill="none" stroke="#000"/>'
    )
    for k in range(math.ceil(g0 / 0.5 - 1e-9), math.floor(g1 / 0.5 + 1e-9) + 1):
        t = 0.5 * k
        out.append(f'<path d="M{x(t):.3f} {margin + size}v6" stroke="#000"/>')
        out.append(
            f'<text x="{x(t):.3f}" y="{margin + size + 20}" font-size="12" '
            f'text-anchor="middle">{t:g}</text>'
        )
    for k in range(math.ceil(h0 / 0.5 - 1e-9), math.floor(h1 / 0.5 + 1e-9) + 1):
        t = 0.5 * k
        out.append(f'<path d="M{margin} {y(t):.3f}h-6" stroke="#000"/>')
        out.append(
            f'<text x="{margin - 10}" y="{y(t) + 4:.3f}" font-size="12" '
            f'text-anchor="end">{t:g}</text>'
        )
    out.append(f'<text x="{margin + size / 2}" y="{H - 8}" font-size="13" text-anchor="middle">gamma</text>')
    out.append(f'<text x="14" y="{margin + size / 2}" font-size="13" text-anchor="middle">h</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg_heatmap(signmap, path) -> None:
    """Write a :class:`~xychain.scan.SignMap` as a deterministic SVG heatmap."""
    grid = signmap.grid
    text = svg_heatmap(
        grid.gammas, grid.hs, signmap.clamped, signmap.signs, signmap.delta,
        (grid.gamma_min, grid.gamma_max, grid.h_min, grid.h_max),
        title=f"{signmap.quantity} L={signmap.L}",
    )
    atomic_write(path, text)
