"""Deterministic serialization: JSON reports, CSV tables, SVG figures and run manifests.

JSON uses sorted keys and floats printed with 17 significant digits, so
equal reports give byte-identical files. Complex numbers are stored as
two-element arrays [re, im]; non-finite floats as null.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from . import __version__

PAIRING_CSV_COLUMNS = ("N", "trials", "fail", "p_fail", "se", "mean_outer", "var_outer")


def _float(x: float):
    return x if math.isfinite(x) else None


def to_jsonable(obj):
    """Plain JSON-compatible tree: dataclasses to dicts, complex to [re, im]."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return [_float(float(obj.real)), _float(float(obj.imag))]
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _fmt_float(x: float) -> str:
    s = "%.17g" % x
    return s if any(ch in s for ch in ".en") else s + ".0"


def _is_scalar(o) -> bool:
    return not isinstance(o, (list, dict))


def _encode(o, level, indent):
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," if indent else ", "
    if o is None:
        yield "null"
    elif o is True:
        yield "true"
    elif o is False:
        yield "false"
    elif isinstance(o, int):
        yield str(o)
    elif isinstance(o, float):
        yield _fmt_float(o)
    elif isinstance(o, str):
        yield json.dumps(o)
    elif isinstance(o, list):
        if all(_is_scalar(v) for v in o):
            yield "[" + ", ".join("".join(_encode(v, 0, None)) for v in o) + "]"
            return
        yield "["
        for i, v in enumerate(o):
            yield (sep if i else "") + pad
            yield from _encode(v, level + 1, indent)
        yield end + "]"
    elif isinstance(o, dict):
        if not o:
            yield "{}"
            return
        yield "{"
        for i, k in enumerate(sorted(o)):
            yield (sep if i else "") + pad + json.dumps(k) + ": "
            yield from _encode(o[k], level + 1, indent)
        yield end + "}"
    else:
        raise TypeError(f"cannot encode {type(o).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return "".join(_encode(to_jsonable(obj), 0, indent)) + "\n"


def write_report_json(report, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(report))


def read_report_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def as_complex(pair) -> complex:
    """Inverse of the [re, im] encoding; null parts become nan."""
    re, im = (float("nan") if x is None else x for x in pair)
    return complex(re, im)


def _cell(x):
    if isinstance(x, float):
        return _fmt_float(x)
    return str(x)


def write_csv(table: Iterable, path, columns: Optional[Sequence[str]] = None) -> None:
    """Rows are dataclasses or dicts; ``columns`` defaults to the first row's keys."""
    rows = [to_jsonable(r) if dataclasses.is_dataclass(r) else dict(r) for r in table]
    if columns is None:
        columns = list(rows[0]) if rows else []
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c]) for c in columns])


def write_pairing_csv(report, path) -> None:
    write_csv(report.rows, path, PAIRING_CSV_COLUMNS)


SVG_SIZE = 800


def _mapper(window):
    x0, x1, y0, y1 = window
    sx = SVG_SIZE / (x1 - x0)
    sy = SVG_SIZE / (y1 - y0)

    def to_px(z):
        return (z.real - x0) * sx, (y1 - z.imag) * sy

    return to_px, min(sx, sy)


def render_svg(fig, path) -> None:
    """Zeros as filled discs, critical points as squares, xi as an asterisk,
    flow lines as polylines and the annulus as two circles around xi."""
    to_px, scale = _mapper(fig.window)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SVG_SIZE} {SVG_SIZE}" '
        f'width="{SVG_SIZE}" height="{SVG_SIZE}">',
        f'<rect x="0" y="0" width="{SVG_SIZE}" height="{SVG_SIZE}" fill="white"/>',
        '<g class="flow" fill="none" stroke="#999999" stroke-width="0.8">',
    ]
    for line in fig.flow_lines:
        pts = " ".join("%.3f,%.3f" % to_px(complex(z)) for z in line.points)
        out.append(f'<polyline class="flowline" data-terminal="{escape(line.terminal)}" points="{pts}"/>')
    out.append("</g>")
    if fig.xi is not None and fig.annulus is not None:
        cx, cy = to_px(fig.xi)
        out.append('<g class="annulus" fill="none" stroke="#cc0000" stroke-width="1">')
        for rad in fig.annulus:
            # chart radius to Euclidean radius at xi for the fs_normal chart
            k = (1 + abs(fig.xi) ** 2) if fig.coord_mode == "fs_normal" else 1.0
            out.append(f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="{rad * k * scale:.3f}"/>')
        out.append("</g>")
    out.append('<g class="zeros" fill="black">')
    for z in fig.zeros:
        x, y = to_px(complex(z))
        out.append(f'<circle class="zero" cx="{x:.3f}" cy="{y:.3f}" r="4"/>')
    out.append("</g>")
    out.append('<g class="critical" fill="#1f4fd6">')
    for c in fig.critical_points:
        x, y = to_px(complex(c))
        out.append(f'<rect class="crit" x="{x - 3.5:.3f}" y="{y - 3.5:.3f}" width="7" height="7"/>')
    out.append("</g>")
    if fig.xi is not None:
        x, y = to_px(fig.xi)
        out.append(f'<text class="xi" x="{x:.3f}" y="{y + 6:.3f}" font-size="18" '
                   f'text-anchor="middle" fill="#cc0000">*</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


@dataclass
class RunManifest:
    command: str
    config: dict
    master_seed: int
    version: str = __version__
    duration_s: float = 0.0
    outputs: list = field(default_factory=list)

    def write(self, path) -> None:
        write_report_json(self, path)

    @classmethod
    def read(cls, path) -> RunManifest:
        d = read_report_json(path)
        return cls(d["command"], d["config"], d["master_seed"], d["version"], d["duration_s"], d["outputs"])
