"""CSV traces, run comparison and a self-drawn SVG figure."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np
from numpy.typing import NDArray

from .errors import SchemaMismatch

EULER_NAMES = ("psi", "theta", "phi")
QUAT_NAMES = ("q0", "q1", "q2", "q3")
VEL_NAMES = ("vx", "vy", "vz")
POS_NAMES = ("rx", "ry", "rz")
ERROR_COLUMNS = ("err_att", "err_vel", "err_pos")
TIME_KEY_DECIMALS = 9


def trace_columns(chart: str) -> list[str]:
    """Fixed column order of a trace CSV for the given attitude chart."""
    att = QUAT_NAMES if chart == "quaternion" else EULER_NAMES
    comps = list(att) + list(VEL_NAMES) + list(POS_NAMES)
    return ["t", "event"] + [c + "_true" for c in comps] + [c + "_est" for c in comps] + list(ERROR_COLUMNS)


def write_trace_csv(
    path,
    times: NDArray,
    truth: NDArray,
    est: NDArray,
    errors: NDArray,
    events: Sequence[str],
    chart: str,
) -> None:
    """Write one row per sample. Floats use ``repr`` so files round-trip exactly."""
    cols = trace_columns(chart)
    n = truth.shape[1]
    if est.shape[1] != n or len(cols) != 2 + 2 * n + 3:
        raise ValueError("state width does not match the chart's column layout")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i in range(times.size):
            row = [repr(float(times[i])), events[i]]
            row += [repr(float(v)) for v in truth[i]]
            row += [repr(float(v)) for v in est[i]]
            row += [repr(float(v)) for v in errors[i]]
            w.writerow(row)


def read_trace_csv(path) -> tuple[list[str], dict[str, list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaMismatch(f"{path}: empty file")
    header = rows[0]
    cols = {h: [r[j] for r in rows[1:]] for j, h in enumerate(header)}
    return header, cols


@dataclass
class ComparisonReport:
    columns: list[str]
    max_abs: dict[str, float]
    n_common: int
    event_mismatches: int

    @property
    def overall(self) -> float:
        return max(self.max_abs.values(), default=0.0)

    def state_max(self) -> float:
        """Largest deviation over the state columns (``*_true``/``*_est``)."""
        vals = [v for k, v in self.max_abs.items() if k.endswith(("_true", "_est"))]
        return max(vals, default=0.0)

    def format(self) -> str:
        lines = [f"{'column':>12}  max |deviation|"]
        for c in self.columns:
            lines.append(f"{c:>12}  {self.max_abs[c]:.3e}")
        lines.append(f"{self.n_common} common samples, {self.event_mismatches} event-marker mismatches")
        return "\n".join(lines)


def compare_runs(baseline, candidate) -> ComparisonReport:
    """Per-column max absolute deviation between two trace CSVs.

    Rows are aligned on ``t`` rounded to 1e-9 s, so runs at different ``dt``
    compare on their common sample instants.
    """
    ha, a = read_trace_csv(baseline)
    hb, b = read_trace_csv(candidate)
    if ha != hb:
        missing = sorted(set(ha) ^ set(hb))
        raise SchemaMismatch(f"column sets differ: {missing}" if missing else "column order differs")
    if "t" not in ha:
        raise SchemaMismatch("no 't' column")
    ka = {round(float(t), TIME_KEY_DECIMALS): i for i, t in enumerate(a["t"])}
    kb = {round(float(t), TIME_KEY_DECIMALS): i for i, t in enumerate(b["t"])}
    common = sorted(set(ka) & set(kb))
    if not common:
        raise SchemaMismatch("no common sample times")
    ia = np.array([ka[k] for k in common])
    ib = np.array([kb[k] for k in common])
    numeric = [c for c in ha if c not in ("t", "event")]
    out = {}
    for c in numeric:
        va = np.array(a[c], dtype=float)[ia]
        vb = np.array(b[c], dtype=float)[ib]
        out[c] = float(np.max(np.abs(va - vb)))
    mism = 0
    if "event" in ha:
        mism = sum(a["event"][i] != b["event"][j] for i, j in zip(ia, ib))
    return ComparisonReport(numeric, out, len(common), int(mism))


# -- SVG ----------------------------------------------------------------------

_PANEL_W, _PANEL_H = 300, 180
_PAD_L, _PAD_R, _PAD_T, _PAD_B = 58, 12, 26, 30
_MAX_POINTS = 1500


def _decimate(n: int) -> NDArray:
    if n <= _MAX_POINTS:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, _MAX_POINTS).round().astype(int))


def _polyline(xs, ys, x0, y0, w, h, xr, yr, style) -> str:
    sx = (xs - xr[0]) / (xr[1] - xr[0]) * w + x0
    sy = y0 + h - (ys - yr[0]) / (yr[1] - yr[0]) * h
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(sx, sy))
    return f'<polyline fill="none" {style} points="{pts}"/>'


def render_svg(
    times: NDArray,
    truth: NDArray,
    est: NDArray,
    labels: Sequence[str],
    title: str = "",
    path=None,
) -> str:
    """3x3 grid of truth (solid) vs estimate (dashed) for nine components.

    Rows are attitude, velocity and position; columns the three components.
    """
    if truth.shape[1] != 9 or est.shape[1] != 9:
        raise ValueError("render_svg expects nine components")
    keep = _decimate(times.size)
    t = times[keep]
    W = 3 * _PANEL_W
    H = 3 * _PANEL_H + 30
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
        'font-family="sans-serif" font-size="11">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    xr = (float(t[0]), float(t[-1]) if t[-1] > t[0] else float(t[0]) + 1.0)
    for j in range(9):
        row, col = divmod(j, 3)
        ox = col * _PANEL_W + _PAD_L
        oy = 30 + row * _PANEL_H + _PAD_T
        w = _PANEL_W - _PAD_L - _PAD_R
        h = _PANEL_H - _PAD_T - _PAD_B
        a = truth[keep, j]
        b = est[keep, j]
        lo = float(min(a.min(), b.min()))
        hi = float(max(a.max(), b.max()))
        if not hi > lo:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.05 * (hi - lo)
        yr = (lo - pad, hi + pad)
        parts.append(f'<rect x="{ox}" y="{oy}" width="{w}" height="{h}" fill="none" stroke="#888"/>')
        parts.append(f'<text x="{ox + w / 2}" y="{oy - 6}" text-anchor="middle">{escape(labels[j])}</text>')
        parts.append(f'<text x="{ox - 4}" y="{oy + 10}" text-anchor="end">{yr[1]:.3g}</text>')
        parts.append(f'<text x="{ox - 4}" y="{oy + h}" text-anchor="end">{yr[0]:.3g}</text>')
        parts.append(f'<text x="{ox}" y="{oy + h + 14}">{xr[0]:.3g}</text>')
        parts.append(f'<text x="{ox + w}" y="{oy + h + 14}" text-anchor="end">{xr[1]:.3g} s</text>')
        parts.append(_polyline(t, a, ox, oy, w, h, xr, yr, 'stroke="#1f4e9c" stroke-width="1.4"'))
        parts.append(_polyline(t, b, ox, oy, w, h, xr, yr,
                               'stroke="#c0392b" stroke-width="1.2" stroke-dasharray="5,3"'))
    parts.append(f'<text x="8" y="{H - 6}">solid: true state, dashed: estimate</text>')
    parts.append("</svg>")
    text = "\n".join(parts) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
