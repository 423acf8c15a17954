"""Report output: CSV rows, JSON with the full error budget, and SVG convergence plots."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import IdentityReport

CSV_COLUMNS = ("experiment_id", "identity", "d", "alpha", "p", "lhs", "rhs", "abs_err", "rel_err",
               "budget", "lhs_method", "seed", "runtime_ms")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_row(rep: IdentityReport, timing: bool = True) -> dict:
    return {
        "experiment_id": rep.experiment_id,
        "identity": rep.identity_id,
        "d": rep.d,
        "alpha": rep.alpha,
        "p": None if rep.p is None else float(rep.p),
        "lhs": rep.lhs,
        "rhs": rep.rhs,
        "abs_err": rep.abs_err,
        "rel_err": rep.rel_err,
        "budget": rep.budget,
        "lhs_method": rep.lhs_method,
        "seed": rep.seed,
        "runtime_ms": rep.runtime_ms if timing else None,
    }


def jsonable(v):
    """Plain JSON types for report details (numpy scalars and arrays, tuples, nested dicts)."""
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    if v is None or isinstance(v, str):
        return v
    return repr(v)


def report_record(rep: IdentityReport, timing: bool = True) -> dict:
    rec = report_row(rep, timing)
    rec.update(relation=rep.relation, passed=rep.passed,
               error_budget=[[name, float(b)] for name, b in rep.error_budget],
               details=jsonable(rep.details))
    return rec


def emit_report(reports: Sequence[IdentityReport], fmt: str, path, timing: bool = True) -> Path:
    """Write the reports as CSV (fixed columns) or JSON (with budgets and details)."""
    if not reports:
        raise ValueError("no reports to write")
    path = Path(path)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for rep in reports:
                row = report_row(rep, timing)
                w.writerow([_cell(row[c]) for c in CSV_COLUMNS])
    elif fmt == "json":
        with open(path, "w") as fh:
            json.dump([report_record(r, timing) for r in reports], fh, indent=2)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def exhaustion_svg(values: Sequence[float], title: str, ylabel: str = "E|u|^p",
                   reference: float | None = None, width: int = 480, height: int = 320) -> str:
    """Standalone SVG of exhaustion index n = 1..N against the values, with an optional
    horizontal reference line."""
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("nothing to plot")
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("non-finite values")
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom
    lo = min(vals + ([reference] if reference is not None else []))
    hi = max(vals + ([reference] if reference is not None else []))
    if not math.isfinite(lo) or not math.isfinite(hi):
        raise ValueError("non-finite reference")
    pad = 0.05 * (hi - lo) if hi > lo else max(abs(hi), 1.0) * 0.05
    lo, hi = lo - pad, hi + pad
    n = len(vals)
    X = lambda i: left + (pw * (i - 1) / (n - 1) if n > 1 else pw / 2)
    Y = lambda v: top + ph * (hi - v) / (hi - lo)
    pts = " ".join(f"{X(i + 1):.2f},{Y(v):.2f}" for i, v in enumerate(vals))
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="13">{_escape(title)}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for i in range(1, n + 1):
        out.append(f'<text x="{X(i):.2f}" y="{top + ph + 15}" text-anchor="middle">{i}</text>')
    for v in np.linspace(lo, hi, 5):
        out.append(f'<text x="{left - 6}" y="{Y(v) + 4:.2f}" text-anchor="end">{_fmt(v)}</text>')
        out.append(f'<line x1="{left - 3}" y1="{Y(v):.2f}" x2="{left}" y2="{Y(v):.2f}" stroke="black"/>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">exhaustion index n</text>')
    out.append(f'<text x="15" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 15 {top + ph / 2:.1f})">{_escape(ylabel)}</text>')
    if reference is not None:
        out.append(f'<line x1="{left}" y1="{Y(reference):.2f}" x2="{left + pw}" y2="{Y(reference):.2f}" '
                   f'stroke="gray" stroke-dasharray="4 3"/>')
    out.append(f'<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{pts}"/>')
    for i, v in enumerate(vals):
        out.append(f'<circle cx="{X(i + 1):.2f}" cy="{Y(v):.2f}" r="2.5" fill="steelblue"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_plots(reports: Sequence[IdentityReport], outdir) -> list:
    """One SVG per report that carries an exhaustion sequence."""
    outdir = Path(outdir)
    written = []
    for k, rep in enumerate(reports):
        det = rep.details
        name = rep.experiment_id or f"{rep.identity_id}-{k}"
        if "exhaustion" in det:
            svg = exhaustion_svg(det["exhaustion"], f"{name}: exit moments along U_n",
                                 reference=det.get("full_domain_value"))
        elif "f_sequence_x0" in det:
            seq = np.add(det["f_sequence_x0"], det["g_sequence_x0"])
            svg = exhaustion_svg(seq, f"{name}: f_n(x0) + g_n(x0)", ylabel="f_n(x0) + g_n(x0)",
                                 reference=det.get("norm1"))
        else:
            continue
        path = outdir / f"{name}_exhaustion.svg"
        path.write_text(svg)
        written.append(path)
    return written
