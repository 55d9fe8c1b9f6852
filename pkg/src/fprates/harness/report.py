"""CSV / JSON / SVG writers for report bundles, plus the hashed manifest.

Every writer is deterministic: floats are written with ``repr`` (shortest
round-tripping form), JSON keys are sorted and nothing time-dependent is
recorded.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

from .runner import OutputError, ReportBundle

BUNDLE_FILE = "bundle.json"
MANIFEST_FILE = "manifest.json"
SVG_FILE = "errors.svg"
BOUND_COLUMNS = ("exp_bound", "a_n", "b_n", "theta_n")


def _clean(obj):
    """JSON-safe copy: non-finite floats become None."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):  # numpy scalar
        return _clean(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def trace_csv(trace: dict) -> str:
    """n, coordinates, error, residual and any bound columns computed for the run."""
    dim = len(trace["iterates"][0])
    coord_names = ["x"] if dim == 1 else [f"x{i + 1}" for i in range(dim)]
    header = ["n", *coord_names]
    errors = trace.get("errors")
    if errors is not None:
        header.append("error")
    header.append("residual")
    cols = trace.get("columns") or {}
    extra = [c for c in BOUND_COLUMNS if c in cols]
    header += extra

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for n, x in enumerate(trace["iterates"]):
        row = [str(n), *(_fmt(c) for c in x)]
        if errors is not None:
            row.append(_fmt(errors[n]))
        row.append(_fmt(trace["residuals"][n]))
        row += [_fmt(cols[c][n]) if n < len(cols[c]) else "" for c in extra]
        w.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# SVG

_W, _H = 720, 440
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 150, 30, 50
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def errors_svg(bundle: ReportBundle) -> str:
    """Log-scale error (or residual, when no fixed point is known) curves, one polyline per scheme."""
    series = []
    for name, tr in bundle.traces.items():
        ys = tr["errors"] if tr.get("errors") is not None else tr["residuals"]
        pts = [(n, math.log10(y)) for n, y in enumerate(ys) if y > 0 and math.isfinite(y)]
        series.append((name, pts))
    all_pts = [p for _, pts in series for p in pts]
    n_max = max((p[0] for p in all_pts), default=1) or 1
    lo = math.floor(min((p[1] for p in all_pts), default=-1.0))
    hi = math.ceil(max((p[1] for p in all_pts), default=0.0))
    if hi <= lo:
        hi = lo + 1
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM

    def sx(n):
        return _LEFT + pw * n / n_max

    def sy(v):
        return _TOP + ph * (hi - v) / (hi - lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_LEFT}" y="18" font-family="sans-serif" font-size="13">{bundle.name}: error vs n (log10)</text>',
        f'<rect x="{_LEFT}" y="{_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    step = max(1, (hi - lo) // 8)
    for e in range(lo, hi + 1, step):
        y = sy(e)
        out.append(f'<line x1="{_LEFT - 4}" y1="{y:.2f}" x2="{_LEFT}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{_LEFT - 8}" y="{y + 4:.2f}" font-family="sans-serif" font-size="11" '
                   f'text-anchor="end">1e{e}</text>')
    out.append(f'<text x="{_LEFT + pw / 2:.2f}" y="{_H - 12}" font-family="sans-serif" font-size="12" '
               f'text-anchor="middle">n (0..{n_max})</text>')
    for i, (name, pts) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{sx(n):.2f},{sy(v):.2f}" for n, v in pts)
        out.append(f'<polyline data-scheme="{name}" fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = _TOP + 16 * (i + 1)
        lx = _W - _RIGHT + 12
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}" font-family="sans-serif" font-size="12">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def emit_report(bundle: ReportBundle, fmt: str) -> list[Path]:
    """Write one output format into the bundle directory and refresh the manifest."""
    d = bundle.directory
    if fmt == "csv":
        written = [_write(d / "traces" / f"{name}.csv", trace_csv(tr)) for name, tr in bundle.traces.items()]
    elif fmt == "json":
        written = [_write(d / BUNDLE_FILE, dumps(bundle.to_payload()))]
    elif fmt == "svg":
        written = [_write(d / SVG_FILE, errors_svg(bundle))]
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    for p in written:
        if p not in bundle.files:
            bundle.files.append(p)
    write_manifest(bundle)
    return written


def write_manifest(bundle: ReportBundle) -> Path:
    d = bundle.directory
    entries = []
    for p in sorted(set(bundle.files) | _existing_outputs(d)):
        data = p.read_bytes()
        entries.append({"path": p.relative_to(d).as_posix(), "sha256": hashlib.sha256(data).hexdigest(),
                        "bytes": len(data)})
    manifest = {"name": bundle.name, "passed": bundle.passed, "files": entries}
    return _write(d / MANIFEST_FILE, dumps(manifest))


def _existing_outputs(d: Path) -> set[Path]:
    found = set((d / "traces").glob("*.csv")) if (d / "traces").is_dir() else set()
    for name in (BUNDLE_FILE, SVG_FILE):
        if (d / name).is_file():
            found.add(d / name)
    return found


def write_bundle(bundle: ReportBundle, formats=("csv", "json", "svg")) -> list[Path]:
    # json first so `report` can always rebuild the other formats
    order = [f for f in ("json", "csv", "svg") if f in formats]
    written = []
    for fmt in order:
        written += emit_report(bundle, fmt)
    return written


def load_bundle(directory: str | Path) -> ReportBundle:
    d = Path(directory)
    try:
        payload = json.loads((d / BUNDLE_FILE).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise OutputError(f"{d}: no readable {BUNDLE_FILE} ({exc})") from exc
    return ReportBundle.from_payload(payload, d)
