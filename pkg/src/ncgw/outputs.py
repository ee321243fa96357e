"""Deterministic file outputs: atomic CSV/JSON writes, SVG plots, golden fixtures."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

FIXTURE_VERSION = "v1"


def config_hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def fmt(v) -> str:
    """Round-trip text for floats; integers and strings pass through."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    return str(v)


def atomic_write(path, data: str | bytes) -> Path:
    """Write to a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header: list[str], rows, chash: str) -> Path:
    """CSV with a leading ``# config_sha256=...`` comment and a header row."""
    buf = io.StringIO()
    buf.write(f"# config_sha256={chash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return atomic_write(path, buf.getvalue())


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def write_json(path, obj) -> Path:
    return atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# plots


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "ncgw"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def _save_svg(fig, path) -> Path:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": "ncgw"})
    _pyplot().close(fig)
    return atomic_write(path, buf.getvalue())


def plot_lines(path, x, series: dict[str, np.ndarray], xlabel: str, ylabel: str, title: str = "", hline=None) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, y in series.items():
        ax.plot(x, y, label=name)
    if hline is not None:
        ax.axhline(hline, color="k", lw=0.8, ls="--")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    return _save_svg(fig, path)


def plot_density(path, w, title: str = "") -> Path:
    plt = _pyplot()
    gs = w.grid
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(
        np.abs(w.amplitudes) ** 2,
        origin="lower",
        extent=(gs.x_min, gs.x_max, gs.y_min, gs.y_max),
        aspect="auto",
    )
    fig.colorbar(im, ax=ax)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save_svg(fig, path)


# ---------------------------------------------------------------------------
# golden fixtures


def fixtures_dir(default) -> Path:
    return Path(os.environ.get("NCGW_FIXTURES", default))


def check_or_record(directory, name: str, values: dict[str, float], rtol: float = 1e-8) -> dict:
    """Compare ``values`` with the stored fixture, or record them if none exists.

    Returns {"status": "recorded" | "match" | "mismatch", "diffs": {...}}.
    """
    path = Path(directory) / f"{name}.{FIXTURE_VERSION}.json"
    if not path.exists():
        write_json(path, {"version": FIXTURE_VERSION, "values": values})
        return {"status": "recorded", "path": str(path), "diffs": {}}
    stored = json.loads(path.read_text())["values"]
    diffs = {}
    for k, v in values.items():
        ref = stored.get(k)
        if ref is None:
            diffs[k] = math.inf
            continue
        diffs[k] = abs(v - ref) / max(abs(ref), 1e-300)
    ok = all(d <= rtol for d in diffs.values())
    return {"status": "match" if ok else "mismatch", "path": str(path), "diffs": diffs}
