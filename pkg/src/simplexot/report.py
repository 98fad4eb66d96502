"""Run directories: JSON reports, CSV tables, SVG figures and a manifest.

Reports are written with sorted keys and no timing data, so that two runs
with the same config produce identical files; the manifest differs only in
its ``timestamp`` field.
"""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
import platform
from fractions import Fraction
from importlib import metadata
from pathlib import Path

import numpy as np

from .config import dump_config

MANIFEST_VERSION = 1


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become the strings ``inf``, ``-inf``, ``nan``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, Fraction):
        return str(obj)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("numpy", "scipy", "networkx", "PyYAML", "artifact"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def run_id(command: str, cfg: dict) -> str:
    digest = hashlib.sha256((command + "\n" + dump_config(cfg)).encode()).hexdigest()
    return f"{command.replace(' ', '-')}-{digest[:12]}"


class RunDirectory:
    """Collects output files of one invocation and writes the manifest last."""

    def __init__(self, root: str | Path, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        self.path = Path(root) / run_id(command, cfg)
        self.path.mkdir(parents=True, exist_ok=True)
        self.files: dict[str, str] = {}

    def _record(self, name: str, data: bytes) -> Path:
        p = self.path / name
        p.write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()
        return p

    def json(self, name: str, obj) -> Path:
        return self._record(name, dumps(obj).encode())

    def text(self, name: str, text: str) -> Path:
        return self._record(name, text.encode())

    def csv(self, name: str, header, rows) -> Path:
        lines = [",".join(map(str, header))]
        for row in rows:
            lines.append(",".join(_cell(v) for v in row))
        return self._record(name, ("\n".join(lines) + "\n").encode())

    def manifest(self, status: str, exit_code: int, timestamp: str | None = None) -> Path:
        self.text("config.yaml", dump_config(self.cfg))
        doc = {
            "manifest_version": MANIFEST_VERSION,
            "command": self.command,
            "config": self.cfg,
            "seed": self.cfg.get("seed"),
            "versions": versions(),
            "status": status,
            "exit_code": exit_code,
            "files": dict(sorted(self.files.items())),
            "timestamp": timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        }
        p = self.path / "manifest.json"
        p.write_text(dumps(doc))
        return p


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# SVG of unfolded boundaries (d <= 2)


def _net(d: int) -> dict[int, dict[int, np.ndarray]]:
    """Planar positions of the vertices of each facet in an unfolded net."""
    if d == 1:
        # the triangle boundary cut open at vertex 0: 0 -> 1 -> 2 -> 0
        return {
            2: {0: np.array([0.0, 0.0]), 1: np.array([1.0, 0.0])},
            0: {1: np.array([1.0, 0.0]), 2: np.array([2.0, 0.0])},
            1: {2: np.array([2.0, 0.0]), 0: np.array([3.0, 0.0])},
        }
    if d == 2:
        P = {0: np.array([0.0, 0.0]), 1: np.array([1.0, 0.0]), 2: np.array([0.5, math.sqrt(3) / 2])}

        def reflect(p, a, b):
            ab = b - a
            t = (p - a) @ ab / (ab @ ab)
            foot = a + t * ab
            return 2 * foot - p

        return {
            3: dict(P),
            2: {0: P[0], 1: P[1], 3: reflect(P[2], P[0], P[1])},
            1: {0: P[0], 2: P[2], 3: reflect(P[1], P[0], P[2])},
            0: {1: P[1], 2: P[2], 3: reflect(P[0], P[1], P[2])},
        }
    raise ValueError("unfolded nets are drawn for d <= 2 only")


def _color(t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    r = int(round(40 + 215 * t))
    b = int(round(255 - 215 * t))
    g = int(round(60 + 80 * (1 - abs(2 * t - 1))))
    return f"#{r:02x}{g:02x}{b:02x}"


def svg_unfolded(bary: np.ndarray, values: np.ndarray, title: str, size: int = 480) -> str:
    """Scatter of values on the unfolded boundary; points on shared faces appear in each facet."""
    d = bary.shape[1] - 2
    net = _net(d)
    vals = np.asarray(values, dtype=float)
    lo, hi = float(np.nanmin(vals)), float(np.nanmax(vals))
    span = hi - lo if hi > lo else 1.0
    pts = []
    for i, pos in net.items():
        on = bary[:, i] <= 1e-12
        for w, v in zip(bary[on], vals[on]):
            xy = sum(w[k] * pos[k] for k in pos)
            pts.append((xy, v))
    xy = np.array([p[0] for p in pts])
    mn, mx = xy.min(axis=0), xy.max(axis=0)
    scale = (size - 40) / max(float((mx - mn).max()), 1e-12)
    height = int(round((mx[1] - mn[1]) * scale)) + 60
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{height}" viewBox="0 0 {size} {height}">',
        f'<text x="10" y="16" font-family="monospace" font-size="12">{title} [{lo:.4g}, {hi:.4g}]</text>',
    ]
    r = max(1.5, 0.4 * scale / max(len(pts), 1) ** (1 / max(d, 1)))
    for (p, v) in pts:
        x = 20 + (p[0] - mn[0]) * scale
        y = height - 20 - (p[1] - mn[1]) * scale
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r:.2f}" fill="{_color((v - lo) / span)}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
