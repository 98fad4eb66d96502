"""Run configuration: a YAML document validated against a fixed schema.

Every key is optional; missing keys take the defaults below.  Unknown keys
and ill-typed values are rejected with the dotted path of the offending
field.

.. code-block:: yaml

    dimension: 2            # d >= 1
    resolutions: [4, 8]     # grid resolutions, each >= 1
    seed: 0                 # sampling seed (never affects solvers)
    mu: uniform             # uniform | doubling | {kind: doubling, amplitude: 0.5, frequency: 1.0}
    nu: uniform
    solver:
      method: exact         # exact | dual | scaled
      cap: 3000             # orbit cap of the exact solver
      max_iter: 20000
      tol: 1.0e-12
      eps_schedule: [0.2, 0.1, 0.05, 0.02, 0.01]
    tolerances:
      margin: 1.0e-9        # argmax margin for c-gradients
      tie: 1.0e-9           # relative tie tolerance for strata
      duality_gap: 1.0e-9   # relative gap accepted as success
    metric:
      collar_factor: 2.0
      edge_factor: 3.0
      bounds: true
      jensen_segments: 20
      probe: false
      eps_ladder: [0.2, 0.1, 0.05]
      probe_factor: 3.0
      probe_symmetry: true
    appendix:
      M: 4
      N: 9
      alpha: 0.5
      beta: 2
    svg: true               # SVG figures for d <= 2
"""
from __future__ import annotations

import copy
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError

DEFAULTS: dict[str, Any] = {
    "dimension": 2,
    "resolutions": [4, 8],
    "seed": 0,
    "mu": "uniform",
    "nu": "uniform",
    "solver": {
        "method": "exact",
        "cap": 3000,
        "max_iter": 20000,
        "tol": 1e-12,
        "eps_schedule": [0.2, 0.1, 0.05, 0.02, 0.01],
    },
    "tolerances": {"margin": 1e-9, "tie": 1e-9, "duality_gap": 1e-9},
    "metric": {
        "collar_factor": 2.0,
        "edge_factor": 3.0,
        "bounds": True,
        "jensen_segments": 20,
        "probe": False,
        "eps_ladder": [0.2, 0.1, 0.05],
        "probe_factor": 3.0,
        "probe_symmetry": True,
    },
    "appendix": {"M": 4, "N": 9, "alpha": 0.5, "beta": 2},
    "svg": True,
}


def _int(path, v, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"expected an integer, got {v!r}", path)
    if lo is not None and v < lo:
        raise ConfigError(f"must be >= {lo}, got {v}", path)
    return v


def _num(path, v, positive=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {v!r}", path)
    if positive and not v > 0:
        raise ConfigError(f"must be positive, got {v}", path)
    return float(v)


def _bool(path, v):
    if not isinstance(v, bool):
        raise ConfigError(f"expected true or false, got {v!r}", path)
    return v


def _list(path, v, item):
    if not isinstance(v, list) or not v:
        raise ConfigError(f"expected a nonempty list, got {v!r}", path)
    return [item(f"{path}[{k}]", x) for k, x in enumerate(v)]


def _decreasing(path, v):
    if any(b >= a for a, b in zip(v, v[1:])):
        raise ConfigError("must be strictly decreasing", path)
    return v


def _density(path, v):
    if isinstance(v, str):
        if v not in ("uniform", "doubling"):
            raise ConfigError(f"unknown density {v!r}; use uniform, doubling or a mapping", path)
        return v
    if isinstance(v, dict):
        _keys(path, v, {"kind", "amplitude", "frequency"})
        kind = v.get("kind", "doubling")
        if kind not in ("uniform", "doubling"):
            raise ConfigError(f"unknown density kind {kind!r}", f"{path}.kind")
        out = {"kind": kind}
        if "amplitude" in v:
            a = _num(f"{path}.amplitude", v["amplitude"])
            if not 0 <= a < 1:
                raise ConfigError("amplitude must lie in [0, 1)", f"{path}.amplitude")
            out["amplitude"] = a
        if "frequency" in v:
            out["frequency"] = _num(f"{path}.frequency", v["frequency"], positive=True)
        return out
    raise ConfigError(f"expected a density name or mapping, got {v!r}", path)


def _choice(options):
    def check(path, v):
        if v not in options:
            raise ConfigError(f"must be one of {', '.join(options)}; got {v!r}", path)
        return v

    return check


def _keys(path, section, allowed):
    for k in section:
        if k not in allowed:
            where = f"{path}.{k}" if path else str(k)
            raise ConfigError(f"unknown key {k!r}", where)


SCHEMA = {
    "dimension": lambda p, v: _int(p, v, 1),
    "resolutions": lambda p, v: _list(p, v, lambda q, x: _int(q, x, 1)),
    "seed": lambda p, v: _int(p, v, 0),
    "mu": _density,
    "nu": _density,
    "solver": {
        "method": _choice(("exact", "dual", "scaled")),
        "cap": lambda p, v: _int(p, v, 1),
        "max_iter": lambda p, v: _int(p, v, 1),
        "tol": lambda p, v: _num(p, v, positive=True),
        "eps_schedule": lambda p, v: _decreasing(p, _list(p, v, lambda q, x: _num(q, x, positive=True))),
    },
    "tolerances": {
        "margin": lambda p, v: _num(p, v, positive=True),
        "tie": lambda p, v: _num(p, v, positive=True),
        "duality_gap": lambda p, v: _num(p, v, positive=True),
    },
    "metric": {
        "collar_factor": lambda p, v: _num(p, v, positive=True),
        "edge_factor": lambda p, v: _num(p, v, positive=True),
        "bounds": _bool,
        "jensen_segments": lambda p, v: _int(p, v, 0),
        "probe": _bool,
        "eps_ladder": lambda p, v: _decreasing(p, _list(p, v, lambda q, x: _num(q, x, positive=True))),
        "probe_factor": lambda p, v: _num(p, v, positive=True),
        "probe_symmetry": _bool,
    },
    "appendix": {
        "M": lambda p, v: _int(p, v, 2),
        "N": lambda p, v: _int(p, v, 2),
        "alpha": lambda p, v: _num(p, v, positive=True),
        "beta": lambda p, v: _num(p, v, positive=True),
    },
    "svg": _bool,
}


def validate(doc: Any) -> dict:
    """Merge ``doc`` over the defaults, checking every field."""
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a mapping", "")
    _keys("", doc, SCHEMA)
    out = copy.deepcopy(DEFAULTS)
    for key, rule in SCHEMA.items():
        if key not in doc:
            continue
        if isinstance(rule, dict):
            section = doc[key]
            if section is None:
                continue
            if not isinstance(section, dict):
                raise ConfigError("expected a mapping", key)
            _keys(key, section, rule)
            for sub, check in rule.items():
                if sub in section:
                    out[key][sub] = check(f"{key}.{sub}", section[sub])
        else:
            out[key] = rule(key, doc[key])
    return out


def load_config(path: str | Path | None) -> dict:
    """Read and validate a YAML (or JSON) config; ``None`` gives the defaults."""
    if path is None:
        return validate({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"parse error: {exc}", str(path)) from exc
    return validate(doc)


def dump_config(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=None)
