"""Experiment configuration: JSON schema, cross-field checks and bundled defaults.

Schema version 1.  A config is a JSON object::

    {
      "schema_version": 1,
      "experiment": "painleve",          # quadrature | poisson | painleve | pipeline-demo | risk | counterexample
      "seed": 0,
      "prior": {"family": "gaussian", "gamma": {"kind": "geometric", "alpha": 8, "rate": 1.5},
                "offset": 0.0, "N": 40},
      "information": {"n": 17, "negative_slope": false, "threshold": 1e6},
      "sampler": {"algorithm": "smc", "schedule": {"start": 10, "stop": 0.01, "m": 961},
                  "particles": 200, "steps": 500, "tau0": "auto", "scale": 1.5},
      "output": {"samples": "samples.csv", "grid": "grid.csv", "summary": "summary.json"},
      "paper_scale": { ...overrides merged in with --paper-scale... }
    }

``prior.N`` is the number of coefficients for 1D problems and the maximum
total degree of the triangular 2D basis for ``poisson``.  Experiment-specific
blocks ``quadrature``, ``pipeline`` and ``risk`` are described in the README.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

__all__ = ["SCHEMA", "SCHEMA_VERSION", "EXPERIMENTS", "ConfigIssue", "ConfigError", "validate_config", "load_config",
           "bundled_config_names", "apply_paper_scale"]

SCHEMA_VERSION = 1
EXPERIMENTS = ("quadrature", "poisson", "painleve", "pipeline-demo", "risk", "counterexample")

_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "experiment"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "experiment": {"enum": list(EXPERIMENTS)},
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "prior": {
            "type": "object",
            "additionalProperties": False,
            "required": ["family", "gamma", "N"],
            "properties": {
                "family": {"enum": ["gaussian", "cauchy", "uniform"]},
                "gamma": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "alpha", "rate"],
                    "properties": {
                        "kind": {"enum": ["power", "geometric"]},
                        "alpha": {"type": "number", "minimum": 0},
                        "rate": _pos,
                    },
                },
                "offset": {"type": "number"},
                "N": _posint,
            },
        },
        "information": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": _posint,
                "layout": {"enum": ["default"]},
                "negative_slope": {"type": "boolean"},
                "threshold": {"anyOf": [_pos, {"type": "null"}]},
            },
        },
        "sampler": {
            "type": "object",
            "additionalProperties": False,
            "required": ["algorithm", "schedule"],
            "properties": {
                "algorithm": {"enum": ["smc", "pt"]},
                "relaxation": {"enum": ["sqexp", "indicator"]},
                "schedule": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["start", "stop", "m"],
                    "properties": {"start": _pos, "stop": _pos, "m": _posint},
                },
                "particles": _posint,
                "iterations": _posint,
                "burn_in": {"type": "integer", "minimum": 0},
                "thin": _posint,
                "replicas": _posint,
                "steps": {"type": "integer", "minimum": 0},
                "tau0": {"anyOf": [_pos, {"const": "auto"}]},
                "scale": _pos,
                "preconditioner": {"enum": ["gamma", "gamma2"]},
            },
        },
        "quadrature": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kernel": {"enum": ["wiener", "integrated_wiener", "sqexp"]},
                "lengthscale": _pos,
                "n": _posint,
                "function": {"enum": ["sin", "exp", "sqrt", "poly"]},
                "draws": _posint,
            },
        },
        "pipeline": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "m": _posint,
                "kernel": {"enum": ["wiener", "integrated_wiener"]},
                "function": {"enum": ["sin", "exp", "sqrt", "poly"]},
                "paths": {"type": "integer", "minimum": 2},
            },
        },
        "risk": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_values": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 6}, "minItems": 1},
                "draws": _posint,
                "starts": _posint,
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"samples": {"type": "string"}, "grid": {"type": "string"},
                           "summary": {"type": "string"}, "risk_table": {"type": "string"}},
        },
        "paper_scale": {"type": "object"},
    },
}

_NEEDS_SAMPLER = ("poisson", "painleve")


@dataclass(frozen=True)
class ConfigIssue:
    path: str
    message: str
    line: int | None = None

    def __str__(self) -> str:
        where = f"line {self.line}: " if self.line else ""
        return f"{where}{self.path or '<root>'}: {self.message}"


class ConfigError(ValueError):
    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("\n".join(str(i) for i in self.issues))


def _locate(text: str | None, path) -> int | None:
    """Line of the last key on ``path`` found by scanning forward through ``text``."""
    if not text:
        return None
    pos, line = 0, None
    for key in path:
        if isinstance(key, int):
            continue
        i = text.find(f'"{key}"', pos)
        if i < 0:
            break
        pos = i + 1
        line = text.count("\n", 0, i) + 1
    return line


def _issue(text, path, msg) -> ConfigIssue:
    path = list(path)
    return ConfigIssue(".".join(str(p) for p in path), msg, _locate(text, path))


def validate_config(cfg: dict, text: str | None = None) -> list:
    """Schema and cross-field checks; returns a list of :class:`ConfigIssue` (empty if valid)."""
    v = jsonschema.Draft202012Validator(SCHEMA)
    issues = [_issue(text, e.absolute_path, e.message) for e in sorted(v.iter_errors(cfg), key=lambda e: list(map(
        str, e.absolute_path)))]
    if issues:
        return issues
    exp = cfg["experiment"]
    if exp in _NEEDS_SAMPLER:
        for block in ("prior", "information", "sampler"):
            if block not in cfg:
                issues.append(_issue(text, [block], f"required for experiment {exp!r}"))
    s = cfg.get("sampler")
    if s:
        sch = s["schedule"]
        if sch["m"] > 1 and not sch["start"] > sch["stop"]:
            issues.append(_issue(text, ["sampler", "schedule", "stop"],
                                 "TemperatureSchedule invariant violated: temperatures must be strictly decreasing (start > stop)"))
        if s["algorithm"] == "smc" and "particles" not in s:
            issues.append(_issue(text, ["sampler"], "SMC needs 'particles'"))
        if s["algorithm"] == "smc" and s.get("particles", 2) < 2:
            issues.append(_issue(text, ["sampler", "particles"], "SMC needs at least 2 particles"))
        if s["algorithm"] == "pt":
            if "iterations" not in s:
                issues.append(_issue(text, ["sampler"], "parallel tempering needs 'iterations'"))
            elif s.get("burn_in", 0) >= s["iterations"]:
                issues.append(_issue(text, ["sampler", "burn_in"], "burn_in must be below iterations"))
            if s.get("relaxation", "sqexp") == "indicator":
                issues.append(_issue(text, ["sampler", "relaxation"], "parallel tempering needs the sqexp relaxation"))
        if cfg.get("prior", {}).get("family") == "uniform" and s.get("steps", 10) > 0:
            issues.append(_issue(text, ["prior", "family"], "MALA moves need a differentiable prior; "
                                 "use steps=0 with the uniform family"))
    if exp == "poisson" and "information" in cfg and cfg["information"].get("n", 16) not in (16, 25, 36):
        issues.append(_issue(text, ["information", "n"], "Poisson designs exist for n in {16, 25, 36}"))
    if exp == "painleve" and "information" in cfg and cfg["information"].get("n", 17) < 3:
        issues.append(_issue(text, ["information", "n"], "need at least one residual point besides the two boundary values"))
    if exp == "quadrature":
        q = cfg.get("quadrature", {})
        if q.get("kernel") == "sqexp" and "lengthscale" not in q:
            issues.append(_issue(text, ["quadrature", "lengthscale"], "sqexp kernel needs a lengthscale"))
    return issues


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def apply_paper_scale(cfg: dict) -> dict:
    """Merge the ``paper_scale`` overrides into the config."""
    over = cfg.get("paper_scale", {})
    out = _merge({k: v for k, v in cfg.items() if k != "paper_scale"}, over)
    return out


def bundled_config_names() -> list:
    root = resources.files("bpnm").joinpath("configs")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _read(path_or_name: str) -> tuple[str, str]:
    p = Path(path_or_name)
    if p.exists():
        return p.read_text(), str(p)
    name = path_or_name[:-5] if path_or_name.endswith(".json") else path_or_name
    res = resources.files("bpnm").joinpath("configs").joinpath(*(name + ".json").split("/"))
    if res.is_file():
        return res.read_text(), f"<bundled {name}>"
    raise FileNotFoundError(f"no config file or bundled config named {path_or_name!r}")


def load_config(path_or_name: str, paper_scale: bool = False) -> dict:
    """Read, validate and return a config; raises :class:`ConfigError` with line-located issues."""
    text, _ = _read(path_or_name)
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([ConfigIssue("", f"invalid JSON: {exc.msg}", exc.lineno)]) from None
    if not isinstance(cfg, dict):
        raise ConfigError([ConfigIssue("", "config must be a JSON object", 1)])
    issues = validate_config(cfg, text)
    if issues:
        raise ConfigError(issues)
    if paper_scale:
        cfg = apply_paper_scale(cfg)
        issues = validate_config(cfg)
        if issues:
            raise ConfigError(issues)
    else:
        cfg = {k: v for k, v in cfg.items() if k != "paper_scale"}
    return cfg
