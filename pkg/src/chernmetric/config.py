"""Run configuration: JSON schema, defaults, flag overrides and model construction.

Precedence, lowest first: built-in defaults, the ``--config`` file, command
line flags. Environment variables are never consulted.
"""
from __future__ import annotations

import copy
import json
import os

import jsonschema

from .errors import ConfigError
from .models import BUILTIN_MODELS, DiracModel, FourierTerm, builtin_model, fourier_model

_TERM = {
    "type": "object",
    "properties": {
        "coef": {"type": "number"},
        "factors": {"type": "array", "items": {"type": "string"}},
    },
    "required": ["coef"],
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {
            "oneOf": [
                {
                    "type": "object",
                    "properties": {
                        "name": {"enum": sorted(BUILTIN_MODELS)},
                        "params": {"type": "object", "properties": {"m": {"type": "number"}},
                                   "additionalProperties": False},
                    },
                    "required": ["name"],
                    "additionalProperties": False,
                },
                {
                    "type": "object",
                    "properties": {
                        "fourier": {
                            "type": "object",
                            "properties": {
                                "n_half_dim": {"type": "integer", "minimum": 1, "maximum": 4},
                                "name": {"type": "string"},
                                "d": {"type": "array", "items": {"type": "array", "items": _TERM}},
                                "d0": {"type": "array", "items": _TERM},
                            },
                            "required": ["n_half_dim", "d"],
                            "additionalProperties": False,
                        }
                    },
                    "required": ["fourier"],
                    "additionalProperties": False,
                },
            ]
        },
        "grid": {"type": "integer", "minimum": 2},
        "scheme": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["analytic", "fd", "fd_projector"]},
                "fd_step": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "method": {"enum": ["metric", "oracle", "all"]},
        "threads": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "perturb": {"type": "number"},
        "out": {"type": ["string", "null"]},
        "tolerances": {
            "type": "object",
            "properties": {
                "gap": {"type": "number", "exclusiveMinimum": 0},
                "identity": {"type": "number", "exclusiveMinimum": 0},
                "riemann": {"type": "number", "exclusiveMinimum": 0},
                "scalar": {"type": "number", "exclusiveMinimum": 0},
                "einstein": {"type": "number", "exclusiveMinimum": 0},
                "euler": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "sweep": {
            "type": "object",
            "properties": {"m_values": {"type": "array", "items": {"type": "number"}, "minItems": 1}},
            "additionalProperties": False,
        },
        "geometry": {
            "type": "object",
            "properties": {
                "fd_step": {"type": "number", "exclusiveMinimum": 0},
                "richardson": {"type": "boolean"},
                "max_condition": {"type": "number", "exclusiveMinimum": 1},
                "euler_grid": {"type": ["integer", "null"], "minimum": 2},
            },
            "additionalProperties": False,
        },
        "drive": {
            "type": "object",
            "properties": {
                "axes": {"type": "array", "items": {"type": "integer", "minimum": 1},
                         "minItems": 1, "maxItems": 2},
                "epsilon": {"type": "number", "exclusiveMinimum": 0},
                "eta_rel": {"type": "number", "exclusiveMinimum": 0},
                "window_rel": {"type": "number", "exclusiveMinimum": 1},
                "k": {"type": ["array", "null"], "items": {"type": "number"}},
            },
            "additionalProperties": False,
        },
    },
}

DEFAULTS = {
    "model": {"name": "qhz4d", "params": {"m": -3.0}},
    "grid": 16,
    "scheme": {"kind": "analytic", "fd_step": 1e-5},
    "method": "all",
    "threads": os.cpu_count() or 1,
    "seed": 0,
    "samples": 100,
    "perturb": 0.0,
    "out": None,
    "tolerances": {"gap": 1e-10, "identity": 1e-8, "riemann": 1e-3, "scalar": 1e-3,
                   "einstein": 1e-4, "euler": 1e-3},
    "sweep": {"m_values": [-5.0, -3.0, -1.0, 1.0, 3.0, 5.0]},
    "geometry": {"fd_step": 1e-3, "richardson": False, "max_condition": 100.0, "euler_grid": None},
    "drive": {"axes": [1], "epsilon": 0.01, "eta_rel": 0.01, "window_rel": 10.0, "k": None},
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "model":
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def validate(config: dict):
    try:
        jsonschema.validate(config, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None


def load_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    validate(data)
    return data


def resolve(file_config: dict | None, overrides: dict) -> dict:
    """Merge defaults, file and flag overrides, then validate the result."""
    config = _merge(DEFAULTS, file_config or {})
    config = _merge(config, overrides)
    validate(config)
    return config


def build_model(spec: dict) -> DiracModel:
    if "name" in spec:
        return builtin_model(spec["name"], **spec.get("params", {}))
    table = spec["fourier"]
    n = table["n_half_dim"]
    dim = 2 * n
    try:
        d_terms = [[FourierTerm.parse(t["coef"], t.get("factors", []), dim) for t in comp] for comp in table["d"]]
        d0_terms = [FourierTerm.parse(t["coef"], t.get("factors", []), dim) for t in table.get("d0", [])]
        return fourier_model(n, d_terms, d0_terms, table.get("name", "fourier"))
    except ValueError as exc:
        raise ConfigError(f"bad Fourier model: {exc}") from None
