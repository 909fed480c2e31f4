"""
Run configurations for the command-line tool.

A configuration is a JSON object that is validated against :data:`SCHEMA`
before anything is computed. Unknown keys are rejected. Parsing fills in
defaults, so ``parse(serialise(parse(x))) == parse(x)``.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional

import jsonschema

METHODS = ["tebd", "tdvp1", "tdvp1-2nd", "tdvp2"]

_NUMBER = {"type": "number"}
_COMPLEX = {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2}
_MATRIX = {"type": "array", "items": {"type": "array", "items": _COMPLEX}}
_FACTORS = {"type": "object", "additionalProperties": {"type": "string"}}

SCHEMA: Dict[str, Any] = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "definitions": {
        "tree": {
            "type": "object",
            "properties": {
                "id": {"type": "string"},
                "children": {"type": "array", "items": {"$ref": "#/definitions/tree"}},
            },
            "required": ["id"],
            "additionalProperties": False,
        },
        "term": {
            "type": "object",
            "properties": {"coeff": _COMPLEX, "factors": _FACTORS},
            "required": ["coeff", "factors"],
            "additionalProperties": False,
        },
        "tfi": {
            "type": "object",
            "properties": {
                "name": {"const": "tfi"},
                "L": {"type": "integer", "minimum": 1},
                "J": _NUMBER,
                "g": _NUMBER,
                "four_site": {"type": "boolean"},
            },
            "required": ["name", "L"],
            "additionalProperties": False,
        },
        "explicit": {
            "type": "object",
            "properties": {
                "name": {"const": "explicit"},
                "tree": {"$ref": "#/definitions/tree"},
                "dims": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 1}},
                "terms": {"type": "array", "items": {"$ref": "#/definitions/term"}},
                "symbols": {"type": "object", "additionalProperties": _MATRIX},
            },
            "required": ["name", "tree", "terms"],
            "additionalProperties": False,
        },
        "random": {
            "type": "object",
            "properties": {
                "name": {"const": "random"},
                "tree": {"$ref": "#/definitions/tree"},
                "min_terms": {"type": "integer", "minimum": 1},
                "max_terms": {"type": "integer", "minimum": 1},
                "unit_coefficients": {"type": "boolean"},
            },
            "required": ["name", "tree"],
            "additionalProperties": False,
        },
        "named": {
            "type": "object",
            "properties": {"name": {"enum": ["single_excited_neighbour", "simple_two_qubit"]}},
            "required": ["name"],
            "additionalProperties": False,
        },
    },
    "type": "object",
    "properties": {
        "model": {"oneOf": [{"$ref": "#/definitions/tfi"}, {"$ref": "#/definitions/explicit"},
                            {"$ref": "#/definitions/random"}, {"$ref": "#/definitions/named"}]},
        "initial_state": {
            "oneOf": [
                {"type": "object", "properties": {"neel_like": {"const": True}},
                 "required": ["neel_like"], "additionalProperties": False},
                {"type": "object",
                 "properties": {"product": {
                     "type": "object",
                     "additionalProperties": {"oneOf": [{"enum": ["0", "1"]},
                                                        {"type": "array", "items": _COMPLEX}]}}},
                 "required": ["product"], "additionalProperties": False},
            ]
        },
        "method": {
            "type": "object",
            "properties": {
                "name": {"enum": METHODS},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "T": {"type": "number", "minimum": 0},
                "max_bond_dim": {"type": ["integer", "null"], "minimum": 1},
                "rel_tol": {"type": "number", "minimum": 0},
                "total_tol": {"type": "number", "minimum": 0},
                "renorm": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "operators": {
            "type": "object",
            "additionalProperties": {
                "oneOf": [{"const": "total_magnetisation"},
                          {"type": "object", "properties": {"factors": _FACTORS},
                           "required": ["factors"], "additionalProperties": False}]
            },
        },
        "scan": {
            "type": "object",
            "properties": {
                "dts": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                        "minItems": 1},
                "T": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "checks": {
            "type": "object",
            "properties": {"dense": {"type": "boolean"}, "compare_svd": {"type": "boolean"}},
            "additionalProperties": False,
        },
        "output": {"type": "string", "minLength": 1},
        "seed": {"type": "integer", "minimum": 0},
    },
    "required": ["model"],
    "additionalProperties": False,
}

_METHOD_DEFAULTS = {"name": "tebd", "dt": 0.01, "T": 1.0, "max_bond_dim": None,
                    "rel_tol": 0.0, "total_tol": 0.0, "renorm": False}
_MODEL_DEFAULTS = {
    "tfi": {"J": 1.0, "g": 0.1, "four_site": False},
    "explicit": {"dims": {}, "symbols": {}},
    "random": {"min_terms": 10, "max_terms": 30, "unit_coefficients": False},
}


class ConfigError(ValueError):
    """Raised for configurations that fail validation."""


@dataclass
class RunConfig:
    model: Dict[str, Any]
    initial_state: Optional[Dict[str, Any]] = None
    method: Dict[str, Any] = field(default_factory=lambda: dict(_METHOD_DEFAULTS))
    operators: Dict[str, Any] = field(default_factory=dict)
    scan: Dict[str, Any] = field(default_factory=lambda: {"dts": [0.1, 0.05, 0.02, 0.01, 0.005],
                                                          "T": 1.0})
    checks: Dict[str, bool] = field(default_factory=lambda: {"dense": False, "compare_svd": False})
    output: Optional[str] = None
    seed: int = 0

    def to_dict(self) -> Dict[str, Any]:
        out = {"model": copy.deepcopy(self.model), "method": dict(self.method),
               "operators": copy.deepcopy(self.operators), "scan": copy.deepcopy(self.scan),
               "checks": dict(self.checks), "seed": self.seed}
        if self.initial_state is not None:
            out["initial_state"] = copy.deepcopy(self.initial_state)
        if self.output is not None:
            out["output"] = self.output
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def validate(raw: Mapping[str, Any]):
    """Raises :class:`ConfigError` listing every schema violation."""
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("Invalid configuration:\n  " + "\n  ".join(lines))


def parse_config(raw: Mapping[str, Any]) -> RunConfig:
    """Validates a configuration object and fills in defaults."""
    validate(raw)
    raw = copy.deepcopy(dict(raw))
    model = raw["model"]
    model = {**_MODEL_DEFAULTS.get(model["name"], {}), **model}
    if model["name"] == "random" and model["min_terms"] > model["max_terms"]:
        raise ConfigError("Invalid configuration:\n  model: min_terms exceeds max_terms")
    defaults = RunConfig(model={})
    return RunConfig(
        model=model,
        initial_state=raw.get("initial_state"),
        method={**defaults.method, **raw.get("method", {})},
        operators=raw.get("operators", {}),
        scan={**defaults.scan, **raw.get("scan", {})},
        checks={**defaults.checks, **raw.get("checks", {})},
        output=raw.get("output"),
        seed=raw.get("seed", 0),
    )


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"Cannot read configuration {path}: {exc}") from exc
    return parse_config(raw)
