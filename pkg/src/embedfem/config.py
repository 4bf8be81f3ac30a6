"""Declarative problem definition and validation.

Problems are JSON documents with a fixed schema: a box solid, any number
of embedded structures, Dirichlet sets, and loads drawn from a fixed
traction catalog (no expression interpreter):

    constant  t = vector
    bending   t = -12 M x1 E3        (flexure distribution on a face)
    torsion   t = tau (-x2, x1, 0)
    shear     t = tau E3

Validation collects every schema violation with its JSON path instead of
stopping at the first; unknown keys are rejected.  parse -> serialize ->
parse is the identity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np
import jsonschema


class ConfigError(ValueError):
    """Invalid problem configuration; .errors lists every violation."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(self.errors))


_MATERIAL = {
    "type": "object",
    "additionalProperties": False,
    "required": ["E"],
    "properties": {
        "E": {"type": "number", "exclusiveMinimum": 0},
        "nu": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 0.5},
    },
}

_VEC3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["solid"],
    "properties": {
        "benchmark": {"type": "string"},
        "solid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["origin", "extent", "divisions", "material"],
            "properties": {
                "origin": _VEC3,
                "extent": {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0},
                    "minItems": 3,
                    "maxItems": 3,
                },
                "divisions": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 1},
                    "minItems": 3,
                    "maxItems": 3,
                },
                "material": _MATERIAL,
                "node_sets": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["name", "axis", "value"],
                        "properties": {
                            "name": {"type": "string"},
                            "axis": {"type": "integer", "minimum": 0, "maximum": 2},
                            "value": {"type": "number"},
                            "boundary_only": {"type": "boolean"},
                        },
                    },
                },
            },
        },
        "structures": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind", "frame", "fiber", "material"],
                "properties": {
                    "kind": {"enum": ["rigid", "beam", "shell"]},
                    "frame": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["origin", "axes"],
                        "properties": {
                            "origin": _VEC3,
                            "axes": {
                                "type": "array",
                                "items": _VEC3,
                                "minItems": 3,
                                "maxItems": 3,
                            },
                        },
                    },
                    "base_extent": {
                        "type": "array",
                        "items": {"type": "number", "exclusiveMinimum": 0},
                        "maxItems": 2,
                    },
                    "base_divisions": {
                        "type": "array",
                        "items": {"type": "integer", "minimum": 1},
                        "maxItems": 2,
                    },
                    "fiber": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["shape", "params"],
                        "properties": {
                            "shape": {"enum": ["segment", "rectangle", "circle", "box"]},
                            "params": {
                                "type": "array",
                                "items": {"type": "number", "exclusiveMinimum": 0},
                                "minItems": 1,
                                "maxItems": 3,
                            },
                        },
                    },
                    "material": _MATERIAL,
                    "fiber_quadrature": {"type": "integer", "minimum": 1},
                    "ell": {"type": "number", "exclusiveMinimum": 0},
                    "ell_c": {"type": "number", "exclusiveMinimum": 0},
                    "shear_correction": {"type": "number", "exclusiveMinimum": 0},
                    "rotations": {"type": "boolean"},
                    "dirichlet": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["axis", "side"],
                            "properties": {
                                "axis": {"type": "integer", "minimum": 0, "maximum": 1},
                                "side": {"enum": ["min", "max"]},
                                "components": {
                                    "type": "array",
                                    "items": {"type": "integer", "minimum": 0},
                                },
                            },
                        },
                    },
                },
            },
        },
        "bcs": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["where", "components"],
                "properties": {
                    "where": {"type": "string"},
                    "components": {
                        "type": "array",
                        "items": {"type": "integer", "minimum": 0, "maximum": 2},
                        "minItems": 1,
                    },
                    "value": {"type": "number"},
                },
            },
        },
        "loads": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["face_set", "traction"],
                "properties": {
                    "face_set": {"type": "string"},
                    "traction": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["id"],
                        "properties": {
                            "id": {"enum": ["constant", "bending", "torsion", "shear"]},
                            "params": {"type": "object"},
                        },
                    },
                },
            },
        },
        "coupling": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"ell_c": {"type": "number", "exclusiveMinimum": 0}},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"tolerance": {"type": "number", "exclusiveMinimum": 0}},
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "fields": {"type": "boolean"},
                "tables": {"type": "boolean"},
                "out_dir": {"type": "string"},
            },
        },
    },
}


@dataclass
class ProblemConfig:
    """Validated problem document (canonical dict form)."""

    data: dict

    def __getitem__(self, key):
        return self.data[key]

    def get(self, key, default=None):
        return self.data.get(key, default)

    @property
    def benchmark(self) -> str | None:
        return self.data.get("benchmark")


def parse_config(text: str) -> ProblemConfig:
    """Parse and fully validate a JSON problem document.

    All violations are reported at once, each prefixed with its JSON
    path.  Extra semantic checks (traction parameters) run after the
    schema pass.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"$: not valid JSON ({exc})"]) from exc
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = []
    for err in sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path)):
        path = "$" + "".join(
            f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path
        )
        errors.append(f"{path}: {err.message}")
    if not errors:
        errors.extend(_semantic_errors(data))
    if errors:
        raise ConfigError(errors)
    return ProblemConfig(data)


_TRACTION_PARAMS = {
    "constant": {"vector"},
    "bending": {"M"},
    "torsion": {"tau"},
    "shear": {"tau"},
}


def _semantic_errors(data: dict) -> list[str]:
    errors = []
    for i, load in enumerate(data.get("loads", [])):
        tid = load["traction"]["id"]
        params = load["traction"].get("params", {})
        expected = _TRACTION_PARAMS[tid]
        if set(params) != expected:
            errors.append(
                f"$.loads[{i}].traction.params: traction {tid!r} takes exactly {sorted(expected)}"
            )
    for i, s in enumerate(data.get("structures", [])):
        kind = s["kind"]
        n_params = {"segment": 1, "rectangle": 2, "circle": 1, "box": 3}[s["fiber"]["shape"]]
        if len(s["fiber"]["params"]) != n_params:
            errors.append(
                f"$.structures[{i}].fiber.params: shape {s['fiber']['shape']!r} takes "
                f"{n_params} parameter(s)"
            )
        want_dim = {"rigid": 3, "beam": 2, "shell": 1}[kind]
        have_dim = {"segment": 1, "rectangle": 2, "circle": 2, "box": 3}[s["fiber"]["shape"]]
        if want_dim != have_dim:
            errors.append(
                f"$.structures[{i}].fiber: {kind} needs a {want_dim}-dimensional fiber"
            )
        base_dim = {"rigid": 0, "beam": 1, "shell": 2}[kind]
        for key in ("base_extent", "base_divisions"):
            got = len(s.get(key, [None] * base_dim))
            if base_dim and got != base_dim:
                errors.append(f"$.structures[{i}].{key}: {kind} needs {base_dim} value(s)")
            if base_dim and key not in s:
                errors.append(f"$.structures[{i}]: {kind} requires {key}")
    return errors


def serialize_config(cfg: ProblemConfig) -> str:
    """Canonical JSON text (sorted keys, stable float repr)."""
    return json.dumps(cfg.data, indent=2, sort_keys=True)


def load_config(path) -> ProblemConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def traction_function(tid: str, params: dict):
    """Resolve a catalog traction id to a position -> force-density map."""
    if tid == "constant":
        vec = np.asarray(params["vector"], dtype=float)
        return lambda x: vec
    if tid == "bending":
        m = float(params["M"])
        return lambda x: np.array([0.0, 0.0, -12.0 * m * x[0]])
    if tid == "torsion":
        tau = float(params["tau"])
        return lambda x: tau * np.array([-x[1], x[0], 0.0])
    if tid == "shear":
        tau = float(params["tau"])
        return lambda x: np.array([0.0, 0.0, tau])
    raise ValueError(f"unknown traction id {tid!r}")


@dataclass
class MetricTable:
    """Ordered (name, value, unit) rows with unique names."""

    rows: list = field(default_factory=list)

    def add(self, name: str, value, unit: str = ""):
        if any(r[0] == name for r in self.rows):
            raise ValueError(f"duplicate metric name {name!r}")
        self.rows.append((name, value, unit))
        return self

    def value(self, name: str):
        for n, v, _ in self.rows:
            if n == name:
                return v
        raise KeyError(name)

    def format(self) -> str:
        # 17 significant digits for reproducibility
        lines = []
        for name, value, unit in self.rows:
            if isinstance(value, float):
                lines.append(f"{name} = {value:.17g}{' ' + unit if unit else ''}")
            else:
                lines.append(f"{name} = {value}{' ' + unit if unit else ''}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        out = ["name,value,unit"]
        for name, value, unit in self.rows:
            sval = f"{value:.17g}" if isinstance(value, float) else str(value)
            out.append(f"{name},{sval},{unit}")
        return "\n".join(out) + "\n"
