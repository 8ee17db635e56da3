"""JSON schemas for every document the CLI writes.

``python3 -m modalstab.reports`` regenerates the shipped copies under
``modalstab/schemas``.
"""

from __future__ import annotations

import json
import sys
from importlib import resources
from pathlib import Path

from .config import json_schema as config_schema

_DRAFT = "https://json-schema.org/draft/2020-12/schema"
_NUM = {"type": "number"}
_NUM_OR_INF = {"oneOf": [{"type": "number"}, {"const": "inf"}]}
_NULLABLE_NUM = {"type": ["number", "null"]}
_KINDS = ["NSV2D", "BBMB", "KdVB", "SDWave", "NDWave"]


def _obj(props: dict, required: list[str] | None = None, extra: bool = False) -> dict:
    return {
        "type": "object",
        "properties": props,
        "required": list(props) if required is None else required,
        "additionalProperties": extra,
    }


CONDITION = _obj({
    "name": {"type": "string"},
    "lhs": _NUM_OR_INF,
    "relation": {"enum": ["<=", "<", ">=", ">"]},
    "rhs": _NUM_OR_INF,
    "satisfied": {"type": "boolean"},
})

CERTIFICATE = {
    "$schema": _DRAFT,
    "title": "ThresholdReport",
    "description": "Sufficient-condition certificate for one model at a given (mu, N).",
    **_obj({
        "model_kind": {"enum": _KINDS},
        "certified": {"type": "boolean"},
        "mu": _NUM,
        "N": {"type": "integer", "minimum": 0},
        "mu_min": _NUM_OR_INF,
        "N_min": {"type": ["integer", "null"]},
        "guaranteed_rate": _NULLABLE_NUM,
        "rate_form": {"enum": ["exponential", "exponential_unquantified", "t^-1/2"]},
        "rate_quantity": {"type": ["string", "null"]},
        "constants": {"type": "object", "additionalProperties": _NUM_OR_INF},
        "conditions": {"type": "array", "items": CONDITION},
        "fixed_point": {"type": ["object", "null"]},
        "notes": {"type": "array", "items": {"type": "string"}},
    }),
}

_FIT = {
    "type": ["object", "null"],
    "properties": {
        "window": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
        "fitted_rate": _NULLABLE_NUM,
        "r_squared": _NULLABLE_NUM,
        "floor_reached": {"type": "boolean"},
        "n_samples": {"type": "integer"},
        "intercept": _NULLABLE_NUM,
    },
    "required": ["window", "fitted_rate", "r_squared", "floor_reached"],
}

VERDICT = {
    "$schema": _DRAFT,
    "title": "Verdict",
    "description": "Comparison of an observed decay against its certificate.",
    **_obj({
        "verdict": {"enum": ["PASS", "FAIL", "NOT_APPLICABLE"]},
        "fit": _FIT,
        "guaranteed_rate": _NULLABLE_NUM,
        "certified": {"type": ["boolean", "null"]},
        "series": {"type": "string"},
        "fit_error": {"type": "string"},
        "algebraic": _obj({
            "exponent": _NUM, "sup": _NUM, "t_at_sup": _NUM, "bounded": {"type": "boolean"},
        }),
        "lyapunov_nonincreasing": {"type": "boolean"},
        "lyapunov_worst_increase": _NUM,
        "absorbing_radius": _NUM,
        "absorbing_entry": _NULLABLE_NUM,
        "E0": _NUM,
        "max_ratio_to_bound": _NUM,
    }, required=["verdict", "fit", "guaranteed_rate", "certified"]),
}

RUN_META = {
    "$schema": _DRAFT,
    "title": "RunMeta",
    "description": "Provenance written next to run.csv.",
    **_obj({
        "config": {"type": "object"},
        "config_hash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "seed": {"type": "integer", "minimum": 0},
        "version": {"type": "string"},
        "steady_state_residual": _NUM,
        "model": {"enum": _KINDS},
        "basis": {"type": "string"},
        "modes": {"type": "integer"},
        "controller": {"type": ["object", "null"]},
        "scheme": {"enum": ["IMEX_CNAB2", "IMEX_Euler", "RK4Reference"]},
        "dt": _NUM,
        "dt_requested": _NUM,
        "t_end": _NUM,
        "steps": {"type": "integer"},
        "record_every": {"type": "integer"},
    }, required=["config_hash", "seed", "model", "scheme", "dt", "t_end", "steps"], extra=True),
}

ORDER = {
    "$schema": _DRAFT,
    "title": "OrderCheck",
    "description": "Observed convergence order from a geometric sequence of step sizes.",
    **_obj({
        "scheme": {"enum": ["IMEX_CNAB2", "IMEX_Euler", "RK4Reference"]},
        "status": {"enum": ["ok", "degenerate", "failed"]},
        "order": _NULLABLE_NUM,
        "orders": {"type": "array", "items": _NUM},
        "errors": {"type": "array", "items": _NUM},
        "dts": {"type": "array", "items": _NUM},
        "band": {"type": "array", "items": _NUM},
        "passed": {"type": "boolean"},
    }),
}


def schemas() -> dict[str, dict]:
    cfg = {"$schema": _DRAFT, **config_schema()}
    return {
        "experiment_config": cfg,
        "certificate": CERTIFICATE,
        "verdict": VERDICT,
        "run_meta": RUN_META,
        "order": ORDER,
    }


def shipped(name: str) -> dict:
    """The copy of schema ``name`` bundled with the package."""
    return json.loads(resources.files("modalstab").joinpath("schemas", f"{name}.json").read_text())


def write_schemas(directory) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    out = []
    for name, doc in schemas().items():
        p = d / f"{name}.json"
        p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        out.append(p)
    return out


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent / "schemas"
    for p in write_schemas(target):
        print(p)
