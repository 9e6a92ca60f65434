"""Certificate construction, canonical JSON serialization, and digests.

Floats are serialized with Python's shortest round-trip repr, so a canonical
document re-serializes byte-identically and certificates replay bit-faithfully.
"""

from __future__ import annotations

import hashlib
import json
import time
from typing import Any

import numpy as np

from . import __version__
from .core import Axis, Certificate, DiscreteMeasure, FuzzyPredicate


def _encode(obj: Any) -> Any:
    if isinstance(obj, FuzzyPredicate):
        return {
            "kind": "predicate",
            "axes": [{"name": ax.name, "size": ax.size} for ax in obj.axes],
            "values": obj.values.tolist(),
        }
    if isinstance(obj, DiscreteMeasure):
        return {
            "kind": "measure",
            "axis": {"name": obj.axis.name, "size": obj.axis.size},
            "weights": obj.weights.tolist(),
        }
    if type(obj).__name__ == "StepFunctionFamily":
        return {
            "kind": "family",
            "breakpoints": obj.breakpoints.tolist(),
            "members": obj.values.tolist(),
            "labels": list(obj.labels),
        }
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if hasattr(obj, "to_payload"):
        return _encode(obj.to_payload())
    return obj


def decode_predicate(doc: dict) -> FuzzyPredicate:
    axes = tuple(Axis(a["name"], int(a["size"])) for a in doc["axes"])
    return FuzzyPredicate(axes, np.asarray(doc["values"], dtype=float))


def decode_measure(doc: dict) -> DiscreteMeasure:
    ax = Axis(doc["axis"]["name"], int(doc["axis"]["size"]))
    return DiscreteMeasure(ax, np.asarray(doc["weights"], dtype=float))


def canonical_json(payload: Any) -> str:
    return json.dumps(_encode(payload), sort_keys=True, separators=(",", ":"), allow_nan=False)


def input_digest(inputs: dict) -> str:
    return hashlib.sha256(canonical_json(inputs).encode()).hexdigest()


def make_certificate(
    pipeline: str,
    inputs: dict,
    parameters: dict,
    witness: dict,
    statistics: dict,
    bound_formula: str,
    claimed_bound: float | None,
    measured: float | None,
    bound_kind: str = "upper",
    tolerance: float = 1e-9,
    sweep: list | None = None,
) -> Certificate:
    encoded_inputs = _encode(inputs)
    cert = Certificate(
        pipeline=pipeline,
        input_digest=input_digest(inputs),
        parameters=_encode(parameters),
        witness=_encode(witness),
        statistics=_encode(statistics),
        bound_formula=bound_formula,
        claimed_bound=None if claimed_bound is None else float(claimed_bound),
        measured=None if measured is None else float(measured),
        bound_kind=bound_kind,
        tolerance=float(tolerance),
        sweep=_encode(sweep) if sweep is not None else None,
        inputs=encoded_inputs,
        meta={"tool": "fuzzyreg", "version": __version__, "wall_time": time.time()},
    )
    return cert.seal()


def certificate_to_dict(cert: Certificate) -> dict:
    return {
        "pipeline": cert.pipeline,
        "input_digest": cert.input_digest,
        "parameters": cert.parameters,
        "witness": cert.witness,
        "statistics": cert.statistics,
        "bound_formula": cert.bound_formula,
        "claimed_bound": cert.claimed_bound,
        "measured": cert.measured,
        "bound_kind": cert.bound_kind,
        "tolerance": cert.tolerance,
        "verdict": cert.verdict,
        "sweep": cert.sweep,
        "inputs": cert.inputs,
        "meta": cert.meta,
    }


def certificate_from_dict(doc: dict) -> Certificate:
    return Certificate(**doc)


def dump_certificate(cert: Certificate) -> str:
    return canonical_json(certificate_to_dict(cert))


def load_certificate(text: str) -> Certificate:
    return certificate_from_dict(json.loads(text))
