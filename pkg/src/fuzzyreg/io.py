"""Instance file ingestion and report emission (delimited data plus figures).

Matrices travel as CSV, row-major, with a header row of column labels and a
leading column of row labels; values use shortest round-trip float repr so a
generate/load/serialize cycle is byte-identical.  Measures and step-function
families travel as JSON.  The report path writes the sweep CSV and renders a
matplotlib figure next to it.
"""

from __future__ import annotations

import csv
import io as _io
import json
import warnings
from pathlib import Path

import numpy as np

from .certificates import decode_predicate
from .core import Axis, Certificate, DiscreteMeasure, FuzzyPredicate
from .sampling import StepFunctionFamily

MEASURE_RENORM_LIMIT = 1e-6
MEASURE_WARN_LIMIT = 1e-9


def _fmt(x: float) -> str:
    return repr(float(x))


def predicate_to_csv(phi: FuzzyPredicate) -> str:
    if phi.arity != 2:
        raise ValueError("CSV serialization covers binary predicates; use JSON for higher arity")
    out = _io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    xname, yname = phi.axes[0].name, phi.axes[1].name
    w.writerow([f"{xname}\\{yname}"] + [f"{yname}{j}" for j in range(phi.axes[1].size)])
    for i, row in enumerate(phi.values):
        w.writerow([f"{xname}{i}"] + [_fmt(v) for v in row])
    return out.getvalue()


def predicate_from_csv(text: str) -> FuzzyPredicate:
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows or len(rows) < 2:
        raise ValueError("CSV matrix needs a header row and at least one data row")
    header = rows[0][0]
    xname, _, yname = header.partition("\\")
    xname = xname or "x"
    yname = yname or "y"
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    axes = (Axis(xname, values.shape[0]), Axis(yname, values.shape[1]))
    return FuzzyPredicate(axes, values)


def predicate_to_json(phi: FuzzyPredicate) -> str:
    doc = {
        "axes": [{"name": ax.name, "size": ax.size} for ax in phi.axes],
        "values": phi.values.tolist(),
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def predicate_from_json(text: str) -> FuzzyPredicate:
    return decode_predicate(json.loads(text))


def load_predicate(path: str | Path) -> FuzzyPredicate:
    p = Path(path)
    text = p.read_text()
    phi = predicate_from_csv(text) if p.suffix.lower() == ".csv" else predicate_from_json(text)
    return phi


def save_predicate(phi: FuzzyPredicate, path: str | Path) -> None:
    p = Path(path)
    if p.suffix.lower() == ".csv":
        p.write_text(predicate_to_csv(phi))
    else:
        p.write_text(predicate_to_json(phi))


def measure_to_json(mu: DiscreteMeasure) -> str:
    doc = {
        "axis": {"name": mu.axis.name, "size": mu.axis.size},
        "weights": [float(w) for w in mu.weights],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def measure_from_json(text: str) -> DiscreteMeasure:
    doc = json.loads(text)
    ax = Axis(doc["axis"]["name"], int(doc["axis"]["size"]))
    w = np.asarray(doc["weights"], dtype=float)
    if w.min() < 0:
        raise ValueError("measure weights must be nonnegative")
    total = float(w.sum())
    drift = abs(total - 1.0)
    if drift > MEASURE_RENORM_LIMIT:
        raise ValueError(f"measure weights sum to {total}; outside renormalization limit")
    if drift > MEASURE_WARN_LIMIT:
        warnings.warn(f"measure weights sum to {total}; renormalizing", stacklevel=2)
    return DiscreteMeasure(ax, w / total)


def load_measure(path: str | Path) -> DiscreteMeasure:
    return measure_from_json(Path(path).read_text())


def save_measure(mu: DiscreteMeasure, path: str | Path) -> None:
    Path(path).write_text(measure_to_json(mu))


def family_to_json(family: StepFunctionFamily) -> str:
    doc = {
        "breakpoints": [float(b) for b in family.breakpoints],
        "members": [[float(v) for v in row] for row in family.values],
        "labels": list(family.labels),
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def family_from_json(text: str) -> StepFunctionFamily:
    doc = json.loads(text)
    return StepFunctionFamily(
        np.asarray(doc["breakpoints"], dtype=float),
        np.asarray(doc["members"], dtype=float),
        tuple(doc.get("labels", ())),
    )


def load_family(path: str | Path) -> StepFunctionFamily:
    return family_from_json(Path(path).read_text())


def plot_data_emit(cert: Certificate) -> str:
    """Sweep certificate to delimited text: one row per sweep point.

    The header names the bound curve being tracked alongside the measured
    values; certificates without a sweep are rejected.
    """
    if not cert.sweep:
        raise ValueError(f"certificate for {cert.pipeline!r} carries no sweep")
    keys = list(cert.sweep[0].keys())
    out = _io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(keys)
    for row in cert.sweep:
        w.writerow([_fmt(row[k]) if isinstance(row[k], float) else row[k] for k in keys])
    return out.getvalue()


def render_report(cert: Certificate, out_prefix: str | Path) -> tuple[Path, Path]:
    """Write the sweep CSV and a rendered figure side by side."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    prefix = Path(out_prefix)
    csv_path = prefix.with_suffix(".csv")
    png_path = prefix.with_suffix(".png")
    csv_path.write_text(plot_data_emit(cert))

    rows = cert.sweep
    keys = list(rows[0].keys())
    x_key = keys[0]
    xs = [row[x_key] for row in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for key in keys[1:]:
        ys = [row[key] for row in rows]
        style = "--" if "bound" in key else "-"
        ax.plot(xs, ys, style, marker="o", label=key)
    ax.set_xlabel(x_key)
    ax.set_title(f"{cert.pipeline}: {cert.bound_formula}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return csv_path, png_path
