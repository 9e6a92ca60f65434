"""Pipeline runners: one function per CLI subcommand, all returning certificates.

Every runner is deterministic given its parameters (randomness is keyed by
the explicit seed), so verify-cert can re-run a pipeline from the inputs
embedded in a certificate and compare the result field by field.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .certificates import (
    canonical_json,
    decode_measure,
    decode_predicate,
    input_digest,
    make_certificate,
)
from .core import (
    Certificate,
    DiscreteMeasure,
    FuzzyPredicate,
    GridPartition,
    expectation,
)
from .covering import (
    COLUMNS,
    ROWS,
    cover_partition,
    covering_number,
    linf_cover,
    partition_homogeneity,
)
from .distal import (
    BruteForceSehOracle,
    Cutting,
    DistalPartitionCertificate,
    bucketed_seh,
    cutting_build,
    cutting_verify,
    density_seh,
    distal_partition,
    equipartition_refine,
    induced_grid,
    seh_bruteforce,
)
from .regularity import nip_regularity, structured_approximation
from .sampling import (
    StepFunctionFamily,
    eps_approximation_search,
    eps_net_search,
    grid_approximation_check,
    hoeffding_tail_check,
    theta_witness_set,
)


def decode_family(doc: dict) -> StepFunctionFamily:
    return StepFunctionFamily(
        np.asarray(doc["breakpoints"], dtype=float),
        np.asarray(doc["members"], dtype=float),
        tuple(doc.get("labels", ())),
    )


def run_cover(
    phi: FuzzyPredicate, eps: float, n: int, direction: str, mode: str, samples: int = 64
) -> Certificate:
    number = covering_number(phi, eps, n, direction, mode, samples=samples)
    mat = phi.values if direction == ROWS else phi.values.T
    greedy = linf_cover(mat, eps, direction)
    return make_certificate(
        pipeline="cover",
        inputs={"phi": phi},
        parameters={"eps": eps, "n": n, "direction": direction, "mode": mode, "samples": samples},
        witness={"full_axis_centers": list(greedy.center_indices)},
        statistics={"covering_number": number, "full_axis_greedy_size": greedy.size},
        bound_formula="worst-case restricted cover size over n-point parameter sets",
        claimed_bound=None,
        measured=float(number),
        bound_kind="none",
    )


def run_cover_partition(
    phi: FuzzyPredicate, cols: Sequence[int], eps: float, mode: str
) -> Certificate:
    part = cover_partition(phi, cols, eps, mode)
    worst = partition_homogeneity(phi, part, cols)
    return make_certificate(
        pipeline="cover-partition",
        inputs={"phi": phi},
        parameters={"cols": sorted(int(c) for c in cols), "eps": eps, "mode": mode},
        witness={"pieces": part.pieces.tolist(), "centers": list(part.centers or ())},
        statistics={"piece_count": part.size, "worst_oscillation": worst},
        bound_formula="every piece support oscillates <= eps against B",
        claimed_bound=eps,
        measured=worst,
        bound_kind="upper",
    )


def run_approx(
    phi: FuzzyPredicate,
    mu: DiscreteMeasure,
    eps: float,
    n: int,
    max_attempts: int,
    seed: int,
) -> Certificate:
    witness = eps_approximation_search(phi, mu, eps, n, max_attempts, seed)
    return make_certificate(
        pipeline="approx",
        inputs={"phi": phi, "mus": [mu]},
        parameters={"eps": eps, "n": n, "max_attempts": max_attempts, "seed": seed},
        witness={"elements": list(witness.elements), "found": witness.found},
        statistics={"worst_error": witness.worst_error, "attempts": witness.attempts},
        bound_formula="max_b |Av(tuple; phi(.;b)) - E[phi(.;b)]| <= eps",
        claimed_bound=eps,
        measured=witness.worst_error,
        bound_kind="upper",
        tolerance=1e-12,
    )


def run_tail_check(
    phi: FuzzyPredicate,
    mu: DiscreteMeasure,
    eps: float,
    ns: Sequence[int],
    trials: int,
    seed: int,
) -> Certificate:
    certs = [hoeffding_tail_check(phi, mu, n, eps, trials, seed) for n in ns]
    if len(certs) == 1:
        return certs[0]
    sweep = [
        {
            "n": int(n),
            "empirical_tail": c.statistics["empirical_tail"],
            "bound_4N_exp(-n*eps^2/32)": c.claimed_bound,
        }
        for n, c in zip(ns, certs)
    ]
    worst_idx = int(np.argmax([c.measured - c.claimed_bound for c in certs]))
    base = certs[worst_idx]
    return make_certificate(
        pipeline="tail-check",
        inputs={"phi": phi, "mus": [mu]},
        parameters={"eps": eps, "ns": [int(n) for n in ns], "trials": trials, "seed": seed},
        witness={"per_n": [c.witness for c in certs]},
        statistics={"per_n": [c.statistics for c in certs], "worst_n": int(ns[worst_idx])},
        bound_formula=base.bound_formula,
        claimed_bound=base.claimed_bound,
        measured=base.measured,
        bound_kind="upper",
        tolerance=base.tolerance,
        sweep=sweep,
    )


def run_witness_prob(
    phi: FuzzyPredicate,
    mu: DiscreteMeasure,
    eps: float,
    n: int,
    samples: int,
    seed: int,
) -> Certificate:
    return theta_witness_set(phi, mu, n, eps, samples, seed)


def run_net(
    phi: FuzzyPredicate,
    mu: DiscreteMeasure,
    epss: Sequence[float],
    r: float,
    s: float,
    strategy: str,
    seed: int,
) -> Certificate:
    nets = [eps_net_search(phi, mu, e, r, s, strategy, seed) for e in epss]
    rows = []
    for e, net in zip(epss, nets):
        d_proxy = covering_number(phi, max(s - r, 1e-9) / 2.0, min(4, phi.axes[1].size), COLUMNS, "greedy")
        rows.append(
            {
                "eps": float(e),
                "net_size": len(net.elements),
                "reference_d*ln(1/eps)/eps": d_proxy * math.log(max(math.e, 1.0 / e)) / e,
                "valid": bool(net.valid),
            }
        )
    last = nets[-1]
    cert = make_certificate(
        pipeline="net",
        inputs={"phi": phi, "mus": [mu]},
        parameters={
            "epss": [float(e) for e in epss],
            "r": r,
            "s": s,
            "strategy": strategy,
            "seed": seed,
        },
        witness={"elements": [list(net.elements) for net in nets]},
        statistics={"violations": [list(net.violations) for net in nets]},
        bound_formula="every eps-heavy s-superlevel column is hit above r",
        claimed_bound=0.0,
        measured=float(sum(len(net.violations) for net in nets) + sum(not net.feasible for net in nets)),
        bound_kind="upper",
        tolerance=0.0,
        sweep=rows if len(epss) > 1 else None,
    )
    return cert


def run_grid_approx(family: StepFunctionFamily, eps: float) -> Certificate:
    return grid_approximation_check(family, eps)


def run_structured(
    phi: FuzzyPredicate, mus: Sequence[DiscreteMeasure], eps: float, seed: int
) -> Certificate:
    sa = structured_approximation(phi, mus, eps, seed=seed)
    return make_certificate(
        pipeline="structured",
        inputs={"phi": phi, "mus": list(mus)},
        parameters={"eps": eps, "seed": seed},
        witness={
            "terms": sa.theta.terms,
            "factors": [f.tolist() for f in sa.theta.factors],
            "pieces_per_level": list(sa.pieces_per_level),
        },
        statistics={"l1_error": sa.l1_error},
        bound_formula="integral of |phi - theta| over the product measure <= eps",
        claimed_bound=eps,
        measured=sa.l1_error,
        bound_kind="upper",
    )


def run_nip_reg(
    phi: FuzzyPredicate,
    mus: Sequence[DiscreteMeasure],
    eps: float,
    delta: float,
    mode: str,
    seed: int,
) -> Certificate:
    cert = nip_regularity(phi, mus, eps, delta, mode, seed)
    payload = cert.to_payload()
    out = make_certificate(
        pipeline="nip-reg",
        inputs={"phi": phi, "mus": list(mus)},
        parameters={"eps": eps, "delta": delta, "mode": mode, "seed": seed},
        witness=payload,
        statistics={
            "exceptional_mass": cert.exceptional_mass,
            "cell_count": len(cert.cell_masses),
            "l1_error": cert.l1_error,
        },
        bound_formula="exceptional mass <= delta; good cells within eps in weighted L1",
        claimed_bound=delta,
        measured=cert.exceptional_mass,
        bound_kind="upper",
    )
    out.verdict = out.check() and cert.verdict
    return out


def run_seh(
    phi: FuzzyPredicate,
    mus: Sequence[DiscreteMeasure],
    eps: float,
    delta: float,
    budget: int,
) -> Certificate:
    outcome = seh_bruteforce(phi, mus, eps, delta, budget)
    rect = outcome.rectangle
    return make_certificate(
        pipeline="seh",
        inputs={"phi": phi, "mus": list(mus)},
        parameters={"eps": eps, "delta": delta, "budget": budget},
        witness={"rectangle": rect.to_payload() if rect else None},
        statistics={
            "exhaustive": outcome.exhaustive,
            "candidates_examined": outcome.candidates_examined,
            "found": rect is not None,
        },
        bound_formula="per-axis masses >= delta and oscillation <= eps",
        claimed_bound=eps,
        measured=rect.oscillation if rect else None,
        bound_kind="upper" if rect else "none",
    )


def _distal_cert(
    phi: FuzzyPredicate,
    mus: Sequence[DiscreteMeasure],
    eps: float,
    delta: float,
    gamma: float,
    budget: int,
) -> DistalPartitionCertificate:
    oracle = BruteForceSehOracle(eps=eps, delta=delta, budget=budget)
    return distal_partition(phi, mus, eps, gamma, oracle)


def run_distal_reg(
    phi: FuzzyPredicate,
    mus: Sequence[DiscreteMeasure],
    eps: float,
    delta: float,
    gamma: float,
    budget: int,
) -> Certificate:
    cert = _distal_cert(phi, mus, eps, delta, gamma, budget)
    out = make_certificate(
        pipeline="distal-reg",
        inputs={"phi": phi, "mus": list(mus)},
        parameters={"eps": eps, "delta": delta, "gamma": gamma, "budget": budget},
        witness=cert.to_payload(),
        statistics={
            "nonhomogeneous_mass": cert.nonhomogeneous_mass,
            "cell_count": len(cert.boxes),
            "rounds_used": cert.rounds_used,
            "rounds_budget": cert.rounds_budget,
        },
        bound_formula="non-homogeneous product mass <= gamma within ceil(log(gamma)/log(1-(delta/2)^n)) rounds",
        claimed_bound=gamma,
        measured=cert.nonhomogeneous_mass,
        bound_kind="upper",
    )
    out.verdict = out.check() and cert.verdict
    return out


def run_density_seh(
    phi: FuzzyPredicate,
    mus: Sequence[DiscreteMeasure],
    eps: float,
    delta: float,
    gamma: float,
    budget: int,
    alpha: float,
    beta: float,
) -> Certificate:
    cert = _distal_cert(phi, mus, eps, delta, gamma, budget)
    rect = density_seh(phi, cert, mus, alpha, beta)
    threshold = (alpha - beta - cert.gamma - cert.eps) / len(cert.boxes)
    return make_certificate(
        pipeline="density-seh",
        inputs={"phi": phi, "mus": list(mus)},
        parameters={
            "eps": eps,
            "delta": delta,
            "gamma": gamma,
            "budget": budget,
            "alpha": alpha,
            "beta": beta,
        },
        witness={"rectangle": rect.to_payload(), "cells": len(cert.boxes)},
        statistics={"min_mass": min(rect.masses), "threshold": threshold},
        bound_formula="per-axis masses >= (alpha-beta-delta-eps)/K",
        claimed_bound=threshold,
        measured=min(rect.masses),
        bound_kind="lower",
    )


def run_bucketed_seh(phi: FuzzyPredicate, mus: Sequence[DiscreteMeasure], s: int) -> Certificate:
    rect = bucketed_seh(phi, mus, s)
    return make_certificate(
        pipeline="bucketed-seh",
        inputs={"phi": phi, "mus": list(mus)},
        parameters={"s": s},
        witness={"rectangle": rect.to_payload()},
        statistics={"oscillation": rect.oscillation},
        bound_formula="rectangle oscillation <= 2/s",
        claimed_bound=2.0 / s,
        measured=rect.oscillation,
        bound_kind="upper",
    )


def run_cutting(
    phi: FuzzyPredicate,
    nu: DiscreteMeasure,
    eps: float,
    deltas: Sequence[float],
    seed: int,
) -> Certificate:
    cuttings = [cutting_build(phi, nu, eps, d, seed) for d in deltas]
    verifications = [cutting_verify(c, phi, nu, eps, d) for c, d in zip(cuttings, deltas)]
    rows = [
        {
            "delta": float(d),
            "family_size": c.size,
            "reference_(1/delta)*ln(1/delta)": (1.0 / d) * math.log(max(math.e, 1.0 / d)),
            "weight": float(c.pieces.sum(axis=0).min()),
        }
        for d, c in zip(deltas, cuttings)
    ]
    last, last_v = cuttings[-1], verifications[-1]
    out = make_certificate(
        pipeline="cutting",
        inputs={"phi": phi, "mus": [nu]},
        parameters={"eps": eps, "deltas": [float(d) for d in deltas], "seed": seed},
        witness={"cuttings": [c.to_payload() for c in cuttings]},
        statistics={"verifications": [v.statistics for v in verifications]},
        bound_formula="weight >= eps/4 and per-piece bad-column mass <= delta",
        claimed_bound=float(deltas[-1]),
        measured=last_v.measured,
        bound_kind="upper",
        sweep=rows if len(deltas) > 1 else None,
    )
    out.verdict = all(v.verdict for v in verifications)
    return out


def run_cutting_verify(
    cutting_doc: dict, phi: FuzzyPredicate, nu: DiscreteMeasure, eps: float, delta: float
) -> Certificate:
    cutting = Cutting(
        np.asarray(cutting_doc["pieces"], dtype=float),
        gamma=float(cutting_doc["gamma"]),
        eps=float(cutting_doc.get("eps", eps)),
        delta=float(cutting_doc.get("delta", delta)),
        centers=tuple(cutting_doc.get("centers", ())),
        net=tuple(cutting_doc.get("net", ())),
    )
    return cutting_verify(cutting, phi, nu, eps, delta)


def run_equipartition(
    phi: FuzzyPredicate,
    mus: Sequence[DiscreteMeasure],
    eps: float,
    delta: float,
    gamma: float,
    budget: int,
    equi_gamma: float,
) -> Certificate:
    cert = _distal_cert(phi, mus, eps, delta, gamma, budget)
    grid = induced_grid(cert, phi.axes)
    refined = equipartition_refine(grid, mus, equi_gamma)
    gaps = [max(t) - min(t) for t in refined.mass_tables]
    return make_certificate(
        pipeline="equipartition",
        inputs={"phi": phi, "mus": list(mus)},
        parameters={
            "eps": eps,
            "delta": delta,
            "gamma": gamma,
            "budget": budget,
            "equi_gamma": equi_gamma,
        },
        witness={
            "pieces_per_axis": [f.pieces.tolist() for f in refined.grid.factors],
            "parents": [list(p) for p in refined.parents],
        },
        statistics={
            "mass_tables": [list(t) for t in refined.mass_tables],
            "max_gap": max(gaps),
        },
        bound_formula="per-axis piece masses pairwise within gamma",
        claimed_bound=equi_gamma,
        measured=float(max(gaps)),
        bound_kind="upper",
    )


def _decode_inputs(inputs: dict):
    phi = decode_predicate(inputs["phi"]) if "phi" in inputs else None
    mus = [decode_measure(m) for m in inputs.get("mus", [])]
    family = decode_family(inputs["family"]) if "family" in inputs else None
    return phi, mus, family


def reverify(cert: Certificate) -> tuple[bool, str]:
    """Re-run the pipeline from the embedded inputs and compare all result fields."""
    if cert.inputs is None:
        return False, "certificate carries no embedded inputs"
    if input_digest_of_encoded(cert.inputs) != cert.input_digest:
        return False, "input digest mismatch (inputs tampered)"
    phi, mus, family = _decode_inputs(cert.inputs)
    p = cert.parameters
    name = cert.pipeline
    if name == "cover":
        fresh = run_cover(phi, p["eps"], p["n"], p["direction"], p["mode"], p.get("samples", 64))
    elif name == "cover-partition":
        fresh = run_cover_partition(phi, p["cols"], p["eps"], p["mode"])
    elif name == "approx":
        fresh = run_approx(phi, mus[0], p["eps"], p["n"], p["max_attempts"], p["seed"])
    elif name == "tail-check":
        ns = p.get("ns") or [p["n"]]
        fresh = run_tail_check(phi, mus[0], p["eps"], ns, p["trials"], p["seed"])
    elif name == "theta-witness":
        fresh = run_witness_prob(phi, mus[0], p["eps"], p["n"], p["samples"], p["seed"])
    elif name == "net":
        fresh = run_net(phi, mus[0], p["epss"], p["r"], p["s"], p["strategy"], p["seed"])
    elif name == "grid-approx":
        fresh = run_grid_approx(family, p["eps"])
    elif name == "structured":
        fresh = run_structured(phi, mus, p["eps"], p["seed"])
    elif name == "nip-reg":
        fresh = run_nip_reg(phi, mus, p["eps"], p["delta"], p["mode"], p["seed"])
    elif name == "seh":
        fresh = run_seh(phi, mus, p["eps"], p["delta"], p["budget"])
    elif name == "distal-reg":
        fresh = run_distal_reg(phi, mus, p["eps"], p["delta"], p["gamma"], p["budget"])
    elif name == "density-seh":
        fresh = run_density_seh(
            phi, mus, p["eps"], p["delta"], p["gamma"], p["budget"], p["alpha"], p["beta"]
        )
    elif name == "bucketed-seh":
        fresh = run_bucketed_seh(phi, mus, p["s"])
    elif name == "cutting":
        fresh = run_cutting(phi, mus[0], p["eps"], p["deltas"], p["seed"])
    elif name == "cutting-verify":
        fresh = run_cutting_verify(cert.inputs["cutting"], phi, mus[0], p["eps"], p["delta"])
    elif name == "equipartition":
        fresh = run_equipartition(
            phi, mus, p["eps"], p["delta"], p["gamma"], p["budget"], p["equi_gamma"]
        )
    else:
        return False, f"unknown pipeline {name!r}"

    for field in ("parameters", "witness", "statistics", "claimed_bound", "measured", "verdict", "sweep"):
        if canonical_json(getattr(cert, field)) != canonical_json(getattr(fresh, field)):
            return False, f"field {field!r} does not match the re-run"
    if not cert.verdict:
        return False, "certificate reproduces but its bound check fails"
    return True, "certificate re-verified"


def input_digest_of_encoded(encoded_inputs: dict) -> str:
    import hashlib

    return hashlib.sha256(canonical_json(encoded_inputs).encode()).hexdigest()
