"""Command-line surface: instance generation, pipelines, verification, reports.

Exit codes: 0 = pass, 2 = bound violation (certificate still written),
1 = input error.  Randomized subcommands require an explicit --seed; nothing
is ever seeded from the wall clock.  FR_THREADS caps internal parallelism.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import runners
from .certificates import dump_certificate, load_certificate
from .core import Certificate
from .covering import COLUMNS, ROWS
from .distal import DEFAULT_BUDGET
from .instances import (
    GENERATORS,
    random_step_family,
    square_wave_family,
)
from .io import (
    family_from_json,
    family_to_json,
    load_family,
    load_measure,
    load_predicate,
    measure_to_json,
    plot_data_emit,
    predicate_to_csv,
    predicate_to_json,
    render_report,
)


class CliError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; input errors are 1
        raise CliError(message)


def _build_parser() -> Parser:
    p = Parser(prog="fuzzyreg", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        sp = sub.add_parser(name, **kw)
        sp.add_argument("--out", type=str, default=None)
        sp.add_argument("--format", choices=["json", "csv"], default=None)
        return sp

    def with_instance(sp, measures=0):
        sp.add_argument("--phi", type=str, required=True)
        sp.add_argument("--mu", type=str, action="append", default=[], required=measures > 0)

    g = add("gen", help="emit a canonical test instance")
    g.add_argument("name", choices=sorted(GENERATORS) + ["square-wave", "uniform-measure"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--value", type=float, default=0.7)
    g.add_argument("--members", type=int, default=1)
    g.add_argument("--alternations", type=int, default=None)
    g.add_argument("--jumps", type=int, default=20)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--random-family", action="store_true")

    c = add("cover")
    with_instance(c)
    c.add_argument("--eps", type=float, required=True)
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--direction", choices=[ROWS, COLUMNS], default=COLUMNS)
    c.add_argument("--mode", choices=["exact", "greedy"], default="greedy")

    cp = add("cover-partition")
    with_instance(cp)
    cp.add_argument("--eps", type=float, required=True)
    cp.add_argument("--cols", type=str, required=True, help="comma-separated column indices")
    cp.add_argument("--mode", choices=["definable", "constructible"], default="definable")

    a = add("approx")
    with_instance(a, measures=1)
    a.add_argument("--eps", type=float, required=True)
    a.add_argument("--n", type=int, required=True)
    a.add_argument("--max-attempts", type=int, default=64)
    a.add_argument("--seed", type=int, required=True)

    t = add("tail-check")
    with_instance(t, measures=1)
    t.add_argument("--eps", type=float, required=True)
    t.add_argument("--n", type=int, action="append", required=True)
    t.add_argument("--trials", type=int, default=5000)
    t.add_argument("--seed", type=int, required=True)

    wp = add("witness-prob")
    with_instance(wp, measures=1)
    wp.add_argument("--eps", type=float, required=True)
    wp.add_argument("--n", type=int, required=True)
    wp.add_argument("--samples", type=int, default=2000)
    wp.add_argument("--seed", type=int, required=True)

    ne = add("net")
    with_instance(ne, measures=1)
    ne.add_argument("--eps", type=float, action="append", required=True)
    ne.add_argument("--r", type=float, required=True)
    ne.add_argument("--s-level", type=float, required=True)
    ne.add_argument("--strategy", choices=["random", "greedy"], default="greedy")
    ne.add_argument("--seed", type=int, required=True)

    ga = add("grid-approx")
    ga.add_argument("--family", type=str, required=True)
    ga.add_argument("--eps", type=float, required=True)

    st = add("structured")
    with_instance(st, measures=1)
    st.add_argument("--eps", type=float, required=True)
    st.add_argument("--seed", type=int, required=True)

    nr = add("nip-reg")
    with_instance(nr, measures=1)
    nr.add_argument("--eps", type=float, required=True)
    nr.add_argument("--delta", type=float, required=True)
    nr.add_argument("--mode", choices=["definable", "constructible"], default="constructible")
    nr.add_argument("--seed", type=int, required=True)

    se = add("seh")
    with_instance(se, measures=1)
    se.add_argument("--eps", type=float, required=True)
    se.add_argument("--delta", type=float, required=True)
    se.add_argument("--budget", type=int, default=DEFAULT_BUDGET)

    dr = add("distal-reg")
    with_instance(dr, measures=1)
    dr.add_argument("--eps", type=float, required=True)
    dr.add_argument("--delta", type=float, required=True)
    dr.add_argument("--gamma", type=float, required=True)
    dr.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    dr.add_argument("--seed", type=int, default=0)

    ds = add("density-seh")
    with_instance(ds, measures=1)
    ds.add_argument("--eps", type=float, required=True)
    ds.add_argument("--delta", type=float, required=True)
    ds.add_argument("--gamma", type=float, required=True)
    ds.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    ds.add_argument("--alpha", type=float, required=True)
    ds.add_argument("--beta", type=float, default=0.0)

    bs = add("bucketed-seh")
    with_instance(bs, measures=1)
    bs.add_argument("--s", type=int, required=True)

    cu = add("cutting")
    with_instance(cu, measures=1)
    cu.add_argument("--eps", type=float, required=True)
    cu.add_argument("--delta", type=float, action="append", required=True)
    cu.add_argument("--seed", type=int, required=True)

    cv = add("cutting-verify")
    with_instance(cv, measures=1)
    cv.add_argument("--cutting", type=str, required=True, help="JSON file with the cutting payload")
    cv.add_argument("--eps", type=float, required=True)
    cv.add_argument("--delta", type=float, required=True)

    eq = add("equipartition")
    with_instance(eq, measures=1)
    eq.add_argument("--eps", type=float, required=True)
    eq.add_argument("--delta", type=float, required=True)
    eq.add_argument("--gamma", type=float, required=True)
    eq.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    eq.add_argument("--equi-gamma", type=float, required=True)

    vc = add("verify-cert")
    vc.add_argument("--in", dest="infile", type=str, required=True)

    rp = add("report")
    rp.add_argument("--in", dest="infile", type=str, required=True)

    return p


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _write_certificate(cert: Certificate, args) -> int:
    if args.format == "csv":
        _emit(plot_data_emit(cert), args.out)
    else:
        _emit(dump_certificate(cert), args.out)
    if args.out and cert.sweep:
        render_report(cert, Path(args.out).with_suffix(""))
    return 0 if cert.verdict else 2


def _measures(args, phi, count=None):
    from .core import DiscreteMeasure

    mus = [load_measure(path) for path in args.mu]
    if count is not None and len(mus) == 1 and count > 1:
        mus = mus * count
    rebound = []
    for i, mu in enumerate(mus):
        ax = phi.axes[i] if i < phi.arity else phi.axes[-1]
        if mu.axis == ax:
            rebound.append(mu)
        elif mu.axis.size == ax.size:
            rebound.append(DiscreteMeasure(ax, mu.weights))
        else:
            raise CliError(
                f"measure {i + 1} has {mu.axis.size} weights but axis {ax.name!r} has size {ax.size}"
            )
    return rebound


def _gen(args) -> int:
    name = args.name
    if name == "square-wave" or (name == "random" and args.random_family):
        alternations = args.alternations if args.alternations is not None else args.n
        fam = (
            square_wave_family(alternations, args.members)
            if name == "square-wave"
            else random_step_family(args.members, args.jumps, args.seed)
        )
        _emit(family_to_json(fam), args.out)
        return 0
    if name == "uniform-measure":
        from .instances import uniform

        _emit(measure_to_json(uniform(args.n)), args.out)
        return 0
    phi = GENERATORS[name](args.n, value=args.value, seed=args.seed)
    text = predicate_to_json(phi) if args.format == "json" else predicate_to_csv(phi)
    _emit(text, args.out)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        cmd = args.command
        if cmd == "gen":
            return _gen(args)
        if cmd == "verify-cert":
            cert = load_certificate(Path(args.infile).read_text())
            ok, message = runners.reverify(cert)
            print(message, file=sys.stderr)
            return 0 if ok else 2
        if cmd == "report":
            cert = load_certificate(Path(args.infile).read_text())
            prefix = Path(args.out) if args.out else Path(args.infile).with_suffix("")
            csv_path, png_path = render_report(cert, prefix)
            print(f"wrote {csv_path} and {png_path}", file=sys.stderr)
            return 0

        if cmd == "grid-approx":
            cert = runners.run_grid_approx(load_family(args.family), args.eps)
            return _write_certificate(cert, args)

        phi = load_predicate(args.phi)
        if cmd == "cover":
            cert = runners.run_cover(phi, args.eps, args.n, args.direction, args.mode)
        elif cmd == "cover-partition":
            cols = [int(c) for c in args.cols.split(",") if c != ""]
            cert = runners.run_cover_partition(phi, cols, args.eps, args.mode)
        elif cmd == "approx":
            cert = runners.run_approx(
                phi, _measures(args, phi)[0], args.eps, args.n, args.max_attempts, args.seed
            )
        elif cmd == "tail-check":
            cert = runners.run_tail_check(
                phi, _measures(args, phi)[0], args.eps, args.n, args.trials, args.seed
            )
        elif cmd == "witness-prob":
            cert = runners.run_witness_prob(
                phi, _measures(args, phi)[0], args.eps, args.n, args.samples, args.seed
            )
        elif cmd == "net":
            cert = runners.run_net(
                phi, _measures(args, phi)[0], args.eps, args.r, args.s_level, args.strategy, args.seed
            )
        elif cmd == "structured":
            cert = runners.run_structured(phi, _measures(args, phi, phi.arity), args.eps, args.seed)
        elif cmd == "nip-reg":
            cert = runners.run_nip_reg(
                phi, _measures(args, phi, phi.arity), args.eps, args.delta, args.mode, args.seed
            )
        elif cmd == "seh":
            cert = runners.run_seh(phi, _measures(args, phi, phi.arity), args.eps, args.delta, args.budget)
        elif cmd == "distal-reg":
            cert = runners.run_distal_reg(
                phi, _measures(args, phi, phi.arity), args.eps, args.delta, args.gamma, args.budget
            )
        elif cmd == "density-seh":
            cert = runners.run_density_seh(
                phi,
                _measures(args, phi, phi.arity),
                args.eps,
                args.delta,
                args.gamma,
                args.budget,
                args.alpha,
                args.beta,
            )
        elif cmd == "bucketed-seh":
            cert = runners.run_bucketed_seh(phi, _measures(args, phi, phi.arity), args.s)
        elif cmd == "cutting":
            cert = runners.run_cutting(phi, _measures(args, phi)[0], args.eps, args.delta, args.seed)
        elif cmd == "cutting-verify":
            doc = json.loads(Path(args.cutting).read_text())
            cert = runners.run_cutting_verify(doc, phi, _measures(args, phi)[0], args.eps, args.delta)
        elif cmd == "equipartition":
            cert = runners.run_equipartition(
                phi,
                _measures(args, phi, phi.arity),
                args.eps,
                args.delta,
                args.gamma,
                args.budget,
                args.equi_gamma,
            )
        else:  # pragma: no cover - argparse restricts choices
            raise CliError(f"unknown subcommand {cmd!r}")
        return _write_certificate(cert, args)
    except (OSError, ValueError, KeyError, json.JSONDecodeError, CliError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
