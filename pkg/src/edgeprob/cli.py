"""Command-line interface: ``edgeprob <subcommand> ...``.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
``EDGEPROB_OUT`` sets the default output root (``results`` otherwise).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import VARIANTS, microcanonical_entropy
from .core import CountMatrix, EdgeSequence, Partition, collapse, representative
from .experiments import NAMES, run_experiment, write_result
from .generators import sample, spec_from_json
from .inference import (
    Block,
    Configuration,
    Free,
    SolverError,
    SolverOptions,
    constraint_from_json,
    constraint_to_json,
    minimize,
    result_to_json,
)
from .io import ensure_dir, read_counts, read_edges, read_json, write_edges, write_json, write_matrix, write_table
from .sequential import mean_code_length, mean_pred_prob, select, sequential_encode

log = logging.getLogger("edgeprob")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class InputError(Exception):
    pass


def out_root() -> Path:
    return Path(os.environ.get("EDGEPROB_OUT", "results"))


def _out(args, default: str) -> Path:
    return Path(args.out) if args.out else out_root() / default


def _opts(args) -> SolverOptions:
    return SolverOptions(grad_tol=args.tol, max_iters=args.max_iters)


def load_model(ref: str):
    """A canned model name or a path to a model JSON document."""
    path = Path(ref)
    if path.suffix == ".json" or path.exists():
        return spec_from_json(read_json(path))
    return spec_from_json(ref)


def load_constraint(path):
    return constraint_from_json(read_json(path))


def load_sequence(args) -> EdgeSequence:
    """Edges from ``--edges``, or one seeded ordering of ``--counts``."""
    if args.edges:
        return read_edges(args.edges)
    if args.counts:
        counts = read_counts(args.counts)
        log.info("drawing representative ordering with seed %d", args.seed)
        return representative(counts, args.seed)
    raise InputError("one of --edges or --counts is required")


def load_counts(args) -> CountMatrix:
    if args.counts:
        return read_counts(args.counts)
    if args.edges:
        return collapse(read_edges(args.edges))
    raise InputError("one of --edges or --counts is required")


# -- subcommands ------------------------------------------------------------


def cmd_generate(args) -> int:
    spec = load_model(args.model)
    e = sample(spec, args.m, args.seed)
    path = _out(args, "edges.txt")
    ensure_dir(path.parent)
    write_edges(path, e)
    print(path)
    return EXIT_OK


def cmd_encode(args) -> int:
    e = load_sequence(args)
    spec = load_constraint(args.constraint)
    trace = sequential_encode(e, spec, _opts(args), seed_ordering=None if args.edges else args.seed)
    out = ensure_dir(_out(args, "encode"))
    rows = [
        {"k": k + 1, "source": int(u), "dest": int(v), "step_prob": p, "code_bits": b}
        for k, ((u, v), p, b) in enumerate(zip(e.edges.tolist(), trace.step_probs, trace.code_bits))
    ]
    write_table(out / "trace.csv", ["k", "source", "dest", "step_prob", "code_bits"], rows)
    report = {
        "constraint": constraint_to_json(spec),
        "m": trace.m,
        "seed_ordering": trace.seed_ordering,
        "description_length_bits": trace.description_length,
        "mean_code_length": mean_code_length(trace),
        "mean_pred_prob": mean_pred_prob(trace),
        "solver_options": {"grad_tol": args.tol, "max_iters": args.max_iters},
        "version": __version__,
    }
    write_json(out / "report.json", report)
    print(json.dumps({k: report[k] for k in ("m", "mean_code_length", "mean_pred_prob")}))
    return EXIT_OK


def cmd_select(args) -> int:
    e = load_sequence(args)
    files = sorted(Path(args.candidates).glob("*.json"))
    if not files:
        raise InputError(f"no candidate *.json files in {args.candidates}")
    specs = [load_constraint(f) for f in files]
    report = select(e, specs, _opts(args), workers=args.workers)
    doc = report.to_json([f.stem for f in files])
    out = _out(args, "selection.json")
    ensure_dir(out.parent)
    write_json(out, doc)
    print(doc["best"])
    return EXIT_OK


def _partition_arg(args, n: int) -> Partition:
    if args.partition:
        spec = load_constraint(args.partition)
        if isinstance(spec, (Block, Free)):
            return spec.partition
        raise InputError("entropy needs a block partition, not a configuration constraint")
    if args.sizes:
        return Partition.from_sizes([int(x) for x in args.sizes.split(",")])
    return Partition.single(n)


def cmd_entropy(args) -> int:
    counts = load_counts(args)
    part = _partition_arg(args, counts.n)
    rep = microcanonical_entropy(counts, part, args.variant)
    doc = rep.to_json(Path(args.partition).stem if args.partition else "")
    out = _out(args, "entropy.json")
    ensure_dir(out.parent)
    write_json(out, doc)
    print(json.dumps(doc))
    return EXIT_OK


def cmd_infer(args) -> int:
    counts = load_counts(args)
    spec = load_constraint(args.constraint)
    res = minimize(spec, counts, _opts(args))
    out = ensure_dir(_out(args, "infer"))
    write_matrix(out / "q_star.csv", res.q_star.p)
    doc = result_to_json(res)
    doc["constraint"] = constraint_to_json(spec)
    write_json(out / "q_star.json", doc)
    if not res.converged:
        raise SolverError(f"solver did not converge (kkt residual {res.kkt_residual:.3g})")
    print(out / "q_star.csv")
    return EXIT_OK


def cmd_experiment(args) -> int:
    overrides = dict(
        seed=args.seed,
        m=args.m,
        m_s2=args.m_s2,
        n_seeds=args.seeds,
        workers=args.workers,
        opts=_opts(args),
    )
    if args.lengths:
        overrides["lengths"] = [int(x) for x in args.lengths.split(",")]
    result = run_experiment(args.name, **overrides)
    paths = write_result(result, _out(args, args.name))
    print(json.dumps(result.summary, default=str)[:2000])
    for p in paths.values():
        print(p)
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def _solver_flags(p: argparse.ArgumentParser) -> None:
    d = SolverOptions()
    p.add_argument("--tol", type=float, default=d.grad_tol, help="KKT residual tolerance")
    p.add_argument("--max-iters", type=int, default=d.max_iters)


def _input_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--edges", help="edge-sequence text file")
    g.add_argument("--counts", help="count-matrix CSV (static multigraph)")
    p.add_argument("--seed", type=int, default=0, help="seed for the representative ordering of --counts")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="edgeprob", description="Sequential edge-probability inference.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample an edge sequence from a model")
    p.add_argument("--model", required=True, help="canned model name or model JSON file")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output edge file")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("encode", help="sequentially encode a sequence under one constraint")
    _input_flags(p)
    p.add_argument("--constraint", required=True, help="constraint JSON file")
    p.add_argument("--out", help="output directory")
    _solver_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("select", help="rank candidate constraints by description length")
    _input_flags(p)
    p.add_argument("--candidates", required=True, help="directory of constraint JSON files")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="output JSON file")
    _solver_flags(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("entropy", help="microcanonical blockmodel entropy baseline")
    _input_flags(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--partition", help="block constraint JSON file")
    g.add_argument("--sizes", help="comma-separated contiguous block sizes")
    p.add_argument("--variant", choices=VARIANTS, default="exact")
    p.add_argument("--out", help="output JSON file")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("infer", help="fit the constrained estimate to a count matrix")
    _input_flags(p)
    p.add_argument("--constraint", required=True)
    p.add_argument("--out", help="output directory")
    _solver_flags(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("experiment", help="run one of the synthetic experiments")
    p.add_argument("name", choices=NAMES)
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--seeds", type=int, help="number of seeds")
    p.add_argument("--m", type=int, help="sequence length (S1 length for table2)")
    p.add_argument("--m-s2", type=int, help="S2 sequence length for table2")
    p.add_argument("--lengths", help="comma-separated lengths for fig4")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="output directory")
    _solver_flags(p)
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
