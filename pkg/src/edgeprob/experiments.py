"""Drivers for the synthetic experiments.

Each driver returns an :class:`ExperimentResult` (rows, a summary used by the
acceptance suite, and a manifest listing everything needed to regenerate the
rows). :func:`write_result` emits ``<name>.csv``, ``<name>.svg`` (rendered from
the CSV), ``<name>_summary.json`` and ``manifest.json``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .baselines import microcanonical_entropy
from .core import Partition, ProbabilityMatrix, collapse
from .generators import (
    CANNED_RAW_TOTAL,
    Mixture,
    canned,
    model_n,
    sample,
    spec_to_json,
    to_probability_matrix,
)
from .inference import Block, Configuration, ConstraintSpec, SolverError, SolverOptions, constraint_to_json
from .io import ensure_dir, read_table, write_json, write_table
from .sequential import mean_code_length, mean_pred_prob, sequential_encode
from .svg import chart

log = logging.getLogger(__name__)

NAMES = ("fig1", "fig2", "fig3", "table2", "fig4", "fig5", "annexF")
DEFAULT_M = 2800


@dataclass
class ExperimentResult:
    name: str
    columns: list[str]
    rows: list[dict]
    summary: dict
    manifest: dict = field(default_factory=dict)


def nested_partitions(n: int = 128, levels: int = 8) -> list[Partition]:
    """Contiguous partitions with 1, 2, 4, ... equal blocks, each halving the last."""
    return [Partition(np.arange(n) // (n // 2**i)) for i in range(levels)]


def merge_split_partitions(model: str) -> tuple[Partition, Partition]:
    """True partition and its inverse (large block split, small blocks merged)."""
    if model == "s1_merge_split":
        return Partition.from_sizes([6, 3, 3]), Partition.from_sizes([3, 3, 6])
    if model == "s2_heterogeneous":
        return Partition.from_sizes([128] + [4] * 32), Partition.from_sizes([4] * 32 + [128])
    raise KeyError(model)


def sbm_vs_cm_constraints() -> dict[str, ConstraintSpec]:
    return {
        "block": Block(Partition.from_sizes([64, 64])),
        "configuration": Configuration(Partition.from_sizes([96, 24, 6, 2]), Partition.from_sizes([2, 6, 24, 96])),
    }


def _map(fn: Callable, jobs: list, workers: int) -> list:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [fn(j) for j in jobs]


def _encode_cell(job):
    """(model, m, seed, {name: constraint}, opts) -> {name: (mcl, mpp)} or None on solver failure."""
    model, m, seed, constraints, opts = job
    e = sample(model, m, seed)
    out = {}
    try:
        for key, spec in constraints.items():
            t = sequential_encode(e, spec, opts, seed_ordering=seed)
            out[key] = (mean_code_length(t), mean_pred_prob(t))
    except SolverError as exc:
        log.warning("seed %d: %s", seed, exc)
        return None
    return out


def _base_manifest(name, models, m, seeds, constraints, opts, workers) -> dict:
    return {
        "experiment": name,
        "artifact_version": __version__,
        "models": {k: spec_to_json(v) for k, v in models.items()},
        "canned_raw_totals": {k: CANNED_RAW_TOTAL[k] for k in models if k in CANNED_RAW_TOTAL},
        "m": m,
        "seeds": seeds,
        "candidates": {k: constraint_to_json(v) for k, v in constraints.items()},
        "solver_options": asdict(opts),
        "workers": workers,
    }


# -- individual experiments -------------------------------------------------


def run_fig1(seed=0, m=None, model="s1_twoblock", **_) -> ExperimentResult:
    """Cross entropy of the growing empirical distribution against the uniform
    model, the generating model, and itself."""
    m = m or DEFAULT_M
    spec = canned(model)
    p0 = to_probability_matrix(spec)
    n = p0.n
    e = sample(spec, m, seed)
    counts = np.zeros((n, n))
    sum_klogk = 0.0
    true_bits = 0.0
    rows = []
    for k, (u, v) in enumerate(e.edges.tolist(), 1):
        c = counts[u, v]
        sum_klogk += (c + 1) * math.log2(c + 1) - (c * math.log2(c) if c > 0 else 0.0)
        counts[u, v] = c + 1
        true_bits -= math.log2(p0.p[u, v])
        rows.append(
            {
                "k": k,
                "h_uniform": 2 * math.log2(n),
                "h_true": true_bits / k,
                "h_empirical": math.log2(k) - sum_klogk / k,
            }
        )
    manifest = _base_manifest("fig1", {model: spec}, m, [seed], {}, SolverOptions(), 1)
    final = rows[-1]
    summary = {"final_h_true": final["h_true"], "final_h_empirical": final["h_empirical"]}
    return ExperimentResult("fig1", ["k", "h_uniform", "h_true", "h_empirical"], rows, summary, manifest)


def _nested_sweep(name, seed=0, m=None, n_seeds=50, workers=1, opts=SolverOptions(), **_) -> ExperimentResult:
    m = m or DEFAULT_M
    model = "s0_4x32"
    spec = canned(model)
    parts = nested_partitions(model_n(spec))
    constraints = {str(p.p): Block(p) for p in parts}
    seeds = [seed + i for i in range(n_seeds)]
    results = _map(_encode_cell, [(spec, m, s, constraints, opts) for s in seeds], workers)
    rows = []
    failures = 0
    per_seed = {}
    for s, res in zip(seeds, results):
        if res is None:
            failures += 1
            continue
        per_seed[s] = res
        for key in constraints:
            mcl, mpp = res[key]
            rows.append({"seed": s, "blocks": int(key), "mean_code_length": mcl, "mean_pred_prob": mpp})
    summary = _nested_summary(per_seed)
    summary["failures"] = failures
    manifest = _base_manifest(name, {model: spec}, m, seeds, constraints, opts, workers)
    return ExperimentResult(name, ["seed", "blocks", "mean_code_length", "mean_pred_prob"], rows, summary, manifest)


def _nested_summary(per_seed: dict) -> dict:
    best_blocks = {}
    monotone = 0
    rel_change = {}
    for s, res in per_seed.items():
        mcl = {int(k): v[0] for k, v in res.items()}
        mpp = {int(k): v[1] for k, v in res.items()}
        best_blocks[s] = min(mcl, key=lambda b: (mcl[b], b))
        if mpp[1] < mpp[2] < mpp[4]:
            monotone += 1
        rel_change[s] = abs(mpp[128] - mpp[4]) / mpp[4]
    return {
        "seeds": len(per_seed),
        "best_blocks": best_blocks,
        "four_block_wins": sum(1 for b in best_blocks.values() if b == 4),
        "mpp_monotone_1_to_4": monotone,
        "mpp_rel_change_4_to_128": rel_change,
        "mpp_within_5pct": sum(1 for r in rel_change.values() if r < 0.05),
        "max_mpp_rel_change": max(rel_change.values(), default=float("nan")),
    }


def run_fig2(**kw) -> ExperimentResult:
    return _nested_sweep("fig2", **kw)


def run_fig3(**kw) -> ExperimentResult:
    return _nested_sweep("fig3", **kw)


def _table2_cell(job):
    model, m, seed, opts = job
    spec = canned(model)
    b_true, b_inv = merge_split_partitions(model)
    e = sample(spec, m, seed)
    k = collapse(e)
    try:
        mcl_true = mean_code_length(sequential_encode(e, Block(b_true), opts, seed))
        mcl_inv = mean_code_length(sequential_encode(e, Block(b_inv), opts, seed))
    except SolverError as exc:
        log.warning("%s seed %d: %s", model, seed, exc)
        return None
    ent_true = microcanonical_entropy(k, b_true, "exact")
    ent_inv = microcanonical_entropy(k, b_inv, "exact")
    return {
        "model": model,
        "seed": seed,
        "m": m,
        "mcl_true": mcl_true,
        "mcl_inverse": mcl_inv,
        "entropy_true": ent_true.entropy_nats,
        "entropy_inverse": ent_inv.entropy_nats,
        "collisions": ent_true.collisions,
        "mcl_correct": int(mcl_true < mcl_inv),
        "entropy_correct": int(ent_true.entropy_nats < ent_inv.entropy_nats),
    }


def run_table2(seed=0, m=None, m_s2=None, n_seeds=100, workers=1, opts=SolverOptions(), **_) -> ExperimentResult:
    """Merge/split: true partition vs its inverse under mean code length and
    microcanonical entropy. ``m`` sets the S1 length (default 378)."""
    sizes = {"s1_merge_split": m or 378, "s2_heterogeneous": m_s2 or DEFAULT_M}
    seeds = [seed + i for i in range(n_seeds)]
    jobs = [(model, mm, s, opts) for model, mm in sizes.items() for s in seeds]
    results = _map(_table2_cell, jobs, workers)
    rows = [r for r in results if r is not None]
    summary = {"failures": len(results) - len(rows)}
    for model in sizes:
        sub = [r for r in rows if r["model"] == model]
        summary[model] = {
            "graphs": len(sub),
            "mcl_correct_pct": 100.0 * sum(r["mcl_correct"] for r in sub) / max(1, len(sub)),
            "entropy_correct_pct": 100.0 * sum(r["entropy_correct"] for r in sub) / max(1, len(sub)),
            "collisions_total": sum(r["collisions"] for r in sub),
        }
    constraints = {}
    for model in sizes:
        b_true, b_inv = merge_split_partitions(model)
        constraints[f"{model}/true"] = Block(b_true)
        constraints[f"{model}/inverse"] = Block(b_inv)
    manifest = _base_manifest("table2", {k: canned(k) for k in sizes}, sizes, seeds, constraints, opts, workers)
    manifest["entropy_variant"] = "exact"
    columns = [
        "model", "seed", "m", "mcl_true", "mcl_inverse", "entropy_true", "entropy_inverse",
        "collisions", "mcl_correct", "entropy_correct",
    ]
    return ExperimentResult("table2", columns, rows, summary, manifest)


def run_fig4(seed=0, lengths=None, workers=1, opts=SolverOptions(), **_) -> ExperimentResult:
    """SBM- and CM-generated sequences of growing length under both constraint families."""
    lengths = list(lengths or np.linspace(1000, 10000, 10).astype(int).tolist())
    generators = {"sbm": "s1_twoblock", "cm": "cm_paper"}
    constraints = sbm_vs_cm_constraints()
    jobs = []
    meta = []
    for g, (label, model) in enumerate(generators.items()):
        for i, mm in enumerate(lengths):
            s = seed + 100 * g + i
            jobs.append((canned(model), mm, s, constraints, opts))
            meta.append((label, mm, s))
    results = _map(_encode_cell, jobs, workers)
    rows = []
    for (label, mm, s), res in zip(meta, results):
        if res is None:
            continue
        rows.append(
            {
                "generator": label,
                "m": mm,
                "seed": s,
                "mcl_block": res["block"][0],
                "mcl_configuration": res["configuration"][0],
            }
        )
    summary = {"failures": len(results) - len(rows)}
    for label in generators:
        sub = [r for r in rows if r["generator"] == label]
        if label == "sbm":
            wins = sum(1 for r in sub if r["mcl_block"] < r["mcl_configuration"])
        else:
            wins = sum(1 for r in sub if r["mcl_configuration"] < r["mcl_block"])
        summary[label] = {"sequences": len(sub), "matching_constraint_wins": wins}
    models = {v: canned(v) for v in generators.values()}
    manifest = _base_manifest("fig4", models, lengths, [r[2] for r in meta], constraints, opts, workers)
    columns = ["generator", "m", "seed", "mcl_block", "mcl_configuration"]
    return ExperimentResult("fig4", columns, rows, summary, manifest)


def run_fig5(seed=0, m=None, n_seeds=10, workers=1, opts=SolverOptions(), **_) -> ExperimentResult:
    """Mixtures ``lam * CM + (1 - lam) * SBM`` encoded under both constraint families."""
    m = m or DEFAULT_M
    lambdas = [i / 10 for i in range(11)]
    constraints = sbm_vs_cm_constraints()
    cm, sbm = canned("cm_paper"), canned("s1_twoblock")
    jobs, meta = [], []
    for li, lam in enumerate(lambdas):
        for i in range(n_seeds):
            s = seed + 100 * li + i
            jobs.append((Mixture(lam, cm, sbm), m, s, constraints, opts))
            meta.append((lam, s))
    results = _map(_encode_cell, jobs, workers)
    rows = []
    for (lam, s), res in zip(meta, results):
        if res is None:
            continue
        rows.append({"lambda": lam, "seed": s, "mcl_block": res["block"][0], "mcl_configuration": res["configuration"][0]})
    per_lambda = {}
    for lam in lambdas:
        sub = [r for r in rows if r["lambda"] == lam]
        per_lambda[str(lam)] = {
            "sequences": len(sub),
            "block_wins": sum(1 for r in sub if r["mcl_block"] < r["mcl_configuration"]),
            "configuration_wins": sum(1 for r in sub if r["mcl_configuration"] < r["mcl_block"]),
            "mean_mcl_block": float(np.mean([r["mcl_block"] for r in sub])) if sub else float("nan"),
            "mean_mcl_configuration": float(np.mean([r["mcl_configuration"] for r in sub])) if sub else float("nan"),
        }
    summary = {"failures": len(results) - len(rows), "per_lambda": per_lambda}
    manifest = _base_manifest(
        "fig5", {"cm_paper": cm, "s1_twoblock": sbm}, m, [r[1] for r in meta], constraints, opts, workers
    )
    manifest["lambdas"] = lambdas
    return ExperimentResult("fig5", ["lambda", "seed", "mcl_block", "mcl_configuration"], rows, summary, manifest)


def run_annexF(seed=0, m=None, opts=SolverOptions(), tail=500, **_) -> ExperimentResult:
    """Prediction-probability traces for three nested SBMs under three partitions."""
    m = m or DEFAULT_M
    models = {"G0": "annexF_s0", "G1": "annexF_s1", "G2": "annexF_s2"}
    parts = dict(zip(("B0", "B1", "B2"), nested_partitions(128, 3)))
    rows = []
    tails = {}
    constant = {}
    for j, (g, model) in enumerate(models.items()):
        e = sample(canned(model), m, seed + j)
        for pname, part in parts.items():
            t = sequential_encode(e, Block(part), opts, seed + j)
            for k, q in enumerate(t.step_probs.tolist(), 1):
                rows.append({"graph": g, "partition": pname, "k": k, "step_prob": q})
            tails[f"{g}/{pname}"] = float(t.step_probs[-tail:].mean() * 128**2)
            if pname == "B0":
                constant[g] = bool(np.all(t.step_probs == 1 / 128**2))
    summary = {"tail_mean_times_n2": tails, "one_block_constant": constant, "tail": tail}
    manifest = _base_manifest(
        "annexF",
        {v: canned(v) for v in models.values()},
        m,
        [seed + j for j in range(3)],
        {k: Block(v) for k, v in parts.items()},
        opts,
        1,
    )
    return ExperimentResult("annexF", ["graph", "partition", "k", "step_prob"], rows, summary, manifest)


RUNNERS = {
    "fig1": run_fig1,
    "fig2": run_fig2,
    "fig3": run_fig3,
    "table2": run_table2,
    "fig4": run_fig4,
    "fig5": run_fig5,
    "annexF": run_annexF,
}


def run_experiment(name: str, **overrides) -> ExperimentResult:
    if name not in RUNNERS:
        raise KeyError(f"unknown experiment {name!r}; expected one of {', '.join(NAMES)}")
    kw = {k: v for k, v in overrides.items() if v is not None}
    return RUNNERS[name](**kw)


# -- output -----------------------------------------------------------------


def _floats(rows, key):
    return [float(r[key]) for r in rows]


def render(name: str, csv_path) -> str:
    """Chart for an experiment, built only from its CSV."""
    _, rows = read_table(csv_path)
    if name == "fig1":
        ks = _floats(rows, "k")
        series = {
            "H(P_k, uniform)": (ks, _floats(rows, "h_uniform")),
            "H(P_k, P0)": (ks, _floats(rows, "h_true")),
            "S(P_k)": (ks, _floats(rows, "h_empirical")),
        }
        return chart(series, "Cross entropy of the empirical distribution", "k", "bits")
    if name in ("fig2", "fig3"):
        col = "mean_pred_prob" if name == "fig2" else "mean_code_length"
        xs, ys = _floats(rows, "blocks"), _floats(rows, col)
        blocks = sorted(set(xs))
        mean = [float(np.mean([y for x, y in zip(xs, ys) if x == b])) for b in blocks]
        label = "mean prediction probability" if name == "fig2" else "mean code length (bits)"
        return chart({"graphs": (xs, ys), "mean": (blocks, mean)}, label, "blocks", label, "scatter", log_x=True)
    if name == "table2":
        series = {}
        for model in sorted({r["model"] for r in rows}):
            sub = [r for r in rows if r["model"] == model]
            series[f"{model} mcl(B) - mcl(B')"] = (_floats(sub, "seed"), [float(r["mcl_true"]) - float(r["mcl_inverse"]) for r in sub])
        return chart(series, "Merge/split: code length difference", "seed", "bits", "scatter")
    if name == "fig4":
        series = {}
        for gen in ("sbm", "cm"):
            sub = [r for r in rows if r["generator"] == gen]
            series[f"{gen} / block"] = (_floats(sub, "m"), _floats(sub, "mcl_block"))
            series[f"{gen} / configuration"] = (_floats(sub, "m"), _floats(sub, "mcl_configuration"))
        return chart(series, "Mean code length vs sequence length", "m", "bits", "scatter")
    if name == "fig5":
        lams = sorted({float(r["lambda"]) for r in rows})
        series = {}
        for col, label in (("mcl_block", "block"), ("mcl_configuration", "configuration")):
            series[label] = (lams, [float(np.mean([float(r[col]) for r in rows if float(r["lambda"]) == l])) for l in lams])
        return chart(series, "Mean code length vs mixing parameter", "lambda", "bits")
    if name == "annexF":
        series = {}
        for r in rows[::7]:
            key = f"{r['graph']}/{r['partition']}"
            xs, ys = series.setdefault(key, ([], []))
            xs.append(float(r["k"]))
            ys.append(float(r["step_prob"]))
        return chart(series, "Edge prediction probability", "k", "probability", "scatter")
    raise KeyError(name)


def write_result(result: ExperimentResult, out_dir) -> dict[str, str]:
    out = ensure_dir(out_dir)
    paths = {
        "csv": str(out / f"{result.name}.csv"),
        "svg": str(out / f"{result.name}.svg"),
        "summary": str(out / f"{result.name}_summary.json"),
        "manifest": str(out / "manifest.json"),
    }
    write_table(paths["csv"], result.columns, result.rows)
    Path(paths["svg"]).write_text(render(result.name, paths["csv"]))
    write_json(paths["summary"], _jsonable(result.summary))
    manifest = dict(result.manifest)
    manifest["outputs"] = {k: Path(v).name for k, v in paths.items()}
    write_json(paths["manifest"], _jsonable(manifest))
    return paths


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
