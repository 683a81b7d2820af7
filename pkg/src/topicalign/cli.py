"""Command-line pipeline: simulate -> fit -> align -> diagnose / export-flow,
plus an experiment runner for replicate sweeps.

Exit codes: 0 success, 2 argument error, 3 data error, 4 internal error.
The environment variable TOPIC_ALIGN_THREADS caps worker pools.
"""
from __future__ import annotations

import csv
import json
import statistics
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from .alignment import AlignmentGraph, TopicAlignment
from .corpus import SeededRng, load_counts, load_ensemble, save_counts, save_ensemble
from .diagnostics import detect_plateau, estimation_specificity
from .errors import SchemaMismatch, TooFewModels, TopicAlignError
from .flowsvg import write_flow_svg
from .lda import GibbsConfig, fit_ensemble, resolve_threads
from .simulate import (
    BackgroundSimSpec,
    LdaSimSpec,
    StrainSwitchSpec,
    sim_background,
    sim_lda,
    sim_null,
    sim_strain_switching,
)

# Substream tags (simulate uses 1-6, lda uses 7-8).
_STREAM_CELL = 9
_STREAM_GIBBS = 11

MECHANISMS = ("lda", "null", "background", "strain")

# Published schema for the alignment JSON written by `topicalign align`.
ALIGNMENT_SCHEMA = {
    "type": "object",
    "required": ["method", "models", "nodes", "pairs"],
    "properties": {
        "method": {"type": "string"},
        "crossing_objective": {
            "type": "object",
            "properties": {"before": {"type": "number"}, "after": {"type": "number"}},
        },
        "models": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["k"],
                "properties": {
                    "k": {"type": "integer", "minimum": 1},
                    "lambda_gamma": {"type": "number"},
                    "lambda_beta": {"type": "number"},
                },
            },
        },
        "nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["model", "index", "mass", "path", "coherence"],
                "properties": {
                    "model": {"type": "integer", "minimum": 0},
                    "index": {"type": "integer", "minimum": 0},
                    "display_index": {"type": "integer", "minimum": 0},
                    "mass": {"type": "number", "minimum": 0},
                    "path": {"type": "integer", "minimum": 0},
                    "coherence": {"type": "number"},
                    "refinement": {"type": ["number", "null"]},
                },
            },
        },
        "pairs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["m", "m2", "w", "w_out", "w_in"],
                "properties": {
                    "m": {"type": "integer", "minimum": 0},
                    "m2": {"type": "integer", "minimum": 0},
                    "w": {"type": "array"},
                    "w_out": {"type": "array"},
                    "w_in": {"type": "array"},
                },
            },
        },
    },
}


# ---------------------------------------------------------------------------
# Alignment JSON round trip
# ---------------------------------------------------------------------------

def alignment_to_json(align: TopicAlignment, hypers=None) -> dict:
    graph = align.graph_
    models = []
    for m, k in enumerate(graph.ks):
        entry = {"k": int(k)}
        if hypers is not None:
            entry["lambda_gamma"] = hypers[m].lambda_gamma
            entry["lambda_beta"] = hypers[m].lambda_beta
        models.append(entry)
    nodes = []
    for node in graph.nodes():
        m, k = node
        nodes.append({
            "model": m,
            "index": k,
            "display_index": int(align.reorder_.permutations[m][k]),
            "mass": graph.mass(node),
            "path": int(align.paths_.path_of[node]),
            "coherence": float(align.coherence_[node]),
            "refinement": (float(align.refinement_[node])
                           if node in align.refinement_ else None),
        })
    pairs = []
    for m, m2 in graph.pairs():
        pairs.append({
            "m": m,
            "m2": m2,
            "w": graph.weights[(m, m2)].tolist(),
            "w_out": graph.w_out[(m, m2)].tolist(),
            "w_in": graph.w_in[(m, m2)].tolist(),
        })
    return {
        "method": graph.method,
        "crossing_objective": {
            "before": align.reorder_.objective_before,
            "after": align.reorder_.objective_after,
        },
        "models": models,
        "nodes": nodes,
        "pairs": pairs,
    }


def alignment_from_json(payload: dict):
    """Rebuild (graph, path_of, permutations, nodes) from an alignment JSON."""
    for key in ("method", "models", "nodes", "pairs"):
        if key not in payload:
            raise SchemaMismatch(f"alignment JSON missing {key!r}")
    ks = tuple(int(entry["k"]) for entry in payload["models"])
    masses = [np.zeros(k) for k in ks]
    path_of = {}
    perms = [np.arange(k) for k in ks]
    for node in payload["nodes"]:
        m, k = int(node["model"]), int(node["index"])
        masses[m][k] = float(node["mass"])
        path_of[(m, k)] = int(node["path"])
        perms[m][k] = int(node.get("display_index", k))
    weights, w_out, w_in = {}, {}, {}
    for pair in payload["pairs"]:
        key = (int(pair["m"]), int(pair["m2"]))
        weights[key] = np.array(pair["w"], dtype=np.float64)
        w_out[key] = np.array(pair["w_out"], dtype=np.float64)
        w_in[key] = np.array(pair["w_in"], dtype=np.float64)
    graph = AlignmentGraph(ks, tuple(masses), weights, w_out, w_in,
                           str(payload["method"]))
    return graph, path_of, tuple(perms), payload["nodes"]


def _read_alignment(path):
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise TopicAlignError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"invalid JSON in {path}: {exc}") from exc
    return alignment_from_json(payload)


def _dump_json(payload, path) -> None:
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


# ---------------------------------------------------------------------------
# Simulation plumbing shared by `simulate` and `experiment`
# ---------------------------------------------------------------------------

def _simulate_one(mechanism: str, rng: SeededRng, n: int, d: int, k: int,
                  doc_total: int, lambda_gamma: float, lambda_beta: float,
                  alpha: float | None, lambda_nu: float,
                  subset_size: int | None, lambda_subset: float,
                  replicates_per_topic: tuple[int, ...] | None):
    """Returns (CountMatrix, truth dict | None, sample object)."""
    base = LdaSimSpec(n_samples=n, n_features=d, n_topics=k,
                      lambda_gamma=lambda_gamma, lambda_beta=lambda_beta,
                      doc_total=doc_total, rng=rng)
    if mechanism == "lda":
        sample = sim_lda(base)
        truth = _truth_entry(base, sample.beta, sample.gamma)
        return sample.counts, truth, sample
    if mechanism == "null":
        counts = sim_null(n, d, doc_total, rng)
        return counts, None, None
    if mechanism == "background":
        spec = BackgroundSimSpec(base, alpha=alpha if alpha is not None else 1.0,
                                 lambda_nu=lambda_nu)
        sample = sim_background(spec)
        truth = _truth_entry(base, sample.beta, sample.gamma)
        truth["alpha"] = spec.alpha
        truth["lambda_nu"] = spec.lambda_nu
        return sample.counts, truth, sample
    if mechanism == "strain":
        rep = replicates_per_topic if replicates_per_topic is not None else (2, 2, 1, 1, 1)
        spec = StrainSwitchSpec(base, replicates_per_topic=rep,
                                subset_size=subset_size if subset_size else 230,
                                lambda_subset=lambda_subset)
        sample = sim_strain_switching(spec)
        truth = _truth_entry(base, sample.beta, sample.gamma)
        truth["subset_size"] = spec.subset_size
        truth["lambda_subset"] = spec.lambda_subset
        truth["variants"] = [v.T.tolist() for v in sample.variants]
        truth["subsets"] = [s.tolist() for s in sample.subsets]
        return sample.counts, truth, sample
    raise TopicAlignError(f"unknown mechanism {mechanism!r}")


def _truth_entry(base: LdaSimSpec, beta: np.ndarray, gamma: np.ndarray) -> dict:
    # Ensemble-schema entry so `load_ensemble` can read the truth directly.
    return {
        "k": base.n_topics,
        "lambda_gamma": base.lambda_gamma,
        "lambda_beta": base.lambda_beta,
        "beta": beta.T.tolist(),
        "gamma": gamma.tolist(),
    }


def _parse_rep_list(text: str | None):
    if not text:
        return None
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError as exc:
        raise click.BadParameter(f"cannot parse replicate counts {text!r}") from exc


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

@click.group()
def cli() -> None:
    """Fit, align, and diagnose ensembles of topic models."""


@cli.command("simulate")
@click.option("--mechanism", type=click.Choice(MECHANISMS), default="lda")
@click.option("--n", type=int, default=250, help="Samples per corpus.")
@click.option("--d", type=int, default=1000, help="Features per corpus.")
@click.option("--k", type=int, default=5, help="True number of topics.")
@click.option("--doc-total", type=int, default=10_000, help="Reads per sample.")
@click.option("--lambda-gamma", type=float, default=0.5)
@click.option("--lambda-beta", type=float, default=0.1)
@click.option("--alpha", type=float, default=None,
              help="LDA share of the mean (background mechanism).")
@click.option("--lambda-nu", type=float, default=1.0)
@click.option("--subset-size", type=int, default=None,
              help="Perturbed coordinates per topic (strain mechanism).")
@click.option("--lambda-subset", type=float, default=0.1)
@click.option("--replicates-per-topic", type=str, default=None,
              help="Comma-separated variant counts, e.g. 2,2,1,1,1.")
@click.option("--replicates", type=int, default=1)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(file_okay=False), required=True)
def cmd_simulate(mechanism, n, d, k, doc_total, lambda_gamma, lambda_beta,
                 alpha, lambda_nu, subset_size, lambda_subset,
                 replicates_per_topic, replicates, seed, out):
    """Write one corpus CSV (and truth JSON) per replicate."""
    if alpha is not None and not 0.0 <= alpha <= 1.0:
        raise click.BadParameter(f"alpha must be in [0, 1], got {alpha}")
    if replicates < 1:
        raise click.BadParameter("replicates must be >= 1")
    rep_counts = _parse_rep_list(replicates_per_topic)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for rep in range(replicates):
        rng = SeededRng(seed).substream(_STREAM_CELL, rep)
        counts, truth, _ = _simulate_one(mechanism, rng, n, d, k, doc_total,
                                         lambda_gamma, lambda_beta, alpha, lambda_nu,
                                         subset_size, lambda_subset, rep_counts)
        save_counts(counts, out_dir / f"corpus_rep{rep:03d}.csv")
        if truth is not None:
            _dump_json([truth], out_dir / f"truth_rep{rep:03d}.json")
    click.echo(f"wrote {replicates} corpus file(s) to {out_dir}")


@cli.command("fit")
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--k-min", type=int, default=2)
@click.option("--k-max", type=int, default=10)
@click.option("--lambda-gamma", type=float, default=0.5)
@click.option("--lambda-beta", type=float, default=0.1)
@click.option("--burn-in", type=int, default=500)
@click.option("--samples", type=int, default=100)
@click.option("--thin", type=int, default=2)
@click.option("--seed", type=int, default=0)
@click.option("--threads", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def cmd_fit(corpus, k_min, k_max, lambda_gamma, lambda_beta, burn_in, samples,
            thin, seed, threads, out):
    """Fit one model per K in [k-min, k-max] and write the ensemble JSON."""
    if k_min < 1 or k_max < k_min:
        raise click.BadParameter(f"need 1 <= k-min <= k-max, got {k_min}..{k_max}")
    counts = load_counts(corpus)
    cfg = GibbsConfig(burn_in=burn_in, samples=samples, thin=thin,
                      rng=SeededRng(seed).substream(_STREAM_GIBBS))
    ensemble = fit_ensemble(counts, range(k_min, k_max + 1),
                            lambda_gamma, lambda_beta, cfg, threads=threads)
    save_ensemble(ensemble, out)
    click.echo(f"fitted K={k_min}..{k_max} and wrote {out}")


@cli.command("align")
@click.option("--ensemble", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--method", type=click.Choice(("product", "transport")), default="product")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def cmd_align(ensemble, method, out):
    """Align an ensemble and write the full alignment JSON."""
    ens = load_ensemble(ensemble)
    align = TopicAlignment(method=method).fit(ens)
    payload = alignment_to_json(align, hypers=[m.hyper for m in ens])
    _dump_json(payload, out)
    click.echo(f"aligned {len(ens)} models ({method}) into {out}")


@cli.command("diagnose")
@click.option("--alignment", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--scores-csv", type=click.Path(dir_okay=False), required=True)
@click.option("--summary-json", type=click.Path(dir_okay=False), required=True)
def cmd_diagnose(alignment, scores_csv, summary_json):
    """Write the per-topic scores CSV and the per-K summary JSON."""
    graph, path_of, _, nodes = _read_alignment(alignment)
    rows = sorted(nodes, key=lambda nd: (nd["model"], nd["index"]))
    with open(scores_csv, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["model_k", "topic_index", "path_id", "mass",
                         "coherence", "refinement"])
        for node in rows:
            refinement = node.get("refinement")
            writer.writerow([
                graph.ks[node["model"]], node["index"], node["path"],
                repr(float(node["mass"])), repr(float(node["coherence"])),
                "" if refinement is None else repr(float(refinement)),
            ])

    n_paths_by_k = {}
    for m, k in enumerate(graph.ks):
        n_paths_by_k[str(k)] = len({path_of[(m, j)] for j in range(k)})
    try:
        plateau = detect_plateau([n_paths_by_k[str(k)] for k in graph.ks])
        plateau_info = {"value": plateau.value, "start_k": graph.ks[plateau.start_index],
                        "length": plateau.length, "found": plateau.found}
    except TooFewModels:
        plateau_info = None

    def envelope(values):
        values = [v for v in values if v is not None]
        if not values:
            return None
        return {"min": min(values), "median": statistics.median(values),
                "max": max(values)}

    summary = {
        "n_paths": n_paths_by_k,
        "plateau": plateau_info,
        "coherence": {str(graph.ks[m]): envelope([nd["coherence"] for nd in nodes
                                                  if nd["model"] == m])
                      for m in range(graph.n_models)},
        "refinement": {str(graph.ks[m]): envelope([nd.get("refinement") for nd in nodes
                                                   if nd["model"] == m])
                       for m in range(graph.n_models)},
    }
    _dump_json(summary, summary_json)
    click.echo(f"wrote {scores_csv} and {summary_json}")


@cli.command("export-flow")
@click.option("--alignment", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--width", type=float, default=1000.0)
@click.option("--height", type=float, default=600.0)
def cmd_export_flow(alignment, out, width, height):
    """Render the alignment as a static SVG flow diagram."""
    graph, path_of, perms, _ = _read_alignment(alignment)
    write_flow_svg(graph, path_of, out, permutations=perms, width=width, height=height)
    click.echo(f"wrote {out}")


# ---------------------------------------------------------------------------
# Experiment runner
# ---------------------------------------------------------------------------

def _cell_tag(mechanism: str, param_value, rep: int) -> str:
    if param_value is None:
        return f"{mechanism}_rep{rep:03d}"
    return f"{mechanism}_{param_value:g}_rep{rep:03d}"


def _run_cell(mechanism: str, grid_index: int, param_name: str | None, param_value,
              rep: int, seed: int, sim_kwargs: dict, k_range, method: str,
              gibbs: dict, specificity_k: int) -> dict:
    rng = SeededRng(seed).substream(_STREAM_CELL, grid_index, rep)
    counts, _, sample = _simulate_one(
        mechanism, rng,
        n=sim_kwargs["n"], d=sim_kwargs["d"], k=sim_kwargs["k"],
        doc_total=sim_kwargs["doc_total"],
        lambda_gamma=sim_kwargs["lambda_gamma"], lambda_beta=sim_kwargs["lambda_beta"],
        alpha=param_value if param_name == "alpha" else None,
        lambda_nu=sim_kwargs["lambda_nu"],
        subset_size=int(param_value) if param_name == "subset_size" else None,
        lambda_subset=sim_kwargs["lambda_subset"],
        replicates_per_topic=sim_kwargs["replicates_per_topic"])
    cfg = GibbsConfig(burn_in=gibbs["burn_in"], samples=gibbs["samples"],
                      thin=gibbs["thin"], rng=rng.substream(_STREAM_GIBBS))
    ensemble = fit_ensemble(counts, k_range, sim_kwargs["lambda_gamma"],
                            sim_kwargs["lambda_beta"], cfg, threads=1)
    align = TopicAlignment(method=method).fit(ensemble)
    graph = align.graph_

    n_paths_by_k = {str(graph.ks[m]): align.n_paths_[m] for m in range(graph.n_models)}
    try:
        plateau = detect_plateau([align.n_paths_[m] for m in range(graph.n_models)])
        plateau_info = {"value": plateau.value, "start_k": graph.ks[plateau.start_index],
                        "length": plateau.length, "found": plateau.found}
    except TooFewModels:
        plateau_info = None

    coherence_by_k = {str(graph.ks[m]): [align.coherence_[(m, j)]
                                         for j in range(graph.ks[m])]
                      for m in range(graph.n_models)}
    refinement_by_k = {str(graph.ks[m]): [align.refinement_[(m, j)]
                                          for j in range(graph.ks[m])]
                       for m in range(graph.n_models - 1)}

    cell = {
        "mechanism": mechanism,
        "param_name": param_name,
        "param_value": param_value,
        "replicate": rep,
        "n_paths": n_paths_by_k,
        "plateau": plateau_info,
        "coherence_by_k": coherence_by_k,
        "refinement_by_k": refinement_by_k,
    }
    if mechanism == "strain" and sample is not None:
        pairs = sample.perturbed_pairs()
        spec_by_k = {str(model.hyper.k): estimation_specificity(pairs, model)
                     for model in ensemble}
        cell["specificity_by_k"] = spec_by_k
        cell["specificity"] = spec_by_k.get(str(specificity_k))
    return cell


@cli.command("experiment")
@click.option("--mechanism", type=click.Choice(MECHANISMS), default="lda")
@click.option("--n", type=int, default=150)
@click.option("--d", type=int, default=200)
@click.option("--k", type=int, default=5)
@click.option("--doc-total", type=int, default=1000)
@click.option("--lambda-gamma", type=float, default=0.5)
@click.option("--lambda-beta", type=float, default=0.1)
@click.option("--alpha", "alphas", type=float, multiple=True,
              help="Background grid; repeat the flag for several values.")
@click.option("--lambda-nu", type=float, default=1.0)
@click.option("--subset-size", "subset_sizes", type=int, multiple=True,
              help="Strain grid; repeat the flag for several values.")
@click.option("--lambda-subset", type=float, default=0.1)
@click.option("--replicates-per-topic", type=str, default=None)
@click.option("--k-min", type=int, default=2)
@click.option("--k-max", type=int, default=8)
@click.option("--method", type=click.Choice(("product", "transport")), default="product")
@click.option("--replicates", type=int, default=5)
@click.option("--seed", type=int, default=0)
@click.option("--burn-in", type=int, default=150)
@click.option("--samples", type=int, default=25)
@click.option("--thin", type=int, default=2)
@click.option("--specificity-k", type=int, default=7)
@click.option("--threads", type=int, default=None)
@click.option("--out", type=click.Path(file_okay=False), required=True)
def cmd_experiment(mechanism, n, d, k, doc_total, lambda_gamma, lambda_beta,
                   alphas, lambda_nu, subset_sizes, lambda_subset,
                   replicates_per_topic, k_min, k_max, method, replicates, seed,
                   burn_in, samples, thin, specificity_k, threads, out):
    """Run a replicate x parameter grid and aggregate the diagnostics.

    Completed cells are stored under OUT/cells and skipped on rerun, so an
    interrupted sweep resumes where it stopped.
    """
    if any(not 0.0 <= a <= 1.0 for a in alphas):
        raise click.BadParameter("alpha values must be in [0, 1]")
    if replicates < 1:
        raise click.BadParameter("replicates must be >= 1")
    if k_min < 1 or k_max < k_min:
        raise click.BadParameter(f"need 1 <= k-min <= k-max, got {k_min}..{k_max}")

    if mechanism == "background":
        grid = [("alpha", a) for a in (alphas or (0.0, 0.5, 1.0))]
    elif mechanism == "strain":
        grid = [("subset_size", s) for s in (subset_sizes or (230,))]
    else:
        grid = [(None, None)]

    sim_kwargs = {
        "n": n, "d": d, "k": k, "doc_total": doc_total,
        "lambda_gamma": lambda_gamma, "lambda_beta": lambda_beta,
        "lambda_nu": lambda_nu, "lambda_subset": lambda_subset,
        "replicates_per_topic": _parse_rep_list(replicates_per_topic),
    }
    gibbs = {"burn_in": burn_in, "samples": samples, "thin": thin}
    out_dir = Path(out)
    cells_dir = out_dir / "cells"
    cells_dir.mkdir(parents=True, exist_ok=True)

    tasks = []
    for grid_index, (param_name, param_value) in enumerate(grid):
        for rep in range(replicates):
            cell_path = cells_dir / (_cell_tag(mechanism, param_value, rep) + ".json")
            if cell_path.exists():
                continue
            tasks.append((grid_index, param_name, param_value, rep, cell_path))

    def run(task):
        grid_index, param_name, param_value, rep, cell_path = task
        cell = _run_cell(mechanism, grid_index, param_name, param_value, rep, seed,
                         sim_kwargs, range(k_min, k_max + 1), method, gibbs,
                         specificity_k)
        _dump_json(cell, cell_path)

    n_workers = resolve_threads(len(tasks) or 1, threads)
    if tasks:
        if n_workers == 1:
            for task in tasks:
                run(task)
        else:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                list(pool.map(run, tasks))

    # Aggregate in grid order from the per-cell files.
    cells = []
    for param_name, param_value in grid:
        for rep in range(replicates):
            cell_path = cells_dir / (_cell_tag(mechanism, param_value, rep) + ".json")
            cells.append(json.loads(cell_path.read_text(encoding="utf-8")))

    csv_path = out_dir / "report.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["mechanism", "param_name", "param_value", "replicate",
                         "plateau_value", "plateau_found", "plateau_start_k",
                         "min_coherence", "median_coherence",
                         "min_refinement", "median_refinement", "specificity"])
        for cell in cells:
            coh = [v for scores in cell["coherence_by_k"].values() for v in scores]
            ref = [v for scores in cell["refinement_by_k"].values() for v in scores]
            plateau = cell["plateau"]
            writer.writerow([
                cell["mechanism"], cell["param_name"] or "",
                "" if cell["param_value"] is None else cell["param_value"],
                cell["replicate"],
                "" if plateau is None else plateau["value"],
                "" if plateau is None else plateau["found"],
                "" if plateau is None else plateau["start_k"],
                repr(min(coh)) if coh else "",
                repr(statistics.median(coh)) if coh else "",
                repr(min(ref)) if ref else "",
                repr(statistics.median(ref)) if ref else "",
                "" if cell.get("specificity") is None else repr(cell["specificity"]),
            ])

    aggregates = {}
    for param_name, param_value in grid:
        key = "all" if param_value is None else f"{param_value:g}"
        group = [c for c in cells if c["param_value"] == param_value]
        ks_seen = sorted({int(k_) for c in group for k_ in c["n_paths"]})
        agg = {
            "param_name": param_name,
            "param_value": param_value,
            "replicates": len(group),
            "plateau_values": [None if c["plateau"] is None else c["plateau"]["value"]
                               for c in group],
            "plateau_found": [False if c["plateau"] is None else c["plateau"]["found"]
                              for c in group],
            "n_paths_by_k": {str(k_): [c["n_paths"][str(k_)] for c in group]
                             for k_ in ks_seen},
            "coherence_envelope": {},
            "refinement_envelope": {},
        }
        for k_ in ks_seen:
            coh = [v for c in group for v in c["coherence_by_k"].get(str(k_), [])]
            ref = [v for c in group for v in c["refinement_by_k"].get(str(k_), [])]
            if coh:
                agg["coherence_envelope"][str(k_)] = {
                    "min": min(coh), "median": statistics.median(coh), "max": max(coh)}
            if ref:
                agg["refinement_envelope"][str(k_)] = {
                    "min": min(ref), "median": statistics.median(ref), "max": max(ref)}
        specs = [c.get("specificity") for c in group if c.get("specificity") is not None]
        if specs:
            agg["mean_specificity"] = sum(specs) / len(specs)
        aggregates[key] = agg

    report = {
        "mechanism": mechanism,
        "method": method,
        "k_range": [k_min, k_max],
        "replicates": replicates,
        "seed": seed,
        "cells": cells,
        "aggregates": aggregates,
    }
    _dump_json(report, out_dir / "report.json")
    click.echo(f"wrote {csv_path} and {out_dir / 'report.json'} ({len(cells)} cells)")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return 2
    except click.exceptions.Abort:
        return 130
    except TopicAlignError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except Exception as exc:  # pragma: no cover - defensive
        click.echo(f"internal error: {exc!r}", err=True)
        return 4


if __name__ == "__main__":
    sys.exit(main())
