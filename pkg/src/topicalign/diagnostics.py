"""Path assignment and stability diagnostics on an alignment graph.

Paths chain each topic to its best-matching downstream partner; the number
of distinct paths at a resolution estimates how many genuine topics exist.
Coherence measures how strongly a topic persists along its path; refinement
measures whether a topic's descendants treat it as their sole ancestor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .alignment import AlignmentGraph
from .errors import DimensionMismatch, FinestLevel, InvalidConfig, TooFewModels
from .measures import cosine_similarity

__all__ = [
    "PathAssignment",
    "Plateau",
    "assign_paths",
    "n_paths",
    "coherence",
    "coherence_scores",
    "refinement",
    "refinement_scores",
    "detect_plateau",
    "estimation_specificity",
]

Node = tuple[int, int]


@dataclass(frozen=True)
class PathAssignment:
    """Node -> path ID map plus the members of each path."""

    path_of: dict
    paths: dict

    def members(self, node: Node) -> tuple[Node, ...]:
        return self.paths[self.path_of[node]]


def assign_paths(graph: AlignmentGraph) -> PathAssignment:
    """Seed path IDs at the finest model, then walk coarser levels.

    Each topic joins the path of its best downstream partner, the node
    maximizing w_out + w_in over all finer models.  Ties break toward the
    smallest (model, topic) pair.
    """
    last = graph.n_models - 1
    path_of: dict[Node, int] = {(last, k): k for k in range(graph.ks[last])}
    for m in range(last - 1, -1, -1):
        downstream: list[Node] = [(m2, k2) for m2 in range(m + 1, graph.n_models)
                                  for k2 in range(graph.ks[m2])]
        score_blocks = []
        for m2 in range(m + 1, graph.n_models):
            _, w_out, w_in = graph.block(m, m2)
            score_blocks.append(w_out + w_in)
        scores = np.concatenate(score_blocks, axis=1)
        for k in range(graph.ks[m]):
            best = downstream[int(np.argmax(scores[k]))]  # first max = smallest (m', k')
            path_of[(m, k)] = path_of[best]
    paths: dict[int, list[Node]] = {}
    for node in sorted(path_of):
        paths.setdefault(path_of[node], []).append(node)
    return PathAssignment(path_of, {pid: tuple(nodes) for pid, nodes in paths.items()})


def n_paths(assignment: PathAssignment, model_index: int) -> int:
    """Number of distinct path IDs among the topics of one model."""
    return len({pid for (m, _), pid in assignment.path_of.items() if m == model_index})


def _pair_cell(graph: AlignmentGraph, v: Node, u: Node) -> tuple[float, float]:
    """(w_out, w_in) on the edge between v and u, oriented coarse-to-fine."""
    if v[0] < u[0]:
        (m, m2), row, col = (v[0], u[0]), v[1], u[1]
    else:
        (m, m2), row, col = (u[0], v[0]), u[1], v[1]
    _, w_out, w_in = graph.block(m, m2)
    return float(w_out[row, col]), float(w_in[row, col])


def coherence(graph: AlignmentGraph, assignment: PathAssignment, v: Node) -> float:
    """Mean of min(w_in, w_out) between v and its path partners.

    v itself is excluded from the average; a single-node path scores 0.
    Same-model path partners share no edge and contribute 0.
    """
    partners = [u for u in assignment.members(v) if u != v]
    if not partners:
        return 0.0
    total = 0.0
    for u in partners:
        if u[0] == v[0]:
            continue
        w_out, w_in = _pair_cell(graph, v, u)
        total += min(w_out, w_in)
    return total / len(partners)


def coherence_scores(graph: AlignmentGraph, assignment: PathAssignment) -> dict:
    return {node: coherence(graph, assignment, node) for node in graph.nodes()}


def refinement(graph: AlignmentGraph, v: Node) -> float:
    """Mass-weighted agreement between v and all downstream topics.

    r(v) = |V_m| / (#finer levels) * sum over finer levels m' and topics v'
    of w_out(v, v') * w_in(v, v').  Equals |V_m| when every descendant has v
    as its sole parent, 1 when all weights in the graph are equal, and tends
    to 0 when descendants belong to competitors.
    """
    m, k = v
    last = graph.n_models - 1
    if m >= last:
        raise FinestLevel(f"node {v} is in the finest model")
    total = 0.0
    for m2 in range(m + 1, graph.n_models):
        _, w_out, w_in = graph.block(m, m2)
        total += float(np.sum(w_out[k] * w_in[k]))
    return graph.ks[m] / (last - m) * total


def refinement_scores(graph: AlignmentGraph) -> dict:
    """Refinement for every node below the finest model."""
    return {(m, k): refinement(graph, (m, k))
            for m in range(graph.n_models - 1) for k in range(graph.ks[m])}


# ---------------------------------------------------------------------------
# Plateau detection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Plateau:
    """Longest run of models with a constant path count (earliest on ties)."""

    value: int
    start_index: int
    length: int

    @property
    def found(self) -> bool:
        return self.length >= 2


def detect_plateau(n_paths_by_model) -> Plateau:
    if isinstance(n_paths_by_model, dict):
        counts = [n_paths_by_model[m] for m in sorted(n_paths_by_model)]
    else:
        counts = list(n_paths_by_model)
    if len(counts) < 3:
        raise TooFewModels(f"plateau detection needs >= 3 models, got {len(counts)}")
    best_start, best_len = 0, 1
    start = 0
    for i in range(1, len(counts) + 1):
        if i == len(counts) or counts[i] != counts[start]:
            if i - start > best_len:
                best_start, best_len = start, i - start
            start = i
    return Plateau(value=int(counts[best_start]), start_index=best_start, length=best_len)


# ---------------------------------------------------------------------------
# Strain-switching specificity
# ---------------------------------------------------------------------------

def estimation_specificity(true_betas, fitted) -> float:
    """How well fitted topics distinguish the two perturbed topic pairs.

    ``true_betas`` holds four topic vectors: rows 1-2 and 3-4 are the
    variant pairs.  With xi[j, k] the cosine similarity between true vector j
    and fitted topic k, the score is mean_k |xi_1k - xi_2k| + |xi_3k - xi_4k|.
    """
    betas = np.asarray(true_betas, dtype=np.float64)
    if betas.shape[0] != 4:
        raise InvalidConfig(f"need exactly 4 true topic vectors, got {betas.shape[0]}")
    fitted_beta = fitted.beta if hasattr(fitted, "beta") else np.asarray(fitted, dtype=np.float64)
    if betas.shape[1] != fitted_beta.shape[0]:
        raise DimensionMismatch(
            f"true topics have D={betas.shape[1]}, fitted have D={fitted_beta.shape[0]}")
    n_topics = fitted_beta.shape[1]
    xi = np.array([[cosine_similarity(betas[j], fitted_beta[:, k])
                    for k in range(n_topics)] for j in range(4)])
    return float(np.mean(np.abs(xi[0] - xi[1]) + np.abs(xi[2] - xi[3])))
