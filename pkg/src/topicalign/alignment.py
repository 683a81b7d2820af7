"""Alignment graphs over an ensemble of topic models.

Topics are nodes, identified by ``(model_index, topic_index)``.  For every
ordered model pair (m, m') with m < m' a weight matrix is computed either as

* product weights:   W = Gamma_m^T Gamma_m'   (co-membership mass), or
* transport weights: the optimal-transport plan between the topic masses of
  the two models under pairwise Jensen-Shannon costs of their topics.

Each pair block also stores the row-normalized (w_out) and column-normalized
(w_in) versions.  All-zero rows or columns stay all-zero: a topic with no
outgoing (incoming) weight simply has no flow to distribute.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .errors import InvalidConfig, SampleCountMismatch
from .measures import jsd
from .transport import TransportProblem, solve_exact

__all__ = [
    "AlignmentGraph",
    "ReorderResult",
    "TopicAlignment",
    "product_weights",
    "transport_weights",
    "normalize",
    "align_ensemble",
    "reorder_topics",
    "crossing_objective",
]

METHODS = ("product", "transport")


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------

def product_weights(gamma_m: np.ndarray, gamma_m2: np.ndarray) -> np.ndarray:
    """Inner-product weights between two membership matrices over the same samples."""
    gamma_m = np.asarray(gamma_m, dtype=np.float64)
    gamma_m2 = np.asarray(gamma_m2, dtype=np.float64)
    if gamma_m.shape[0] != gamma_m2.shape[0]:
        raise SampleCountMismatch(
            f"membership matrices have {gamma_m.shape[0]} and {gamma_m2.shape[0]} samples")
    return gamma_m.T @ gamma_m2


def transport_weights(model_m, model_m2) -> np.ndarray:
    """Optimal-transport weights between the topics of two models.

    Supply and demand are the topic masses (column sums of each Gamma); the
    cost of moving mass between two topics is the JSD between their
    compositions.
    """
    supply = model_m.topic_masses
    demand = model_m2.topic_masses
    cost = np.empty((supply.size, demand.size))
    for a in range(supply.size):
        for b in range(demand.size):
            cost[a, b] = jsd(model_m.beta[:, a], model_m2.beta[:, b])
    plan = solve_exact(TransportProblem(supply, demand, cost))
    return plan.plan


def normalize(weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalized (w_out) and column-normalized (w_in) copies of ``weights``."""
    weights = np.asarray(weights, dtype=np.float64)
    row_sums = weights.sum(axis=1, keepdims=True)
    col_sums = weights.sum(axis=0, keepdims=True)
    w_out = np.divide(weights, row_sums, out=np.zeros_like(weights), where=row_sums > 0)
    w_in = np.divide(weights, col_sums, out=np.zeros_like(weights), where=col_sums > 0)
    return w_out, w_in


# ---------------------------------------------------------------------------
# Graph
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AlignmentGraph:
    """Weights over all ordered model pairs, plus per-topic masses."""

    ks: tuple[int, ...]
    masses: tuple[np.ndarray, ...]
    weights: dict
    w_out: dict
    w_in: dict
    method: str

    @property
    def n_models(self) -> int:
        return len(self.ks)

    def nodes(self) -> list[tuple[int, int]]:
        return [(m, k) for m in range(self.n_models) for k in range(self.ks[m])]

    def pairs(self) -> list[tuple[int, int]]:
        return sorted(self.weights.keys())

    def mass(self, node: tuple[int, int]) -> float:
        return float(self.masses[node[0]][node[1]])

    def block(self, m: int, m2: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(w, w_out, w_in) for the ordered pair (m, m2); all pairs must exist."""
        if (m, m2) not in self.weights:
            raise InvalidConfig(f"graph has no weight block for model pair ({m}, {m2})")
        return self.weights[(m, m2)], self.w_out[(m, m2)], self.w_in[(m, m2)]

    @classmethod
    def from_weights(cls, weights: dict, masses=None, method: str = "custom") -> "AlignmentGraph":
        """Build a graph from raw pair-weight matrices (used for constructed graphs).

        ``weights`` maps ordered pairs (m, m') with m < m' to K_m x K_m'
        matrices; consecutive pairs must be present.
        """
        if not weights:
            raise InvalidConfig("no weight matrices given")
        n_models = max(m2 for _, m2 in weights) + 1
        ks: list[int] = [0] * n_models
        for (m, m2), w in weights.items():
            w = np.asarray(w, dtype=np.float64)
            if np.any(w < 0):
                raise InvalidConfig(f"negative weight in pair ({m}, {m2})")
            for level, size in ((m, w.shape[0]), (m2, w.shape[1])):
                if ks[level] and ks[level] != size:
                    raise InvalidConfig(f"inconsistent topic count at level {level}")
                ks[level] = size
        if any(k == 0 for k in ks):
            raise InvalidConfig("some levels have no weight matrices")
        clean = {pair: np.asarray(w, dtype=np.float64) for pair, w in weights.items()}
        w_out = {}
        w_in = {}
        for pair, w in clean.items():
            w_out[pair], w_in[pair] = normalize(w)
        if masses is None:
            masses = tuple(np.ones(k) for k in ks)
        else:
            masses = tuple(np.asarray(m, dtype=np.float64) for m in masses)
        return cls(tuple(ks), masses, clean, w_out, w_in, method)


def align_ensemble(ensemble, method: str = "product") -> AlignmentGraph:
    """Compute weights for every ordered model pair of the ensemble."""
    if method not in METHODS:
        raise InvalidConfig(f"method must be one of {METHODS}, got {method!r}")
    models = list(ensemble)
    if not models:
        raise InvalidConfig("ensemble is empty")
    weights = {}
    for m in range(len(models)):
        for m2 in range(m + 1, len(models)):
            if method == "product":
                weights[(m, m2)] = product_weights(models[m].gamma, models[m2].gamma)
            else:
                weights[(m, m2)] = transport_weights(models[m], models[m2])
    masses = tuple(model.topic_masses for model in models)
    ks = tuple(model.hyper.k for model in models)
    if not weights:  # single-model ensemble: nodes, no edges
        return AlignmentGraph(ks, masses, {}, {}, {}, method)
    w_out = {}
    w_in = {}
    for pair, w in weights.items():
        w_out[pair], w_in[pair] = normalize(w)
    return AlignmentGraph(ks, masses, weights, w_out, w_in, method)


# ---------------------------------------------------------------------------
# Topic reordering (display order only)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReorderResult:
    """Per-model display permutations; permutations[m][k] is the display row of topic k."""

    permutations: tuple[np.ndarray, ...]
    objective_before: float
    objective_after: float


def crossing_objective(graph: AlignmentGraph, permutations) -> float:
    """Weighted display-index disagreement over consecutive model pairs."""
    total = 0.0
    for m in range(graph.n_models - 1):
        if (m, m + 1) not in graph.weights:
            continue
        w = graph.weights[(m, m + 1)]
        gap = np.abs(np.asarray(permutations[m], dtype=np.float64)[:, None]
                     - np.asarray(permutations[m + 1], dtype=np.float64)[None, :])
        total += float(np.sum(gap * w))
    return total


def _ranks(centers: np.ndarray) -> np.ndarray:
    order = np.argsort(centers, kind="stable")  # ties keep original topic order
    ranks = np.empty_like(order)
    ranks[order] = np.arange(order.size)
    return ranks


def reorder_topics(graph: AlignmentGraph) -> ReorderResult:
    """One forward and one backward ranking pass over consecutive pairs.

    Each pass re-ranks topics by the weighted center of the display indices
    they connect to (incoming weights on the way up, outgoing on the way
    down).  The passes are a heuristic and can land on an arrangement worse
    than the input order; in that case the input order is kept.  Only display
    order changes; weights and diagnostics are untouched.
    """
    identity = [np.arange(k) for k in graph.ks]
    before = crossing_objective(graph, identity)
    perms = [p.copy() for p in identity]
    for m in range(1, graph.n_models):
        if (m - 1, m) not in graph.w_in:
            continue
        centers = (perms[m - 1] + 1.0) @ graph.w_in[(m - 1, m)]
        perms[m] = _ranks(centers)
    for m in range(graph.n_models - 1, 0, -1):
        if (m - 1, m) not in graph.w_out:
            continue
        centers = graph.w_out[(m - 1, m)] @ (perms[m] + 1.0)
        perms[m - 1] = _ranks(centers)
    after = crossing_objective(graph, perms)
    if after > before:
        perms, after = identity, before
    return ReorderResult(tuple(perms), before, after)


# ---------------------------------------------------------------------------
# Estimator facade
# ---------------------------------------------------------------------------

class TopicAlignment(BaseEstimator):
    """Fit an alignment over a model ensemble and attach paths and scores.

    After ``fit``, exposes ``graph_``, ``paths_``, ``coherence_``,
    ``refinement_``, ``n_paths_``, and display permutations ``reorder_``.
    """

    def __init__(self, method: str = "product", reorder: bool = True):
        self.method = method
        self.reorder = reorder

    def fit(self, ensemble, y=None) -> "TopicAlignment":
        from . import diagnostics as diag

        self.graph_ = align_ensemble(ensemble, self.method)
        self.paths_ = diag.assign_paths(self.graph_)
        self.coherence_ = diag.coherence_scores(self.graph_, self.paths_)
        self.refinement_ = diag.refinement_scores(self.graph_)
        self.n_paths_ = {m: diag.n_paths(self.paths_, m)
                         for m in range(self.graph_.n_models)}
        if self.reorder:
            self.reorder_ = reorder_topics(self.graph_)
        else:
            perms = tuple(np.arange(k) for k in self.graph_.ks)
            self.reorder_ = ReorderResult(perms, crossing_objective(self.graph_, perms),
                                          crossing_objective(self.graph_, perms))
        return self

    def topic_table(self) -> list[dict]:
        """One row per topic: identity, mass, path, scores, display index."""
        if not hasattr(self, "graph_"):
            raise InvalidConfig("alignment is not fitted; call fit() first")
        rows = []
        for node in self.graph_.nodes():
            m, k = node
            rows.append({
                "model": m,
                "model_k": self.graph_.ks[m],
                "topic_index": k,
                "display_index": int(self.reorder_.permutations[m][k]),
                "mass": self.graph_.mass(node),
                "path_id": self.paths_.path_of[node],
                "coherence": self.coherence_[node],
                "refinement": self.refinement_.get(node),
            })
        return rows
