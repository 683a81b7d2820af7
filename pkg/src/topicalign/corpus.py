"""Count matrices, seeded RNG streams, and file I/O for corpora and fitted models.

Counts are stored dense: the scales this package targets (D up to a few
thousand features) fit comfortably in memory.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionTooSmall,
    EmptySample,
    IoFailure,
    MalformedFile,
    SchemaMismatch,
)

__all__ = [
    "SeededRng",
    "CountMatrix",
    "as_count_matrix",
    "load_counts",
    "save_counts",
    "load_ensemble",
    "save_ensemble",
]


# ---------------------------------------------------------------------------
# Deterministic randomness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeededRng:
    """A named stream of a counter-based generator.

    Identical ``(seed, stream)`` pairs reproduce identical draw sequences on
    any platform and under any thread schedule.  Substreams derived through
    :meth:`substream` are statistically independent, so per-document or
    per-replicate draws do not depend on the order in which they happen.
    """

    seed: int
    stream: tuple[int, ...] = ()

    def substream(self, *ids: int) -> "SeededRng":
        """Derive an independent child stream identified by ``ids``."""
        return SeededRng(self.seed, self.stream + tuple(int(i) for i in ids))

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.Philox(seq))


# ---------------------------------------------------------------------------
# Count matrix
# ---------------------------------------------------------------------------

def _validate_counts(counts: np.ndarray) -> np.ndarray:
    if counts.ndim != 2:
        raise MalformedFile(f"count matrix must be 2-dimensional, got shape {counts.shape}")
    if counts.shape[1] < 2:
        raise DimensionTooSmall(f"need at least 2 features, got {counts.shape[1]}")
    if counts.shape[0] < 1:
        raise MalformedFile("count matrix has no samples")
    if not np.issubdtype(counts.dtype, np.integer):
        if not np.all(np.equal(np.mod(counts, 1), 0)):
            raise MalformedFile("counts must be integers")
        counts = counts.astype(np.int64)
    if np.any(counts < 0):
        raise MalformedFile("counts must be nonnegative")
    totals = counts.sum(axis=1)
    if np.any(totals == 0):
        bad = int(np.argmax(totals == 0))
        raise EmptySample(f"sample {bad} has zero total count")
    return counts.astype(np.int64, copy=False)


@dataclass(frozen=True)
class CountMatrix:
    """An N x D table of nonnegative integer counts with row/column labels."""

    counts: np.ndarray
    sample_ids: tuple[str, ...]
    feature_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        counts = _validate_counts(np.asarray(self.counts))
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "sample_ids", tuple(str(s) for s in self.sample_ids))
        object.__setattr__(self, "feature_ids", tuple(str(f) for f in self.feature_ids))
        if len(self.sample_ids) != counts.shape[0]:
            raise MalformedFile(
                f"{len(self.sample_ids)} sample ids for {counts.shape[0]} rows")
        if len(self.feature_ids) != counts.shape[1]:
            raise MalformedFile(
                f"{len(self.feature_ids)} feature ids for {counts.shape[1]} columns")

    @property
    def n_samples(self) -> int:
        return self.counts.shape[0]

    @property
    def n_features(self) -> int:
        return self.counts.shape[1]

    @property
    def totals(self) -> np.ndarray:
        """Per-sample total counts (n_i)."""
        return self.counts.sum(axis=1)

    @classmethod
    def from_array(cls, counts, sample_ids=None, feature_ids=None) -> "CountMatrix":
        counts = np.asarray(counts)
        if sample_ids is None:
            sample_ids = [f"s{i}" for i in range(counts.shape[0])]
        if feature_ids is None:
            feature_ids = [f"f{d}" for d in range(counts.shape[1])]
        return cls(counts, tuple(sample_ids), tuple(feature_ids))

    def fingerprint(self) -> str:
        """SHA-256 of shape, labels, and raw count bytes."""
        h = hashlib.sha256()
        h.update(np.asarray(self.counts.shape, dtype=np.int64).tobytes())
        h.update("\x1f".join(self.sample_ids).encode())
        h.update("\x1f".join(self.feature_ids).encode())
        h.update(np.ascontiguousarray(self.counts).tobytes())
        return h.hexdigest()


def as_count_matrix(x) -> CountMatrix:
    """Coerce an array-like or CountMatrix into a validated CountMatrix."""
    if isinstance(x, CountMatrix):
        return x
    return CountMatrix.from_array(np.asarray(x))


# ---------------------------------------------------------------------------
# Corpus files
# ---------------------------------------------------------------------------

def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt is not None:
        if fmt not in ("csv", "json"):
            raise MalformedFile(f"unknown corpus format {fmt!r}")
        return fmt
    suffix = path.suffix.lower().lstrip(".")
    return suffix if suffix in ("csv", "json") else "csv"


def _parse_count(cell: str, where: str) -> int:
    try:
        value = int(cell)
    except ValueError as exc:
        raise MalformedFile(f"non-integer count {cell!r} at {where}") from exc
    if value < 0:
        raise MalformedFile(f"negative count {cell!r} at {where}")
    return value


def load_counts(path, fmt: str | None = None) -> CountMatrix:
    """Read a corpus from CSV (header of feature ids, leading sample-id column) or JSON."""
    path = Path(path)
    fmt = _infer_format(path, fmt)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if fmt == "json":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedFile(f"invalid JSON in {path}: {exc}") from exc
        for key in ("sample_ids", "feature_ids", "counts"):
            if key not in payload:
                raise MalformedFile(f"corpus JSON missing {key!r}")
        rows = payload["counts"]
        if any(len(r) != len(payload["feature_ids"]) for r in rows):
            raise MalformedFile("ragged count rows in corpus JSON")
        counts = [[_parse_count(str(c), f"row {i}") for c in row] for i, row in enumerate(rows)]
        return CountMatrix(np.array(counts, dtype=np.int64),
                           tuple(payload["sample_ids"]), tuple(payload["feature_ids"]))

    reader = csv.reader(text.splitlines())
    rows = [row for row in reader if row]
    if len(rows) < 2:
        raise MalformedFile(f"{path} has no data rows")
    header = rows[0]
    if len(header) < 3:
        raise DimensionTooSmall(f"need at least 2 feature columns, got {len(header) - 1}")
    feature_ids = tuple(header[1:])
    sample_ids = []
    counts = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise MalformedFile(f"row {r} has {len(row)} cells, expected {len(header)}")
        sample_ids.append(row[0])
        counts.append([_parse_count(cell, f"row {r}, column {header[c + 1]!r}")
                       for c, cell in enumerate(row[1:])])
    return CountMatrix(np.array(counts, dtype=np.int64), tuple(sample_ids), feature_ids)


def save_counts(matrix: CountMatrix, path, fmt: str | None = None) -> None:
    """Write a corpus; the round trip with :func:`load_counts` is the identity."""
    path = Path(path)
    fmt = _infer_format(path, fmt)
    try:
        if fmt == "json":
            payload = {
                "sample_ids": list(matrix.sample_ids),
                "feature_ids": list(matrix.feature_ids),
                "counts": matrix.counts.tolist(),
            }
            path.write_text(json.dumps(payload), encoding="utf-8")
        else:
            lines = ["sample_id," + ",".join(matrix.feature_ids)]
            for sid, row in zip(matrix.sample_ids, matrix.counts):
                lines.append(sid + "," + ",".join(str(int(c)) for c in row))
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Ensemble files
#
# Schema: a top-level list with one entry per model,
#   {"k": int, "lambda_gamma": float, "lambda_beta": float,
#    "beta": K lists of D floats (topic columns), "gamma": N lists of K floats,
#    "log_likelihood": [...], "corpus_fingerprint": str | absent}
# Floats round-trip bit-exactly (shortest-repr decimal serialization).
# ---------------------------------------------------------------------------

def save_ensemble(ensemble, path) -> None:
    path = Path(path)
    payload = []
    for model in ensemble.models:
        entry = {
            "k": model.hyper.k,
            "lambda_gamma": model.hyper.lambda_gamma,
            "lambda_beta": model.hyper.lambda_beta,
            "beta": model.beta.T.tolist(),
            "gamma": model.gamma.tolist(),
            "log_likelihood": np.asarray(model.log_likelihood_trace).tolist(),
        }
        if ensemble.corpus_fingerprint is not None:
            entry["corpus_fingerprint"] = ensemble.corpus_fingerprint
        payload.append(entry)
    try:
        path.write_text(json.dumps(payload), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_ensemble(path):
    from .lda import LdaHyperparams, ModelEnsemble, TopicModel

    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(payload, list) or not payload:
        raise SchemaMismatch(f"{path} is not a nonempty list of models")

    models = []
    fingerprint = None
    for idx, entry in enumerate(payload):
        for key in ("k", "lambda_gamma", "lambda_beta", "beta", "gamma"):
            if key not in entry:
                raise SchemaMismatch(f"model {idx} missing {key!r} block")
        beta = np.array(entry["beta"], dtype=np.float64).T
        gamma = np.array(entry["gamma"], dtype=np.float64)
        trace = np.array(entry.get("log_likelihood", []), dtype=np.float64)
        hyper = LdaHyperparams(int(entry["k"]),
                               float(entry["lambda_gamma"]), float(entry["lambda_beta"]))
        if beta.ndim != 2 or beta.shape[1] != hyper.k:
            raise SchemaMismatch(f"model {idx}: beta block has wrong shape")
        if gamma.ndim != 2 or gamma.shape[1] != hyper.k:
            raise SchemaMismatch(f"model {idx}: gamma block has wrong shape")
        models.append(TopicModel(hyper, beta, gamma, trace))
        fingerprint = entry.get("corpus_fingerprint", fingerprint)
    return ModelEnsemble(tuple(models), corpus_fingerprint=fingerprint)
