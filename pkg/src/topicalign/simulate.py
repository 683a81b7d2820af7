"""Generators for the four count-data mechanisms used in the experiments.

* ``sim_lda`` — counts from a true LDA model.
* ``sim_null`` — independent multinomials with Dir(1) means, no topic structure.
* ``sim_background`` — LDA blended with sample-specific noise:
  the mean of sample i is alpha * B gamma_i + (1 - alpha) * nu_i.
* ``sim_strain_switching`` — near-identical topic variants that differ only on
  a sampled subset of coordinates; each sample uses one variant per topic.

Every draw comes from a role- and sample-keyed substream, so the noise
vector nu_i is consumed from its own stream even when alpha = 1: alpha only
reweights the mean and never reorders the randomness.  This makes
``sim_background(alpha=1)`` produce bit-identical corpora to ``sim_lda``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import CountMatrix, SeededRng
from .errors import InvalidConfig

__all__ = [
    "LdaSimSpec",
    "BackgroundSimSpec",
    "StrainSwitchSpec",
    "LdaSample",
    "BackgroundSample",
    "StrainSwitchSample",
    "sim_lda",
    "sim_null",
    "sim_background",
    "sim_strain_switching",
]

# Substream tags (distinct from the lda module's tags 7-8).
_STREAM_TOPICS = 1
_STREAM_GAMMA = 2
_STREAM_NOISE = 3
_STREAM_COUNTS = 4
_STREAM_PERTURB = 5
_STREAM_VARIANT = 6


@dataclass(frozen=True)
class LdaSimSpec:
    """True-LDA generator parameters; defaults match the full-scale setup."""

    n_samples: int = 250
    n_features: int = 1000
    n_topics: int = 5
    lambda_gamma: float = 0.5
    lambda_beta: float = 0.1
    doc_total: int = 10_000
    rng: SeededRng = SeededRng(0)

    def __post_init__(self) -> None:
        if self.n_samples < 1 or self.n_features < 2 or self.n_topics < 1:
            raise InvalidConfig("n_samples >= 1, n_features >= 2, n_topics >= 1 required")
        if self.doc_total < 1:
            raise InvalidConfig("doc_total must be >= 1")
        if not (self.lambda_gamma > 0 and self.lambda_beta > 0):
            raise InvalidConfig("Dirichlet concentrations must be > 0")


@dataclass(frozen=True)
class BackgroundSimSpec:
    base: LdaSimSpec
    alpha: float = 1.0
    lambda_nu: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidConfig(f"alpha must be in [0, 1], got {self.alpha}")
        if not self.lambda_nu > 0:
            raise InvalidConfig("lambda_nu must be > 0")


@dataclass(frozen=True)
class StrainSwitchSpec:
    base: LdaSimSpec = field(default_factory=lambda: LdaSimSpec())
    replicates_per_topic: tuple[int, ...] = (2, 2, 1, 1, 1)
    subset_size: int = 230
    lambda_subset: float = 0.1

    def __post_init__(self) -> None:
        object.__setattr__(self, "replicates_per_topic",
                           tuple(int(r) for r in self.replicates_per_topic))
        if len(self.replicates_per_topic) != self.base.n_topics:
            raise InvalidConfig("need one replicate count per topic")
        if any(r < 1 for r in self.replicates_per_topic):
            raise InvalidConfig("replicate counts must be >= 1")
        if not 1 <= self.subset_size <= self.base.n_features:
            raise InvalidConfig(
                f"subset_size must be in [1, {self.base.n_features}], got {self.subset_size}")
        if not self.lambda_subset > 0:
            raise InvalidConfig("lambda_subset must be > 0")


@dataclass(frozen=True)
class LdaSample:
    counts: CountMatrix
    beta: np.ndarray      # D x K true topics
    gamma: np.ndarray     # N x K true memberships


@dataclass(frozen=True)
class BackgroundSample:
    counts: CountMatrix
    beta: np.ndarray
    gamma: np.ndarray
    nu: np.ndarray        # N x D sample-specific noise means


@dataclass(frozen=True)
class StrainSwitchSample:
    counts: CountMatrix
    beta: np.ndarray                    # D x K base topics
    variants: tuple[np.ndarray, ...]    # per topic: D x R_k perturbed versions
    gamma: np.ndarray
    subsets: tuple[np.ndarray, ...]     # per topic: perturbed coordinate indices

    def perturbed_pairs(self) -> list[np.ndarray]:
        """The four variant vectors of the first two topics (needs R_1, R_2 >= 2)."""
        if self.variants[0].shape[1] < 2 or self.variants[1].shape[1] < 2:
            raise InvalidConfig("first two topics need at least two variants each")
        return [self.variants[0][:, 0], self.variants[0][:, 1],
                self.variants[1][:, 0], self.variants[1][:, 1]]


# ---------------------------------------------------------------------------
# Draw helpers
# ---------------------------------------------------------------------------

def _draw_topics(spec: LdaSimSpec) -> np.ndarray:
    gen = spec.rng.substream(_STREAM_TOPICS).generator()
    topics = gen.dirichlet(np.full(spec.n_features, spec.lambda_beta),
                           size=spec.n_topics)
    return topics.T  # D x K


def _draw_gamma(spec: LdaSimSpec, i: int) -> np.ndarray:
    gen = spec.rng.substream(_STREAM_GAMMA, i).generator()
    return gen.dirichlet(np.full(spec.n_topics, spec.lambda_gamma))


def _draw_counts(spec: LdaSimSpec, i: int, mean: np.ndarray) -> np.ndarray:
    gen = spec.rng.substream(_STREAM_COUNTS, i).generator()
    return gen.multinomial(spec.doc_total, mean)


def _labels(n: int, d: int):
    return ([f"s{i}" for i in range(n)], [f"f{j}" for j in range(d)])


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def sim_lda(spec: LdaSimSpec) -> LdaSample:
    """Counts from the LDA mechanism, returned together with the truth."""
    beta = _draw_topics(spec)
    gamma = np.empty((spec.n_samples, spec.n_topics))
    counts = np.empty((spec.n_samples, spec.n_features), dtype=np.int64)
    for i in range(spec.n_samples):
        gamma[i] = _draw_gamma(spec, i)
        counts[i] = _draw_counts(spec, i, beta @ gamma[i])
    sample_ids, feature_ids = _labels(spec.n_samples, spec.n_features)
    return LdaSample(CountMatrix(counts, tuple(sample_ids), tuple(feature_ids)),
                     beta, gamma)


def sim_null(n_samples: int, n_features: int, doc_total: int,
             rng: SeededRng) -> CountMatrix:
    """Independent multinomials whose means are i.i.d. Dir(1) draws."""
    spec = LdaSimSpec(n_samples=n_samples, n_features=n_features, n_topics=1,
                      doc_total=doc_total, rng=rng)
    counts = np.empty((n_samples, n_features), dtype=np.int64)
    for i in range(n_samples):
        gen = rng.substream(_STREAM_NOISE, i).generator()
        mean = gen.dirichlet(np.ones(n_features))
        counts[i] = _draw_counts(spec, i, mean)
    sample_ids, feature_ids = _labels(n_samples, n_features)
    return CountMatrix(counts, tuple(sample_ids), tuple(feature_ids))


def sim_background(spec: BackgroundSimSpec) -> BackgroundSample:
    """LDA counts with sample-specific background noise mixed in."""
    base = spec.base
    beta = _draw_topics(base)
    gamma = np.empty((base.n_samples, base.n_topics))
    nu = np.empty((base.n_samples, base.n_features))
    counts = np.empty((base.n_samples, base.n_features), dtype=np.int64)
    for i in range(base.n_samples):
        gamma[i] = _draw_gamma(base, i)
        gen = base.rng.substream(_STREAM_NOISE, i).generator()
        nu[i] = gen.dirichlet(np.full(base.n_features, spec.lambda_nu))
        mean = spec.alpha * (beta @ gamma[i]) + (1.0 - spec.alpha) * nu[i]
        counts[i] = _draw_counts(base, i, mean)
    sample_ids, feature_ids = _labels(base.n_samples, base.n_features)
    return BackgroundSample(CountMatrix(counts, tuple(sample_ids), tuple(feature_ids)),
                            beta, gamma, nu)


def sim_strain_switching(spec: StrainSwitchSpec) -> StrainSwitchSample:
    """Counts where each sample uses one perturbed variant of each topic."""
    base = spec.base
    d, k = base.n_features, base.n_topics
    beta = _draw_topics(base)

    variants: list[np.ndarray] = []
    subsets: list[np.ndarray] = []
    for topic in range(k):
        gen = base.rng.substream(_STREAM_PERTURB, topic).generator()
        subset = np.sort(gen.choice(d, size=spec.subset_size, replace=False))
        subsets.append(subset)
        subset_mass = float(beta[subset, topic].sum())
        cols = np.empty((d, spec.replicates_per_topic[topic]))
        for r in range(spec.replicates_per_topic[topic]):
            noise = gen.dirichlet(np.full(spec.subset_size, spec.lambda_subset))
            col = beta[:, topic].copy()
            col[subset] = noise * (subset_mass / noise.sum())
            cols[:, r] = col
        variants.append(cols)

    gamma = np.empty((base.n_samples, k))
    counts = np.empty((base.n_samples, d), dtype=np.int64)
    for i in range(base.n_samples):
        gamma[i] = _draw_gamma(base, i)
        gen = base.rng.substream(_STREAM_VARIANT, i).generator()
        b_i = np.empty((d, k))
        for topic in range(k):
            r = int(gen.integers(spec.replicates_per_topic[topic]))
            b_i[:, topic] = variants[topic][:, r]
        counts[i] = _draw_counts(base, i, b_i @ gamma[i])

    sample_ids, feature_ids = _labels(base.n_samples, d)
    return StrainSwitchSample(CountMatrix(counts, tuple(sample_ids), tuple(feature_ids)),
                              beta, tuple(variants), gamma, tuple(subsets))
