"""Latent Dirichlet Allocation fitted by collapsed Gibbs sampling.

The sampler sweeps token-level topic assignments z_t with transition
probability

    p(z_t = k | rest)  ∝  (n_kd + lam_beta) / (n_k + D*lam_beta) * (n_ik + lam_gamma),

where n_kd, n_k, n_ik are bookkeeping counts excluding the current token.
Topic and membership matrices are posterior means of the smoothed counts,
averaged over retained post-burn-in sweeps.  Held-out likelihood uses
fold-in: held-out assignments are Gibbs-sampled with the topic matrix fixed
and the document is scored at its fold-in posterior-mean membership.

Everything is driven by a `SeededRng`; equal seeds give bit-identical fits
regardless of thread count, because each resolution K draws from its own
substream and per-sweep uniforms are generated up front.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from numba import njit
from scipy.special import gammaln
from sklearn.base import BaseEstimator

from .corpus import CountMatrix, SeededRng, as_count_matrix
from .errors import DimensionMismatch, InvalidConfig

__all__ = [
    "LdaHyperparams",
    "GibbsConfig",
    "TopicModel",
    "ModelEnsemble",
    "GibbsLda",
    "fit_lda",
    "fit_ensemble",
    "fold_in",
    "perplexity",
    "resolve_threads",
]

# Substream tags; must not collide with the simulate module's tags.
_STREAM_FIT = 7
_STREAM_FOLDIN = 8

# Fold-in schedule for held-out scoring: B stays fixed, memberships are
# averaged over the sweeps after the local burn-in.
FOLD_IN_SWEEPS = 50
FOLD_IN_BURN = 25

STOCHASTIC_TOL = 1e-9


# ---------------------------------------------------------------------------
# Containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LdaHyperparams:
    """Number of topics and symmetric Dirichlet concentrations."""

    k: int
    lambda_gamma: float
    lambda_beta: float

    def __post_init__(self) -> None:
        if self.k < 1:
            raise InvalidConfig(f"k must be >= 1, got {self.k}")
        if not self.lambda_gamma > 0:
            raise InvalidConfig(f"lambda_gamma must be > 0, got {self.lambda_gamma}")
        if not self.lambda_beta > 0:
            raise InvalidConfig(f"lambda_beta must be > 0, got {self.lambda_beta}")


@dataclass(frozen=True)
class GibbsConfig:
    burn_in: int = 500
    samples: int = 100
    thin: int = 2
    rng: SeededRng = SeededRng(0)

    def __post_init__(self) -> None:
        if self.burn_in < 0:
            raise InvalidConfig(f"burn_in must be >= 0, got {self.burn_in}")
        if self.samples < 1:
            raise InvalidConfig(f"samples must be >= 1, got {self.samples}")
        if self.thin < 1:
            raise InvalidConfig(f"thin must be >= 1, got {self.thin}")

    @property
    def total_sweeps(self) -> int:
        return self.burn_in + (self.samples - 1) * self.thin + 1


@dataclass(frozen=True)
class TopicModel:
    """A fitted (B, Gamma) pair for one resolution K.

    ``beta`` is D x K with column-stochastic topic compositions, ``gamma`` is
    N x K with row-stochastic sample memberships.
    """

    hyper: LdaHyperparams
    beta: np.ndarray
    gamma: np.ndarray
    log_likelihood_trace: np.ndarray

    def __post_init__(self) -> None:
        beta = np.asarray(self.beta, dtype=np.float64)
        gamma = np.asarray(self.gamma, dtype=np.float64)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "log_likelihood_trace",
                           np.asarray(self.log_likelihood_trace, dtype=np.float64))
        if beta.ndim != 2 or beta.shape[1] != self.hyper.k:
            raise InvalidConfig(f"beta must be D x {self.hyper.k}, got {beta.shape}")
        if gamma.ndim != 2 or gamma.shape[1] != self.hyper.k:
            raise InvalidConfig(f"gamma must be N x {self.hyper.k}, got {gamma.shape}")
        if np.any(beta < 0) or np.any(gamma < 0):
            raise InvalidConfig("beta and gamma must be nonnegative")
        if np.any(np.abs(beta.sum(axis=0) - 1.0) > STOCHASTIC_TOL):
            raise InvalidConfig("beta columns must sum to 1")
        if np.any(np.abs(gamma.sum(axis=1) - 1.0) > STOCHASTIC_TOL):
            raise InvalidConfig("gamma rows must sum to 1")

    @property
    def n_topics(self) -> int:
        return self.hyper.k

    @property
    def n_features(self) -> int:
        return self.beta.shape[0]

    @property
    def n_samples(self) -> int:
        return self.gamma.shape[0]

    @property
    def topic_masses(self) -> np.ndarray:
        """Total membership mass per topic: column sums of gamma."""
        return self.gamma.sum(axis=0)


@dataclass(frozen=True)
class ModelEnsemble:
    """Topic models over strictly increasing K, fitted to one corpus."""

    models: tuple[TopicModel, ...]
    corpus_fingerprint: str | None = None

    def __post_init__(self) -> None:
        models = tuple(self.models)
        object.__setattr__(self, "models", models)
        if not models:
            raise InvalidConfig("ensemble must contain at least one model")
        ks = [m.hyper.k for m in models]
        if any(k2 <= k1 for k1, k2 in zip(ks, ks[1:])):
            raise InvalidConfig(f"K values must be strictly increasing, got {ks}")
        if len({m.n_features for m in models}) > 1:
            raise DimensionMismatch("models disagree on the number of features")
        if len({m.n_samples for m in models}) > 1:
            raise DimensionMismatch("models disagree on the number of samples")

    @property
    def ks(self) -> tuple[int, ...]:
        return tuple(m.hyper.k for m in self.models)

    def __len__(self) -> int:
        return len(self.models)

    def __iter__(self):
        return iter(self.models)

    def __getitem__(self, idx: int) -> TopicModel:
        return self.models[idx]


# ---------------------------------------------------------------------------
# Gibbs kernels
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _gibbs_sweep(z, doc_of, word_of, topic_word, topic_tot, doc_topic,
                 lam_beta, lam_gamma, d_lam_beta, uniforms, cum):
    n_tokens = z.shape[0]
    n_topics = topic_tot.shape[0]
    for t in range(n_tokens):
        k_old = z[t]
        i = doc_of[t]
        d = word_of[t]
        topic_word[k_old, d] -= 1
        topic_tot[k_old] -= 1
        doc_topic[i, k_old] -= 1
        total = 0.0
        for k in range(n_topics):
            total += (topic_word[k, d] + lam_beta) / (topic_tot[k] + d_lam_beta) \
                * (doc_topic[i, k] + lam_gamma)
            cum[k] = total
        u = uniforms[t] * total
        k_new = 0
        while u > cum[k_new] and k_new < n_topics - 1:
            k_new += 1
        z[t] = k_new
        topic_word[k_new, d] += 1
        topic_tot[k_new] += 1
        doc_topic[i, k_new] += 1


@njit(cache=True, nogil=True)
def _foldin_sweep(z, doc_of, word_of, beta, doc_topic, lam_gamma, uniforms, cum):
    n_tokens = z.shape[0]
    n_topics = doc_topic.shape[1]
    for t in range(n_tokens):
        k_old = z[t]
        i = doc_of[t]
        d = word_of[t]
        doc_topic[i, k_old] -= 1
        total = 0.0
        for k in range(n_topics):
            total += beta[d, k] * (doc_topic[i, k] + lam_gamma)
            cum[k] = total
        u = uniforms[t] * total
        k_new = 0
        while u > cum[k_new] and k_new < n_topics - 1:
            k_new += 1
        z[t] = k_new
        doc_topic[i, k_new] += 1


def _tokenize(counts: np.ndarray):
    doc_idx, word_idx = np.nonzero(counts)
    reps = counts[doc_idx, word_idx]
    doc_of = np.repeat(doc_idx, reps).astype(np.int64)
    word_of = np.repeat(word_idx, reps).astype(np.int64)
    return doc_of, word_of


def _joint_log_likelihood(topic_word, topic_tot, doc_topic, totals,
                          lam_beta, lam_gamma) -> float:
    n_topics, n_features = topic_word.shape
    n_docs = doc_topic.shape[0]
    ll = n_topics * gammaln(n_features * lam_beta) \
        - n_topics * n_features * gammaln(lam_beta)
    ll += gammaln(topic_word + lam_beta).sum() \
        - gammaln(topic_tot + n_features * lam_beta).sum()
    ll += n_docs * gammaln(n_topics * lam_gamma) \
        - n_docs * n_topics * gammaln(lam_gamma)
    ll += gammaln(doc_topic + lam_gamma).sum() \
        - gammaln(totals + n_topics * lam_gamma).sum()
    return float(ll)


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def fit_lda(counts, hyper: LdaHyperparams, cfg: GibbsConfig | None = None) -> TopicModel:
    """Fit one LDA model; B and Gamma are sweep-averaged posterior means."""
    cm = as_count_matrix(counts)
    cfg = cfg or GibbsConfig()
    n, d, k = cm.n_samples, cm.n_features, hyper.k
    totals = cm.totals
    lam_beta, lam_gamma = hyper.lambda_beta, hyper.lambda_gamma

    if k == 1:
        # Degenerate resolution: memberships are all ones and the single
        # topic is the smoothed pooled frequency vector; no sampling needed.
        pooled = cm.counts.sum(axis=0).astype(np.float64)
        beta = ((pooled + lam_beta) / (pooled.sum() + d * lam_beta)).reshape(d, 1)
        gamma = np.ones((n, 1))
        ll = _joint_log_likelihood(pooled.reshape(1, d), pooled.sum(axis=None, keepdims=True),
                                   totals.reshape(n, 1).astype(np.float64), totals,
                                   lam_beta, lam_gamma)
        trace = np.full(cfg.total_sweeps, ll)
        return TopicModel(hyper, beta, gamma, trace)

    gen = cfg.rng.generator()
    doc_of, word_of = _tokenize(cm.counts)
    n_tokens = doc_of.size
    z = gen.integers(0, k, size=n_tokens).astype(np.int64)

    topic_word = np.zeros((k, d), dtype=np.int64)
    np.add.at(topic_word, (z, word_of), 1)
    topic_tot = np.bincount(z, minlength=k).astype(np.int64)
    doc_topic = np.zeros((n, k), dtype=np.int64)
    np.add.at(doc_topic, (doc_of, z), 1)

    beta_acc = np.zeros((d, k))
    gamma_acc = np.zeros((n, k))
    trace = np.empty(cfg.total_sweeps)
    cum = np.empty(k)
    retained = 0
    for sweep in range(cfg.total_sweeps):
        uniforms = gen.random(n_tokens)
        _gibbs_sweep(z, doc_of, word_of, topic_word, topic_tot, doc_topic,
                     lam_beta, lam_gamma, d * lam_beta, uniforms, cum)
        trace[sweep] = _joint_log_likelihood(topic_word, topic_tot, doc_topic,
                                             totals, lam_beta, lam_gamma)
        if sweep >= cfg.burn_in and (sweep - cfg.burn_in) % cfg.thin == 0:
            beta_acc += ((topic_word + lam_beta)
                         / (topic_tot + d * lam_beta)[:, None]).T
            gamma_acc += (doc_topic + lam_gamma) / (totals + k * lam_gamma)[:, None]
            retained += 1

    return TopicModel(hyper, beta_acc / retained, gamma_acc / retained, trace)


def resolve_threads(n_tasks: int, requested: int | None = None) -> int:
    """Worker count for parallel sections, capped by TOPIC_ALIGN_THREADS."""
    cap = os.environ.get("TOPIC_ALIGN_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    if requested is not None:
        limit = min(limit, requested)
    return max(1, min(limit, n_tasks))


def fit_ensemble(counts, k_range, lambda_gamma: float, lambda_beta: float,
                 cfg: GibbsConfig | None = None, threads: int | None = None) -> ModelEnsemble:
    """Fit one model per K; each K draws from its own substream of cfg.rng."""
    cm = as_count_matrix(counts)
    cfg = cfg or GibbsConfig()
    ks = [int(k) for k in k_range]
    if not ks:
        raise InvalidConfig("k_range is empty")
    if any(k2 <= k1 for k1, k2 in zip(ks, ks[1:])):
        raise InvalidConfig(f"k_range must be ascending, got {ks}")

    def fit_one(k: int) -> TopicModel:
        sub = replace(cfg, rng=cfg.rng.substream(_STREAM_FIT, k))
        return fit_lda(cm, LdaHyperparams(k, lambda_gamma, lambda_beta), sub)

    n_workers = resolve_threads(len(ks), threads)
    if n_workers == 1:
        models = [fit_one(k) for k in ks]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            models = list(pool.map(fit_one, ks))
    return ModelEnsemble(tuple(models), corpus_fingerprint=cm.fingerprint())


# ---------------------------------------------------------------------------
# Held-out scoring
# ---------------------------------------------------------------------------

def fold_in(model: TopicModel, heldout, cfg: GibbsConfig | None = None) -> np.ndarray:
    """Posterior-mean memberships for new documents, topics held fixed."""
    cm = as_count_matrix(heldout)
    if cm.n_features != model.n_features:
        raise DimensionMismatch(
            f"held-out D={cm.n_features} but model has D={model.n_features}")
    k, n = model.n_topics, cm.n_samples
    if k == 1:
        return np.ones((n, 1))
    cfg = cfg or GibbsConfig()
    lam_gamma = model.hyper.lambda_gamma
    gen = cfg.rng.substream(_STREAM_FOLDIN).generator()

    doc_of, word_of = _tokenize(cm.counts)
    z = gen.integers(0, k, size=doc_of.size).astype(np.int64)
    doc_topic = np.zeros((n, k), dtype=np.int64)
    np.add.at(doc_topic, (doc_of, z), 1)
    totals = cm.totals

    gamma_acc = np.zeros((n, k))
    cum = np.empty(k)
    retained = 0
    for sweep in range(FOLD_IN_SWEEPS):
        uniforms = gen.random(doc_of.size)
        _foldin_sweep(z, doc_of, word_of, model.beta, doc_topic,
                      lam_gamma, uniforms, cum)
        if sweep >= FOLD_IN_BURN:
            gamma_acc += (doc_topic + lam_gamma) / (totals + k * lam_gamma)[:, None]
            retained += 1
    return gamma_acc / retained


def perplexity(model: TopicModel, heldout, cfg: GibbsConfig | None = None) -> float:
    """exp of negative held-out log-likelihood per read; >= 1, lower is better."""
    cm = as_count_matrix(heldout)
    if cm.n_features != model.n_features:
        raise DimensionMismatch(
            f"held-out D={cm.n_features} but model has D={model.n_features}")
    gamma_star = fold_in(model, cm, cfg)
    mean = gamma_star @ model.beta.T
    cells = cm.counts > 0
    with np.errstate(divide="ignore"):
        log_mean = np.log(mean)
    if np.any(np.isneginf(log_mean[cells])):
        return float("inf")
    log_lik = float(np.sum(cm.counts[cells] * log_mean[cells]))
    return float(np.exp(-log_lik / cm.counts.sum()))


# ---------------------------------------------------------------------------
# Estimator facade
# ---------------------------------------------------------------------------

class GibbsLda(BaseEstimator):
    """Scikit-learn style wrapper around :func:`fit_lda`.

    Parameters mirror `LdaHyperparams` and `GibbsConfig`; `fit` accepts a
    nonnegative integer array of shape (n_samples, n_features) or a
    `CountMatrix`.
    """

    def __init__(self, n_topics: int = 5, lambda_gamma: float = 0.5,
                 lambda_beta: float = 0.1, burn_in: int = 500,
                 samples: int = 100, thin: int = 2, seed: int = 0):
        self.n_topics = n_topics
        self.lambda_gamma = lambda_gamma
        self.lambda_beta = lambda_beta
        self.burn_in = burn_in
        self.samples = samples
        self.thin = thin
        self.seed = seed

    def _config(self) -> GibbsConfig:
        return GibbsConfig(burn_in=self.burn_in, samples=self.samples,
                           thin=self.thin, rng=SeededRng(self.seed))

    def fit(self, X, y=None) -> "GibbsLda":
        hyper = LdaHyperparams(self.n_topics, self.lambda_gamma, self.lambda_beta)
        self.model_ = fit_lda(X, hyper, self._config())
        self.beta_ = self.model_.beta
        self.gamma_ = self.model_.gamma
        self.log_likelihood_trace_ = self.model_.log_likelihood_trace
        return self

    def transform(self, X) -> np.ndarray:
        """Fold-in memberships for new documents; shape (n_samples, n_topics)."""
        self._check_fitted()
        return fold_in(self.model_, X, self._config())

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X).gamma_

    def perplexity(self, X) -> float:
        self._check_fitted()
        return perplexity(self.model_, X, self._config())

    def _check_fitted(self) -> None:
        if not hasattr(self, "model_"):
            raise InvalidConfig("estimator is not fitted; call fit() first")
