"""Latent Dirichlet allocation trained by collapsed Gibbs sampling.

The sampler keeps the standard count arrays: document-topic counts n_dz,
topic-word counts n_zw and the topic totals n_z.  One sweep revisits every
token in corpus order, removes its current assignment from the counts,
draws a new topic from the collapsed conditional

    p(z = k | rest)  proportional to  (n_zw[k,w] + beta) * (n_dz[d,k] + alpha)
                                      / (n_z[k] + V * beta)

and adds the token back.  Document-topic and topic-word distributions are
point estimates from the final counts.  Pad tokens are excluded entirely;
the unknown token trains like a regular word.
"""

import copy
import math
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import PAD_ID
from .errors import ConfigError, EmptyCorpusError
from .io import dump_json, load_json, load_matrix, save_matrix
from .validation import check_encoded_docs, check_is_fitted, check_random_state


def topic_conditional(n_dz_row, n_zw_col, n_z, alpha, beta, vocab_size):
    """Normalized collapsed conditional over topics for one removed token.

    All count arguments must already exclude the token being resampled.
    """
    weights = (np.asarray(n_zw_col) + beta) * (np.asarray(n_dz_row) + alpha)
    weights = weights / (np.asarray(n_z) + vocab_size * beta)
    total = weights.sum()
    if total <= 0:
        raise ConfigError("degenerate topic conditional: all weights zero")
    return weights / total


def perplexity_from(theta, phi, docs):
    """exp(-sum log p(w|d) / token count) with p(w|d) = theta_d . phi[:, w].

    Documents are rows of pad-encoded ids; pads are skipped.  A token with
    zero probability yields infinity rather than an error.
    """
    log_total = 0.0
    tokens = 0
    for d, row in enumerate(docs):
        words = row[row != PAD_ID]
        if words.size == 0:
            continue
        p = theta[d] @ phi[:, words]
        tokens += words.size
        if np.any(p <= 0):
            return math.inf
        log_total += float(np.log(p).sum())
    if tokens == 0:
        raise EmptyCorpusError("perplexity over zero tokens is undefined")
    return math.exp(-log_total / tokens)


class GibbsLda(BaseEstimator, TransformerMixin):
    """Collapsed Gibbs LDA over pad-encoded documents.

    fit() runs `sweeps` full passes; transform() folds unseen documents in
    against the frozen topic-word counts and returns their topic mixtures.
    With a fixed random_state every run is bit-reproducible, and a run
    interrupted by save_checkpoint() resumes to the identical final state
    because the generator state is stored alongside the counts.
    """

    def __init__(
        self,
        n_topics=20,
        alpha=None,
        beta=0.01,
        sweeps=500,
        burn_in=100,
        vocab_size=None,
        fold_in_sweeps=20,
        random_state=0,
    ):
        self.n_topics = n_topics
        self.alpha = alpha
        self.beta = beta
        self.sweeps = sweeps
        self.burn_in = burn_in
        self.vocab_size = vocab_size
        self.fold_in_sweeps = fold_in_sweeps
        self.random_state = random_state

    def _check_params(self):
        if self.n_topics < 1:
            raise ConfigError(f"n_topics must be >= 1, got {self.n_topics}")
        if self.beta <= 0 or (self.alpha is not None and self.alpha <= 0):
            raise ConfigError("alpha and beta must be > 0")
        if self.sweeps < 0 or self.burn_in < 0:
            raise ConfigError("sweeps and burn_in must be >= 0")
        if self.burn_in > self.sweeps:
            raise ConfigError(
                f"burn_in ({self.burn_in}) must not exceed sweeps ({self.sweeps})"
            )

    # -- training ---------------------------------------------------------

    def fit(self, X, y=None):
        self._check_params()
        X = check_encoded_docs(X, vocab_size=self.vocab_size)
        k = self.n_topics
        self.alpha_ = self.alpha if self.alpha is not None else 50.0 / k
        self.beta_ = self.beta
        self.vocab_size_ = self.vocab_size or max(int(X.max()) + 1, PAD_ID + 2)

        mask = X != PAD_ID
        if not mask.any():
            raise EmptyCorpusError("no non-pad tokens to train on")
        self.n_docs_ = X.shape[0]
        self.words_ = X[mask].astype(np.int64)
        self.doc_ids_ = np.repeat(np.arange(self.n_docs_, dtype=np.int64), mask.sum(axis=1))
        self.doc_lengths_ = mask.sum(axis=1).astype(np.int64)
        self.offsets_ = np.concatenate([[0], np.cumsum(self.doc_lengths_)])

        rng = check_random_state(self.random_state)
        self.assignments_ = rng.integers(0, k, self.words_.size, dtype=np.int64)
        self.n_dz_, self.n_zw_, self.n_z_ = self.recounted_counts()
        self.sweeps_done_ = 0
        self._rng = rng
        self.run_sweeps(self.sweeps)
        return self

    def recounted_counts(self):
        """Rebuild all count arrays from the flat assignment vector."""
        k, v = self.n_topics, self.vocab_size_
        n_dz = np.zeros((self.n_docs_, k), dtype=np.int64)
        n_zw = np.zeros((k, v), dtype=np.int64)
        np.add.at(n_dz, (self.doc_ids_, self.assignments_), 1)
        np.add.at(n_zw, (self.assignments_, self.words_), 1)
        return n_dz, n_zw, n_zw.sum(axis=1)

    def run_sweeps(self, n):
        """Advance the chain n full sweeps over the corpus."""
        check_is_fitted(self, "assignments_")
        k = self.n_topics
        alpha, beta = self.alpha_, self.beta_
        v_beta = self.vocab_size_ * beta
        words, doc_ids, z = self.words_, self.doc_ids_, self.assignments_
        n_dz, n_zw, n_z = self.n_dz_, self.n_zw_, self.n_z_
        rng = self._rng
        n_tokens = words.size
        for _ in range(n):
            uniforms = rng.random(n_tokens)
            for i in range(n_tokens):
                w = words[i]
                d = doc_ids[i]
                old = z[i]
                n_dz[d, old] -= 1
                n_zw[old, w] -= 1
                n_z[old] -= 1
                weights = (n_zw[:, w] + beta) * (n_dz[d] + alpha) / (n_z + v_beta)
                cum = np.cumsum(weights)
                new = int(np.searchsorted(cum, uniforms[i] * cum[-1], side="right"))
                if new >= k:
                    new = k - 1
                z[i] = new
                n_dz[d, new] += 1
                n_zw[new, w] += 1
                n_z[new] += 1
            self.sweeps_done_ += 1
        return self

    # -- estimates --------------------------------------------------------

    @property
    def theta_(self):
        """Document-topic mixtures (n_dz + alpha) / (N_d + K alpha)."""
        check_is_fitted(self, "n_dz_")
        denom = self.doc_lengths_[:, None] + self.n_topics * self.alpha_
        return (self.n_dz_ + self.alpha_) / denom

    @property
    def phi_(self):
        """Topic-word distributions (n_zw + beta) / (n_z + V beta)."""
        check_is_fitted(self, "n_zw_")
        denom = self.n_z_[:, None] + self.vocab_size_ * self.beta_
        return (self.n_zw_ + self.beta_) / denom

    def perplexity(self, doc_indices=None):
        """Corpus perplexity over training documents (all by default)."""
        check_is_fitted(self, "n_dz_")
        theta, phi = self.theta_, self.phi_
        if doc_indices is None:
            doc_indices = np.arange(self.n_docs_)
        doc_indices = np.asarray(doc_indices)
        log_total = 0.0
        tokens = 0
        for d in doc_indices:
            words = self.words_[self.offsets_[d] : self.offsets_[d + 1]]
            if words.size == 0:
                continue
            p = theta[d] @ phi[:, words]
            tokens += words.size
            if np.any(p <= 0):
                return math.inf
            log_total += float(np.log(p).sum())
        if tokens == 0:
            raise EmptyCorpusError("perplexity over zero tokens is undefined")
        return math.exp(-log_total / tokens)

    def transform(self, X):
        """Fold documents in against frozen topic-word counts; returns theta.

        Runs `fold_in_sweeps` Gibbs passes that update only the new
        documents' topic counts.  Deterministic for a fixed random_state.
        """
        check_is_fitted(self, "n_zw_")
        X = check_encoded_docs(X, vocab_size=self.vocab_size_)
        k = self.n_topics
        alpha, beta = self.alpha_, self.beta_
        v_beta = self.vocab_size_ * beta
        phi_w = (self.n_zw_ + beta) / (self.n_z_[:, None] + v_beta)
        rng = np.random.default_rng([0 if self.random_state is None else self.random_state, 1])
        theta = np.zeros((X.shape[0], k))
        for d, row in enumerate(X):
            words = row[row != PAD_ID].astype(np.int64)
            n_dk = np.zeros(k, dtype=np.int64)
            if words.size == 0:
                theta[d] = 1.0 / k
                continue
            z = rng.integers(0, k, words.size)
            np.add.at(n_dk, z, 1)
            for _ in range(self.fold_in_sweeps):
                uniforms = rng.random(words.size)
                for i in range(words.size):
                    old = z[i]
                    n_dk[old] -= 1
                    weights = phi_w[:, words[i]] * (n_dk + alpha)
                    cum = np.cumsum(weights)
                    new = int(np.searchsorted(cum, uniforms[i] * cum[-1], side="right"))
                    if new >= k:
                        new = k - 1
                    z[i] = new
                    n_dk[new] += 1
            theta[d] = (n_dk + alpha) / (words.size + k * alpha)
        return theta

    # -- tagging ----------------------------------------------------------

    def tag_corpus(self, X=None, mode="sample"):
        """Pair every non-pad token with a topic id.

        mode="sample" reads the chain's final assignments verbatim
        (training corpus only).  mode="argmax" tags each training token
        with the argmax of its leave-one-out collapsed conditional (the
        token's own count removed first, as during sampling); ties go to
        the lower topic id.  Passing X tags new documents by folding them
        in and taking argmax_k theta[d, k] * phi[k, w] per token (argmax
        only; their counts never entered the tables, so there is nothing
        to remove).  Returns a list of (word_id, topic_id) int arrays,
        one per document.
        """
        check_is_fitted(self, "n_dz_")
        if mode not in ("sample", "argmax"):
            raise ConfigError(f"mode must be 'sample' or 'argmax', got {mode!r}")
        if X is None:
            if mode == "sample":
                tagged = []
                for d in range(self.n_docs_):
                    sl = slice(self.offsets_[d], self.offsets_[d + 1])
                    pairs = np.stack([self.words_[sl], self.assignments_[sl]], axis=1)
                    tagged.append(pairs.astype(np.int64))
                return tagged
            tagged = []
            for d in range(self.n_docs_):
                sl = slice(self.offsets_[d], self.offsets_[d + 1])
                words = self.words_[sl]
                olds = self.assignments_[sl]
                topics = np.empty(words.size, dtype=np.int64)
                for i in range(words.size):
                    w, old = words[i], olds[i]
                    n_dz_row = self.n_dz_[d].astype(np.float64)
                    n_zw_col = self.n_zw_[:, w].astype(np.float64)
                    n_z = self.n_z_.astype(np.float64)
                    n_dz_row[old] -= 1
                    n_zw_col[old] -= 1
                    n_z[old] -= 1
                    dist = topic_conditional(
                        n_dz_row, n_zw_col, n_z, self.alpha_, self.beta_, self.vocab_size_
                    )
                    topics[i] = int(np.argmax(dist))
                tagged.append(np.stack([words, topics], axis=1).astype(np.int64))
            return tagged
        if mode == "sample":
            raise ConfigError("mode='sample' applies only to the training corpus")
        X = check_encoded_docs(X, vocab_size=self.vocab_size_)
        theta = self.transform(X)
        phi = self.phi_
        tagged = []
        for d, row in enumerate(X):
            words = row[row != PAD_ID].astype(np.int64)
            topics = np.argmax(theta[d][:, None] * phi[:, words], axis=0)
            tagged.append(np.stack([words, topics], axis=1).astype(np.int64))
        return tagged

    # -- checkpoints ------------------------------------------------------

    def save_checkpoint(self, path):
        """Write chain state so training can resume bit-identically."""
        check_is_fitted(self, "assignments_")
        path = Path(path)
        meta = {
            "params": self.get_params(),
            "alpha": self.alpha_,
            "beta": self.beta_,
            "vocab_size": self.vocab_size_,
            "n_docs": self.n_docs_,
            "sweeps_done": self.sweeps_done_,
            "rng_state": _encode_rng_state(self._rng.bit_generator.state),
        }
        dump_json(meta, path)
        base = str(path)
        save_matrix(base + ".words", self.words_.astype(np.int32))
        save_matrix(base + ".docids", self.doc_ids_.astype(np.int32))
        save_matrix(base + ".z", self.assignments_.astype(np.int32))

    @classmethod
    def load_checkpoint(cls, path):
        path = Path(path)
        meta = load_json(path)
        est = cls(**meta["params"])
        est.alpha_ = meta["alpha"]
        est.beta_ = meta["beta"]
        est.vocab_size_ = meta["vocab_size"]
        est.n_docs_ = meta["n_docs"]
        est.sweeps_done_ = meta["sweeps_done"]
        base = str(path)
        est.words_ = load_matrix(base + ".words").astype(np.int64)
        est.doc_ids_ = load_matrix(base + ".docids").astype(np.int64)
        est.assignments_ = load_matrix(base + ".z").astype(np.int64)
        if est.words_.shape != est.doc_ids_.shape or est.words_.shape != est.assignments_.shape:
            raise ConfigError("checkpoint arrays disagree in length")
        for name, arr, bound in (
            ("topic assignments", est.assignments_, est.n_topics),
            ("word ids", est.words_, est.vocab_size_),
            ("document ids", est.doc_ids_, est.n_docs_),
        ):
            if arr.size and (arr.min() < 0 or arr.max() >= bound):
                raise ConfigError(f"checkpoint {name} out of range")
        lengths = np.zeros(est.n_docs_, dtype=np.int64)
        np.add.at(lengths, est.doc_ids_, 1)
        est.doc_lengths_ = lengths
        est.offsets_ = np.concatenate([[0], np.cumsum(lengths)])
        est.n_dz_, est.n_zw_, est.n_z_ = est.recounted_counts()
        rng = np.random.default_rng()
        rng.bit_generator.state = _decode_rng_state(meta["rng_state"])
        est._rng = rng
        return est


def _encode_rng_state(state):
    # PCG64 state ints exceed 2^53; store as strings to survive JSON readers
    out = copy.deepcopy(state)
    out["state"] = {k: str(v) for k, v in state["state"].items()}
    return out


def _decode_rng_state(state):
    out = copy.deepcopy(state)
    out["state"] = {k: int(v) for k, v in state["state"].items()}
    return out


def select_topic_count(
    X, k_values, heldout_fraction=0.01, random_state=0, scorer=None, labels=None, **lda_params
):
    """Train one model per candidate topic count and score each on a
    held-out slice of the training documents (every 100th document for the
    default 1%; the slice still participates in training so its mixtures
    exist).  An optional scorer hook `scorer(theta, labels) -> float`
    additionally rates each model's document mixtures as classifier
    features, giving an accuracy curve next to the perplexity curve.

    Returns (selected_k, curve) where curve rows are
    (k, perplexity, accuracy) with accuracy None when no scorer is given;
    selected_k minimizes perplexity, ties going to the smaller count.
    """
    k_values = sorted(set(int(k) for k in k_values))
    if len(k_values) < 2:
        raise ConfigError("need at least two candidate topic counts to compare")
    if (scorer is None) != (labels is None):
        raise ConfigError("scorer and labels must be given together")
    X = check_encoded_docs(X)
    if labels is not None:
        labels = np.asarray(labels)
    step = max(1, round(1.0 / max(heldout_fraction, 1e-9)))
    heldout = np.arange(0, X.shape[0], step)
    curve = []
    for k in k_values:
        est = GibbsLda(n_topics=k, random_state=random_state, **lda_params)
        est.fit(X)
        acc = None if scorer is None else float(scorer(est.theta_, labels))
        curve.append((k, est.perplexity(heldout), acc))
    best = min(curve, key=lambda row: (row[1], row[0]))
    return best[0], curve
