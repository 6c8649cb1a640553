"""Word embeddings trained from scratch: CBOW and skip-gram with negative
sampling.

Both model variants keep two V x D matrices: input vectors (the embeddings
returned to the caller) and output vectors (the context side used by the
binary discrimination against sampled negatives).  CBOW predicts the center
word from the *sum* of the context input vectors; skip-gram predicts each
context word from the center word's input vector.

The pad row (id 0) stays exactly zero: it never appears in training windows,
as a positive target or in the negative-sampling table.  The unknown token
(id 1) trains like a real word but is never drawn as a negative.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import PAD_ID, N_SPECIAL
from .errors import ConfigError, EmptyVocabularyError, NumericOverflowError
from .validation import check_encoded_docs, check_is_fitted, check_random_state

LR_FLOOR_FACTOR = 1e-4
_MAX_REJECTS = 100


@dataclass
class EmbeddingMatrix:
    """Input (word) vectors and the parallel output-weight matrix."""

    input_vectors: np.ndarray
    output_vectors: np.ndarray

    @property
    def dim(self):
        return self.input_vectors.shape[1]

    @property
    def vocab_size(self):
        return self.input_vectors.shape[0]


@dataclass
class SamplingTable:
    """Cumulative distribution over word ids proportional to count^power.

    Pad and unknown ids carry zero probability and are never drawn.
    """

    cumulative: np.ndarray

    @property
    def probabilities(self):
        return np.diff(self.cumulative, prepend=0.0)

    def sample(self, n, rng, exclude=None):
        """Draw n ids; draws equal to ``exclude`` are rejected and redrawn.

        Rejection is bounded; a degenerate table where only the excluded id
        has mass yields fewer than n draws rather than looping forever.
        """
        out = []
        for _ in range(n):
            for _ in range(_MAX_REJECTS):
                drawn = int(np.searchsorted(self.cumulative, rng.random(), side="right"))
                if drawn != exclude:
                    out.append(drawn)
                    break
        return out


def build_sampling_table(vocab, power=0.75):
    """Negative-sampling distribution p(w) = count(w)^power / sum count^power."""
    return _table_from_counts(np.asarray(vocab.counts, dtype=np.float64), power)


def _table_from_counts(counts, power):
    weights = np.zeros(len(counts), dtype=np.float64)
    real = np.arange(len(counts)) >= N_SPECIAL
    positive = real & (counts > 0)
    weights[positive] = counts[positive].astype(np.float64) ** power
    total = weights.sum()
    if total <= 0:
        raise EmptyVocabularyError("sampling table needs at least one real token with count > 0")
    return SamplingTable(cumulative=np.cumsum(weights / total))


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _log_sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))), x - np.log1p(np.exp(x)))


def _step_gradients(v, thetas, labels):
    """Loss and simultaneous gradients of one negative-sampling step.

    v is the input-side vector, thetas the stacked output vectors of the
    positive and negative targets, labels 1 for the positive and 0 for
    negatives.  Returns (loss, grad_v, grad_thetas) for the step's negative
    log-likelihood; all gradients are evaluated at the current parameters.
    """
    dots = thetas @ v
    if not np.all(np.isfinite(dots)):
        raise NumericOverflowError("non-finite dot product in negative-sampling step")
    sig = sigmoid(dots)
    loss = -np.sum(labels * _log_sigmoid(dots) + (1.0 - labels) * _log_sigmoid(-dots))
    residual = sig - labels
    grad_v = residual @ thetas
    grad_thetas = residual[:, None] * v[None, :]
    return float(loss), grad_v, grad_thetas


def sgns_update(center, positive, negatives, matrices, lr):
    """One skip-gram negative-sampling step; returns the step's -log-likelihood.

    Moves the positive output vector by lr*(1 - sigma)*v, each negative by
    -lr*sigma*v, and the center input vector by the mirrored gradient.
    """
    if center == PAD_ID:
        raise ConfigError("the pad id cannot be a training center")
    targets = [positive] + list(negatives)
    labels = np.zeros(len(targets))
    labels[0] = 1.0
    v = matrices.input_vectors[center]
    thetas = matrices.output_vectors[targets]
    loss, grad_v, grad_thetas = _step_gradients(v, thetas, labels)
    matrices.input_vectors[center] -= lr * grad_v
    for i, t in enumerate(targets):
        matrices.output_vectors[t] -= lr * grad_thetas[i]
    return loss


def cbow_update(context, center, negatives, matrices, lr):
    """One CBOW step from the summed context vectors; returns the step loss.

    The context sum X plays the input-side role; every context word's input
    vector receives the full input-side gradient.  An empty context (after
    pad removal) is skipped with zero loss.
    """
    context = [c for c in context if c != PAD_ID]
    if not context:
        return 0.0
    targets = [center] + list(negatives)
    labels = np.zeros(len(targets))
    labels[0] = 1.0
    x = matrices.input_vectors[context].sum(axis=0)
    thetas = matrices.output_vectors[targets]
    loss, grad_x, grad_thetas = _step_gradients(x, thetas, labels)
    for c in context:
        matrices.input_vectors[c] -= lr * grad_x
    for i, t in enumerate(targets):
        matrices.output_vectors[t] -= lr * grad_thetas[i]
    return loss


def average_document_vector(doc, embeddings):
    """Arithmetic mean of the input vectors of a document's non-pad tokens.

    An all-pad document maps to the zero vector.
    """
    vectors = embeddings.input_vectors if isinstance(embeddings, EmbeddingMatrix) else embeddings
    doc = np.asarray(doc)
    real = doc[doc != PAD_ID]
    if real.size == 0:
        return np.zeros(vectors.shape[1], dtype=vectors.dtype)
    return vectors[real].mean(axis=0)


def nearest_neighbors(query, embeddings, k):
    """Top-k (id, cosine) pairs for a word, query excluded.

    Zero-norm vectors rank last with similarity exactly 0.
    """
    vectors = embeddings.input_vectors if isinstance(embeddings, EmbeddingMatrix) else embeddings
    if k >= vectors.shape[0]:
        raise ConfigError(f"k={k} must be smaller than the vocabulary size {vectors.shape[0]}")
    norms = np.linalg.norm(vectors, axis=1)
    q = vectors[query]
    qn = norms[query]
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = vectors @ q / (norms * qn)
    sims[(norms == 0) | (qn == 0) | ~np.isfinite(sims)] = 0.0
    order = sorted((i for i in range(vectors.shape[0]) if i != query), key=lambda i: (-sims[i], i))
    return [(i, float(sims[i])) for i in order[:k]]


class Word2Vec(BaseEstimator, TransformerMixin):
    """CBOW / skip-gram embedding trainer over encoded documents.

    fit() consumes a docs x pad_len id matrix (pad id 0 excluded from all
    windows) and learns input/output vector matrices; transform() maps
    documents to the mean of their word vectors (the w2v-avg baseline).

    Negative-sampling counts are taken from the corpus itself; negatives
    equal to the positive target are rejected and resampled.  With
    n_workers=1 training is sequential and bit-reproducible for a fixed
    random_state; n_workers > 1 shards documents across threads that update
    the shared matrices without locks, trading determinism for speed.
    """

    def __init__(
        self,
        dim=128,
        window=5,
        negatives=5,
        epochs=5,
        learning_rate=0.025,
        model="cbow",
        power=0.75,
        dynamic_window=False,
        subsample=0.0,
        vocab_size=None,
        n_workers=1,
        random_state=0,
    ):
        self.dim = dim
        self.window = window
        self.negatives = negatives
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.model = model
        self.power = power
        self.dynamic_window = dynamic_window
        self.subsample = subsample
        self.vocab_size = vocab_size
        self.n_workers = n_workers
        self.random_state = random_state

    def _check_params(self):
        if self.dim < 1 or self.window < 1 or self.negatives < 1:
            raise ConfigError("dim, window and negatives must all be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.model not in ("cbow", "skipgram"):
            raise ConfigError(f"model must be 'cbow' or 'skipgram', got {self.model!r}")

    def fit(self, X, y=None):
        self._check_params()
        X = check_encoded_docs(X, vocab_size=self.vocab_size)
        if X.size == 0:
            raise ConfigError("cannot train embeddings on an empty corpus")
        vocab_size = self.vocab_size or int(X.max()) + 1
        vocab_size = max(vocab_size, N_SPECIAL + 1)
        counts = np.bincount(X.ravel(), minlength=vocab_size)
        counts[:N_SPECIAL] = 0
        rng = check_random_state(self.random_state)

        input_vectors = rng.uniform(-0.5 / self.dim, 0.5 / self.dim, (vocab_size, self.dim))
        input_vectors[PAD_ID] = 0.0
        output_vectors = np.zeros((vocab_size, self.dim))
        self.embeddings_ = EmbeddingMatrix(input_vectors, output_vectors)
        self.sampling_table_ = _table_from_counts(counts.astype(np.float64), self.power)
        self.counts_ = counts

        docs = [row[row != PAD_ID] for row in X]
        docs = [d for d in docs if d.size > 0]
        self.epoch_losses_ = []
        if self.epochs == 0 or not docs:
            return self

        if self.n_workers > 1:
            self._fit_parallel(docs, counts)
        else:
            total = self.epochs * sum(d.size for d in docs)
            progress = [0]
            for _ in range(self.epochs):
                loss = self._train_docs(docs, counts, rng, progress, total)
                self.epoch_losses_.append(loss)
        return self

    def _fit_parallel(self, docs, counts):
        # racy by design: shards update the shared matrices without locks
        shards = [docs[i :: self.n_workers] for i in range(self.n_workers)]
        shards = [s for s in shards if s]
        rngs = [check_random_state((self.random_state or 0) * 7919 + i) for i in range(len(shards))]
        budgets = [self.epochs * sum(d.size for d in s) for s in shards]
        marks = [[0] for _ in shards]
        for _ in range(self.epochs):
            with ThreadPoolExecutor(max_workers=len(shards)) as pool:
                futures = [
                    pool.submit(self._train_docs, shard, counts, rngs[i], marks[i], budgets[i])
                    for i, shard in enumerate(shards)
                ]
                self.epoch_losses_.append(sum(f.result() for f in futures))

    def _train_docs(self, docs, counts, rng, progress, total):
        lr0 = self.learning_rate
        lr_floor = LR_FLOOR_FACTOR * lr0
        matrices = self.embeddings_
        table = self.sampling_table_
        total_count = counts.sum()
        loss = 0.0
        for doc in docs:
            if self.subsample > 0:
                freq = counts[doc] / total_count
                keep = rng.random(doc.size) < np.minimum(1.0, np.sqrt(self.subsample / np.maximum(freq, 1e-12)))
                doc = doc[keep]
            n = doc.size
            for t in range(n):
                lr = lr0 + (lr_floor - lr0) * (progress[0] / total)
                progress[0] += 1
                half = self.window
                if self.dynamic_window:
                    half = int(rng.integers(1, self.window + 1))
                lo, hi = max(0, t - half), min(n, t + half + 1)
                context = [int(doc[j]) for j in range(lo, hi) if j != t]
                if not context:
                    continue
                center = int(doc[t])
                if self.model == "cbow":
                    negs = table.sample(self.negatives, rng, exclude=center)
                    loss += cbow_update(context, center, negs, matrices, lr)
                else:
                    for u in context:
                        negs = table.sample(self.negatives, rng, exclude=u)
                        loss += sgns_update(center, u, negs, matrices, lr)
        return loss

    def transform(self, X):
        """Map encoded documents to mean word vectors (w2v-avg)."""
        check_is_fitted(self, "embeddings_")
        X = check_encoded_docs(X)
        out = np.zeros((X.shape[0], self.dim))
        for i, row in enumerate(X):
            out[i] = average_document_vector(row, self.embeddings_)
        return out
