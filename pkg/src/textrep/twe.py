"""Topical word embeddings: joint word and topic vectors over a tagged corpus.

Training walks the topic-tagged token stream skip-gram style.  For every
(center word, center topic, context word) triple inside the window it
performs two negative-sampling updates against the same context target and
the same drawn negatives: first with the center's word vector, then with
its topic vector.  Word and topic updates share one output-vector matrix,
so a word's vector and its topics' vectors live in the same space.

A word's representation under topic z is the concatenation word_vec(w) ++
topic_vec(z), twice the base dimension, which gives polysemous words one
vector per induced sense.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import PAD_ID, N_SPECIAL
from .errors import ConfigError, EmptyCorpusError, ShapeError
from .validation import check_is_fitted, check_random_state
from .word2vec import (
    LR_FLOOR_FACTOR,
    EmbeddingMatrix,
    _step_gradients,
    _table_from_counts,
)


@dataclass
class TopicalEmbeddings:
    """Word vectors, topic vectors, and the shared output (context) matrix."""

    word_vectors: np.ndarray
    topic_vectors: np.ndarray
    output_vectors: np.ndarray

    @property
    def dim(self):
        return self.word_vectors.shape[1]

    @property
    def n_topics(self):
        return self.topic_vectors.shape[0]


def topical_word_vector(word, topic, emb):
    """Concatenated representation of a word under one topic.

    First D entries are the word vector, last D the topic vector.  A topic
    id of -1 stands for "untagged" and yields a zero tail.
    """
    if topic >= emb.n_topics:
        raise ConfigError(f"topic id {topic} out of range for {emb.n_topics} topics")
    tail = np.zeros(emb.dim) if topic < 0 else emb.topic_vectors[topic]
    return np.concatenate([emb.word_vectors[word], tail])


def encode_document_matrix(tagged_doc, emb, pad_len):
    """Stack one document's topical word vectors into a pad_len x 2D matrix.

    Row t is the topical vector of token t; rows past the document's length
    are zero; documents longer than pad_len are truncated.
    """
    if pad_len < 1:
        raise ConfigError(f"pad_len must be >= 1, got {pad_len}")
    out = np.zeros((pad_len, 2 * emb.dim))
    for t, (w, z) in enumerate(np.asarray(tagged_doc)[:pad_len]):
        out[t] = topical_word_vector(int(w), int(z), emb)
    return out


def observed_pairs(tagged):
    """Sorted distinct (word, topic) pairs occurring in a tagged corpus."""
    seen = set()
    for doc in tagged:
        for w, z in np.asarray(doc):
            seen.add((int(w), int(z)))
    return sorted(seen)


def nearest_topical(word, topic, emb, pairs, k):
    """Top-k words near (word, topic) in the concatenated space.

    Candidates are the given observed (word, topic) pairs; pairs containing
    the query word are excluded, and each candidate word is scored by its
    best-scoring pair.  Returns [(word_id, topic_id, cosine)] sorted by
    descending similarity, ties by (word, topic) id.
    """
    query = topical_word_vector(word, topic, emb)
    qn = np.linalg.norm(query)
    best = {}
    for w, z in pairs:
        if w == word:
            continue
        cand = topical_word_vector(w, z, emb)
        denom = qn * np.linalg.norm(cand)
        sim = float(query @ cand / denom) if denom > 0 else 0.0
        if w not in best or (sim, -z) > (best[w][1], -best[w][0]):
            best[w] = (z, sim)
    ranked = sorted(best.items(), key=lambda item: (-item[1][1], item[0], item[1][0]))
    return [(w, z, sim) for w, (z, sim) in ranked[:k]]


class TopicalWordEmbedding(BaseEstimator, TransformerMixin):
    """Skip-gram style trainer for joint word and topic vectors.

    fit() takes a tagged corpus: a list of (n_tokens, 2) integer arrays of
    (word_id, topic_id) rows with pads already removed.  transform() maps
    tagged documents to the mean of their topical word vectors.

    topic_init="zero" starts topic vectors at zero without consuming random
    draws; combined with freeze_topics=True the word-side training is then
    update-for-update identical to plain skip-gram, which anchors this
    implementation to the word2vec module.
    """

    def __init__(
        self,
        dim=128,
        window=5,
        negatives=5,
        epochs=5,
        learning_rate=0.025,
        power=0.75,
        n_topics=None,
        vocab_size=None,
        topic_init="uniform",
        freeze_topics=False,
        freeze_words=False,
        init_word_vectors=None,
        random_state=0,
    ):
        self.dim = dim
        self.window = window
        self.negatives = negatives
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.power = power
        self.n_topics = n_topics
        self.vocab_size = vocab_size
        self.topic_init = topic_init
        self.freeze_topics = freeze_topics
        self.freeze_words = freeze_words
        self.init_word_vectors = init_word_vectors
        self.random_state = random_state

    def _validate_tagged(self, tagged):
        docs = []
        for doc in tagged:
            doc = np.asarray(doc, dtype=np.int64)
            if doc.size == 0:
                continue
            if doc.ndim != 2 or doc.shape[1] != 2:
                raise ShapeError("tagged documents must be (n_tokens, 2) arrays")
            if np.any(doc[:, 0] == PAD_ID):
                raise ConfigError("tagged corpora must not contain pad tokens")
            if np.any(doc < 0):
                raise ConfigError("word and topic ids must be >= 0")
            docs.append(doc)
        if not docs:
            raise EmptyCorpusError("tagged corpus has no tokens")
        return docs

    def fit(self, X, y=None):
        if self.topic_init not in ("uniform", "zero"):
            raise ConfigError(f"topic_init must be 'uniform' or 'zero', got {self.topic_init!r}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        docs = self._validate_tagged(X)
        max_word = max(int(d[:, 0].max()) for d in docs)
        max_topic = max(int(d[:, 1].max()) for d in docs)
        vocab_size = self.vocab_size or max_word + 1
        vocab_size = max(vocab_size, N_SPECIAL + 1)
        n_topics = self.n_topics or max_topic + 1
        if max_topic >= n_topics:
            raise ConfigError(f"topic id {max_topic} out of range for n_topics={n_topics}")
        if max_word >= vocab_size:
            raise ConfigError(f"word id {max_word} out of range for vocab_size={vocab_size}")

        counts = np.zeros(vocab_size, dtype=np.int64)
        for d in docs:
            np.add.at(counts, d[:, 0], 1)
        counts[:N_SPECIAL] = 0

        rng = check_random_state(self.random_state)
        if self.init_word_vectors is not None:
            word_vectors = np.array(self.init_word_vectors, dtype=np.float64)
            if word_vectors.shape != (vocab_size, self.dim):
                raise ShapeError(
                    f"init_word_vectors shape {word_vectors.shape} != {(vocab_size, self.dim)}"
                )
        else:
            word_vectors = rng.uniform(-0.5 / self.dim, 0.5 / self.dim, (vocab_size, self.dim))
        word_vectors[PAD_ID] = 0.0
        if self.topic_init == "zero":
            topic_vectors = np.zeros((n_topics, self.dim))
        else:
            topic_vectors = rng.uniform(-0.5 / self.dim, 0.5 / self.dim, (n_topics, self.dim))
        self.embeddings_ = TopicalEmbeddings(
            word_vectors, topic_vectors, np.zeros((vocab_size, self.dim))
        )
        self.sampling_table_ = _table_from_counts(counts.astype(np.float64), self.power)
        self.epoch_losses_ = []
        if self.epochs == 0:
            return self

        total = self.epochs * sum(d.shape[0] for d in docs)
        progress = 0
        lr0 = self.learning_rate
        lr_floor = LR_FLOOR_FACTOR * lr0
        emb = self.embeddings_
        table = self.sampling_table_
        for _ in range(self.epochs):
            loss = 0.0
            for doc in docs:
                words = doc[:, 0]
                topics = doc[:, 1]
                n = words.size
                for t in range(n):
                    lr = lr0 + (lr_floor - lr0) * (progress / total)
                    progress += 1
                    lo, hi = max(0, t - self.window), min(n, t + self.window + 1)
                    center_w = int(words[t])
                    center_z = int(topics[t])
                    for j in range(lo, hi):
                        if j == t:
                            continue
                        u = int(words[j])
                        negs = table.sample(self.negatives, rng, exclude=u)
                        loss += self._pair_update(center_w, center_z, u, negs, lr)
            self.epoch_losses_.append(loss)
        return self

    def _pair_update(self, center_w, center_z, target, negatives, lr):
        """Word update then topic update against one target, same negatives."""
        emb = self.embeddings_
        targets = [target] + list(negatives)
        labels = np.zeros(len(targets))
        labels[0] = 1.0

        loss, grad_v, grad_thetas = _step_gradients(
            emb.word_vectors[center_w], emb.output_vectors[targets], labels
        )
        if not self.freeze_words:
            emb.word_vectors[center_w] -= lr * grad_v
        for i, t in enumerate(targets):
            emb.output_vectors[t] -= lr * grad_thetas[i]

        z_loss, grad_z, grad_thetas = _step_gradients(
            emb.topic_vectors[center_z], emb.output_vectors[targets], labels
        )
        if not self.freeze_topics:
            emb.topic_vectors[center_z] -= lr * grad_z
        for i, t in enumerate(targets):
            emb.output_vectors[t] -= lr * grad_thetas[i]
        return loss + z_loss

    def transform(self, X):
        """Mean topical word vector per tagged document (2D-wide rows)."""
        check_is_fitted(self, "embeddings_")
        emb = self.embeddings_
        out = np.zeros((len(X), 2 * emb.dim))
        for i, doc in enumerate(X):
            doc = np.asarray(doc, dtype=np.int64)
            if doc.size == 0:
                continue
            rows = np.concatenate(
                [emb.word_vectors[doc[:, 0]], emb.topic_vectors[doc[:, 1]]], axis=1
            )
            out[i] = rows.mean(axis=0)
        return out
