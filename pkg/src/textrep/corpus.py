"""Corpus loading, vocabulary construction and document encoding.

The input format is one document per line, ``label<TAB>token token ...``;
tokenization/segmentation happens upstream of this package.  Vocabularies
reserve id 0 for padding and id 1 for unknown tokens; real tokens occupy ids
2..V-1 in descending frequency order with lexicographic tie-breaks, so a
vocabulary built twice from the same corpus is identical.
"""

from dataclasses import dataclass, field
from collections import Counter

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import (
    CorpusFormatError,
    EmptyCorpusError,
    EmptyVocabularyError,
    StratificationError,
    ConfigError,
)
from .validation import check_random_state

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
N_SPECIAL = 2


@dataclass
class Vocabulary:
    """Dense token<->id map with per-id corpus frequencies.

    ``tokens[0]`` and ``tokens[1]`` are the pad and unknown sentinels with
    count 0; the remaining tokens are sorted by descending count.
    """

    tokens: list
    counts: np.ndarray
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self._index is None:
            self._index = {t: i for i, t in enumerate(self.tokens)}

    @property
    def size(self):
        return len(self.tokens)

    def id(self, token):
        """Map a token to its id, or the unknown id if absent."""
        return self._index.get(token, UNK_ID)

    def __contains__(self, token):
        return token in self._index


@dataclass
class LabeledDocument:
    """A class id plus an encoded (padded) token id sequence."""

    label: int
    tokens: np.ndarray


@dataclass
class CorpusSplit:
    train: list
    test: list
    validation: list

    def __iter__(self):
        return iter((self.train, self.test, self.validation))


def load_labeled_corpus(path, sep="\t"):
    """Read ``label<sep>token token ...`` lines into (label, tokens) pairs.

    Empty lines are skipped; a nonempty line without the separator raises
    CorpusFormatError with its 1-based line number.
    """
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            if sep not in line:
                raise CorpusFormatError(
                    f"expected 'label{sep!r}tokens', got {line[:50]!r}", line_number=number
                )
            label, body = line.split(sep, 1)
            entries.append((label, body.split(" ") if body else []))
    if not entries:
        raise EmptyCorpusError(f"{path} contains no documents")
    return entries


def build_vocabulary(docs, max_vocab, stopwords=frozenset()):
    """Count tokens (stopwords removed first) and keep the top max_vocab - 2.

    Frequency ties break lexicographically.  Tokens outside the kept set map
    to the unknown id at encoding time.
    """
    if max_vocab < N_SPECIAL + 1:
        raise ConfigError(f"max_vocab must be at least {N_SPECIAL + 1}, got {max_vocab}")
    counter = Counter()
    for doc in docs:
        counter.update(t for t in doc if t not in stopwords)
    if not counter:
        raise EmptyVocabularyError("no tokens survive stopword filtering")
    ranked = sorted(counter.items(), key=lambda item: (-item[1], item[0]))
    kept = ranked[: max_vocab - N_SPECIAL]
    tokens = [PAD_TOKEN, UNK_TOKEN] + [t for t, _ in kept]
    counts = np.concatenate([[0, 0], [c for _, c in kept]]).astype(np.int64)
    return Vocabulary(tokens=tokens, counts=counts)


def encode_document(tokens, vocab, pad_len):
    """Encode tokens as ids, truncating at the tail and right-padding.

    Total over any token sequence: unknown tokens map to the unknown id,
    and the output always has exactly pad_len entries.
    """
    if pad_len < 1:
        raise ConfigError(f"pad_len must be >= 1, got {pad_len}")
    ids = np.full(pad_len, PAD_ID, dtype=np.int32)
    for i, token in enumerate(tokens[:pad_len]):
        ids[i] = vocab.id(token)
    return ids


def encode_corpus(docs, vocab, pad_len):
    """Encode a list of token sequences into a docs x pad_len id matrix."""
    out = np.full((len(docs), pad_len), PAD_ID, dtype=np.int32)
    for i, doc in enumerate(docs):
        out[i] = encode_document(doc, vocab, pad_len)
    return out


def encode_labels(labels):
    """Map label strings to dense ids; classes are sorted lexicographically."""
    classes = sorted(set(labels))
    index = {c: i for i, c in enumerate(classes)}
    return np.asarray([index[label] for label in labels], dtype=np.int64), classes


def split_corpus(docs, fractions, seed):
    """Stratified train/test/validation split, deterministic for a seed.

    Fractions must all be positive and sum to 1; each class contributes to
    each split in proportion (largest-remainder rounding, off by at most one
    document per split), and every class reaches every split at least once.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3:
        raise ConfigError(f"expected (train, test, validation) fractions, got {fractions}")
    if any(f <= 0 for f in fractions):
        raise ConfigError(f"all split fractions must be positive, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got sum {sum(fractions)!r}")

    by_class = {}
    for i, doc in enumerate(docs):
        by_class.setdefault(doc.label, []).append(i)

    rng = check_random_state(seed)
    splits = ([], [], [])
    for label in sorted(by_class):
        indices = np.asarray(by_class[label])
        if len(indices) < len(fractions):
            raise StratificationError(
                f"class {label} has {len(indices)} documents, fewer than the {len(fractions)} splits"
            )
        indices = indices[rng.permutation(len(indices))]
        sizes = _largest_remainder(len(indices), fractions)
        start = 0
        for split, size in zip(splits, sizes):
            split.extend(int(i) for i in indices[start : start + size])
            start += size

    return CorpusSplit(
        train=[docs[i] for i in splits[0]],
        test=[docs[i] for i in splits[1]],
        validation=[docs[i] for i in splits[2]],
    )


def _largest_remainder(total, fractions):
    """Integer allocation of total by fractions; every cell gets >= 1."""
    exact = [total * f for f in fractions]
    sizes = [int(np.floor(e)) for e in exact]
    remainders = sorted(
        range(len(fractions)), key=lambda i: (-(exact[i] - sizes[i]), i)
    )
    for i in range(total - sum(sizes)):
        sizes[remainders[i % len(fractions)]] += 1
    # extreme fractions can starve a split; rebalance from the largest
    for i, size in enumerate(sizes):
        if size == 0:
            donor = int(np.argmax(sizes))
            sizes[donor] -= 1
            sizes[i] += 1
    return sizes


class DocumentEncoder(BaseEstimator, TransformerMixin):
    """Vocabulary builder and document encoder with a fit/transform surface.

    fit() builds the frequency-cutoff vocabulary from token documents;
    transform() encodes token documents into a docs x pad_len id matrix.
    """

    def __init__(self, max_vocab=10000, pad_len=100, stopwords=None):
        self.max_vocab = max_vocab
        self.pad_len = pad_len
        self.stopwords = stopwords

    def fit(self, X, y=None):
        stopwords = frozenset(self.stopwords) if self.stopwords else frozenset()
        self.vocabulary_ = build_vocabulary(X, self.max_vocab, stopwords)
        return self

    def transform(self, X):
        return encode_corpus(X, self.vocabulary_, self.pad_len)
