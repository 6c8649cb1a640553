"""Synthetic corpora with known structure, used by tests and the bundled
sample data.

Each generator is a pure function of its seed.  The corpora are small
enough to train on in seconds but carry a planted signal (clusters, topics,
a polysemous pseudo-word, or class-defining token order) that the relevant
model must recover.
"""

import numpy as np

from .corpus import N_SPECIAL


def two_cluster_corpus(n_docs=500, words_per_cluster=20, doc_len=20, seed=0):
    """Documents drawn from one of two disjoint word pools.

    Returns (docs, labels, clusters): token-string documents, cluster labels
    ("c0"/"c1"), and the two pools as lists of token strings.  Words from
    the same pool co-occur constantly and never cross pools, so trained
    embeddings should separate the pools.
    """
    rng = np.random.default_rng(seed)
    clusters = [
        [f"a{i}" for i in range(words_per_cluster)],
        [f"b{i}" for i in range(words_per_cluster)],
    ]
    docs, labels = [], []
    for d in range(n_docs):
        c = d % 2
        pool = clusters[c]
        idx = rng.integers(0, len(pool), doc_len)
        docs.append([pool[i] for i in idx])
        labels.append(f"c{c}")
    return docs, labels, clusters


def planted_topic_corpus(
    n_topics=2, n_real_words=10, n_docs=200, doc_len=50, seed=0, topic_sharpness=0.2
):
    """Encoded corpus sampled from a known topic model.

    Word ids start after the special tokens.  Each topic owns an equal slice
    of the vocabulary and puts 90% of its mass there, spread uniformly, with
    the rest uniform over the other words.  Document mixtures come from a
    sharp Dirichlet so most documents leaning to one topic exist alongside
    mixed ones.  Returns (X, phi) where X is (n_docs, doc_len) int32 with no
    pads and phi the true (n_topics, n_special + n_real_words) topic-word
    matrix whose special-token columns are zero.
    """
    rng = np.random.default_rng(seed)
    vocab_size = N_SPECIAL + n_real_words
    phi = np.zeros((n_topics, vocab_size))
    per_topic = n_real_words // n_topics
    for k in range(n_topics):
        own = np.arange(N_SPECIAL + k * per_topic, N_SPECIAL + (k + 1) * per_topic)
        phi[k, N_SPECIAL:] = 0.1 / (n_real_words - own.size)
        phi[k, own] = 0.9 / own.size
    X = np.zeros((n_docs, doc_len), dtype=np.int32)
    for d in range(n_docs):
        theta = rng.dirichlet(np.full(n_topics, topic_sharpness))
        z = rng.choice(n_topics, size=doc_len, p=theta)
        for t in range(doc_len):
            X[d, t] = rng.choice(vocab_size, p=phi[z[t]])
    return X, phi


def polysemy_tagged_corpus(
    n_docs=200, context_words=15, doc_len=20, pseudo_rate=0.25, seed=0
):
    """Topic-tagged corpus with one pseudo-word used in two senses.

    Half the documents mix the pseudo-word into context pool A (all tokens
    tagged topic 0), half into pool B (topic 1).  The pools are disjoint, so
    the pseudo-word's two topical vectors should pick up different
    neighborhoods.  Returns (tagged, pseudo_id, pool_a_ids, pool_b_ids)
    where tagged is a list of (doc_len, 2) int arrays of (word, topic) rows.
    """
    rng = np.random.default_rng(seed)
    pseudo = N_SPECIAL
    pool_a = list(range(pseudo + 1, pseudo + 1 + context_words))
    pool_b = list(range(pool_a[-1] + 1, pool_a[-1] + 1 + context_words))
    tagged = []
    for d in range(n_docs):
        topic = d % 2
        pool = pool_a if topic == 0 else pool_b
        words = rng.choice(pool, size=doc_len)
        pseudo_at = rng.random(doc_len) < pseudo_rate
        words[pseudo_at] = pseudo
        doc = np.stack([words, np.full(doc_len, topic)], axis=1).astype(np.int64)
        tagged.append(doc)
    return tagged, pseudo, pool_a, pool_b


def ordered_pair_corpus(
    n_docs=2000,
    n_pairs=10,
    units_per_doc=15,
    pairs_per_doc=1,
    filler_words=40,
    filler_rate=0.8,
    noise_rate=0.0,
    seed=7,
):
    """Four-class corpus where class = (word pool, token order).

    Two disjoint pools each hold n_pairs (left, right) token pairs.  Each
    document picks pairs_per_doc pairs from its class's pool and opens with
    units_per_doc repetitions of them, emitted left-right for classes
    alpha/gamma and right-left for beta/delta, then closes with a block of
    random filler tokens shared across classes.  Bag-of-words statistics
    cannot separate alpha from beta (or gamma from delta) -- only token
    order can -- while the filler block injects class-independent variance.
    Repeating few pairs at fixed positions ties most of each document's
    content to a couple of latent choices (pair identity plus order).
    noise_rate flips the order of that fraction of units, blurring the
    class signal (0.5 erases it).  Returns (docs, labels) as token-string
    lists.
    """
    rng = np.random.default_rng(seed)
    pools = [
        [(f"p{i}", f"r{i}") for i in range(n_pairs)],
        [(f"q{i}", f"s{i}") for i in range(n_pairs)],
    ]
    fillers = [f"f{i}" for i in range(filler_words)]
    class_names = ["alpha", "beta", "gamma", "delta"]
    docs, labels = [], []
    for d in range(n_docs):
        cls = d % 4
        pool = pools[cls // 2]
        reverse = cls % 2 == 1
        chosen = rng.choice(n_pairs, size=pairs_per_doc, replace=False)
        tokens = []
        tail = []
        for u in range(units_per_doc):
            left, right = pool[chosen[u % pairs_per_doc]]
            flip = reverse != (rng.random() < noise_rate)
            tokens.extend([right, left] if flip else [left, right])
            n_fill = int(filler_rate) + (rng.random() < filler_rate % 1)
            for _ in range(n_fill):
                tail.append(fillers[rng.integers(0, filler_words)])
        docs.append(tokens + tail)
        labels.append(class_names[cls])
    return docs, labels


def write_corpus_tsv(path, docs, labels, sep="\t"):
    """Write (label, tokens) rows in the corpus file format."""
    with open(path, "w", encoding="utf-8") as fh:
        for label, tokens in zip(labels, docs):
            fh.write(f"{label}{sep}{' '.join(tokens)}\n")
