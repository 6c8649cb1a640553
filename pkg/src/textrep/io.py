"""File formats shared by the trainers.

All writers are byte-deterministic: JSON is emitted with sorted keys and no
whitespace variation, binary blobs are raw little-endian arrays, and nothing
embeds timestamps.  Rerunning a stage with identical inputs must reproduce
identical bytes.

Formats:

* matrix: raw little-endian array at ``path`` plus a JSON sidecar at
  ``path + ".json"`` recording dtype and shape.  Round-trips bit-exactly.
* embedding text: header line ``V D`` then ``token v1 ... vD`` per row with
  6 significant digits.
* vocabulary: header line ``V`` then ``token<TAB>count`` per id.
* stopwords: one token per line.
* tagged corpus: one document per line of ``wordid:topicid`` tokens.
"""

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import CorpusFormatError, ShapeError

_DTYPES = {
    "float32": np.dtype("<f4"),
    "float64": np.dtype("<f8"),
    "int32": np.dtype("<i4"),
}


def _sidecar(path):
    return Path(str(path) + ".json")


def dump_json(obj, path):
    """Write canonical (sorted-key, compact) JSON followed by a newline."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def save_matrix(path, matrix):
    """Write a matrix as a raw little-endian blob plus JSON sidecar.

    float64 input is stored as float64; float32 and int32 likewise.  The
    round trip load_matrix(save_matrix(m)) is bit-exact for these dtypes.
    """
    matrix = np.ascontiguousarray(matrix)
    for name, dt in _DTYPES.items():
        if matrix.dtype == dt or matrix.dtype == dt.newbyteorder(">").newbyteorder("="):
            dtype_name = name
            break
    else:
        raise ShapeError(f"unsupported matrix dtype {matrix.dtype}; use float32/float64/int32")
    out = matrix.astype(_DTYPES[dtype_name], copy=False)
    Path(path).write_bytes(out.tobytes(order="C"))
    dump_json({"dtype": dtype_name, "shape": list(out.shape), "order": "C"}, _sidecar(path))


def load_matrix(path):
    header = load_json(_sidecar(path))
    dtype = _DTYPES[header["dtype"]]
    shape = tuple(header["shape"])
    data = np.frombuffer(Path(path).read_bytes(), dtype=dtype)
    expected = int(np.prod(shape)) if shape else 1
    if data.size != expected:
        raise ShapeError(f"{path}: expected {expected} values for shape {shape}, found {data.size}")
    return data.reshape(shape).copy()


def save_embeddings_text(path, tokens, vectors):
    """Write the ``V D`` header format with 6 significant digits per value."""
    vectors = np.asarray(vectors)
    if vectors.ndim != 2 or len(tokens) != vectors.shape[0]:
        raise ShapeError(
            f"tokens ({len(tokens)}) and vectors ({vectors.shape}) do not align"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{vectors.shape[0]} {vectors.shape[1]}\n")
        for token, row in zip(tokens, vectors):
            fh.write(token + " " + " ".join(f"{v:.6g}" for v in row) + "\n")


def load_embeddings_text(path):
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().split()
        if len(first) != 2:
            raise CorpusFormatError(f"{path}: malformed embedding header {first!r}")
        n_rows, dim = int(first[0]), int(first[1])
        tokens = []
        vectors = np.empty((n_rows, dim), dtype=np.float64)
        for i in range(n_rows):
            parts = fh.readline().rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise CorpusFormatError(f"{path}: row {i} has {len(parts) - 1} values, expected {dim}")
            tokens.append(parts[0])
            vectors[i] = [float(v) for v in parts[1:]]
    return tokens, vectors


def save_vocabulary(path, vocab):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(vocab.tokens)}\n")
        for token, count in zip(vocab.tokens, vocab.counts):
            fh.write(f"{token}\t{int(count)}\n")


def load_vocabulary(path):
    from .corpus import Vocabulary

    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        try:
            size = int(header)
        except ValueError:
            raise CorpusFormatError(f"{path}: vocabulary header {header!r} is not a count")
        tokens, counts = [], []
        for i in range(size):
            line = fh.readline().rstrip("\n")
            if "\t" not in line:
                raise CorpusFormatError(f"{path}: vocabulary row {i} lacks a tab")
            token, count = line.split("\t", 1)
            tokens.append(token)
            counts.append(int(count))
    return Vocabulary(tokens=tokens, counts=np.asarray(counts, dtype=np.int64))


def load_stopwords(path):
    words = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            token = line.strip()
            if token:
                words.add(token)
    return words


def save_tagged_corpus(path, word_ids, topic_ids):
    """One document per line of ``wordid:topicid`` space-separated tokens.

    Documents may have different lengths; a document with no tokens writes
    an empty line so document counts survive the round trip.
    """
    if len(word_ids) != len(topic_ids):
        raise ShapeError(
            f"{len(word_ids)} word rows but {len(topic_ids)} topic rows"
        )
    with open(path, "w", encoding="utf-8") as fh:
        for w_row, t_row in zip(word_ids, topic_ids):
            if len(w_row) != len(t_row):
                raise ShapeError(
                    f"document has {len(w_row)} words but {len(t_row)} topics"
                )
            fh.write(" ".join(f"{int(w)}:{int(t)}" for w, t in zip(w_row, t_row)) + "\n")


def load_tagged_corpus(path):
    """Read a tagged corpus back as a list of (length, 2) int32 arrays.

    Column 0 holds word ids, column 1 topic ids; an empty line becomes an
    empty (0, 2) document.
    """
    docs = []
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.rstrip("\n")
            if not line:
                docs.append(np.empty((0, 2), dtype=np.int32))
                continue
            pairs = [tok.split(":") for tok in line.split(" ")]
            if any(len(p) != 2 for p in pairs):
                raise CorpusFormatError(f"{path}: malformed wordid:topicid token", line_number=i + 1)
            docs.append(np.asarray([[int(p[0]), int(p[1])] for p in pairs], dtype=np.int32))
    return docs


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
