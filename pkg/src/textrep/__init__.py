"""Text-representation engine: word embeddings, topic models, topical word
embeddings, a convolutional variational document encoder, and classifier
evaluation, trained from scratch on numpy.

The high-level flow mirrors the package's command line: preprocess a
labeled corpus into padded id matrices, train word vectors and an LDA topic
model, combine them into topical word embeddings, feed per-document
embedding matrices through the CNN-VAE (or CNN-AE) encoder, and evaluate
the resulting document vectors with KNN, random forest and linear SVM.
"""

import os

# multi-threaded BLAS reductions reorder float sums; pin them so repeated
# runs produce byte-identical artifacts (respects explicit user settings)
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")
del _var, os

from .classify import (
    KnnClassifier,
    LinearSvm,
    RandomForest,
    compute_metrics,
    confusion_matrix,
    evaluate_representation,
)
from .cnnvae import CnnVae, kl_divergence, reconstruction_loss, reparameterize
from .corpus import (
    PAD_ID,
    UNK_ID,
    DocumentEncoder,
    Vocabulary,
    build_vocabulary,
    encode_corpus,
    encode_document,
    load_labeled_corpus,
    split_corpus,
)
from .errors import TextRepError
from .lda import GibbsLda, select_topic_count
from .twe import TopicalWordEmbedding, topical_word_vector
from .word2vec import EmbeddingMatrix, Word2Vec, average_document_vector, nearest_neighbors

__version__ = "0.1.0"

__all__ = [
    "PAD_ID",
    "UNK_ID",
    "CnnVae",
    "DocumentEncoder",
    "EmbeddingMatrix",
    "GibbsLda",
    "KnnClassifier",
    "LinearSvm",
    "RandomForest",
    "TextRepError",
    "TopicalWordEmbedding",
    "Vocabulary",
    "Word2Vec",
    "average_document_vector",
    "build_vocabulary",
    "compute_metrics",
    "confusion_matrix",
    "encode_corpus",
    "encode_document",
    "evaluate_representation",
    "kl_divergence",
    "load_labeled_corpus",
    "nearest_neighbors",
    "reconstruction_loss",
    "reparameterize",
    "select_topic_count",
    "split_corpus",
    "topical_word_vector",
    "__version__",
]
