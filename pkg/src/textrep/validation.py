"""Input validation helpers used by the estimators."""

import numbers

import numpy as np

from .errors import NotFittedError, ShapeError


def check_random_state(seed):
    """Return a seeded numpy Generator.

    Accepts an int seed, an existing Generator (returned as is), or None
    (seed 0; this package is deterministic by default).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        seed = 0
    if not isinstance(seed, numbers.Integral):
        raise TypeError(f"random_state must be an int, Generator or None, got {seed!r}")
    return np.random.default_rng(int(seed))


def check_encoded_docs(X, n_special=0, vocab_size=None):
    """Validate a batch of encoded documents as a 2D int array.

    Accepts a 2D array or a sequence of equal-length id sequences.
    """
    X = np.asarray(X)
    if X.ndim != 2:
        raise ShapeError(f"encoded documents must be 2D (docs x positions), got shape {X.shape}")
    if not np.issubdtype(X.dtype, np.integer):
        raise ShapeError(f"encoded documents must hold integer ids, got dtype {X.dtype}")
    if X.size and X.min() < 0:
        raise ShapeError("encoded documents contain negative ids")
    if vocab_size is not None and X.size and X.max() >= vocab_size:
        raise ShapeError(f"id {X.max()} out of range for vocabulary of size {vocab_size}")
    del n_special  # reserved ids are callee conventions, nothing to check here
    return X


def check_matrix(X, name="X", dtype=None):
    """Validate a 2D float matrix, optionally casting to dtype."""
    X = np.asarray(X, dtype=dtype)
    if X.ndim != 2:
        raise ShapeError(f"{name} must be 2D, got shape {X.shape}")
    return X


def check_is_fitted(estimator, attribute):
    """Raise NotFittedError unless estimator has the given fitted attribute."""
    if getattr(estimator, attribute, None) is None:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted; call fit() before this method"
        )


def check_consistent_length(a, b, names=("X", "y")):
    if len(a) != len(b):
        raise ShapeError(f"{names[0]} and {names[1]} have different lengths: {len(a)} != {len(b)}")
