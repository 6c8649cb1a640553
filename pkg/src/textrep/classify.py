"""Downstream evaluation: KNN, random forest and linear SVM classifiers over
document vectors, confusion-matrix metrics, and multi-run aggregation.

The classifiers are deliberately small, deterministic implementations with
fully specified tie rules, so that evaluation runs are reproducible down to
the individual prediction:

* KNN: Euclidean distance; distance ties resolve to the lower training
  index, vote ties to the smaller summed neighbor distance, then the lower
  label id.
* Random forest: bootstrap-sampled CART trees split on the Gini criterion
  over a random feature subset per node; forest votes tie to the lower
  label id.
* Linear SVM: one-vs-rest hinge loss minimized by stochastic subgradient
  descent with learning rate 1/(lambda*t); argmax ties to the lower label id.

Metrics follow the one-vs-rest convention: each class's TP/FP/FN/TN come
from the full confusion matrix, macro metrics are unweighted class means,
and micro accuracy is the diagonal total over the sample count.  Undefined
ratios (zero denominators) are reported as 0 and flagged.
"""

import csv

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, clone

from .errors import ConfigError, ShapeError
from .validation import check_consistent_length, check_is_fitted, check_matrix, check_random_state

DISPERSION_NOTE = "stddev is the across-resampling-run standard deviation (ddof=0) of macro metrics"
ZERO_DENOMINATOR_NOTE = "precision, recall and F1 with zero denominators are reported as 0"


# -- k nearest neighbors --------------------------------------------------


class KnnClassifier(BaseEstimator, ClassifierMixin):
    """Majority vote over the k nearest training points (Euclidean)."""

    def __init__(self, k=5):
        self.k = k

    def fit(self, X, y):
        X = check_matrix(X, "X")
        y = np.asarray(y)
        check_consistent_length(X, y)
        if X.shape[0] == 0:
            raise ConfigError("cannot fit on an empty training set")
        if not 1 <= self.k <= X.shape[0]:
            raise ConfigError(f"k={self.k} must be in [1, {X.shape[0]}]")
        self.train_X_ = X.astype(np.float64)
        self.train_y_ = y
        self.classes_ = np.unique(y)
        return self

    def predict(self, X):
        check_is_fitted(self, "train_X_")
        X = check_matrix(X, "X")
        return np.array([self._predict_one(q) for q in X.astype(np.float64)])

    def _predict_one(self, q):
        diff = self.train_X_ - q
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        # stable sort: equal distances keep ascending training-index order
        order = np.argsort(dist, kind="stable")[: self.k]
        labels = self.train_y_[order]
        votes = {}
        sums = {}
        for lab, d in zip(labels, dist[order]):
            lab = lab.item()
            votes[lab] = votes.get(lab, 0) + 1
            sums[lab] = sums.get(lab, 0.0) + d
        best = max(votes.values())
        tied = [lab for lab, v in votes.items() if v == best]
        tied.sort(key=lambda lab: (sums[lab], lab))
        return tied[0]


def knn_predict(train_vectors, train_labels, query, k):
    """Label of one query point under the class's tie rules."""
    model = KnnClassifier(k=k).fit(train_vectors, train_labels)
    return model.predict(np.asarray(query)[None])[0]


# -- random forest --------------------------------------------------------


class _Tree:
    """CART tree stored as parallel arrays; leaves carry a label."""

    __slots__ = ("feature", "threshold", "left", "right", "label")

    def __init__(self):
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.label = []

    def add_node(self):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.label.append(-1)
        return len(self.feature) - 1

    def predict_one(self, x):
        node = 0
        while self.feature[node] >= 0:
            node = self.left[node] if x[self.feature[node]] <= self.threshold[node] else self.right[node]
        return self.label[node]


def _best_split(X, y, feature_order, max_features, n_classes):
    """Lowest weighted-Gini split over a random feature subset.

    Scans features in the given random order and stops once max_features
    splittable features were scored; constant features do not count, so a
    node keeps looking until it finds enough usable features or runs out.
    Returns (feature, threshold) or None if every feature is constant.
    """
    n = y.size
    best = None
    best_score = np.inf
    scored = 0
    onehot = np.zeros((n, n_classes))
    for feat in feature_order:
        col = X[:, feat]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        boundaries = np.nonzero(xs[1:] > xs[:-1])[0] + 1
        if boundaries.size == 0:
            continue
        onehot[:] = 0
        onehot[np.arange(n), y[order]] = 1.0
        cum = np.cumsum(onehot, axis=0)
        left = cum[boundaries - 1]
        right = cum[-1] - left
        nl = boundaries.astype(np.float64)
        nr = n - nl
        gini_l = 1.0 - np.sum(left**2, axis=1) / nl**2
        gini_r = 1.0 - np.sum(right**2, axis=1) / nr**2
        score = (nl * gini_l + nr * gini_r) / n
        i = int(np.argmin(score))
        if score[i] < best_score:
            best_score = score[i]
            b = boundaries[i]
            best = (feat, (xs[b - 1] + xs[b]) / 2.0)
        scored += 1
        if scored >= max_features:
            break
    return best


class RandomForest(BaseEstimator, ClassifierMixin):
    """Bootstrap CART ensemble, Gini criterion, majority vote.

    Trees grow to purity (nodes with at least 2 samples and any usable
    feature keep splitting).  max_features=None takes floor(sqrt(dim))
    random features per split.  Vote ties go to the lower label id.
    """

    def __init__(self, n_trees=50, max_features=None, bootstrap=True, random_state=0):
        self.n_trees = n_trees
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.random_state = random_state

    def fit(self, X, y):
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be >= 1, got {self.n_trees}")
        X = check_matrix(X, "X").astype(np.float64)
        y = np.asarray(y)
        check_consistent_length(X, y)
        if X.shape[0] == 0:
            raise ConfigError("cannot fit on an empty training set")
        self.classes_, y_ids = np.unique(y, return_inverse=True)
        n, dim = X.shape
        max_features = self.max_features or max(1, int(np.sqrt(dim)))
        rng = check_random_state(self.random_state)
        self.trees_ = []
        for _ in range(self.n_trees):
            idx = rng.integers(0, n, n) if self.bootstrap else np.arange(n)
            self.trees_.append(self._grow(X[idx], y_ids[idx], rng, max_features))
        return self

    def _grow(self, X, y, rng, max_features):
        tree = _Tree()
        n_classes = len(self.classes_)
        root = tree.add_node()
        stack = [(root, np.arange(X.shape[0]))]
        while stack:
            node, idx = stack.pop()
            ys = y[idx]
            counts = np.bincount(ys, minlength=n_classes)
            if idx.size < 2 or counts.max() == idx.size:
                tree.label[node] = int(np.argmax(counts))
                continue
            split = _best_split(X[idx], ys, rng.permutation(X.shape[1]), max_features, n_classes)
            if split is None:
                tree.label[node] = int(np.argmax(counts))
                continue
            feat, thr = split
            tree.feature[node] = feat
            tree.threshold[node] = thr
            mask = X[idx, feat] <= thr
            tree.left[node] = tree.add_node()
            tree.right[node] = tree.add_node()
            stack.append((tree.left[node], idx[mask]))
            stack.append((tree.right[node], idx[~mask]))
        return tree

    def predict(self, X):
        check_is_fitted(self, "trees_")
        X = check_matrix(X, "X").astype(np.float64)
        out = np.empty(X.shape[0], dtype=self.classes_.dtype)
        for i, x in enumerate(X):
            votes = np.zeros(len(self.classes_), dtype=np.int64)
            for tree in self.trees_:
                votes[tree.predict_one(x)] += 1
            out[i] = self.classes_[int(np.argmax(votes))]
        return out


def train_random_forest(train_vectors, labels, trees=50, max_features=None, seed=0, bootstrap=True):
    return RandomForest(
        n_trees=trees, max_features=max_features, bootstrap=bootstrap, random_state=seed
    ).fit(train_vectors, labels)


def rf_predict(forest, query):
    return forest.predict(np.asarray(query)[None])[0]


# -- linear SVM -----------------------------------------------------------


class LinearSvm(BaseEstimator, ClassifierMixin):
    """One-vs-rest linear SVM trained by stochastic subgradient descent.

    Each class head minimizes the L2-regularized hinge loss with step size
    1/(regularization * t) and projection onto the ball of radius
    1/sqrt(regularization).  The intercept is an augmented constant feature
    (weights_ column -1), so it is regularized like the rest: pushing
    regularization to infinity drives every decision value to 0 and
    predictions fall to the lowest label id.  Argmax ties resolve to the
    lower label id.
    """

    def __init__(self, epochs=20, regularization=0.001, random_state=0):
        self.epochs = epochs
        self.regularization = regularization
        self.random_state = random_state

    def fit(self, X, y):
        if self.epochs < 1 or self.regularization <= 0:
            raise ConfigError("epochs must be >= 1 and regularization > 0")
        X = check_matrix(X, "X").astype(np.float64)
        y = np.asarray(y)
        check_consistent_length(X, y)
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ConfigError("linear SVM needs at least 2 classes")
        lam = self.regularization
        n = X.shape[0]
        radius = 1.0 / np.sqrt(lam)
        X = np.hstack([X, np.ones((n, 1))])
        self.weights_ = np.zeros((len(self.classes_), X.shape[1]))
        seed = 0 if self.random_state is None else self.random_state
        for ci, cls in enumerate(self.classes_):
            target = np.where(y == cls, 1.0, -1.0)
            rng = np.random.default_rng([seed, ci])
            w = self.weights_[ci]
            t = 0
            for _ in range(self.epochs):
                for i in rng.permutation(n):
                    t += 1
                    eta = 1.0 / (lam * t)
                    violated = target[i] * (w @ X[i]) < 1.0
                    w *= 1.0 - eta * lam
                    if violated:
                        w += eta * target[i] * X[i]
                    # project onto the ball the optimum is known to lie in
                    norm = np.linalg.norm(w)
                    if norm > radius:
                        w *= radius / norm
        return self

    def decision_function(self, X):
        check_is_fitted(self, "weights_")
        X = check_matrix(X, "X").astype(np.float64)
        X = np.hstack([X, np.ones((X.shape[0], 1))])
        return X @ self.weights_.T

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]


def train_linear_svm(train_vectors, labels, epochs=20, regularization=0.001, seed=0):
    return LinearSvm(epochs=epochs, regularization=regularization, random_state=seed).fit(
        train_vectors, labels
    )


def svm_predict(model, query):
    return model.predict(np.asarray(query)[None])[0]


# -- metrics --------------------------------------------------------------


def confusion_matrix(actual, predicted, n_classes):
    """C x C counts with rows = actual class, columns = predicted class."""
    actual = np.asarray(actual, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    check_consistent_length(actual, predicted)
    out = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(out, (actual, predicted), 1)
    return out


def _ratio(num, denom, flags, name):
    if denom == 0:
        flags.append(name)
        return 0.0
    return num / denom


def compute_metrics(confusion):
    """Per-class one-vs-rest metrics plus macro and micro summaries.

    Returns a JSON-ready dict.  Per class c: TP is the diagonal entry, FP
    the rest of column c, FN the rest of row c, TN everything else;
    accuracy=(TP+TN)/total, recall=TP/(TP+FN), precision=TP/(TP+FP),
    F1=2PR/(P+R).  Zero denominators yield 0 and a flag on that class.
    """
    confusion = np.asarray(confusion)
    if confusion.ndim != 2 or confusion.shape[0] != confusion.shape[1]:
        raise ShapeError(f"confusion matrix must be square, got {confusion.shape}")
    if np.any(confusion < 0) or confusion.dtype.kind not in "iu":
        raise ConfigError("confusion matrix must hold nonnegative integers")
    total = int(confusion.sum())
    if total == 0:
        raise ConfigError("confusion matrix is all zeros")
    per_class = []
    for c in range(confusion.shape[0]):
        tp = int(confusion[c, c])
        fp = int(confusion[:, c].sum()) - tp
        fn = int(confusion[c].sum()) - tp
        tn = total - tp - fp - fn
        flags = []
        precision = _ratio(tp, tp + fp, flags, "precision_undefined")
        recall = _ratio(tp, tp + fn, flags, "recall_undefined")
        f1 = _ratio(2 * precision * recall, precision + recall, flags, "f1_undefined")
        per_class.append(
            {
                "label": c,
                "tp": tp,
                "fp": fp,
                "fn": fn,
                "tn": tn,
                "accuracy": (tp + tn) / total,
                "precision": precision,
                "recall": recall,
                "f1": f1,
                "flags": flags,
            }
        )
    macro = {
        metric: float(np.mean([row[metric] for row in per_class]))
        for metric in ("accuracy", "precision", "recall", "f1")
    }
    return {
        "per_class": per_class,
        "macro": macro,
        "micro_accuracy": float(np.trace(confusion)) / total,
        "total": total,
        "conventions": [ZERO_DENOMINATOR_NOTE],
    }


# -- multi-run evaluation -------------------------------------------------


def stratified_indices(labels, test_fraction, rng):
    """Per-class random train/test partition; every class keeps at least one
    sample on each side."""
    labels = np.asarray(labels)
    train, test = [], []
    for cls in np.unique(labels):
        idx = np.nonzero(labels == cls)[0]
        if idx.size < 2:
            raise ConfigError(f"class {cls} has fewer than 2 samples; cannot resample")
        perm = idx[rng.permutation(idx.size)]
        n_test = int(round(test_fraction * idx.size))
        n_test = min(max(n_test, 1), idx.size - 1)
        test.append(perm[:n_test])
        train.append(perm[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def evaluate_representation(
    vectors,
    labels,
    classifier,
    runs=5,
    test_fraction=0.25,
    seed=0,
    representation_name="",
    classifier_name=None,
):
    """Stratified resampling evaluation of one document representation.

    Each run draws a fresh stratified train/test partition, fits a clone of
    the classifier, and scores the test predictions.  Reported means and
    standard deviations (ddof=0; runs=1 gives 0) aggregate the macro
    metrics plus micro accuracy across runs.
    """
    if runs < 1:
        raise ConfigError(f"runs must be >= 1, got {runs}")
    vectors = check_matrix(vectors, "vectors")
    labels = np.asarray(labels)
    check_consistent_length(vectors, labels)
    n_classes = int(labels.max()) + 1
    run_reports = []
    series = {m: [] for m in ("accuracy", "precision", "recall", "f1", "micro_accuracy")}
    for r in range(runs):
        rng = np.random.default_rng([0 if seed is None else seed, r])
        train_idx, test_idx = stratified_indices(labels, test_fraction, rng)
        model = clone(classifier)
        model.fit(vectors[train_idx], labels[train_idx])
        predicted = model.predict(vectors[test_idx])
        report = compute_metrics(confusion_matrix(labels[test_idx], predicted, n_classes))
        run_reports.append(report)
        for m in ("accuracy", "precision", "recall", "f1"):
            series[m].append(report["macro"][m])
        series["micro_accuracy"].append(report["micro_accuracy"])
    metrics = {
        name: {"mean": float(np.mean(vals)), "stddev": float(np.std(vals))}
        for name, vals in series.items()
    }
    return {
        "representation": representation_name,
        "classifier": classifier_name or type(classifier).__name__,
        "runs": runs,
        "test_fraction": test_fraction,
        "metrics": metrics,
        "run_reports": run_reports,
        "conventions": [DISPERSION_NOTE, ZERO_DENOMINATOR_NOTE],
    }


def accuracy_scorer(classifier, test_fraction=0.25, seed=0):
    """Build a `(vectors, labels) -> accuracy` hook for model-selection curves.

    The hook runs one stratified split, fits a clone of the classifier on
    the train side and returns micro accuracy on the test side.
    Deterministic for a fixed seed.
    """

    def score(vectors, labels):
        report = evaluate_representation(
            vectors, labels, classifier, runs=1, test_fraction=test_fraction, seed=seed
        )
        return report["metrics"]["micro_accuracy"]["mean"]

    return score


def report_rows(report):
    """Flatten an evaluation report into representation,classifier,metric rows."""
    return [
        [report["representation"], report["classifier"], name, vals["mean"], vals["stddev"]]
        for name, vals in sorted(report["metrics"].items())
    ]


def write_report_csv(reports, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["representation", "classifier", "metric", "mean", "stddev"])
        for report in reports:
            for row in report_rows(report):
                writer.writerow(row[:3] + [f"{row[3]:.6f}", f"{row[4]:.6f}"])
