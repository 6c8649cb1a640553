"""Tests for the KNN / random-forest / linear-SVM classifiers, the
confusion-matrix metrics, and the multi-run evaluation report."""

import csv

import numpy as np
import pytest
from sklearn.metrics import accuracy_score, precision_recall_fscore_support
from sklearn.neighbors import KNeighborsClassifier

from textrep.classify import (
    DISPERSION_NOTE,
    ZERO_DENOMINATOR_NOTE,
    KnnClassifier,
    LinearSvm,
    RandomForest,
    _best_split,
    _Tree,
    accuracy_scorer,
    compute_metrics,
    confusion_matrix,
    evaluate_representation,
    knn_predict,
    report_rows,
    rf_predict,
    stratified_indices,
    svm_predict,
    train_linear_svm,
    train_random_forest,
    write_report_csv,
)
from textrep.errors import ConfigError, NotFittedError, ShapeError


def blobs(centers, per_class, scale=0.3, seed=0):
    """Gaussian clusters; returns (vectors, labels) with labels = center index."""
    rng = np.random.default_rng(seed)
    X, y = [], []
    for label, center in enumerate(centers):
        X.append(rng.normal(loc=center, scale=scale, size=(per_class, len(center))))
        y.extend([label] * per_class)
    return np.vstack(X), np.array(y)


def recount_metrics(actual, predicted, n_classes):
    """Per-class (tp, fp, fn, tn, acc, prec, rec, f1) by explicit pair loops."""
    total = len(actual)
    rows = []
    for c in range(n_classes):
        tp = sum(1 for a, p in zip(actual, predicted) if a == c and p == c)
        fp = sum(1 for a, p in zip(actual, predicted) if a != c and p == c)
        fn = sum(1 for a, p in zip(actual, predicted) if a == c and p != c)
        tn = total - tp - fp - fn
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        rows.append((tp, fp, fn, tn, (tp + tn) / total, prec, rec, f1))
    return rows


# -- confusion matrix ------------------------------------------------------


def test_confusion_matrix_hand_counts():
    out = confusion_matrix([0, 0, 1, 2], [0, 1, 1, 2], 3)
    assert out.tolist() == [[1, 1, 0], [0, 1, 0], [0, 0, 1]]
    assert out.dtype == np.int64


def test_confusion_matrix_matches_pair_loop():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 6))
        n = int(rng.integers(1, 60))
        actual = rng.integers(0, k, n)
        predicted = rng.integers(0, k, n)
        out = confusion_matrix(actual, predicted, k)
        for a in range(k):
            for p in range(k):
                assert out[a, p] == int(np.sum((actual == a) & (predicted == p)))


def test_confusion_matrix_length_mismatch():
    with pytest.raises(ShapeError):
        confusion_matrix([0, 1], [0], 2)


# -- metrics ---------------------------------------------------------------


def test_metrics_worked_example():
    # tp=5 fp=1 fn=2 tn=12 for class 0
    report = compute_metrics(np.array([[5, 2], [1, 12]]))
    row = report["per_class"][0]
    assert (row["tp"], row["fp"], row["fn"], row["tn"]) == (5, 1, 2, 12)
    assert row["accuracy"] == pytest.approx(0.85, abs=1e-4)
    assert row["recall"] == pytest.approx(0.7143, abs=1e-4)
    assert row["precision"] == pytest.approx(0.8333, abs=1e-4)
    assert row["f1"] == pytest.approx(0.7692, abs=1e-4)
    assert row["flags"] == []
    assert report["micro_accuracy"] == pytest.approx(0.85)
    assert report["total"] == 20


def test_metrics_other_class_mirrors_counts():
    report = compute_metrics(np.array([[5, 2], [1, 12]]))
    row = report["per_class"][1]
    assert (row["tp"], row["fp"], row["fn"], row["tn"]) == (12, 2, 1, 5)
    # both one-vs-rest accuracies equal the shared error mass
    assert report["macro"]["accuracy"] == pytest.approx(0.85)


def test_metrics_match_bruteforce_recount():
    for seed in range(300):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 6))
        n = int(rng.integers(1, 50))
        actual = rng.integers(0, k, n)
        predicted = rng.integers(0, k, n)
        report = compute_metrics(confusion_matrix(actual, predicted, k))
        expected = recount_metrics(actual, predicted, k)
        for row, (tp, fp, fn, tn, acc, prec, rec, f1) in zip(report["per_class"], expected):
            assert (row["tp"], row["fp"], row["fn"], row["tn"]) == (tp, fp, fn, tn)
            assert row["accuracy"] == pytest.approx(acc, rel=1e-12)
            assert row["precision"] == pytest.approx(prec, rel=1e-12)
            assert row["recall"] == pytest.approx(rec, rel=1e-12)
            assert row["f1"] == pytest.approx(f1, rel=1e-12)
        assert report["micro_accuracy"] == pytest.approx(
            sum(r[0] for r in expected) / n, rel=1e-12
        )
        for i, name in enumerate(("accuracy", "precision", "recall", "f1")):
            assert report["macro"][name] == pytest.approx(
                np.mean([r[4 + i] for r in expected]), rel=1e-12
            )


def test_metrics_match_sklearn_macro():
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        k = int(rng.integers(2, 6))
        actual = rng.integers(0, k, 40)
        predicted = rng.integers(0, k, 40)
        report = compute_metrics(confusion_matrix(actual, predicted, k))
        prec, rec, f1, _ = precision_recall_fscore_support(
            actual, predicted, labels=np.arange(k), average="macro", zero_division=0
        )
        assert report["macro"]["precision"] == pytest.approx(prec, rel=1e-12, abs=1e-12)
        assert report["macro"]["recall"] == pytest.approx(rec, rel=1e-12, abs=1e-12)
        assert report["macro"]["f1"] == pytest.approx(f1, rel=1e-12, abs=1e-12)
        assert report["micro_accuracy"] == pytest.approx(accuracy_score(actual, predicted))


def test_metrics_perfect_prediction():
    report = compute_metrics(np.eye(3, dtype=np.int64) * 4)
    for row in report["per_class"]:
        assert row["precision"] == row["recall"] == row["f1"] == 1.0
    assert report["micro_accuracy"] == 1.0


def test_metrics_zero_denominator_flags():
    # class 1 never predicted and never actual: tp=fp=fn=0
    report = compute_metrics(np.array([[3, 0], [0, 0]]))
    row = report["per_class"][1]
    assert row["precision"] == 0.0 and row["recall"] == 0.0 and row["f1"] == 0.0
    assert row["flags"] == ["precision_undefined", "recall_undefined", "f1_undefined"]
    assert ZERO_DENOMINATOR_NOTE in report["conventions"]


def test_metrics_f1_flag_from_zero_precision_and_recall():
    # class 0 exists and is predicted, but never correctly: p=r=0 so f1 undefined
    report = compute_metrics(np.array([[0, 2], [3, 1]]))
    row = report["per_class"][0]
    assert row["flags"] == ["f1_undefined"]
    assert row["f1"] == 0.0


@pytest.mark.parametrize(
    "matrix, error",
    [
        (np.zeros((2, 3), dtype=np.int64), ShapeError),
        (np.ones(4, dtype=np.int64), ShapeError),
        (np.array([[1, -1], [0, 2]]), ConfigError),
        (np.array([[1.0, 0.0], [0.0, 2.0]]), ConfigError),
        (np.zeros((2, 2), dtype=np.int64), ConfigError),
    ],
)
def test_metrics_rejects_bad_confusion(matrix, error):
    with pytest.raises(error):
        compute_metrics(matrix)


# -- k nearest neighbors ---------------------------------------------------


def test_knn_separated_clusters():
    X, y = blobs([(-3.0, 0.0), (3.0, 0.0)], per_class=20, seed=1)
    model = KnnClassifier(k=5).fit(X, y)
    assert model.predict(np.array([[-3.0, 0.1], [2.8, -0.2]])).tolist() == [0, 1]
    assert (model.predict(X) == y).all()


def test_knn_distance_tie_keeps_lower_training_index():
    # both training points lie exactly 1.0 from the query
    model = KnnClassifier(k=1).fit(np.array([[0.0], [2.0]]), np.array([7, 9]))
    assert model.predict(np.array([[1.0]]))[0] == 7


def test_knn_vote_tie_prefers_smaller_distance_sum():
    # one vote each; label 1 is closer so it beats the lower label id
    model = KnnClassifier(k=2).fit(np.array([[0.0], [3.0]]), np.array([1, 0]))
    assert model.predict(np.array([[1.0]]))[0] == 1


def test_knn_vote_tie_equal_sums_takes_lower_label():
    model = KnnClassifier(k=2).fit(np.array([[0.0], [2.0]]), np.array([5, 3]))
    assert model.predict(np.array([[1.0]]))[0] == 3


def test_knn_matches_sklearn_on_generic_data():
    # odd k and continuous features leave no ties for tie rules to decide
    X, y = blobs([(-1.0, 0.0, 0.5), (1.0, 0.2, -0.5)], per_class=40, scale=1.0, seed=2)
    queries = np.random.default_rng(3).normal(size=(40, 3))
    ours = KnnClassifier(k=5).fit(X, y).predict(queries)
    ref = KNeighborsClassifier(n_neighbors=5).fit(X, y).predict(queries)
    assert (ours == ref).all()


def test_knn_predict_helper():
    X = np.array([[0.0, 0.0], [5.0, 5.0]])
    assert knn_predict(X, np.array([4, 8]), [0.2, -0.1], k=1) == 4


@pytest.mark.parametrize("k", [0, -1, 3])
def test_knn_k_out_of_range(k):
    with pytest.raises(ConfigError):
        KnnClassifier(k=k).fit(np.zeros((2, 2)), np.array([0, 1]))


def test_knn_empty_training_set():
    with pytest.raises(ConfigError):
        KnnClassifier(k=1).fit(np.zeros((0, 2)), np.array([]))


def test_knn_unfitted_predict():
    with pytest.raises(NotFittedError):
        KnnClassifier().predict(np.zeros((1, 2)))


# -- random forest ---------------------------------------------------------


def test_best_split_hand_threshold():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    feat, thr = _best_split(X, y, np.array([0]), 1, 2)
    assert feat == 0
    assert thr == pytest.approx(1.5)


def test_best_split_constant_feature_returns_none():
    X = np.ones((4, 1))
    assert _best_split(X, np.array([0, 1, 0, 1]), np.array([0]), 1, 2) is None


def test_best_split_prefers_clean_feature():
    # feature 1 separates nothing, feature 0 separates perfectly
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 0, 1, 1])
    feat, thr = _best_split(X, y, np.array([1, 0]), 2, 2)
    assert feat == 0
    assert thr == pytest.approx(0.5)


def test_forest_memorizes_distinct_training_points():
    X, y = blobs([(-2.0, 0.0), (2.0, 0.0), (0.0, 2.0)], per_class=8, seed=4)
    model = RandomForest(n_trees=3, bootstrap=False, random_state=0).fit(X, y)
    assert (model.predict(X) == y).all()


def test_forest_learns_xor():
    rng = np.random.default_rng(5)
    corners = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    labels = np.array([0, 1, 1, 0])
    X = np.repeat(corners, 10, axis=0) + rng.normal(scale=0.05, size=(40, 2))
    y = np.repeat(labels, 10)
    model = RandomForest(n_trees=5, bootstrap=False, random_state=1).fit(X, y)
    assert (model.predict(corners) == labels).all()
    assert (model.predict(X) == y).all()


def test_forest_deterministic_given_seed():
    X, y = blobs([(-1.0, 0.0), (1.0, 0.0)], per_class=15, scale=0.8, seed=6)
    queries = np.random.default_rng(7).normal(size=(20, 2))
    a = RandomForest(n_trees=10, random_state=3).fit(X, y).predict(queries)
    b = RandomForest(n_trees=10, random_state=3).fit(X, y).predict(queries)
    assert (a == b).all()


def test_forest_vote_tie_takes_lower_label():
    def leaf(label_index):
        tree = _Tree()
        tree.label[tree.add_node()] = label_index
        return tree

    model = RandomForest(n_trees=2)
    model.classes_ = np.array([3, 8])
    model.trees_ = [leaf(0), leaf(1)]
    assert model.predict(np.zeros((1, 2)))[0] == 3


def test_forest_predict_maps_back_to_original_labels():
    X, y = blobs([(-2.0, 0.0), (2.0, 0.0)], per_class=10, seed=8)
    relabeled = np.where(y == 0, 50, 11)
    model = RandomForest(n_trees=5, random_state=0).fit(X, relabeled)
    assert set(model.predict(X)) <= {11, 50}
    assert (model.predict(X) == relabeled).all()


def test_forest_helpers():
    X, y = blobs([(-2.0, 0.0), (2.0, 0.0)], per_class=6, seed=9)
    forest = train_random_forest(X, y, trees=4, seed=2)
    assert forest.n_trees == 4
    assert rf_predict(forest, [-2.0, 0.0]) == 0


def test_forest_validations():
    with pytest.raises(ConfigError):
        RandomForest(n_trees=0).fit(np.zeros((2, 2)), np.array([0, 1]))
    with pytest.raises(ConfigError):
        RandomForest().fit(np.zeros((0, 2)), np.array([]))
    with pytest.raises(NotFittedError):
        RandomForest().predict(np.zeros((1, 2)))


# -- linear SVM ------------------------------------------------------------


def test_svm_separates_two_blobs():
    X, y = blobs([(-3.0, 0.0), (3.0, 0.0)], per_class=30, seed=10)
    model = LinearSvm(epochs=10, regularization=0.01, random_state=0).fit(X, y)
    assert (model.predict(X) == y).all()
    scores = model.decision_function(X)
    assert scores.shape == (60, 2)
    assert (scores[y == 0, 0] > scores[y == 0, 1]).all()


def test_svm_three_classes_with_sparse_labels():
    X, y = blobs([(-4.0, 0.0), (4.0, 0.0), (0.0, 4.0)], per_class=20, seed=11)
    relabeled = np.array([2, 5, 9])[y]
    model = LinearSvm(epochs=15, regularization=0.01, random_state=0).fit(X, relabeled)
    assert model.classes_.tolist() == [2, 5, 9]
    assert (model.predict(X) == relabeled).all()


def test_svm_weights_stay_inside_projection_ball():
    X, y = blobs([(-1.0, 0.0), (1.0, 0.0)], per_class=20, scale=1.0, seed=12)
    for lam in (0.001, 0.1, 10.0):
        model = LinearSvm(epochs=5, regularization=lam, random_state=0).fit(X, y)
        norms = np.linalg.norm(model.weights_, axis=1)
        assert (norms <= 1.0 / np.sqrt(lam) + 1e-9).all()


def test_svm_huge_regularization_crushes_scores():
    X, y = blobs([(-3.0, 0.0), (3.0, 0.0)], per_class=20, seed=13)
    model = LinearSvm(epochs=5, regularization=1e8, random_state=0).fit(X, y)
    assert np.abs(model.decision_function(X)).max() < 1e-2


def test_svm_argmax_tie_takes_lower_label():
    model = LinearSvm()
    model.classes_ = np.array([4, 6])
    model.weights_ = np.zeros((2, 3))
    assert model.predict(np.ones((1, 2)))[0] == 4


def test_svm_deterministic_given_seed():
    X, y = blobs([(-2.0, 0.0), (2.0, 0.0)], per_class=25, scale=1.5, seed=14)
    a = LinearSvm(epochs=8, random_state=5).fit(X, y)
    b = LinearSvm(epochs=8, random_state=5).fit(X, y)
    c = LinearSvm(epochs=8, random_state=6).fit(X, y)
    assert np.array_equal(a.weights_, b.weights_)
    assert not np.array_equal(a.weights_, c.weights_)


def test_svm_helpers():
    X, y = blobs([(-3.0, 0.0), (3.0, 0.0)], per_class=10, seed=15)
    model = train_linear_svm(X, y, epochs=10, regularization=0.01, seed=1)
    assert svm_predict(model, [3.0, 0.0]) == 1


def test_svm_validations():
    X, y = blobs([(-1.0, 0.0), (1.0, 0.0)], per_class=3, seed=16)
    with pytest.raises(ConfigError):
        LinearSvm(epochs=0).fit(X, y)
    with pytest.raises(ConfigError):
        LinearSvm(regularization=0.0).fit(X, y)
    with pytest.raises(ConfigError):
        LinearSvm().fit(X, np.zeros(6, dtype=np.int64))
    with pytest.raises(NotFittedError):
        LinearSvm().decision_function(np.zeros((1, 2)))


# -- stratified resampling -------------------------------------------------


def test_stratified_partition_properties():
    labels = np.repeat([0, 1, 2], [8, 16, 24])
    rng = np.random.default_rng(0)
    train, test = stratified_indices(labels, 0.25, rng)
    assert len(np.intersect1d(train, test)) == 0
    assert np.array_equal(np.sort(np.concatenate([train, test])), np.arange(48))
    assert np.array_equal(train, np.sort(train))
    assert np.array_equal(test, np.sort(test))
    for cls, expected in zip((0, 1, 2), (2, 4, 6)):
        assert int(np.sum(labels[test] == cls)) == expected


def test_stratified_extreme_fractions_keep_one_sample_per_side():
    labels = np.repeat([0, 1], 5)
    train0, test0 = stratified_indices(labels, 0.0, np.random.default_rng(1))
    assert [int(np.sum(labels[test0] == c)) for c in (0, 1)] == [1, 1]
    train1, test1 = stratified_indices(labels, 1.0, np.random.default_rng(1))
    assert [int(np.sum(labels[train1] == c)) for c in (0, 1)] == [1, 1]


def test_stratified_rejects_singleton_class():
    with pytest.raises(ConfigError):
        stratified_indices(np.array([0, 0, 1]), 0.25, np.random.default_rng(0))


# -- evaluation report -----------------------------------------------------


def easy_representation(seed=0):
    """Three well-separated classes so every classifier scores 1.0."""
    return blobs([(-5.0, 0.0), (5.0, 0.0), (0.0, 5.0)], per_class=8, scale=0.2, seed=seed)


def test_evaluate_report_shape_and_names():
    X, y = easy_representation()
    report = evaluate_representation(
        X, y, KnnClassifier(k=3), runs=3, seed=0, representation_name="w2v-avg"
    )
    assert report["representation"] == "w2v-avg"
    assert report["classifier"] == "KnnClassifier"
    assert report["runs"] == 3
    assert len(report["run_reports"]) == 3
    assert sorted(report["metrics"]) == [
        "accuracy",
        "f1",
        "micro_accuracy",
        "precision",
        "recall",
    ]
    assert DISPERSION_NOTE in report["conventions"]
    assert ZERO_DENOMINATOR_NOTE in report["conventions"]


def test_evaluate_perfect_representation_scores_one():
    X, y = easy_representation()
    report = evaluate_representation(X, y, KnnClassifier(k=3), runs=4, seed=1)
    for name in ("accuracy", "precision", "recall", "f1", "micro_accuracy"):
        assert report["metrics"][name] == {"mean": 1.0, "stddev": 0.0}


def test_evaluate_explicit_classifier_name():
    X, y = easy_representation()
    report = evaluate_representation(X, y, KnnClassifier(k=3), runs=1, classifier_name="knn")
    assert report["classifier"] == "knn"


def test_evaluate_deterministic():
    X, y = blobs([(-1.0, 0.0), (1.0, 0.0)], per_class=10, scale=1.2, seed=17)
    first = evaluate_representation(X, y, KnnClassifier(k=3), runs=3, seed=4)
    second = evaluate_representation(X, y, KnnClassifier(k=3), runs=3, seed=4)
    assert first == second


def test_evaluate_single_run_has_zero_stddev():
    X, y = easy_representation()
    report = evaluate_representation(X, y, KnnClassifier(k=3), runs=1)
    assert report["metrics"]["accuracy"]["stddev"] == 0.0


def test_evaluate_does_not_mutate_classifier():
    X, y = easy_representation()
    template = KnnClassifier(k=3)
    evaluate_representation(X, y, template, runs=2)
    assert not hasattr(template, "train_X_")


def test_evaluate_validations():
    X, y = easy_representation()
    with pytest.raises(ConfigError):
        evaluate_representation(X, y, KnnClassifier(k=3), runs=0)
    with pytest.raises(ShapeError):
        evaluate_representation(X, y[:-1], KnnClassifier(k=3))


def test_accuracy_scorer_matches_single_run_evaluation():
    X, y = blobs([(-1.0, 0.0), (1.0, 0.0)], per_class=12, scale=1.0, seed=18)
    score = accuracy_scorer(KnnClassifier(k=3), test_fraction=0.25, seed=2)
    expected = evaluate_representation(
        X, y, KnnClassifier(k=3), runs=1, test_fraction=0.25, seed=2
    )["metrics"]["micro_accuracy"]["mean"]
    assert score(X, y) == expected
    assert score(X, y) == score(X, y)


# -- report serialization --------------------------------------------------


def test_report_rows_sorted_and_flat():
    X, y = easy_representation()
    report = evaluate_representation(
        X, y, KnnClassifier(k=3), runs=2, representation_name="cnn-vae", classifier_name="knn"
    )
    rows = report_rows(report)
    assert [row[2] for row in rows] == ["accuracy", "f1", "micro_accuracy", "precision", "recall"]
    for row in rows:
        assert row[0] == "cnn-vae"
        assert row[1] == "knn"
        assert isinstance(row[3], float) and isinstance(row[4], float)


def test_write_report_csv_layout(tmp_path):
    X, y = easy_representation()
    reports = [
        evaluate_representation(
            X, y, KnnClassifier(k=3), runs=2, representation_name=name, classifier_name="knn"
        )
        for name in ("w2v-avg", "cnn-vae")
    ]
    path = tmp_path / "report.csv"
    write_report_csv(reports, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["representation", "classifier", "metric", "mean", "stddev"]
    assert len(rows) == 1 + 2 * 5
    assert rows[1][:3] == ["w2v-avg", "knn", "accuracy"]
    assert rows[1][3] == "1.000000"
    assert all(len(row) == 5 for row in rows)
