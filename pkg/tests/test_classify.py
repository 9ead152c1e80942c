"""Classifier training, cross validation, and grid search oracles."""

import math

import numpy as np
import pytest

from urbansent.classify import (
    DEFAULT_GRIDS,
    ClassifierSpec,
    RandomForestModel,
    UnsupportedKernelError,
    enumerate_grid,
    evaluate,
    grid_search,
    kfold_cv,
    labels_from_probs,
    load_external_predictions,
    load_labels,
    load_model,
    parse_grid_file,
    predict,
    save_model,
    stratified_folds,
    train,
)
from urbansent.rng import derive_seed
from urbansent.textprep import build_doc_term_matrix, tfidf_transform


def blobs(n=40, seed=0, gap=3.0):
    """Two separable Gaussian blobs, kept in the positive quadrant so the
    count-based classifier sees well-posed inputs."""
    rng = np.random.default_rng(seed)
    half = n // 2
    x = np.vstack(
        [
            rng.normal(loc=(2.0, 2.0), scale=0.5, size=(half, 2)),
            rng.normal(loc=(2.0 + 2.0 * gap, 2.0), scale=0.5, size=(n - half, 2)),
        ]
    )
    y = np.array([False] * half + [True] * (n - half))
    return x, y


# ---------------------------------------------------------------------------
# ClassifierSpec validation


def test_spec_rejects_unknown_kind():
    with pytest.raises(ValueError):
        ClassifierSpec(kind="xgboost")


def test_spec_rejects_foreign_hyperparameter():
    with pytest.raises(ValueError):
        ClassifierSpec(kind="nb", hyperparameters={"max_depth": 3})


@pytest.mark.parametrize(
    "kind,params",
    [
        ("dt", {"max_depth": 0}),
        ("dt", {"min_samples_leaf": 0}),
        ("nb", {"alpha": 0}),
        ("nb", {"alpha": -1.0}),
        ("svm", {"kernel": "sigmoid"}),
        ("svm", {"C": 0}),
        ("lr", {"solver": "adam"}),
        ("lr", {"max_iter": 1.5}),
        ("rf", {"bootstrap": "yes"}),
        ("rf", {"max_features": "log2"}),
    ],
)
def test_spec_rejects_bad_values(kind, params):
    with pytest.raises(ValueError):
        ClassifierSpec(kind=kind, hyperparameters=params)


def test_spec_accepts_valid_values():
    ClassifierSpec(kind="dt", hyperparameters={"max_depth": None, "min_samples_leaf": 2})
    ClassifierSpec(kind="rf", hyperparameters={"bootstrap": False, "max_features": None})
    ClassifierSpec(kind="svm", hyperparameters={"kernel": "linear", "C": 0.5})


# ---------------------------------------------------------------------------
# train() input validation


def test_train_rejects_single_class():
    x = np.zeros((4, 2))
    with pytest.raises(ValueError, match="single class"):
        train(ClassifierSpec(kind="nb"), x, [True, True, True, True])


def test_train_rejects_length_mismatch():
    with pytest.raises(ValueError):
        train(ClassifierSpec(kind="nb"), np.zeros((4, 2)), [True, False])


def test_train_rejects_empty():
    with pytest.raises(ValueError):
        train(ClassifierSpec(kind="nb"), np.zeros((0, 2)), [])


def test_train_rejects_nan():
    x = np.array([[1.0, float("nan")], [0.0, 1.0]])
    with pytest.raises(ValueError, match="NaN"):
        train(ClassifierSpec(kind="nb"), x, [True, False])


# ---------------------------------------------------------------------------
# Decision tree


def test_dt_perfect_split_midpoint_threshold():
    x = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = [False, False, True, True]
    model = train(ClassifierSpec(kind="dt"), x, y)
    assert not model.root["leaf"]
    assert model.root["feature"] == 0
    assert model.root["threshold"] == pytest.approx(2.5)
    got = model.predict([[0.0], [2.4], [2.6], [10.0]])
    assert got.tolist() == [False, False, True, True]


def test_dt_tie_prefers_lowest_feature_index():
    # both columns carry the identical perfect split
    x = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]])
    model = train(ClassifierSpec(kind="dt"), x, [False, False, True, True])
    assert model.root["feature"] == 0


def test_dt_constant_features_yield_majority_leaf():
    x = np.ones((4, 1))
    model = train(ClassifierSpec(kind="dt"), x, [True, True, False, False])
    assert model.root["leaf"]
    assert model.root["prob"] == pytest.approx(0.5)
    assert model.predict([[1.0]]).tolist() == [False]  # exact tie resolves False


def test_dt_min_samples_leaf_blocks_small_splits():
    x = np.array([[1.0], [2.0], [3.0], [4.0], [5.0], [6.0]])
    y = [False, True, True, True, True, True]
    # unconstrained: perfect split isolating the single False point
    free = train(ClassifierSpec(kind="dt"), x, y)
    assert free.root["threshold"] == pytest.approx(1.5)
    # leaf floor of 2 forbids the 1|5 split; best remaining is at 2.5
    capped = train(ClassifierSpec(kind="dt", hyperparameters={"min_samples_leaf": 2}), x, y)
    assert capped.root["threshold"] == pytest.approx(2.5)
    assert free.predict([[2.0]]).tolist() == [True]
    assert capped.predict([[2.0]]).tolist() == [False]  # mixed shallow leaf


def test_dt_max_depth_one_is_a_stump():
    x, y = blobs(seed=1)
    model = train(ClassifierSpec(kind="dt", hyperparameters={"max_depth": 1}), x, y)
    assert model.root["left"]["leaf"] and model.root["right"]["leaf"]


def test_dt_scores_are_leaf_fractions():
    x = np.array([[1.0], [2.0], [3.0], [4.0]])
    model = train(ClassifierSpec(kind="dt", hyperparameters={"max_depth": 1}), x, [False, True, True, True])
    # split at 1.5: left leaf 0/1 True, right leaf 3/3 True
    assert model.scores([[1.0], [3.0]]).tolist() == [0.0, 1.0]


def test_dt_feature_count_mismatch():
    x, y = blobs()
    model = train(ClassifierSpec(kind="dt"), x, y)
    with pytest.raises(ValueError, match="features"):
        model.predict(np.zeros((2, 3)))


# ---------------------------------------------------------------------------
# Random forest


def test_rf_single_tree_no_bootstrap_equals_dt():
    x, y = blobs(n=30, seed=2, gap=1.0)
    dt = train(ClassifierSpec(kind="dt"), x, y)
    rf = train(
        ClassifierSpec(
            kind="rf",
            hyperparameters={"n_estimators": 1, "bootstrap": False, "max_features": None},
        ),
        x,
        y,
    )
    probe = np.random.default_rng(3).normal(size=(50, 2))
    assert rf.predict(probe).tolist() == dt.predict(probe).tolist()
    assert rf.trees[0] == dt.root


def test_rf_is_deterministic_per_seed():
    x, y = blobs(n=24, seed=4, gap=0.5)
    spec = ClassifierSpec(kind="rf", hyperparameters={"n_estimators": 5}, seed=7)
    a = train(spec, x, y)
    b = train(spec, x, y)
    assert a.trees == b.trees
    c = train(ClassifierSpec(kind="rf", hyperparameters={"n_estimators": 5}, seed=8), x, y)
    assert a.trees != c.trees


def test_rf_vote_tie_resolves_false():
    yes = {"leaf": True, "n": 1, "prob": 1.0, "prediction": True}
    no = {"leaf": True, "n": 1, "prob": 0.0, "prediction": False}
    model = RandomForestModel([yes, no], n_features=1)
    assert model.scores([[0.0]]).tolist() == [0.5]
    assert model.predict([[0.0]]).tolist() == [False]


def test_rf_scores_are_vote_fractions():
    yes = {"leaf": True, "n": 1, "prob": 1.0, "prediction": True}
    no = {"leaf": True, "n": 1, "prob": 0.0, "prediction": False}
    model = RandomForestModel([yes, yes, no, no, yes], n_features=1)
    assert model.scores([[0.0]]).tolist() == [0.6]
    assert model.predict([[0.0]]).tolist() == [True]


# ---------------------------------------------------------------------------
# Naive Bayes


def test_nb_matches_hand_computed_posterior():
    x = np.array([[2.0, 0.0], [1.0, 1.0], [0.0, 2.0]])
    y = [True, True, False]
    model = train(ClassifierSpec(kind="nb", hyperparameters={"alpha": 1.0}), x, y)

    # class False: one doc, counts (0, 2), total 2; smoothed (1/4, 3/4)
    assert model.log_prior[0] == pytest.approx(math.log(1 / 3))
    assert model.log_likelihood[0].tolist() == pytest.approx([math.log(1 / 4), math.log(3 / 4)])
    # class True: two docs, counts (3, 1), total 4; smoothed (4/6, 2/6)
    assert model.log_prior[1] == pytest.approx(math.log(2 / 3))
    assert model.log_likelihood[1].tolist() == pytest.approx([math.log(4 / 6), math.log(2 / 6)])

    doc = np.array([[3.0, 1.0]])
    joint_f = math.log(1 / 3) + 3 * math.log(1 / 4) + 1 * math.log(3 / 4)
    joint_t = math.log(2 / 3) + 3 * math.log(4 / 6) + 1 * math.log(2 / 6)
    expected_score = math.exp(joint_t) / (math.exp(joint_t) + math.exp(joint_f))
    assert model.scores(doc)[0] == pytest.approx(expected_score, abs=1e-12)
    assert model.predict(doc)[0] == (joint_t > joint_f)


def test_nb_joint_tie_resolves_false():
    # symmetric data: a balanced doc scores identically under both classes
    x = np.array([[1.0, 0.0], [0.0, 1.0]])
    model = train(ClassifierSpec(kind="nb"), x, [True, False])
    assert model.predict(np.array([[1.0, 1.0]])).tolist() == [False]
    assert model.scores(np.array([[1.0, 1.0]]))[0] == pytest.approx(0.5)


def test_nb_accepts_tfidf_matrix_input():
    docs = ["busy busy street", "calm quiet park", "crowded busy corner", "quiet calm garden"]
    tfidf = tfidf_transform(build_doc_term_matrix(docs))
    model = train(ClassifierSpec(kind="nb"), tfidf, [True, False, True, False])
    assert model.predict(tfidf).tolist() == [True, False, True, False]


# ---------------------------------------------------------------------------
# Linear SVM


def test_svm_separates_blobs():
    x, y = blobs(n=40, seed=5)
    model = train(ClassifierSpec(kind="svm", hyperparameters={"max_iter": 200}), x, y)
    assert model.predict(x).tolist() == y.tolist()
    margins = model.scores(x)
    assert (margins[y] > 0).all() and (margins[~y] < 0).all()


def test_svm_returns_best_iterate():
    x, y = blobs(n=30, seed=6, gap=0.8)
    C = 2.0
    model = train(ClassifierSpec(kind="svm", hyperparameters={"C": C, "max_iter": 50}), x, y)
    lam = 1.0 / (C * len(y))
    ys = np.where(y, 1.0, -1.0)
    hinge = np.maximum(0.0, 1.0 - ys * (x @ model.w + model.b))
    obj = 0.5 * lam * float(model.w @ model.w) + float(hinge.mean())
    assert model.objective_trajectory[0] == pytest.approx(1.0)  # zero weights
    assert obj == pytest.approx(min(model.objective_trajectory), abs=1e-12)


def test_svm_rejects_unimplemented_kernels():
    x, y = blobs(n=10)
    for kernel in ("rbf", "poly"):
        with pytest.raises(UnsupportedKernelError):
            train(ClassifierSpec(kind="svm", hyperparameters={"kernel": kernel}), x, y)
    assert issubclass(UnsupportedKernelError, ValueError)


# ---------------------------------------------------------------------------
# Logistic regression


def test_lr_lbfgs_converges_on_blobs():
    x, y = blobs(n=40, seed=7)
    model = train(ClassifierSpec(kind="lr", hyperparameters={"solver": "lbfgs", "max_iter": 500}), x, y)
    assert model.converged
    assert model.predict(x).tolist() == y.tolist()
    assert model.loss_trajectory[0] == pytest.approx(len(y) * math.log(2))


def test_lr_sag_trajectory_never_increases():
    x, y = blobs(n=30, seed=8, gap=0.6)
    for solver in ("sag", "saga"):
        model = train(
            ClassifierSpec(kind="lr", hyperparameters={"solver": solver, "max_iter": 60}, seed=3), x, y
        )
        t = model.loss_trajectory
        assert all(b <= a for a, b in zip(t, t[1:]))


def test_lr_solvers_agree_on_the_optimum():
    x, y = blobs(n=30, seed=9, gap=1.5)
    losses = {}
    preds = {}
    # epoch budget sized so the slowest solver reaches the gradient tolerance
    for solver in ("lbfgs", "sag", "saga"):
        model = train(
            ClassifierSpec(kind="lr", hyperparameters={"solver": solver, "max_iter": 8000}, seed=1), x, y
        )
        assert model.converged, solver
        losses[solver] = model.loss_trajectory[-1]
        preds[solver] = model.predict(x).tolist()
    # strictly convex objective: one optimum, so losses nearly coincide
    assert max(losses.values()) - min(losses.values()) < 1e-6
    assert preds["sag"] == preds["lbfgs"] == preds["saga"]


def test_lr_scores_are_probabilities():
    x, y = blobs(n=20, seed=10)
    model = train(ClassifierSpec(kind="lr"), x, y)
    s = model.scores(x)
    assert ((s >= 0) & (s <= 1)).all()
    assert ((s > 0.5) == model.predict(x)).all()


# ---------------------------------------------------------------------------
# predict() facade and persistence


def test_predict_returns_labels_and_scores():
    x, y = blobs(n=20, seed=11)
    model = train(ClassifierSpec(kind="lr"), x, y)
    labels, scores = predict(model, x)
    assert labels.dtype == bool
    assert len(labels) == len(scores) == len(y)


@pytest.mark.parametrize("kind", ["dt", "rf", "nb", "svm", "lr"])
def test_save_load_round_trip(kind, tmp_path):
    x, y = blobs(n=24, seed=12, gap=1.0)
    params = {"n_estimators": 3} if kind == "rf" else {}
    model = train(ClassifierSpec(kind=kind, hyperparameters=params, seed=5), x, y)
    path = tmp_path / f"{kind}.json"
    save_model(model, path)
    again = load_model(path)
    assert type(again) is type(model)
    probe = np.random.default_rng(13).normal(size=(40, 2))
    assert again.predict(probe).tolist() == model.predict(probe).tolist()
    np.testing.assert_allclose(again.scores(probe), model.scores(probe))


# ---------------------------------------------------------------------------
# Evaluation metrics


def test_evaluate_hand_confusion():
    pred = [True, True, False, False, True]
    truth = [True, False, True, False, False]
    m = evaluate(pred, truth)
    assert (m.tp, m.fp, m.fn, m.tn) == (1, 2, 1, 1)
    assert m.accuracy == pytest.approx(0.4)
    assert m.precision_true == pytest.approx(1 / 3)
    assert m.recall_true == pytest.approx(1 / 2)
    assert m.f1_true == pytest.approx(0.4)
    assert m.precision_false == pytest.approx(1 / 2)
    assert m.recall_false == pytest.approx(1 / 3)
    assert m.f1_false == pytest.approx(0.4)


def test_evaluate_degenerate_all_false_predictions():
    m = evaluate([False, False, False], [True, False, True])
    assert m.precision_true == 0.0
    assert m.recall_true == 0.0
    assert m.f1_true == 0.0
    assert m.accuracy == pytest.approx(1 / 3)


def test_evaluate_rejects_mismatch_and_empty():
    with pytest.raises(ValueError):
        evaluate([True], [True, False])
    with pytest.raises(ValueError):
        evaluate([], [])


# ---------------------------------------------------------------------------
# Stratified folds and cross validation


def test_stratified_folds_partition_and_balance():
    y = np.array([True] * 13 + [False] * 27)
    folds = stratified_folds(y, k=5, seed=0)
    merged = np.concatenate(folds)
    assert sorted(merged.tolist()) == list(range(40))
    assert len(set(merged.tolist())) == 40
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 2  # each class spreads within 1
    true_counts = [int(y[f].sum()) for f in folds]
    assert max(true_counts) - min(true_counts) <= 1


def test_stratified_folds_deterministic():
    y = np.array([True, False] * 10)
    a = stratified_folds(y, k=4, seed=9)
    b = stratified_folds(y, k=4, seed=9)
    assert all((f1 == f2).all() for f1, f2 in zip(a, b))
    c = stratified_folds(y, k=4, seed=10)
    assert any((f1 != f3).any() for f1, f3 in zip(a, c) if len(f1) == len(f3))


def test_stratified_folds_errors():
    with pytest.raises(ValueError):
        stratified_folds([True, False, True, False], k=1, seed=0)
    with pytest.raises(ValueError, match="too small"):
        stratified_folds([True] + [False] * 9, k=2, seed=0)


def test_kfold_cv_reproducible_and_sized():
    x, y = blobs(n=30, seed=14, gap=0.7)
    spec = ClassifierSpec(kind="nb", seed=2)
    a = kfold_cv(spec, x, y, k=5, seed=4)
    b = kfold_cv(spec, x, y, k=5, seed=4)
    assert len(a.fold_metrics) == 5
    assert [m.accuracy for m in a.fold_metrics] == [m.accuracy for m in b.fold_metrics]
    assert a.mean_accuracy == pytest.approx(sum(m.accuracy for m in a.fold_metrics) / 5)


# ---------------------------------------------------------------------------
# Grid search


def test_enumerate_grid_order():
    grid = {"a": [1, 2], "b": [3, 4]}
    assert enumerate_grid(grid) == [
        {"a": 1, "b": 3},
        {"a": 1, "b": 4},
        {"a": 2, "b": 3},
        {"a": 2, "b": 4},
    ]


def test_grid_search_matches_independent_reevaluation():
    x, y = blobs(n=30, seed=15, gap=0.5)
    grid = {"max_depth": [1, 3], "min_samples_leaf": [1, 2]}
    seed = 6
    result = grid_search("dt", x, y, grid=grid, k=3, seed=seed)

    best_acc = -1.0
    best_spec = None
    for idx, params in enumerate(enumerate_grid(grid)):
        spec = ClassifierSpec(kind="dt", hyperparameters=params, seed=derive_seed(seed, "cell", idx))
        cv = kfold_cv(spec, x, y, k=3, seed=seed)
        assert cv.mean_accuracy == pytest.approx(result.cells[idx].result.mean_accuracy, abs=0)
        if cv.mean_accuracy > best_acc:
            best_acc = cv.mean_accuracy
            best_spec = spec
    assert result.best_spec == best_spec
    assert result.best_mean_accuracy == best_acc


def test_grid_search_tie_prefers_first_cell():
    x, y = blobs(n=20, seed=16)
    result = grid_search("nb", x, y, grid={"alpha": [1.0, 1.0, 1.0]}, k=2, seed=3)
    # separable data: every cell identical, the first must win
    assert result.best_spec.seed == derive_seed(3, "cell", 0)


def test_grid_search_records_error_cells_and_continues():
    x, y = blobs(n=20, seed=17)
    grid = {"kernel": ["rbf", "linear"], "max_iter": [50]}
    result = grid_search("svm", x, y, grid=grid, k=2, seed=0)
    assert len(result.cells) == 2
    assert result.errors[0].index == 0
    assert "unsupported kernel" in result.errors[0].error
    assert result.best_spec.get("kernel") == "linear"


def test_grid_search_all_cells_failing_is_fatal():
    x, y = blobs(n=20, seed=18)
    with pytest.raises(ValueError, match="every grid cell failed"):
        grid_search("svm", x, y, grid={"kernel": ["rbf", "poly"]}, k=2, seed=0)


def test_grid_search_rejects_grid_with_no_values():
    x, y = blobs(n=20, seed=19)
    with pytest.raises(ValueError, match="empty grid"):
        grid_search("nb", x, y, grid={"alpha": []}, k=2, seed=0)


def test_grid_search_empty_mapping_means_one_default_cell():
    x, y = blobs(n=20, seed=19)
    result = grid_search("nb", x, y, grid={}, k=2, seed=0)
    assert len(result.cells) == 1
    assert result.cells[0].params == {}


def test_default_grids_cover_every_kind():
    assert set(DEFAULT_GRIDS) == {"dt", "rf", "nb", "svm", "lr"}
    sizes = {kind: len(enumerate_grid(g)) for kind, g in DEFAULT_GRIDS.items()}
    assert sizes == {"dt": 15, "rf": 60, "nb": 6, "svm": 75, "lr": 90}


# ---------------------------------------------------------------------------
# Label and prediction files


def test_load_labels(tmp_path):
    p = tmp_path / "labels.csv"
    p.write_text("review_id,label\nr1,true\nr2,False\nr3,maybe\nr1,false\n")
    labels, report = load_labels(p)
    assert labels == {"r1": True, "r2": False}
    assert [i.row for i in report.issues] == [4, 5]  # bad value, then duplicate


def test_load_external_predictions(tmp_path):
    p = tmp_path / "preds.csv"
    p.write_text("review_id,prob_true\nr1,0.9\nr2,1.5\nr3,abc\nghost,0.5\n")
    probs, report = load_external_predictions(p, known_ids={"r1", "r2", "r3"})
    assert probs == {"r1": 0.9}
    assert len(report.issues) == 2
    assert report.skipped_reviews[0]["review_id"] == "ghost"


def test_labels_from_probs_boundary():
    assert labels_from_probs({"a": 0.5, "b": 0.499999, "c": 1.0, "d": 0.0}) == {
        "a": True,
        "b": False,
        "c": True,
        "d": False,
    }


# ---------------------------------------------------------------------------
# Grid files


def test_parse_grid_file(tmp_path):
    p = tmp_path / "grid.txt"
    p.write_text(
        "# search space\n"
        "max_depth = [5, 10, None]\n"
        "kernel = ['linear', \"rbf\"]  # quoted strings\n"
        "C = [0.1, 2]\n"
        "bootstrap = [true, false]\n"
    )
    grid = parse_grid_file(p)
    assert grid == {
        "max_depth": [5, 10, None],
        "kernel": ["linear", "rbf"],
        "C": [0.1, 2],
        "bootstrap": [True, False],
    }
    assert isinstance(grid["C"][1], int)


@pytest.mark.parametrize(
    "body",
    [
        "max_depth = 5\n",  # not a list
        "max_depth = [1]\nmax_depth = [2]\n",  # duplicate key
        "max_depth = []\n",  # empty list
        "# only comments\n",
    ],
)
def test_parse_grid_file_errors(tmp_path, body):
    p = tmp_path / "grid.txt"
    p.write_text(body)
    with pytest.raises(ValueError):
        parse_grid_file(p)
