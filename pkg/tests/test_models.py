"""Classifier training, evaluation metrics, and cross-validation structure."""

from fractions import Fraction

import numpy as np
import pytest

from mrsim.features import Dataset, FeatureVector, LABEL_FAILED, LABEL_FINISHED
from mrsim.models import (DEFAULT_HYPERPARAMS, EvalMetrics, SchemaMismatch,
                          SingleClassDataset, UnsupportedModelKind, confusion,
                          cross_validate, glm_gradient, glm_log_loss, load_model,
                          make_folds, save_model, train, tree_depth)


def synth_row(rng, label_rule) -> FeatureVector:
    prev_failed = int(rng.integers(0, 6))
    tt_failed = int(rng.integers(0, 25))
    fv = FeatureVector(
        job_id=f"j{int(rng.integers(0, 50)):05d}",
        task_id=f"t{int(rng.integers(0, 10_000)):06d}",
        task_type="MAP",
        priority=int(rng.integers(0, 3)),
        locality=int(rng.integers(0, 2)),
        execution_type="NORMAL",
        elapsed_execution_time=int(rng.integers(0, 600_000)),
        nbr_prev_finished_attempts=int(rng.integers(0, 3)),
        nbr_prev_failed_attempts=prev_failed,
        nbr_reschedule_events=int(rng.integers(0, 4)),
        nbr_prev_finished_tasks=int(rng.integers(0, 500)),
        nbr_prev_failed_tasks=int(rng.integers(0, 60)),
        tt_running_tasks=int(rng.integers(0, 4)),
        tt_finished_tasks=int(rng.integers(0, 200)),
        tt_failed_tasks=tt_failed,
        tt_available_map_slots=int(rng.integers(0, 3)),
        tt_available_reduce_slots=int(rng.integers(0, 2)),
        job_total_tasks=int(rng.integers(1, 20)),
        used_cpu=float(rng.random() * 1e6),
        used_mem=float(rng.random() * 1e8),
        used_hdfs_rw=float(rng.random() * 1e6),
        label=label_rule(prev_failed, tt_failed),
    )
    return fv


def simple_rule(prev_failed, tt_failed):
    return LABEL_FAILED if prev_failed >= 3 else LABEL_FINISHED


def two_feature_rule(prev_failed, tt_failed):
    return LABEL_FAILED if (prev_failed >= 3 or tt_failed >= 18) else LABEL_FINISHED


def synth_dataset(n, rule, seed=0) -> Dataset:
    rng = np.random.default_rng(seed)
    return Dataset([synth_row(rng, rule) for _ in range(n)])


class TestMetrics:
    def test_worked_example(self):
        m = EvalMetrics(tp=50, tn=30, fp=10, fn=10)
        assert m.accuracy == pytest.approx(0.8)
        assert m.precision == pytest.approx(50 / 60)
        assert m.recall == pytest.approx(50 / 60)
        assert m.error == pytest.approx(0.2)

    def test_identities_on_random_matrices(self, rng):
        for _ in range(1000):
            tp, tn, fp, fn = (int(x) for x in rng.integers(0, 500, size=4))
            if tp + tn + fp + fn == 0:
                continue
            m = EvalMetrics(tp=tp, tn=tn, fp=fp, fn=fn)
            n = m.total
            assert m.accuracy == (tp + tn) / n
            assert m.error == (fp + fn) / n
            assert m.precision == (tp / (tp + fp) if tp + fp else 0.0)
            assert m.recall == (tp / (tp + fn) if tp + fn else 0.0)
            assert m.accuracy + m.error == 1.0
            assert Fraction(tp + tn, n) + Fraction(fp + fn, n) == 1
            assert 0.0 <= m.precision <= 1.0 and 0.0 <= m.recall <= 1.0

    def test_confusion_matches_manual_recount(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 200))
            pred = rng.integers(0, 2, size=n)
            truth = rng.integers(0, 2, size=n)
            m = confusion(pred, truth)
            counts = {"tp": 0, "tn": 0, "fp": 0, "fn": 0}
            for p, t in zip(pred, truth):
                if p and t:
                    counts["tp"] += 1
                elif p and not t:
                    counts["fp"] += 1
                elif not p and t:
                    counts["fn"] += 1
                else:
                    counts["tn"] += 1
            assert (m.tp, m.tn, m.fp, m.fn) == (counts["tp"], counts["tn"],
                                                counts["fp"], counts["fn"])


class TestFolds:
    @pytest.mark.parametrize("n,expected_sizes", [
        (10, [1] * 10),
        (100, [10] * 10),
        (105, [11] * 5 + [10] * 5),
        (1000, [100] * 10),
    ])
    def test_fold_structure(self, n, expected_sizes, rng):
        folds = make_folds(n, 10, rng)
        assert [len(f) for f in folds] == expected_sizes
        union = np.concatenate(folds)
        assert len(union) == n
        assert len(set(union.tolist())) == n  # pairwise disjoint, complete

    def test_too_small(self, rng):
        with pytest.raises(ValueError, match="insufficient rows"):
            make_folds(9, 10, rng)


class TestTree:
    def test_depth_one_separable(self):
        ds = synth_dataset(400, simple_rule)
        model = train(ds, "tree", {"max_depth": 1, "min_leaf": 1})
        X, y = ds.matrix()
        pred = model.predict_matrix(X, ds.feature_columns)
        assert confusion(pred, y).accuracy == 1.0
        assert tree_depth(model.params["tree"]) == 1

    def test_respects_depth_and_leaf_bounds(self):
        ds = synth_dataset(500, two_feature_rule, seed=3)
        model = train(ds, "tree", {"max_depth": 4, "min_leaf": 7})
        def walk(node):
            if node["leaf"]:
                return
            assert node["left"]["n"] >= 7 and node["right"]["n"] >= 7
            walk(node["left"])
            walk(node["right"])
        assert tree_depth(model.params["tree"]) <= 4
        walk(model.params["tree"])

    def test_cv_accuracy_on_separable(self, rng):
        ds = synth_dataset(400, two_feature_rule, seed=1)
        cv = cross_validate(ds, "tree", rng=rng)
        assert cv.mean()["accuracy"] >= 0.95
        assert len(cv.folds) == 10

    def test_single_class_rejected(self):
        ds = synth_dataset(50, lambda a, b: LABEL_FINISHED)
        with pytest.raises(SingleClassDataset):
            train(ds, "tree")


class TestForest:
    def test_degenerate_forest_equals_tree(self):
        ds = synth_dataset(300, two_feature_rule, seed=2)
        tree = train(ds, "tree", rng=np.random.default_rng(7))
        forest = train(ds, "forest",
                       {"n_trees": 1, "bootstrap": False, "max_features": None},
                       rng=np.random.default_rng(7))
        X, _ = ds.matrix()
        assert np.array_equal(forest.proba_matrix(X), tree.proba_matrix(X))

    def test_cv_accuracy_on_separable(self, rng):
        ds = synth_dataset(400, two_feature_rule, seed=4)
        cv = cross_validate(ds, "forest", {"n_trees": 20}, rng=rng)
        assert cv.mean()["accuracy"] >= 0.95


class TestGlm:
    def test_gradient_matches_finite_differences(self, rng):
        for _ in range(5):
            n, d = 40, 6
            X = rng.standard_normal((n, d))
            X1 = np.hstack([np.ones((n, 1)), X])
            y = rng.integers(0, 2, size=n).astype(float)
            w = rng.random(n) + 0.5
            theta = rng.standard_normal(d + 1) * 0.5
            grad = glm_gradient(theta, X1, y, w)
            eps = 1e-6
            for j in range(d + 1):
                step = np.zeros(d + 1)
                step[j] = eps
                numeric = (glm_log_loss(theta + step, X1, y, w)
                           - glm_log_loss(theta - step, X1, y, w)) / (2 * eps)
                denom = max(abs(numeric), abs(grad[j]), 1e-12)
                assert abs(numeric - grad[j]) / denom < 1e-5

    def test_holdout_accuracy_on_separable(self):
        train_ds = synth_dataset(400, simple_rule, seed=5)
        test_ds = synth_dataset(200, simple_rule, seed=6)
        model = train(train_ds, "glm")
        X, y = test_ds.matrix()
        pred = model.predict_matrix(X, test_ds.feature_columns)
        assert confusion(pred, y).accuracy >= 0.95


class TestModelContract:
    def test_prediction_threshold_is_strict(self):
        from mrsim.models import constant_model

        model = constant_model(p_fail=0.5, threshold=0.5)
        row = synth_dataset(1, simple_rule).rows[0]
        label, p = model.predict(row)
        assert p == 0.5
        assert label == "SUCCEED_PRED"  # strict >
        label, _ = constant_model(p_fail=0.51).predict(row)
        assert label == "FAIL_PRED"

    def test_prediction_deterministic(self):
        ds = synth_dataset(200, two_feature_rule, seed=8)
        model = train(ds, "forest", {"n_trees": 5})
        row = ds.rows[0]
        assert model.predict(row) == model.predict(row)

    def test_schema_mismatch(self):
        ds = synth_dataset(100, simple_rule, seed=9)
        model = train(ds, "tree")
        X, _ = ds.matrix()
        with pytest.raises(SchemaMismatch):
            model.predict_matrix(X, ("wrong", "columns"))

    def test_unimplemented_kinds(self):
        ds = synth_dataset(50, simple_rule, seed=10)
        for kind in ("NEURAL_NET", "BOOST", "CTREE"):
            with pytest.raises(UnsupportedModelKind):
                train(ds, kind)
        with pytest.raises(UnsupportedModelKind):
            train(ds, "gradient_boosting")

    def test_save_load_round_trip(self, tmp_path):
        ds = synth_dataset(150, two_feature_rule, seed=11)
        for kind in ("tree", "forest", "glm"):
            hp = {"n_trees": 3} if kind == "forest" else None
            model = train(ds, kind, hp)
            path = tmp_path / f"{kind}.json"
            save_model(model, str(path))
            loaded = load_model(str(path))
            X, _ = ds.matrix()
            assert np.array_equal(loaded.proba_matrix(X), model.proba_matrix(X))
            assert loaded.kind == model.kind
            assert loaded.fingerprint == model.fingerprint

    def test_default_hyperparams_match_contract(self):
        assert DEFAULT_HYPERPARAMS["TREE"] == {"max_depth": 12, "min_leaf": 5}
        assert DEFAULT_HYPERPARAMS["FOREST"]["n_trees"] == 50
        assert DEFAULT_HYPERPARAMS["FOREST"]["max_features"] == "sqrt"
        assert DEFAULT_HYPERPARAMS["GLM"]["tol"] == 1e-6
        assert DEFAULT_HYPERPARAMS["GLM"]["max_iter"] == 10_000
