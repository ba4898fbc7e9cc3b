import numpy as np
import pytest

from conftest import make_cohort, separable_cohort
from mafus.errors import ContractError
from mafus.learners import DegenerateModel, ModelConfig, fit, fit_arrays
from mafus.learners.boosting import _sigmoid, log_loss
from mafus.learners.forest import ForestModel
from mafus.learners.trees import Tree

SMALL_CONFIGS = {
    "svm": {"kernel": "rbf", "gamma": 0.5},
    "rf": {"n_estimators": 12},
    "xgb": {"n_estimators": 12, "max_depth": 3},
    "lgbm": {"n_estimators": 12, "num_leaves": 7},
    "mlp": {"hidden_layer_sizes": (12, 12, 12), "epochs": 40},
}


def leaf_tree(value):
    return Tree([-1], [0.0], [-1], [-1], [value], [0.0])


class TestFitBasics:
    def test_depth1_tree_separates_1d(self):
        rng = np.random.default_rng(0)
        x = np.r_[rng.uniform(-2, -0.5, 20), rng.uniform(0.5, 2, 20)][:, None]
        y = (x[:, 0] > 0).astype(float)
        model = fit_arrays(ModelConfig("rf", {"n_estimators": 1, "max_depth": 1,
                                              "max_features": None}), x, y)
        assert np.array_equal(model.predict(x), y.astype(int))

    def test_constant_labels_degenerate(self):
        cohort = make_cohort([[1, 2, 3], [4, 5, 6]], [1, 1])
        model = fit(ModelConfig("xgb"), cohort)
        assert isinstance(model, DegenerateModel)
        assert model.degenerate
        assert model.predict([0.0, 0.0, 0.0]) == 1
        assert model.score([9.0, 9.0, 9.0]) == 1.0

    def test_xor_linear_vs_rbf(self):
        X = np.array([[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]])
        y = np.array([0.0, 1.0, 1.0, 0.0])
        linear = fit_arrays(ModelConfig("svm", {"kernel": "linear"}), X, y)
        rbf = fit_arrays(ModelConfig("svm", {"kernel": "rbf", "gamma": 1.0}), X, y)
        assert np.mean(linear.predict(X) == y) <= 0.75
        assert np.mean(rbf.predict(X) == y) == 1.0

    def test_non_finite_features_rejected(self):
        X = np.array([[1.0, np.nan], [0.0, 1.0]])
        with pytest.raises(ContractError):
            fit_arrays(ModelConfig("rf"), X, np.array([0.0, 1.0]))

    def test_unknown_hyperparameter_rejected(self):
        with pytest.raises(ContractError, match="bogus"):
            ModelConfig("svm", {"bogus": 1})


class TestPredictScore:
    def test_dimension_mismatch(self, small_separable):
        model = fit(ModelConfig("xgb", SMALL_CONFIGS["xgb"]), small_separable)
        with pytest.raises(ContractError):
            model.predict([1.0])
        with pytest.raises(ContractError):
            model.score(np.zeros((4, 9)))

    def test_svm_zero_margin_ties_to_positive(self):
        from mafus.learners.svm import SVMModel
        model = SVMModel(ModelConfig("svm", {"kernel": "linear"}), 2,
                         np.zeros((0, 2)), np.zeros(0), 0.0)
        assert model.score([1.0, 1.0]) == 0.0
        assert model.predict([1.0, 1.0]) == 1

    def test_separable_training_points_recovered(self):
        cohort = separable_cohort(n=60, d=3, seed=1, gap=4.0)
        for algo, hp in SMALL_CONFIGS.items():
            model = fit(ModelConfig(algo, hp, seed=2), cohort)
            agreement = np.mean(model.predict(cohort.rows) == cohort.labels)
            assert agreement >= 0.95, algo

    def test_predict_consistent_with_score_threshold(self, small_separable):
        for algo, hp in SMALL_CONFIGS.items():
            model = fit(ModelConfig(algo, hp, seed=0), small_separable)
            scores = model.score(small_separable.rows)
            expected = (scores >= model.threshold).astype(int)
            assert np.array_equal(model.predict(small_separable.rows), expected), algo

    def test_forest_vote_fractions(self):
        config = ModelConfig("rf", {"n_estimators": 4})
        unanimous = ForestModel(config, 2, [leaf_tree(1.0)] * 4)
        assert unanimous.score([0.0, 0.0]) == 1.0
        three_of_four = ForestModel(config, 2, [leaf_tree(1.0)] * 3 + [leaf_tree(0.0)])
        assert three_of_four.score([0.0, 0.0]) == 0.75

    def test_xgb_zero_rounds_scores_half(self, small_separable):
        model = fit(ModelConfig("xgb", {"n_estimators": 0}), small_separable)
        assert model.score(small_separable.rows[0]) == 0.5


class TestDeterminism:
    @pytest.mark.parametrize("algo", sorted(SMALL_CONFIGS))
    def test_fit_twice_identical_scores(self, algo, small_separable):
        probe = np.random.default_rng(7).normal(size=(25, small_separable.d))
        config = ModelConfig(algo, SMALL_CONFIGS[algo], seed=11)
        a = fit(config, small_separable)
        b = fit(config, small_separable)
        assert np.array_equal(a.score(probe), b.score(probe))
        assert np.array_equal(a.predict(probe), b.predict(probe))


class TestBoosting:
    @pytest.mark.parametrize("algo", ["xgb", "lgbm"])
    def test_training_loss_non_increasing(self, algo):
        for seed in (0, 1):
            cohort = separable_cohort(n=70, d=4, seed=seed, gap=1.0)
            model = fit(ModelConfig(algo, SMALL_CONFIGS[algo], seed=seed), cohort)
            # independent walk over the staged ensemble
            w = np.ones(cohort.n)
            losses = [log_loss(cohort.labels, _sigmoid(F), w)
                      for F in model.staged_margins(cohort.rows)]
            diffs = np.diff(losses)
            assert np.all(diffs <= 1e-9)

    def test_leafwise_depthwise_structural_identity(self):
        cohort = separable_cohort(n=80, d=4, seed=2, gap=1.5)
        xgb = fit(ModelConfig("xgb", {"n_estimators": 6, "max_depth": 1, "gamma": 0.0,
                                      "reg_lambda": 1.0}), cohort)
        lgbm = fit(ModelConfig("lgbm", {"n_estimators": 6, "num_leaves": 2,
                                        "reg_lambda": 1.0, "max_depth": -1}), cohort)
        for tx, tl in zip(xgb.trees, lgbm.trees):
            assert tx.feature.tolist() == tl.feature.tolist()
            assert np.allclose(tx.threshold, tl.threshold)
            assert np.allclose(tx.value, tl.value)

    def test_split_counts_sum_to_internal_nodes(self, small_separable):
        for algo in ("xgb", "lgbm"):
            model = fit(ModelConfig(algo, SMALL_CONFIGS[algo]), small_separable)
            for tree in model.trees:
                assert tree.split_counts(small_separable.d).sum() == tree.n_internal

    def test_num_leaves_cap(self):
        cohort = separable_cohort(n=100, d=4, seed=3)
        model = fit(ModelConfig("lgbm", {"n_estimators": 3, "num_leaves": 4}), cohort)
        for tree in model.trees:
            n_leaves = tree.n_nodes - tree.n_internal
            assert n_leaves <= 4

    def test_forest_split_counts(self, small_separable):
        model = fit(ModelConfig("rf", SMALL_CONFIGS["rf"]), small_separable)
        for tree in model.trees:
            assert tree.split_counts(small_separable.d).sum() == tree.n_internal
