import numpy as np
import pytest
from scipy.special import expit

from config.model_config import ForestConfig, GbtConfig
from models.classifier_models import DecisionTree, ForestModel
from models.dataset_models import Dataset
from services.boosting_service import BoostingService
from services.forest_service import ForestService
from services.logistic_service import augment
from services.synthetic_service import SyntheticService
from utils.math_utils import MathUtils
from utils.tree_utils import TreeBuilder


def threshold_toy() -> Dataset:
    X = np.array([[0.0], [1.0], [2.0], [3.0], [6.0], [7.0], [8.0]])
    y = np.array([0, 0, 0, 0, 1, 1, 1])
    return Dataset.from_arrays(X, np.zeros(7), y)


def leaf(value: float) -> DecisionTree:
    return DecisionTree(
        feature=np.array([-1]), threshold=np.array([0.0]), left=np.array([-1]), right=np.array([-1]),
        value=np.array([value]), max_depth=0, min_samples_leaf=1,
    )


def test_pure_labels_give_single_leaf_trees():
    ds = Dataset.from_arrays(np.random.default_rng(0).normal(size=(30, 3)), np.arange(30) % 2, np.ones(30))
    model = ForestService().train_forest(ds, ForestConfig(n_trees=4, max_depth=5))
    assert all(tree.node_count == 1 for tree in model.trees)
    assert np.all(model.predict_proba(ds.X, ds.a) == 1.0)


def test_depth_one_tree_splits_at_midpoint():
    cfg = ForestConfig(n_trees=1, max_depth=1, min_samples_leaf=1, bootstrap=False, feature_subsample=1.0)
    model = ForestService().train_forest(threshold_toy(), cfg)
    tree = model.trees[0]
    assert tree.feature[0] == 0
    assert tree.threshold[0] == pytest.approx(4.5)
    assert model.predict_proba([3.0], 0) == 0.0
    assert model.predict_proba([6.0], 1) == 1.0


def test_forest_averages_tree_outputs():
    model = ForestModel(trees=[leaf(1.0), leaf(0.0)], tree_seeds=[0, 1], feature_subsample=1.0, n_inputs=2)
    assert model.predict_proba([0.3], 0) == pytest.approx(0.5)


def test_forest_is_invariant_to_tree_order(synthetic_dataset):
    model = ForestService().train_forest(synthetic_dataset, ForestConfig(n_trees=6, max_depth=4))
    reversed_model = ForestModel(
        trees=list(reversed(model.trees)),
        tree_seeds=list(reversed(model.tree_seeds)),
        feature_subsample=model.feature_subsample,
        n_inputs=model.n_inputs,
    )
    X, a = synthetic_dataset.X, synthetic_dataset.a
    assert np.array_equal(model.predict_proba(X, a), reversed_model.predict_proba(X, a))


def test_forest_is_deterministic_across_job_counts(synthetic_dataset):
    serial = ForestService().train_forest(synthetic_dataset, ForestConfig(n_trees=4, max_depth=3, seed=9))
    parallel = ForestService().train_forest(synthetic_dataset, ForestConfig(n_trees=4, max_depth=3, seed=9, n_jobs=2))
    X = synthetic_dataset.X
    assert np.array_equal(serial.predict_proba(X, 0), parallel.predict_proba(X, 0))
    assert serial.tree_seeds == [9, 10, 11, 12]


def test_default_feature_fraction_is_sqrt_rule():
    assert ForestService.feature_fraction(ForestConfig(), 16) == pytest.approx(0.25)
    assert ForestService.feature_fraction(ForestConfig(feature_subsample=0.5), 16) == 0.5


def test_gbt_without_trees_predicts_positive_rate(synthetic_dataset):
    model = BoostingService().train_gbt(synthetic_dataset, GbtConfig(n_trees=0))
    rate = float(np.mean(synthetic_dataset.y))
    assert np.allclose(model.predict_proba(synthetic_dataset.X, synthetic_dataset.a), rate, atol=1e-12)


def test_gbt_zero_learning_rate_matches_base_score(synthetic_dataset):
    X, a = synthetic_dataset.X, synthetic_dataset.a
    base = BoostingService().train_gbt(synthetic_dataset, GbtConfig(n_trees=0))
    frozen = BoostingService().train_gbt(synthetic_dataset, GbtConfig(n_trees=3, learning_rate=0.0))
    assert np.array_equal(base.predict_proba(X, a), frozen.predict_proba(X, a))


def test_single_stump_moves_probabilities_toward_labels():
    ds = threshold_toy()
    before = BoostingService().train_gbt(ds, GbtConfig(n_trees=0))
    after = BoostingService().train_gbt(ds, GbtConfig(n_trees=1, max_depth=1))
    p_before = before.predict_proba(ds.X, ds.a)
    p_after = after.predict_proba(ds.X, ds.a)
    assert np.all(p_after[ds.y == 1] > p_before[ds.y == 1])
    assert np.all(p_after[ds.y == 0] < p_before[ds.y == 0])
    history = after.training_meta["loss_history"]
    assert history[1] < history[0]


@pytest.mark.parametrize("make_dataset", [threshold_toy, lambda: SyntheticService.generate(400, seed=8)])
def test_gbt_training_loss_never_increases(make_dataset):
    model = BoostingService().train_gbt(make_dataset(), GbtConfig(n_trees=15, max_depth=2, learning_rate=0.1))
    history = np.array(model.training_meta["loss_history"])
    assert len(history) == 16
    assert np.all(np.diff(history) <= 0.0)


def test_gbt_subsample_is_seeded(synthetic_dataset):
    cfg = GbtConfig(n_trees=5, max_depth=2, subsample=0.5, seed=4)
    first = BoostingService().train_gbt(synthetic_dataset, cfg)
    second = BoostingService().train_gbt(synthetic_dataset, cfg)
    X = synthetic_dataset.X
    assert np.array_equal(first.predict_proba(X, 1), second.predict_proba(X, 1))


def test_builder_prefers_lower_feature_on_ties():
    Z = np.column_stack([np.arange(6.0), np.arange(6.0)])
    target = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    split = TreeBuilder(max_depth=1).find_best_split(Z, target)
    assert split.feature == 0
    assert split.threshold == pytest.approx(2.5)


def test_builder_newton_leaf_values():
    Z = np.array([[0.0], [1.0]])
    residual = np.array([0.5, -0.25])
    hessian = np.array([0.25, 0.25])
    tree = TreeBuilder(max_depth=0).build(Z, residual, hessian=hessian)
    assert tree.value[0] == pytest.approx(0.25 / 0.5)


def test_gbt_raw_score_is_base_plus_shrunk_trees():
    ds = threshold_toy()
    model = BoostingService().train_gbt(ds, GbtConfig(n_trees=2, max_depth=1, learning_rate=0.3))
    Z = augment(ds)
    expected = MathUtils.log_odds(float(np.mean(ds.y))) + sum(0.3 * tree.predict(Z) for tree in model.trees)
    assert np.allclose(model.predict_proba(ds.X, ds.a), expit(expected))
