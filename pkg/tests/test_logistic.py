import math

import numpy as np
import pytest

from config.model_config import LogisticConfig
from models.classifier_models import LogisticModel
from models.dataset_models import Dataset
from services.logistic_service import LogisticService
from services.storage_service import StorageService
from utils.exceptions import DivergenceError, ShapeError


def separable_toy(copies: int = 20) -> Dataset:
    X = np.array([[-1.0]] * copies + [[1.0]] * copies)
    y = np.array([0] * copies + [1] * copies)
    a = np.tile([0, 1], copies)
    return Dataset.from_arrays(X, a, y)


def test_zero_iterations_predict_one_half(synthetic_dataset):
    model = LogisticService().train_logistic(synthetic_dataset, LogisticConfig(max_iters=0))
    assert np.all(model.weights == 0.0)
    assert np.allclose(model.predict_proba(synthetic_dataset.X, synthetic_dataset.a), 0.5)


def test_separable_toy_learns_positive_weight():
    ds = separable_toy()
    model = LogisticService().train_logistic(ds)
    assert model.weights[0] > 0
    pred = (model.predict_proba(ds.X, ds.a) >= 0.5).astype(int)
    assert np.mean(pred == ds.y) == 1.0


def test_matches_grid_search_optimum():
    # x=-1 のとき正例率 1/3、x=+1 のとき 2/3。最適解は w=ln2, b=0
    X = np.array([[-1.0]] * 3 + [[1.0]] * 3)
    y = np.array([0, 0, 1, 1, 1, 0])
    ds = Dataset.from_arrays(X, np.zeros(6), y)
    model = LogisticService().train_logistic(ds, LogisticConfig(l2_penalty=0.0, max_iters=5000))

    grid = np.arange(-2.0, 2.0001, 0.01)
    W, B = np.meshgrid(grid, grid, indexing="ij")
    z = W[..., None] * X[:, 0] + B[..., None]
    losses = np.mean(np.logaddexp(0.0, z) - y * z, axis=-1)
    w_idx, b_idx = np.unravel_index(int(np.argmin(losses)), losses.shape)
    assert model.weights[0] == pytest.approx(grid[w_idx], abs=1e-2)
    assert model.bias == pytest.approx(grid[b_idx], abs=1e-2)
    assert model.weights[0] == pytest.approx(math.log(2.0), abs=1e-3)


def test_training_meta_records_loss_history(synthetic_dataset):
    model = LogisticService().train_logistic(synthetic_dataset, LogisticConfig(max_iters=50))
    meta = model.training_meta
    assert meta["iterations"] <= 50
    assert len(meta["loss_history"]) == meta["iterations"] + 1
    assert meta["loss_history"][-1] <= meta["loss_history"][0]


@pytest.mark.parametrize("learning_rate", [1e-3, 0.1, 5.0])
def test_training_loss_never_increases(learning_rate):
    model = LogisticService().train_logistic(separable_toy(), LogisticConfig(learning_rate=learning_rate, max_iters=200))
    history = np.array(model.training_meta["loss_history"])
    assert len(history) > 1
    assert np.all(np.diff(history) <= 0.0)
    assert history[-1] < history[0]


def test_non_finite_features_raise_divergence():
    ds = Dataset.from_arrays(np.array([[np.inf], [1.0]]), [0, 1], [0, 1])
    with np.errstate(invalid="ignore"), pytest.raises(DivergenceError) as excinfo:
        LogisticService().train_logistic(ds)
    assert excinfo.value.iteration == 0


@pytest.mark.parametrize(
    "weights, bias, expected",
    [
        ([0.0, 0.0], 0.0, 0.5),
        ([1.0, 0.0], 0.0, 0.5),
        ([0.0, 0.0], math.log(3.0), 0.75),
    ],
)
def test_predict_proba_examples(weights, bias, expected):
    model = LogisticModel(weights=np.array(weights), bias=bias)
    assert model.predict_proba([0.0], 1) == pytest.approx(expected, abs=1e-12)


def test_predict_proba_rejects_wrong_dimension():
    model = LogisticModel(weights=np.zeros(3), bias=0.0)
    with pytest.raises(ShapeError):
        model.predict_proba(np.zeros((4, 3)), 0)


def test_predict_proba_stays_in_unit_interval():
    rng = np.random.default_rng(0)
    model = LogisticModel(weights=rng.normal(0, 50, 4), bias=10.0)
    proba = model.predict_proba(rng.normal(0, 100, (500, 3)), rng.integers(0, 2, 500))
    assert np.all((proba >= 0.0) & (proba <= 1.0))


def test_gradient_check_at_zero(tiny_dataset):
    assert LogisticService().gradient_check(tiny_dataset) < 1e-5


def test_gradient_check_at_random_weights(tiny_dataset):
    rng = np.random.default_rng(42)
    weights = rng.normal(0, 0.3, tiny_dataset.d + 1)
    assert LogisticService().gradient_check(tiny_dataset, weights=weights, bias=0.2) < 1e-5


def test_gradient_check_with_constant_column():
    X = np.column_stack([np.linspace(-1, 1, 10), np.full(10, 3.0)])
    ds = Dataset.from_arrays(X, np.arange(10) % 2, (np.arange(10) > 4).astype(int))
    assert LogisticService().gradient_check(ds, weights=np.array([0.5, -0.2, 0.1])) < 1e-5


def test_model_round_trip_through_storage(tmp_path, synthetic_dataset):
    service = LogisticService(StorageService(str(tmp_path)))
    model = service.train_logistic(synthetic_dataset, LogisticConfig(max_iters=100))
    service.save_data(model)
    loaded = service.load_data("logistic_model.json")
    assert isinstance(loaded, LogisticModel)
    assert np.array_equal(loaded.predict_proba(synthetic_dataset.X, 1), model.predict_proba(synthetic_dataset.X, 1))
