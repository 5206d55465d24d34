import json
import os

import numpy as np
import pandas as pd
import pytest

from models.dataset_models import Dataset, SchemaConfig, SplitPlan
from services.data_service import DataService
from utils.exceptions import CsvParseError, DatasetError, EmptyDatasetError, SchemaError, StratificationWarning

SCHEMA_DIR = os.path.join(os.path.dirname(__file__), "..", "config", "schemas")


def write_files(tmp_path, rows, schema, header):
    csv_path = tmp_path / "data.csv"
    csv_path.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
    return str(csv_path), SchemaConfig.from_dict(schema)


AGE_SCHEMA = {
    "name": "credit",
    "target_column": "class",
    "positive_label": "good",
    "protected_column": "age",
    "privileged": {"threshold": 25},
    "feature_columns": [{"name": "amount", "kind": "numeric"}],
}


def test_load_csv_encodes_protected_and_target(tabular_files):
    csv_path, schema_path = tabular_files
    service = DataService()
    schema = service.load_schema(schema_path)
    ds = service.load_csv(csv_path, schema)

    raw = pd.read_csv(csv_path, dtype=str)
    assert ds.n == len(raw)
    assert np.array_equal(ds.a, (raw["group"] == "M").to_numpy(dtype=int))
    assert np.array_equal(ds.y, (raw["label"] == "yes").to_numpy(dtype=int))
    assert ds.feature_names == ["age", "job=driver", "job=nurse", "hours"]
    assert ds.numeric_mask.tolist() == [True, False, False, True]
    assert ds.dataset_id == "toy"
    assert ds.schema_hash == schema.schema_hash()


def test_threshold_rule_binarizes_age(tmp_path):
    csv_path, schema = write_files(
        tmp_path, ["24,100,good", "25,200,bad", "60,300,good"], AGE_SCHEMA, "age,amount,class"
    )
    ds = DataService().load_csv(csv_path, schema)
    assert ds.a.tolist() == [0, 1, 1]
    assert ds.y.tolist() == [1, 0, 1]


def test_missing_cell_row_is_dropped(tmp_path):
    csv_path, schema = write_files(
        tmp_path, ["20,100,good", "40,,bad", "50,300,bad"], AGE_SCHEMA, "age,amount,class"
    )
    ds = DataService().load_csv(csv_path, schema)
    assert ds.n == 2
    assert ds.row_ids.tolist() == [0, 2]


def test_missing_column_raises_schema_error(tmp_path):
    csv_path, schema = write_files(tmp_path, ["30,good"], AGE_SCHEMA, "age,class")
    with pytest.raises(SchemaError):
        DataService().load_csv(csv_path, schema)


def test_filters_removing_every_row_raise(tmp_path):
    schema = dict(AGE_SCHEMA, row_filters=[{"column": "amount", "min": 1000}])
    csv_path, schema = write_files(tmp_path, ["30,100,good", "40,200,bad"], schema, "age,amount,class")
    with pytest.raises(EmptyDatasetError):
        DataService().load_csv(csv_path, schema)


def test_range_and_value_filters(tmp_path):
    schema = dict(
        AGE_SCHEMA,
        row_filters=[{"column": "amount", "min": 150, "max": 350}, {"column": "class", "keep": ["good", "bad"]}],
    )
    csv_path, schema = write_files(
        tmp_path, ["30,100,good", "20,200,good", "50,300,unknown", "60,340,bad"], schema, "age,amount,class"
    )
    ds = DataService().load_csv(csv_path, schema)
    assert ds.row_ids.tolist() == [1, 3]


def test_unparseable_numeric_cell_names_row_and_column(tmp_path):
    csv_path, schema = write_files(tmp_path, ["30,100,good", "abc,200,bad"], AGE_SCHEMA, "age,amount,class")
    with pytest.raises(CsvParseError) as excinfo:
        DataService().load_csv(csv_path, schema)
    assert excinfo.value.row == 3
    assert excinfo.value.column == "age"


def test_missing_file_message_contains_path(tmp_path):
    path = str(tmp_path / "nope.csv")
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        DataService().load_csv(path, SchemaConfig.from_dict(AGE_SCHEMA))


@pytest.mark.parametrize("name", ["adult", "compas", "german"])
def test_bundled_schemas_parse(name):
    schema = DataService().load_schema(os.path.join(SCHEMA_DIR, f"{name}.json"))
    assert schema.name == name
    assert schema.target_column not in [f.name for f in schema.feature_columns]


def test_schema_rejects_target_in_features():
    data = dict(AGE_SCHEMA, feature_columns=[{"name": "class", "kind": "numeric"}])
    with pytest.raises(SchemaError):
        SchemaConfig.from_dict(data)


def test_schema_rejects_both_privileged_forms():
    data = dict(AGE_SCHEMA, privileged={"threshold": 25, "value": "30"})
    with pytest.raises(SchemaError):
        SchemaConfig.from_dict(data)


def four_cell_dataset(n: int) -> Dataset:
    i = np.arange(n)
    return Dataset.from_arrays(i.reshape(-1, 1).astype(float), i % 2, (i // 2) % 2)


def test_split_sizes_and_partition():
    ds = four_cell_dataset(100)
    train, test = DataService().split(ds, SplitPlan(seed=1, train_fraction=0.7))
    assert train.n == 70
    assert test.n == 30
    assert set(train.row_ids).isdisjoint(test.row_ids)
    assert sorted(np.concatenate([train.row_ids, test.row_ids]).tolist()) == list(range(100))


def test_split_is_deterministic():
    ds = four_cell_dataset(100)
    service = DataService()
    first = service.split(ds, SplitPlan(seed=5, repeat_index=3))
    second = service.split(ds, SplitPlan(seed=5, repeat_index=3))
    other = service.split(ds, SplitPlan(seed=5, repeat_index=4))
    assert np.array_equal(first[0].row_ids, second[0].row_ids)
    assert not np.array_equal(first[0].row_ids, other[0].row_ids)


def test_split_stratifies_every_cell():
    ds = four_cell_dataset(40)
    train, test = DataService().split(ds, SplitPlan(seed=0, train_fraction=0.7))
    assert set(train.cell_counts().values()) == {7}
    assert set(test.cell_counts().values()) == {3}


def test_split_warns_on_singleton_cell():
    a = np.array([0] * 10 + [1] * 10 + [1])
    y = np.array([0, 1] * 5 + [0] * 10 + [1])
    ds = Dataset.from_arrays(np.arange(21.0), a, y)
    with pytest.warns(StratificationWarning):
        train, test = DataService().split(ds, SplitPlan(seed=0, train_fraction=0.7))
    assert train.n + test.n == 21


def test_split_rejects_bad_fraction():
    with pytest.raises(ValueError):
        DataService().split(four_cell_dataset(10), SplitPlan(seed=0, train_fraction=1.0))


def test_standardizer_examples():
    train = Dataset.from_arrays(np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]), [0, 1, 0], [1, 0, 1])
    service = DataService()
    std = service.fit_standardizer(train)
    scaled = service.apply_standardizer(std, train).X
    assert scaled[:, 0] == pytest.approx([-1.2247449, 0.0, 1.2247449], abs=1e-6)
    assert scaled[:, 1].tolist() == [0.0, 0.0, 0.0]

    test = Dataset.from_arrays(np.array([[2.0, 7.0]]), [1], [0])
    assert service.apply_standardizer(std, test).X[0, 0] == 0.0


def test_standardizer_leaves_one_hot_columns(tabular_files):
    csv_path, schema_path = tabular_files
    service = DataService()
    ds = service.load_csv(csv_path, service.load_schema(schema_path))
    scaled = service.apply_standardizer(service.fit_standardizer(ds), ds)
    assert np.array_equal(scaled.X[:, 1:3], ds.X[:, 1:3])
    assert abs(scaled.X[:, 0].mean()) < 1e-9


def test_standardizer_zeroes_column_with_rounding_noise():
    X = np.column_stack([[1.0, 2.0, 3.0], np.full(3, 0.1)])
    train = Dataset.from_arrays(X, [0, 1, 0], [1, 0, 1])
    service = DataService()
    std = service.fit_standardizer(train)
    assert std.constant_mask.tolist() == [False, True]
    assert service.apply_standardizer(std, train).X[:, 1].tolist() == [0.0, 0.0, 0.0]


def test_standardized_train_columns_have_zero_mean_and_unit_variance(tabular_files):
    csv_path, schema_path = tabular_files
    service = DataService()
    ds = service.load_csv(csv_path, service.load_schema(schema_path))
    train, test = service.split(ds, SplitPlan(seed=2))
    std = service.fit_standardizer(train)
    scaled = service.apply_standardizer(std, train).X
    for j in np.nonzero(train.numeric_mask & ~std.constant_mask)[0]:
        assert abs(scaled[:, j].mean()) < 1e-9
        assert abs(scaled[:, j].var() - 1.0) < 1e-9
    assert service.apply_standardizer(std, test).X.shape == test.X.shape


def test_standardizer_without_numeric_columns_is_identity():
    X = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    train = Dataset(
        X=X, a=np.array([0, 1, 0]), y=np.array([1, 0, 0]), feature_names=["c=1", "c=2"],
        numeric_mask=np.array([False, False]), row_ids=np.arange(3), dataset_id="onehot",
    )
    service = DataService()
    std = service.fit_standardizer(train)
    assert std.scaler is None
    assert np.array_equal(service.apply_standardizer(std, train).X, X)


def test_single_group_csv_is_rejected(tmp_path):
    csv_path, schema = write_files(
        tmp_path, ["30,100,good", "40,200,bad", "50,300,good"], AGE_SCHEMA, "age,amount,class"
    )
    with pytest.raises(DatasetError, match="a=0"):
        DataService().load_csv(csv_path, schema)


def test_save_data_writes_encoded_csv(tmp_path, tiny_dataset):
    from services.storage_service import StorageService

    service = DataService(storage_service=StorageService(str(tmp_path)))
    service.save_data(tiny_dataset)
    frame = pd.read_csv(tmp_path / "tiny_encoded.csv")
    assert len(frame) == tiny_dataset.n
    assert {"a", "y"}.issubset(frame.columns)
