import json
import os
import sys
from dataclasses import replace

import numpy as np
import pytest

# main.py と同じく、プロジェクトのルートを sys.path に追加する
ROOT_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if ROOT_DIR not in sys.path:
    sys.path.insert(0, ROOT_DIR)

from config.model_config import ForestConfig, GbtConfig, LogisticConfig
from config.settings import Settings
from models.dataset_models import Dataset
from services.synthetic_service import SyntheticService


@pytest.fixture
def synthetic_dataset() -> Dataset:
    """X と A が独立な600行の合成データ。"""
    return SyntheticService.generate(600, seed=3)


@pytest.fixture
def tiny_dataset() -> Dataset:
    """全ての (グループ, ラベル) の組を含む12行のデータ。"""
    X = np.array([[v, (v * 7) % 5] for v in range(12)], dtype=float)
    a = np.array([0, 0, 0, 1, 1, 1, 0, 0, 0, 1, 1, 1])
    y = np.array([0, 1, 0, 1, 0, 1, 1, 0, 1, 0, 1, 0])
    return Dataset.from_arrays(X, a, y, dataset_id="tiny")


@pytest.fixture
def fast_settings() -> Settings:
    """テスト用に学習器を小さくした設定。"""
    return replace(
        Settings(),
        logistic=LogisticConfig(max_iters=300),
        forest=ForestConfig(n_trees=5, max_depth=4, min_samples_leaf=3),
        gbt=GbtConfig(n_trees=10, max_depth=2),
        eqodds_grid_step=0.05,
        eqodds_refine_step=0.01,
    )


def write_tabular_files(directory, n: int = 400, seed: int = 11):
    """数値列・カテゴリ列・文字列の保護属性を持つCSVとスキーマを書き出す。"""
    rng = np.random.default_rng(seed)
    age = rng.integers(18, 70, n)
    job = rng.choice(["clerk", "driver", "nurse"], n)
    group = rng.choice(["M", "F"], n)
    hours = rng.normal(40, 8, n).round(1)
    logit = 0.04 * (age - 40) + 0.05 * (hours - 40) + 0.8 * (group == "M") - 0.4
    label = np.where(rng.random(n) < 1 / (1 + np.exp(-logit)), "yes", "no")

    csv_path = os.path.join(str(directory), "toy.csv")
    with open(csv_path, "w", encoding="utf-8") as f:
        f.write("age,job,group,hours,label\n")
        for row in zip(age, job, group, hours, label):
            f.write(",".join(str(v) for v in row) + "\n")

    schema = {
        "name": "toy",
        "target_column": "label",
        "positive_label": "yes",
        "protected_column": "group",
        "privileged": {"value": "M"},
        "feature_columns": [
            {"name": "age", "kind": "numeric"},
            {"name": "job", "kind": "categorical"},
            {"name": "hours", "kind": "numeric"},
        ],
    }
    schema_path = os.path.join(str(directory), "toy_schema.json")
    with open(schema_path, "w", encoding="utf-8") as f:
        json.dump(schema, f)
    return csv_path, schema_path


@pytest.fixture
def tabular_files(tmp_path):
    """(CSVのパス, スキーマのパス)。"""
    return write_tabular_files(tmp_path)
