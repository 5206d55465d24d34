# models/dataset_models.py
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from sklearn.preprocessing import StandardScaler

from utils.exceptions import DatasetError, SchemaError

FEATURE_KINDS = ("numeric", "categorical")
MISSING_POLICIES = ("drop_row",)


@dataclass(frozen=True)
class RowFilter:
    """生の値に対する行フィルタ。

    `keep` が指定されていれば値がその中に含まれる行だけを残し、
    `min_value` / `max_value` が指定されていれば数値としてその範囲（両端含む）に
    収まる行だけを残します。

    Attributes:
        column (str): 判定に用いる列名。
        keep (Optional[List[str]]): 残す値のリスト。
        min_value (Optional[float]): 下限。
        max_value (Optional[float]): 上限。
    """
    column: str
    keep: Optional[List[str]] = None
    min_value: Optional[float] = None
    max_value: Optional[float] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RowFilter":
        if "column" not in data:
            raise SchemaError("row_filters の各要素には 'column' が必要です。")
        keep = data.get("keep")
        if keep is None and data.get("min") is None and data.get("max") is None:
            raise SchemaError(f"列 '{data['column']}' のフィルタに条件がありません。")
        return cls(
            column=data["column"],
            keep=[str(v) for v in keep] if keep is not None else None,
            min_value=data.get("min"),
            max_value=data.get("max"),
        )

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"column": self.column}
        if self.keep is not None:
            data["keep"] = list(self.keep)
        if self.min_value is not None:
            data["min"] = self.min_value
        if self.max_value is not None:
            data["max"] = self.max_value
        return data


@dataclass(frozen=True)
class FeatureSpec:
    """特徴量列の定義。

    Attributes:
        name (str): 列名。
        kind (str): 'numeric' または 'categorical'。
    """
    name: str
    kind: str


@dataclass(frozen=True)
class SchemaConfig:
    """CSVから `Dataset` を組み立てるための宣言的スキーマ。

    Attributes:
        name (str): データセットの識別子（例: 'adult'）。
        target_column (str): 目的変数の列名。
        positive_labels (List[str]): y=1 に対応する生の値。
        protected_column (str): 保護属性の列名。
        privileged_value (Optional[str]): この値と一致すれば a=1。
        privileged_threshold (Optional[float]): 数値がこの値以上なら a=1。
        feature_columns (List[FeatureSpec]): 特徴量列とその種類。
        row_filters (List[RowFilter]): 行フィルタ。
        missing_policy (str): 欠損の扱い（'drop_row' のみ）。
        missing_markers (List[str]): 欠損とみなす生の値。
    """
    name: str
    target_column: str
    positive_labels: List[str]
    protected_column: str
    feature_columns: List[FeatureSpec]
    privileged_value: Optional[str] = None
    privileged_threshold: Optional[float] = None
    row_filters: List[RowFilter] = field(default_factory=list)
    missing_policy: str = "drop_row"
    missing_markers: List[str] = field(default_factory=lambda: ["", "?"])

    def __post_init__(self) -> None:
        feature_names = [f.name for f in self.feature_columns]
        if self.target_column in feature_names:
            raise SchemaError(f"目的変数 '{self.target_column}' が特徴量列に含まれています。")
        if self.protected_column in feature_names:
            raise SchemaError(f"保護属性 '{self.protected_column}' が特徴量列に含まれています。")
        if (self.privileged_value is None) == (self.privileged_threshold is None):
            raise SchemaError("privileged_value と privileged_threshold はどちらか一方だけを指定してください。")
        if len(set(feature_names)) != len(feature_names):
            raise SchemaError("特徴量列に重複があります。")
        for spec in self.feature_columns:
            if spec.kind not in FEATURE_KINDS:
                raise SchemaError(f"列 '{spec.name}' の種類 '{spec.kind}' は不正です。")
        if self.missing_policy not in MISSING_POLICIES:
            raise SchemaError(f"未対応の missing_policy です: {self.missing_policy}")
        if not self.positive_labels:
            raise SchemaError("positive_label が指定されていません。")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SchemaConfig":
        """JSON文書（辞書）からスキーマを生成する。

        Args:
            data (Dict[str, Any]): スキーマ文書。キーは README を参照。

        Returns:
            SchemaConfig: 生成されたスキーマ。

        Raises:
            SchemaError: 必須キーの欠落や規則の矛盾がある場合。
        """
        required = ["target_column", "positive_label", "protected_column", "feature_columns"]
        missing = [key for key in required if key not in data]
        if missing:
            raise SchemaError(f"スキーマに必須キーがありません: {missing}")

        rule = data.get("privileged", {})
        positive = data["positive_label"]
        positive_labels = [str(v) for v in positive] if isinstance(positive, list) else [str(positive)]
        features = []
        for item in data["feature_columns"]:
            if isinstance(item, dict):
                features.append(FeatureSpec(name=item["name"], kind=item.get("kind", "numeric")))
            else:
                name, kind = item
                features.append(FeatureSpec(name=name, kind=kind))
        value = rule.get("value")
        threshold = rule.get("threshold")
        return cls(
            name=data.get("name", "dataset"),
            target_column=data["target_column"],
            positive_labels=positive_labels,
            protected_column=data["protected_column"],
            feature_columns=features,
            privileged_value=str(value) if value is not None else None,
            privileged_threshold=float(threshold) if threshold is not None else None,
            row_filters=[RowFilter.from_dict(f) for f in data.get("row_filters", [])],
            missing_policy=data.get("missing_policy", "drop_row"),
            missing_markers=[str(v) for v in data.get("missing_markers", ["", "?"])],
        )

    def to_dict(self) -> Dict[str, Any]:
        privileged: Dict[str, Any] = {}
        if self.privileged_value is not None:
            privileged["value"] = self.privileged_value
        else:
            privileged["threshold"] = self.privileged_threshold
        return {
            "name": self.name,
            "target_column": self.target_column,
            "positive_label": list(self.positive_labels),
            "protected_column": self.protected_column,
            "privileged": privileged,
            "feature_columns": [{"name": f.name, "kind": f.kind} for f in self.feature_columns],
            "row_filters": [f.to_dict() for f in self.row_filters],
            "missing_policy": self.missing_policy,
            "missing_markers": list(self.missing_markers),
        }

    def schema_hash(self) -> str:
        """スキーマ内容から決定的なハッシュ値を計算する。"""
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def required_columns(self) -> List[str]:
        columns = [self.target_column, self.protected_column]
        columns += [f.name for f in self.feature_columns]
        columns += [f.column for f in self.row_filters if f.column not in columns]
        return columns


@dataclass(frozen=True)
class SplitPlan:
    """訓練・テスト分割の計画。同じ (seed, repeat_index) は常に同じ分割を与える。

    Attributes:
        seed (int): 基準シード。
        train_fraction (float): 訓練データの割合 (0, 1)。
        repeat_index (int): 反復番号。
    """
    seed: int
    train_fraction: float = 0.7
    repeat_index: int = 0

    def derived_seed(self) -> int:
        """(seed, repeat_index) から分割用の32bitシードを導出する。"""
        sequence = np.random.SeedSequence([int(self.seed), int(self.repeat_index)])
        return int(sequence.generate_state(1)[0])


@dataclass
class Dataset:
    """符号化済みの表形式データセット。

    Attributes:
        X (np.ndarray): n×d の特徴量行列（保護属性を含まない）。
        a (np.ndarray): 長さnの保護属性 {0,1}（1 = 特権グループ）。
        y (np.ndarray): 長さnの正解ラベル {0,1}。
        feature_names (List[str]): 特徴量名。
        numeric_mask (np.ndarray): 各特徴量が数値列（標準化対象）かどうか。
        row_ids (np.ndarray): 元のCSVにおける行位置。
        dataset_id (str): データセットの識別子。
        schema_hash (str): 生成に用いたスキーマのハッシュ値。
    """
    X: np.ndarray
    a: np.ndarray
    y: np.ndarray
    feature_names: List[str]
    numeric_mask: np.ndarray
    row_ids: np.ndarray
    dataset_id: str = "dataset"
    schema_hash: str = ""

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def d(self) -> int:
        return int(self.X.shape[1])

    @classmethod
    def from_arrays(
        cls,
        X: Any,
        a: Any,
        y: Any,
        feature_names: Optional[List[str]] = None,
        dataset_id: str = "dataset",
    ) -> "Dataset":
        """配列から直接データセットを生成する。すべての列を数値列として扱う。"""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        d = X.shape[1]
        return cls(
            X=X,
            a=np.asarray(a, dtype=int).ravel(),
            y=np.asarray(y, dtype=int).ravel(),
            feature_names=list(feature_names) if feature_names else [f"x{i}" for i in range(d)],
            numeric_mask=np.ones(d, dtype=bool),
            row_ids=np.arange(X.shape[0]),
            dataset_id=dataset_id,
        )

    def subset(self, indices: np.ndarray) -> "Dataset":
        """指定した行だけを持つデータセットを返す。メタデータは引き継がれる。"""
        indices = np.asarray(indices, dtype=int)
        return Dataset(
            X=self.X[indices],
            a=self.a[indices],
            y=self.y[indices],
            feature_names=list(self.feature_names),
            numeric_mask=self.numeric_mask.copy(),
            row_ids=self.row_ids[indices],
            dataset_id=self.dataset_id,
            schema_hash=self.schema_hash,
        )

    def with_features(self, X: np.ndarray) -> "Dataset":
        return Dataset(
            X=X,
            a=self.a,
            y=self.y,
            feature_names=list(self.feature_names),
            numeric_mask=self.numeric_mask,
            row_ids=self.row_ids,
            dataset_id=self.dataset_id,
            schema_hash=self.schema_hash,
        )

    def validate(self) -> None:
        """データセットの不変条件を検査する。

        Raises:
            DatasetError: 形状の不一致、非有限値、片方のグループまたはラベルの欠落がある場合。
        """
        n = self.X.shape[0]
        if self.a.shape != (n,) or self.y.shape != (n,):
            raise DatasetError("X, a, y の行数が一致しません。")
        if len(self.feature_names) != self.X.shape[1]:
            raise DatasetError("feature_names の長さが特徴量の次元と一致しません。")
        if not np.all(np.isfinite(self.X)):
            raise DatasetError("特徴量に非有限値が含まれています。")
        if not set(np.unique(self.a)).issubset({0, 1}) or not set(np.unique(self.y)).issubset({0, 1}):
            raise DatasetError("a と y は {0,1} でなければなりません。")
        for group in (0, 1):
            if not np.any(self.a == group):
                raise DatasetError(f"保護属性グループ a={group} が空です。")
            if not np.any(self.y == group):
                raise DatasetError(f"ラベル y={group} の行がありません。")

    def cell_counts(self) -> Dict[Tuple[int, int], int]:
        """(グループ, ラベル) ごとの行数を返す。"""
        return {
            (g, label): int(np.sum((self.a == g) & (self.y == label)))
            for g in (0, 1) for label in (0, 1)
        }


@dataclass(frozen=True)
class Standardizer:
    """訓練データの統計量で数値列を標準化する変換器。

    Attributes:
        scaler (Optional[StandardScaler]): 数値列だけで学習した変換器。数値列がなければ None。
        numeric_mask (np.ndarray): 標準化の対象列。
        constant_mask (np.ndarray): 訓練データで値が一定だった列。変換後は常に0。
    """
    scaler: Optional[StandardScaler]
    numeric_mask: np.ndarray
    constant_mask: np.ndarray
