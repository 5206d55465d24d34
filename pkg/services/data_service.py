# services/data_service.py
import logging
import os
import warnings
from typing import Any, Optional, Tuple

import numpy as np
import pandas as pd
from sklearn.model_selection import train_test_split
from sklearn.preprocessing import StandardScaler

from models.dataset_models import Dataset, SchemaConfig, SplitPlan, Standardizer
from services.base_service import BaseService
from services.storage_service import StorageService
from utils.exceptions import CsvParseError, EmptyDatasetError, SchemaError, StratificationWarning

logger = logging.getLogger(__name__)


class DataService(BaseService[Dataset]):
    """
    CSVデータセットの読み込み、符号化、分割、標準化を行うサービスクラス。

    Attributes:
        schema (Optional[SchemaConfig]): `load_data` で使うスキーマ。
    """

    def __init__(self, schema: Optional[SchemaConfig] = None, storage_service: Optional[StorageService] = None) -> None:
        super().__init__(storage_service)
        self.schema = schema

    def load_data(self, identifier: Any) -> Optional[Dataset]:
        """CSVのパスを受け取り、保持しているスキーマでデータセットを読み込む。"""
        if self.schema is None:
            raise SchemaError("スキーマが設定されていません。")
        return self.load_csv(identifier, self.schema)

    def save_data(self, data: Dataset) -> None:
        """符号化済みのデータセットをCSVとして保存する。"""
        columns = {name: data.X[:, j].tolist() for j, name in enumerate(data.feature_names)}
        columns["a"] = data.a.tolist()
        columns["y"] = data.y.tolist()
        columns["row_id"] = data.row_ids.tolist()
        self.storage_service.save_csv_columns(f"{data.dataset_id}_encoded.csv", columns)

    def load_schema(self, path: str) -> SchemaConfig:
        """スキーマJSONを読み込む。

        Raises:
            FileNotFoundError: ファイルが存在しない場合。
            SchemaError: 内容が不正な場合。
        """
        data = self.storage_service.load_json(path)
        if data is None:
            raise FileNotFoundError(f"スキーマファイルが見つかりません: {path}")
        if not isinstance(data, dict):
            raise SchemaError(f"スキーマはJSONオブジェクトでなければなりません: {path}")
        schema = SchemaConfig.from_dict(data)
        self.schema = schema
        return schema

    def load_csv(self, path: str, schema: SchemaConfig) -> Dataset:
        """CSVファイルをスキーマに従って読み込み、符号化済みのデータセットを返す。

        カテゴリ列は先頭カテゴリを落としたワンホット符号化、数値列は生の値のまま
        （標準化は分割ごとに行う）です。行フィルタと欠損行の除去はこの順で適用されます。

        Args:
            path (str): CSVファイルのパス（ヘッダ行必須、UTF-8）。
            schema (SchemaConfig): スキーマ。

        Returns:
            Dataset: 符号化済みのデータセット。

        Raises:
            FileNotFoundError: ファイルが存在しない場合。
            SchemaError: スキーマの列がCSVにない場合。
            EmptyDatasetError: フィルタ後に行が残らない場合。
            CsvParseError: 数値列のセルを解釈できない場合。
            DatasetError: 片方の保護属性グループまたはラベルしか残らない場合。
        """
        if not os.path.exists(path):
            raise FileNotFoundError(f"データセットが見つかりません: {path}")
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True, encoding="utf-8")
        frame.columns = [str(c).strip() for c in frame.columns]
        frame = frame.apply(lambda column: column.str.strip())

        missing = [c for c in schema.required_columns() if c not in frame.columns]
        if missing:
            raise SchemaError(f"CSVにスキーマの列がありません: {missing}")

        keep = pd.Series(True, index=frame.index)
        for row_filter in schema.row_filters:
            values = frame[row_filter.column]
            if row_filter.keep is not None:
                keep &= values.isin(row_filter.keep)
            if row_filter.min_value is not None or row_filter.max_value is not None:
                numeric = pd.to_numeric(values, errors="coerce")
                if row_filter.min_value is not None:
                    keep &= numeric >= row_filter.min_value
                if row_filter.max_value is not None:
                    keep &= numeric <= row_filter.max_value
        model_columns = [schema.target_column, schema.protected_column] + [f.name for f in schema.feature_columns]
        keep &= ~frame[model_columns].isin(schema.missing_markers).any(axis=1)
        dropped = int((~keep).sum())
        frame = frame[keep]
        if frame.empty:
            raise EmptyDatasetError(f"フィルタ適用後に行が残りませんでした: {path}")

        y = frame[schema.target_column].isin(schema.positive_labels).to_numpy(dtype=int)
        if schema.privileged_value is not None:
            a = (frame[schema.protected_column] == schema.privileged_value).to_numpy(dtype=int)
        else:
            protected = self._numeric_column(frame, schema.protected_column)
            a = (protected >= schema.privileged_threshold).astype(int)

        blocks = []
        numeric_flags = []
        for spec in schema.feature_columns:
            if spec.kind == "numeric":
                block = pd.DataFrame({spec.name: self._numeric_column(frame, spec.name)}, index=frame.index)
            else:
                block = pd.get_dummies(frame[spec.name], prefix=spec.name, prefix_sep="=", drop_first=True, dtype=float)
            blocks.append(block)
            numeric_flags += [spec.kind == "numeric"] * block.shape[1]
        features = pd.concat(blocks, axis=1) if blocks else pd.DataFrame(index=frame.index)

        dataset = Dataset(
            X=features.to_numpy(dtype=float),
            a=a,
            y=y,
            feature_names=[str(c) for c in features.columns],
            numeric_mask=np.asarray(numeric_flags, dtype=bool),
            row_ids=frame.index.to_numpy(dtype=int),
            dataset_id=schema.name,
            schema_hash=schema.schema_hash(),
        )
        dataset.validate()
        logger.info(
            "データセット '%s' を読み込みました: %d 行 (除外 %d 行), %d 特徴量",
            schema.name, dataset.n, dropped, dataset.d,
        )
        return dataset

    @staticmethod
    def _numeric_column(frame: pd.DataFrame, column: str) -> np.ndarray:
        raw = frame[column]
        values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=float)
        bad = ~np.isfinite(values)
        if np.any(bad):
            position = int(np.argmax(bad))
            # ヘッダが1行目なので、データ行 i は CSV の i+2 行目
            raise CsvParseError(int(frame.index[position]) + 2, column, str(raw.iloc[position]))
        return values

    def split(self, ds: Dataset, plan: SplitPlan) -> Tuple[Dataset, Dataset]:
        """(グループ, ラベル) で層化した訓練・テスト分割を行う。

        どこかの (グループ, ラベル) の組が2行未満の場合は `StratificationWarning` を発行し、
        ラベルのみの層化に切り替えます。

        Args:
            ds (Dataset): 分割するデータセット。
            plan (SplitPlan): 分割計画。

        Returns:
            Tuple[Dataset, Dataset]: (訓練, テスト)。行の順序は元の順序を保つ。
        """
        if not 0.0 < plan.train_fraction < 1.0:
            raise ValueError(f"train_fraction は (0, 1) の範囲でなければなりません: {plan.train_fraction}")
        indices = np.arange(ds.n)
        cells = ds.a * 2 + ds.y
        counts = np.bincount(cells, minlength=4)
        stratify: Optional[np.ndarray] = cells
        if np.any((counts > 0) & (counts < 2)):
            warnings.warn("2行未満の (グループ, ラベル) の組があるため、ラベルのみで層化します。", StratificationWarning)
            label_counts = np.bincount(ds.y, minlength=2)
            stratify = ds.y if np.all(label_counts[label_counts > 0] >= 2) else None
        train_idx, test_idx = train_test_split(
            indices,
            train_size=plan.train_fraction,
            random_state=plan.derived_seed(),
            stratify=stratify,
        )
        logger.debug("分割 (seed=%d, repeat=%d): 訓練 %d 行, テスト %d 行",
                     plan.seed, plan.repeat_index, len(train_idx), len(test_idx))
        return ds.subset(np.sort(train_idx)), ds.subset(np.sort(test_idx))

    @staticmethod
    def fit_standardizer(train: Dataset) -> Standardizer:
        """訓練データの数値列に `StandardScaler`（母分散）を当てはめる。

        訓練データで値が一定の列は、浮動小数点の丸めで標準偏差がわずかに正になっても
        定数列として記録します。
        """
        if train.n == 0:
            raise ValueError("空のデータセットでは標準化の統計量を計算できません。")
        numeric_mask = train.numeric_mask.copy()
        constant_mask = np.zeros(train.d, dtype=bool)
        columns = np.nonzero(numeric_mask)[0]
        if columns.size == 0:
            return Standardizer(scaler=None, numeric_mask=numeric_mask, constant_mask=constant_mask)
        numeric = train.X[:, columns]
        constant_mask[columns] = np.ptp(numeric, axis=0) == 0.0
        scaler = StandardScaler().fit(numeric)
        return Standardizer(scaler=scaler, numeric_mask=numeric_mask, constant_mask=constant_mask)

    @staticmethod
    def apply_standardizer(std: Standardizer, ds: Dataset) -> Dataset:
        """訓練データの統計量で数値列を標準化する。定数列は0、ワンホット列はそのまま。"""
        X = ds.X.astype(float, copy=True)
        if std.scaler is not None:
            columns = np.nonzero(std.numeric_mask)[0]
            X[:, columns] = std.scaler.transform(X[:, columns])
            X[:, std.constant_mask] = 0.0
        return ds.with_features(X)
