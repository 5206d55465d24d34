# services/storage_service.py
import json
import logging
import os
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from models.classifier_models import CafpClassifier, ForestModel, GbtModel, LogisticModel, ProbClassifier
from utils.constants import MODEL_FORMAT_VERSION
from utils.exceptions import ModelFormatError

logger = logging.getLogger(__name__)

MODEL_KINDS = {
    LogisticModel.kind: LogisticModel,
    ForestModel.kind: ForestModel,
    GbtModel.kind: GbtModel,
    CafpClassifier.kind: CafpClassifier,
}


def _to_builtin(value: Any) -> Any:
    """numpy の値を JSON に書き出せる組み込み型に変換する。"""
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"JSONに変換できない型です: {type(value).__name__}")


class StorageService:
    """ローカルファイルシステムへのデータ永続化を管理するサービスクラス。

    レポートのJSON、グラフ用のCSV、学習済みモデルの保存・読み込みを担当します。
    JSONはキーを整列して書き出すため、同じ内容なら常に同じバイト列になります。
    """

    def __init__(self, base_path: str = ".") -> None:
        """StorageServiceのコンストラクタ。

        Args:
            base_path (str): 相対パスを解決する基準ディレクトリ。
        """
        self.base_path = base_path

    def get_path(self, file_name: str) -> str:
        """ベースパスとファイル名を結合して完全なファイルパスを取得する。

        Args:
            file_name (str): ファイル名。絶対パスならそのまま使われる。

        Returns:
            str: 完全なファイルパス。
        """
        return os.path.join(self.base_path, file_name)

    def _prepare(self, file_name: str) -> str:
        file_path = self.get_path(file_name)
        directory = os.path.dirname(file_path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        return file_path

    @staticmethod
    def dumps(data: Any) -> str:
        """保存時と同じ規則でJSON文字列に変換する。"""
        return json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True, default=_to_builtin) + "\n"

    def save_json(self, file_name: str, data: Union[Dict[str, Any], List[Any]]) -> str:
        """データをJSONファイルとして保存する。

        Args:
            file_name (str): 保存するファイル名。
            data (Union[Dict, List]): 保存するデータ。

        Returns:
            str: 書き出したファイルのパス。

        Raises:
            OSError: 書き込みに失敗した場合。
        """
        file_path = self._prepare(file_name)
        with open(file_path, "w", encoding="utf-8") as f:
            f.write(self.dumps(data))
        logger.info("データを %s に保存しました。", file_path)
        return file_path

    def load_json(self, file_name: str) -> Optional[Union[Dict[str, Any], List[Any]]]:
        """JSONファイルからデータを読み込む。

        Args:
            file_name (str): 読み込むファイル名。

        Returns:
            Optional[Union[Dict, List]]: 読み込まれたデータ。ファイルが存在しない場合はNone。

        Raises:
            ValueError: JSONとして解釈できない場合。
        """
        file_path = self.get_path(file_name)
        if not os.path.exists(file_path):
            logger.warning("ファイルが見つかりません: %s", file_path)
            return None
        with open(file_path, "r", encoding="utf-8") as f:
            try:
                return json.load(f)
            except json.JSONDecodeError as e:
                raise ValueError(f"JSONの読み込みに失敗しました: {file_path}, {e}") from e

    def save_csv_columns(self, file_name: str, columns: Dict[str, List[Any]]) -> str:
        """列指向のデータをCSVとして保存する。列の順序は辞書の順序に従う。"""
        file_path = self._prepare(file_name)
        pd.DataFrame(columns).to_csv(file_path, index=False, float_format="%.10g")
        logger.info("CSVを %s に保存しました。", file_path)
        return file_path

    def save_model(self, file_name: str, model: ProbClassifier, schema_hash: str = "") -> str:
        """学習済みモデルを版付きのJSON文書として保存する。

        文書の形式は `{format_version, kind, feature_names, schema_hash, params}` です。
        """
        envelope = {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": model.kind,
            "feature_names": list(getattr(model, "feature_names", [])),
            "schema_hash": schema_hash,
            "params": model.to_params(),
        }
        return self.save_json(file_name, envelope)

    def load_model(self, file_name: str) -> Optional[ProbClassifier]:
        """`save_model` で保存したモデルを読み込む。

        Raises:
            ModelFormatError: 版や種類が不正な場合。
        """
        envelope = self.load_json(file_name)
        if envelope is None:
            return None
        if not isinstance(envelope, dict) or envelope.get("format_version") != MODEL_FORMAT_VERSION:
            raise ModelFormatError(f"未対応のモデル文書です: {file_name}")
        model_cls = MODEL_KINDS.get(envelope.get("kind"))
        if model_cls is None:
            raise ModelFormatError(f"未知のモデルの種類です: {envelope.get('kind')}")
        return model_cls.from_params(envelope["params"], envelope.get("feature_names", []))
