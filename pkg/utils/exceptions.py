# utils/exceptions.py
"""ツールキット全体で使用される例外クラスを定義するモジュール。

すべての例外は `FairnessToolkitError` を基底とし、CLIはこの基底クラスを
捕捉して終了コード1に変換します。
"""
from typing import Optional


class FairnessToolkitError(Exception):
    """ツールキット固有の例外の基底クラス。"""


class SchemaError(FairnessToolkitError, ValueError):
    """スキーマ定義が不正、またはCSVにスキーマの列が存在しない場合の例外。"""


class EmptyDatasetError(FairnessToolkitError):
    """フィルタ適用後に行が1つも残らなかった場合の例外。"""


class CsvParseError(FairnessToolkitError, ValueError):
    """数値列のセルを解釈できなかった場合の例外。

    Attributes:
        row (int): CSV上の行番号（ヘッダ行を1行目とする）。
        column (str): 問題のあった列名。
    """

    def __init__(self, row: int, column: str, value: str) -> None:
        super().__init__(f"数値として解釈できないセルがあります: 行 {row}, 列 '{column}', 値 '{value}'")
        self.row = row
        self.column = column
        self.value = value


class DatasetError(FairnessToolkitError, ValueError):
    """データセットの不変条件（両グループ・両ラベルの存在など）が満たされない場合の例外。"""


class ShapeError(FairnessToolkitError, ValueError):
    """入力の特徴量次元がモデルと一致しない場合の例外。"""


class DivergenceError(FairnessToolkitError):
    """学習中に損失が有限値でなくなった場合の例外。

    Attributes:
        iteration (int): 発散を検出した反復番号。
    """

    def __init__(self, iteration: int, loss: float) -> None:
        super().__init__(f"学習が発散しました: 反復 {iteration} で損失 {loss}")
        self.iteration = iteration
        self.loss = loss


class ModelQueryError(FairnessToolkitError):
    """CAFPのスコア計算中にモデルの呼び出しが失敗した場合の例外。

    Attributes:
        index (Optional[int]): 失敗したインスタンスの行番号（特定できた場合）。
    """

    def __init__(self, index: Optional[int], cause: BaseException) -> None:
        super().__init__(f"モデルの呼び出しに失敗しました (インスタンス {index}): {cause}")
        self.index = index


class CertificateError(FairnessToolkitError):
    """EOD上界の証明書を計算できない場合の例外。"""


class FitError(FairnessToolkitError):
    """ベースライン後処理器の学習に失敗した場合の例外。"""


class MetricError(FairnessToolkitError, ValueError):
    """指標の前提条件が満たされない場合の例外。"""


class ExperimentAbortedError(FairnessToolkitError):
    """成功した反復の割合が規定値を下回り、実験を中止した場合の例外。"""


class StratificationWarning(UserWarning):
    """層化分割ができず、ラベルのみの層化に切り替えたことを示す警告。"""


class UndefinedRateWarning(UserWarning):
    """TPR/FPRの分母が0で、率が未定義になったことを示す警告。"""


class ModelFormatError(FairnessToolkitError, ValueError):
    """保存されたモデル文書の形式や版が不正な場合の例外。"""
