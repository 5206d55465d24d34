# config/settings.py
"""アプリケーション全体の設定とロギングの初期化。"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Tuple

from config.model_config import ForestConfig, GbtConfig, LogisticConfig
from utils.constants import (
    DEFAULT_MI_BINS,
    DEFAULT_REJECT_THETA,
    DEFAULT_THRESHOLD,
    DEFAULT_VALIDATION_FRACTION,
    EQODDS_GRID_STEP,
    EQODDS_REFINE_STEP,
    REJECT_THETA_GRID,
)

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"


@dataclass(frozen=True)
class Settings:
    """アプリケーション設定。

    学習器のハイパーパラメータと、後処理・評価に関する既定値をまとめて保持します。

    Attributes:
        logistic (LogisticConfig): ロジスティック回帰の設定。
        forest (ForestConfig): ランダムフォレストの設定。
        gbt (GbtConfig): 勾配ブースティング木の設定。
        threshold (float): スコアを二値判定に変換する既定しきい値。
        mi_bins (int): 相互情報量推定のヒストグラムのビン数。
        validation_fraction (float): ベースライン学習用に訓練データから切り出す割合。
        select_reject_theta (bool): Reject Optionの帯幅を検証データで選ぶかどうか。
        reject_theta (float): 選択しない場合に使う帯幅。
        reject_theta_grid (Tuple[float, ...]): 帯幅選択の候補。
        eqodds_grid_step (float): Equalized Odds の粗い格子の刻み。
        eqodds_refine_step (float): 局所改善の刻み。
        n_jobs (int): 反復の並列数。
        log_level (str): ロギングレベル。
    """
    logistic: LogisticConfig = field(default_factory=LogisticConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    gbt: GbtConfig = field(default_factory=GbtConfig)
    threshold: float = DEFAULT_THRESHOLD
    mi_bins: int = DEFAULT_MI_BINS
    validation_fraction: float = DEFAULT_VALIDATION_FRACTION
    select_reject_theta: bool = True
    reject_theta: float = DEFAULT_REJECT_THETA
    reject_theta_grid: Tuple[float, ...] = REJECT_THETA_GRID
    eqodds_grid_step: float = EQODDS_GRID_STEP
    eqodds_refine_step: float = EQODDS_REFINE_STEP
    n_jobs: int = 1
    log_level: str = "INFO"

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["reject_theta_grid"] = list(self.reject_theta_grid)
        return data


def configure_logging(level: str = "INFO") -> None:
    """ロギングを初期化する。

    標準出力はCLIのJSON出力に使うため、ログは標準エラーに書き出します。

    Args:
        level (str): ロギングレベル名（例: "INFO", "DEBUG"）。
    """
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT, force=True)
