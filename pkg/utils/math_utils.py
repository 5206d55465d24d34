# utils/math_utils.py
import math
from typing import Iterable, Tuple

import numpy as np
from scipy.special import logit

from models.experiment_models import MetricSummary
from utils.constants import CI_Z, PROBABILITY_CLIP


class MathUtils:
    """数値計算の共通処理をまとめたユーティリティクラス。"""

    @staticmethod
    def log_odds(p: float) -> float:
        """確率を [PROBABILITY_CLIP, 1-PROBABILITY_CLIP] に収めてから対数オッズに変換する。"""
        return float(logit(np.clip(p, PROBABILITY_CLIP, 1.0 - PROBABILITY_CLIP)))

    @staticmethod
    def logistic_loss(z: np.ndarray, y: np.ndarray) -> float:
        """ロジット z に対する平均負の対数尤度 mean(log(1+e^z) - y·z)。"""
        return float(np.mean(np.logaddexp(0.0, z) - y * z))

    @staticmethod
    def relative_error(analytic: float, numeric: float) -> float:
        return abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))

    @staticmethod
    def summarize(values: Iterable[float]) -> MetricSummary:
        """反復ごとの値から平均・標本標準偏差・95%信頼区間を求める。

        値は集計前に整列するため、反復の完了順によらず同じ結果になります。
        信頼区間は正規近似 mean ± 1.96·SD/√k です。

        Args:
            values (Iterable[float]): 反復ごとの指標値。

        Returns:
            MetricSummary: 要約統計。

        Raises:
            ValueError: 値が1つもない場合。
        """
        ordered = np.sort(np.asarray(list(values), dtype=float))
        k = ordered.shape[0]
        if k == 0:
            raise ValueError("集計する値がありません。")
        mean = float(np.sum(ordered) / k)
        sd = float(np.std(ordered, ddof=1)) if k > 1 else 0.0
        half = CI_Z * sd / math.sqrt(k)
        return MetricSummary(mean=mean, ci_low=mean - half, ci_high=mean + half, sd=sd, n=k)

    @staticmethod
    def median_ms_per_100(timings: Iterable[float], batch: int) -> float:
        """秒単位の計測値の中央値を100行あたりのミリ秒に換算する。"""
        return float(np.median(np.asarray(list(timings)))) * 1000.0 * 100.0 / batch

    @staticmethod
    def grid(step: float, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """[low, high] を刻み step で覆う格子。端点は丸め誤差を除いて含まれる。"""
        count = int(round((high - low) / step))
        return np.round(np.linspace(low, high, count + 1), 10)

    @staticmethod
    def clip_interval(center: float, radius: float) -> Tuple[float, float]:
        return max(0.0, center - radius), min(1.0, center + radius)
