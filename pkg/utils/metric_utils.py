# utils/metric_utils.py
import warnings
from typing import Dict, List, Optional, Tuple

import numpy as np

from models.fairness_models import GroupRates, MetricSet, MIEstimate
from utils.constants import DEFAULT_MI_BINS
from utils.exceptions import MetricError, UndefinedRateWarning


class FairnessMetrics:
    """有用性・公平性指標と相互情報量の推定を行うユーティリティクラス。

    判定（0/1）に対する指標と、スコアに対する指標（`score_eod`, `score_dpd`）があります。
    符号付きの差はすべて「非特権グループ(a=0) − 特権グループ(a=1)」の向きです。
    """

    @staticmethod
    def _as_arrays(*arrays: np.ndarray) -> List[np.ndarray]:
        converted = [np.asarray(arr).ravel() for arr in arrays]
        n = converted[0].shape[0]
        if any(arr.shape[0] != n for arr in converted):
            raise MetricError("入力配列の長さが一致しません。")
        return converted

    @staticmethod
    def _require_groups(a: np.ndarray) -> None:
        for group in (0, 1):
            if not np.any(a == group):
                raise MetricError(f"保護属性グループ a={group} が存在しません。")

    @staticmethod
    def threshold(scores: np.ndarray, t: float) -> np.ndarray:
        """スコアを s >= t で二値判定に変換する。"""
        return (np.asarray(scores, dtype=float) >= t).astype(int)

    @staticmethod
    def confusion_rates(pred: np.ndarray, y: np.ndarray, a: np.ndarray) -> Dict[int, GroupRates]:
        """グループごとの TPR・FPR・陽性率を計算する。

        分母が0の率は None とし、`UndefinedRateWarning` を発行します。

        Args:
            pred (np.ndarray): 二値判定。
            y (np.ndarray): 正解ラベル。
            a (np.ndarray): 保護属性。

        Returns:
            Dict[int, GroupRates]: グループ番号をキーとする率。

        Raises:
            MetricError: どちらかのグループが存在しない場合。
        """
        pred, y, a = FairnessMetrics._as_arrays(pred, y, a)
        FairnessMetrics._require_groups(a)
        rates: Dict[int, GroupRates] = {}
        for group in (0, 1):
            in_group = a == group
            positives = in_group & (y == 1)
            negatives = in_group & (y == 0)
            n_pos = int(np.sum(positives))
            n_neg = int(np.sum(negatives))
            tpr: Optional[float] = float(np.sum(pred[positives] == 1) / n_pos) if n_pos else None
            fpr: Optional[float] = float(np.sum(pred[negatives] == 1) / n_neg) if n_neg else None
            if tpr is None:
                warnings.warn(f"グループ a={group} に y=1 の行がないため TPR は未定義です。", UndefinedRateWarning)
            if fpr is None:
                warnings.warn(f"グループ a={group} に y=0 の行がないため FPR は未定義です。", UndefinedRateWarning)
            rates[group] = GroupRates(
                tpr=tpr,
                fpr=fpr,
                positive_rate=float(np.mean(pred[in_group] == 1)),
                n=int(np.sum(in_group)),
                n_pos=n_pos,
                n_neg=n_neg,
            )
        return rates

    @staticmethod
    def _rate_gaps(rates: Dict[int, GroupRates]) -> List[float]:
        gaps = []
        for name in ("tpr", "fpr"):
            r0, r1 = getattr(rates[0], name), getattr(rates[1], name)
            if r0 is not None and r1 is not None:
                gaps.append(r0 - r1)
        if not gaps:
            raise MetricError("TPR と FPR の差がどちらも未定義です。")
        return gaps

    @staticmethod
    def dpd(pred: np.ndarray, a: np.ndarray) -> Tuple[float, float]:
        """Demographic Parity Difference を (符号付き, 絶対値) で返す。"""
        pred, a = FairnessMetrics._as_arrays(pred, a)
        FairnessMetrics._require_groups(a)
        signed = float(np.mean(pred[a == 0] == 1) - np.mean(pred[a == 1] == 1))
        return signed, abs(signed)

    @staticmethod
    def aod(pred: np.ndarray, y: np.ndarray, a: np.ndarray) -> Tuple[float, float]:
        """Average Odds Difference を (符号付き, 絶対値) で返す。

        符号付きは ½[(TPR差) + (FPR差)]、絶対値は ½[|TPR差| + |FPR差|] です。
        未定義の差は除外し、定義された差だけで平均します。
        """
        gaps = FairnessMetrics._rate_gaps(FairnessMetrics.confusion_rates(pred, y, a))
        signed = float(sum(gaps) / len(gaps))
        absolute = float(sum(abs(g) for g in gaps) / len(gaps))
        return signed, absolute

    @staticmethod
    def eod(pred: np.ndarray, y: np.ndarray, a: np.ndarray) -> float:
        """Equalized Odds Difference: y ごとの条件付き陽性率の差の絶対値の最大。"""
        gaps = FairnessMetrics._rate_gaps(FairnessMetrics.confusion_rates(pred, y, a))
        return float(max(abs(g) for g in gaps))

    @staticmethod
    def accuracy(pred: np.ndarray, y: np.ndarray) -> float:
        pred, y = FairnessMetrics._as_arrays(pred, y)
        if pred.shape[0] == 0:
            raise MetricError("空の入力に対して正解率は定義されません。")
        return float(np.mean(pred == y))

    @staticmethod
    def balanced_accuracy(pred: np.ndarray, y: np.ndarray) -> float:
        """½(TPR + TNR)。片方のラベルしかない場合はそのラベルの再現率。"""
        pred, y = FairnessMetrics._as_arrays(pred, y)
        recalls = [float(np.mean(pred[y == label] == label)) for label in (0, 1) if np.any(y == label)]
        if not recalls:
            raise MetricError("空の入力に対して balanced accuracy は定義されません。")
        return float(sum(recalls) / len(recalls))

    @staticmethod
    def metric_set(pred: np.ndarray, y: np.ndarray, a: np.ndarray, threshold: Optional[float] = None) -> MetricSet:
        """判定に対するすべての指標をまとめて計算する。"""
        dpd_signed, dpd_abs = FairnessMetrics.dpd(pred, a)
        gaps = FairnessMetrics._rate_gaps(FairnessMetrics.confusion_rates(pred, y, a))
        return MetricSet(
            accuracy=FairnessMetrics.accuracy(pred, y),
            balanced_accuracy=FairnessMetrics.balanced_accuracy(pred, y),
            dpd_signed=dpd_signed,
            dpd_abs=dpd_abs,
            aod_signed=float(sum(gaps) / len(gaps)),
            aod_abs=float(sum(abs(g) for g in gaps) / len(gaps)),
            eod=float(max(abs(g) for g in gaps)),
            threshold=threshold,
        )

    @staticmethod
    def score_dpd(scores: np.ndarray, a: np.ndarray) -> float:
        """スコアのグループ平均の差 E[s | a=0] − E[s | a=1]（符号付き）。"""
        scores, a = FairnessMetrics._as_arrays(np.asarray(scores, dtype=float), a)
        FairnessMetrics._require_groups(a)
        return float(np.mean(scores[a == 0]) - np.mean(scores[a == 1]))

    @staticmethod
    def score_eod(scores: np.ndarray, y: np.ndarray, a: np.ndarray) -> float:
        """スコア版のEOD: y ごとのグループ条件付き平均スコアの差の絶対値の最大。"""
        scores, y, a = FairnessMetrics._as_arrays(np.asarray(scores, dtype=float), y, a)
        FairnessMetrics._require_groups(a)
        gaps = []
        for label in (0, 1):
            cell0 = (a == 0) & (y == label)
            cell1 = (a == 1) & (y == label)
            if not np.any(cell0) or not np.any(cell1):
                warnings.warn(f"y={label} の行がないグループがあるため、その差は除外します。", UndefinedRateWarning)
                continue
            gaps.append(abs(float(np.mean(scores[cell0]) - np.mean(scores[cell1]))))
        if not gaps:
            raise MetricError("スコアのEODを計算できる (グループ, ラベル) の組がありません。")
        return max(gaps)

    @staticmethod
    def mutual_info(scores: np.ndarray, a: np.ndarray, bins: int = DEFAULT_MI_BINS) -> MIEstimate:
        """スコアと保護属性の相互情報量をヒストグラムのプラグイン推定で求める（単位: nats）。

        [0,1] を等幅に `bins` 分割し、ビン番号は clip(floor(s·bins), 0, bins-1) です。

        Args:
            scores (np.ndarray): [0,1] のスコア。
            a (np.ndarray): 保護属性。
            bins (int): ビン数。

        Returns:
            MIEstimate: 推定値。

        Raises:
            MetricError: 標本数がビン数より少ない場合。
        """
        scores, a = FairnessMetrics._as_arrays(np.asarray(scores, dtype=float), np.asarray(a, dtype=int))
        n = scores.shape[0]
        if bins < 1 or n < bins:
            raise MetricError(f"相互情報量の推定には n >= bins が必要です (n={n}, bins={bins})。")
        index = np.clip(np.floor(scores * bins).astype(int), 0, bins - 1)
        joint = np.bincount(index * 2 + a, minlength=bins * 2).reshape(bins, 2) / n
        p_z = joint.sum(axis=1, keepdims=True)
        p_a = joint.sum(axis=0, keepdims=True)
        mask = joint > 0
        expected = (p_z @ p_a)[mask]
        nats = float(np.sum(joint[mask] * np.log(joint[mask] / expected)))
        return MIEstimate(nats=max(nats, 0.0), bins=bins, n=n)
