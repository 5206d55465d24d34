# services/baseline_service.py
import logging
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from models.baseline_models import EqOddsMixer, RejectOptionRule
from utils.constants import (
    DEFAULT_THRESHOLD,
    EQODDS_GRID_STEP,
    EQODDS_REFINE_STEP,
    MAX_REJECT_ACCURACY_LOSS,
    REJECT_THETA_GRID,
    UNPRIVILEGED,
)
from utils.exceptions import FitError
from utils.math_utils import MathUtils
from utils.metric_utils import FairnessMetrics

logger = logging.getLogger(__name__)

FEASIBILITY_TOLERANCE: float = 1e-9
TIE_TOLERANCE: float = 1e-12
REFINE_RADIUS: float = 0.01


class BaselineService:
    """
    比較用の後処理（Equalized Odds の判定混合と Reject Option Classification）を
    学習・適用するサービスクラス。

    どちらの後処理もスコアを変更せず、二値判定だけを出力します。

    Attributes:
        grid_step (float): Equalized Odds の粗い格子の刻み。
        refine_step (float): 局所改善の刻み。
        threshold (float): 元の判定を作るしきい値。
    """

    def __init__(
        self,
        grid_step: float = EQODDS_GRID_STEP,
        refine_step: float = EQODDS_REFINE_STEP,
        threshold: float = DEFAULT_THRESHOLD,
    ) -> None:
        self.grid_step = grid_step
        self.refine_step = refine_step
        self.threshold = threshold

    # ------------------------------------------------------------------
    # Equalized Odds
    # ------------------------------------------------------------------
    @staticmethod
    def _group_rates(base: np.ndarray, y: np.ndarray, a: np.ndarray) -> Dict[int, Tuple[int, int, float, float]]:
        stats = {}
        for group in (0, 1):
            positives = (a == group) & (y == 1)
            negatives = (a == group) & (y == 0)
            if not np.any(positives):
                raise FitError(f"検証データのグループ a={group} に y=1 の行がありません。")
            if not np.any(negatives):
                raise FitError(f"検証データのグループ a={group} に y=0 の行がありません。")
            stats[group] = (
                int(np.sum(positives)),
                int(np.sum(negatives)),
                float(np.mean(base[positives])),
                float(np.mean(base[negatives])),
            )
        return stats

    @staticmethod
    def _solve_group(
        T: np.ndarray, F: np.ndarray, tpr: float, fpr: float
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """混合後の (TPR, FPR) = (T, F) を実現する (p2p, n2p) を解く。"""
        slope = tpr - fpr
        if abs(slope) < TIE_TOLERANCE:
            feasible = np.abs(T - F) <= TIE_TOLERANCE
            return np.clip(T, 0.0, 1.0), np.clip(T, 0.0, 1.0), feasible
        k = (T - F) / slope
        n2p = T - k * tpr
        p2p = n2p + k
        feasible = (
            (n2p >= -FEASIBILITY_TOLERANCE) & (n2p <= 1.0 + FEASIBILITY_TOLERANCE)
            & (p2p >= -FEASIBILITY_TOLERANCE) & (p2p <= 1.0 + FEASIBILITY_TOLERANCE)
        )
        return np.clip(p2p, 0.0, 1.0), np.clip(n2p, 0.0, 1.0), feasible

    def _candidates(
        self,
        stats: Dict[int, Tuple[int, int, float, float]],
        grid_group: int,
        p2p_values: np.ndarray,
        n2p_values: np.ndarray,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """一方のグループを格子上で動かし、他方を厳密に解いた候補と期待誤り率を返す。"""
        p2p_mesh, n2p_mesh = np.meshgrid(p2p_values, n2p_values, indexing="ij")
        p2p_g, n2p_g = p2p_mesh.ravel(), n2p_mesh.ravel()
        _, _, tpr_g, fpr_g = stats[grid_group]
        T = n2p_g + (p2p_g - n2p_g) * tpr_g
        F = n2p_g + (p2p_g - n2p_g) * fpr_g
        _, _, tpr_o, fpr_o = stats[1 - grid_group]
        p2p_o, n2p_o, feasible = self._solve_group(T, F, tpr_o, fpr_o)

        n_pos = stats[0][0] + stats[1][0]
        n_neg = stats[0][1] + stats[1][1]
        error = (n_pos * (1.0 - T) + n_neg * F) / (n_pos + n_neg)
        if grid_group == 0:
            params = np.column_stack([p2p_g, n2p_g, p2p_o, n2p_o])
        else:
            params = np.column_stack([p2p_o, n2p_o, p2p_g, n2p_g])
        return params[feasible], error[feasible]

    @staticmethod
    def _select(params: np.ndarray, errors: np.ndarray) -> int:
        """期待誤り率が最小の候補のうち、恒等写像に最も近いものの位置を返す。"""
        near = errors <= errors.min() + TIE_TOLERANCE
        distance = (1.0 - params[:, 0]) + params[:, 1] + (1.0 - params[:, 2]) + params[:, 3]
        distance = np.where(near, distance, np.inf)
        return int(np.argmin(distance))

    def fit_eqodds(
        self,
        val_scores: np.ndarray,
        val_a: np.ndarray,
        val_y: np.ndarray,
        seed: int = 0,
    ) -> EqOddsMixer:
        """検証データで Equalized Odds を満たす判定混合のパラメータを求める。

        混合後の率は TPR' = n2p + (p2p - n2p)·TPR（FPR も同様）で、期待誤り率を
        TPR'_0 = TPR'_1, FPR'_0 = FPR'_1 の制約の下で最小化します。一方のグループの
        (p2p, n2p) を刻み `grid_step` の格子で動かし、他方のグループは制約から厳密に解きます。
        最良点の周囲 ±0.01 を刻み `refine_step` で再探索し、誤り率が等しい候補は
        恒等写像 (p2p=1, n2p=0) に近いものを選びます。

        Args:
            val_scores (np.ndarray): 検証データのスコア。
            val_a (np.ndarray): 検証データの保護属性。
            val_y (np.ndarray): 検証データの正解ラベル。
            seed (int): 適用時の乱数シード。

        Returns:
            EqOddsMixer: 学習済みの混合器。

        Raises:
            FitError: いずれかのグループに陽性または陰性の行がない場合。
        """
        scores = np.asarray(val_scores, dtype=float).ravel()
        a = np.asarray(val_a).ravel()
        y = np.asarray(val_y).ravel()
        base = FairnessMetrics.threshold(scores, self.threshold)
        stats = self._group_rates(base, y, a)

        coarse = MathUtils.grid(self.grid_step)
        pools: List[Tuple[np.ndarray, np.ndarray]] = [
            self._candidates(stats, group, coarse, coarse) for group in (0, 1)
        ]
        params = np.vstack([p for p, _ in pools])
        errors = np.concatenate([e for _, e in pools])
        if params.shape[0] == 0:
            raise FitError("Equalized Odds の制約を満たす混合パラメータが見つかりません。")
        best = params[self._select(params, errors)]

        for group in (0, 1):
            center_p2p, center_n2p = best[2 * group], best[2 * group + 1]
            p2p_values = MathUtils.grid(self.refine_step, *MathUtils.clip_interval(center_p2p, REFINE_RADIUS))
            n2p_values = MathUtils.grid(self.refine_step, *MathUtils.clip_interval(center_n2p, REFINE_RADIUS))
            pools.append(self._candidates(stats, group, p2p_values, n2p_values))
        params = np.vstack([p for p, _ in pools])
        errors = np.concatenate([e for _, e in pools])
        chosen = self._select(params, errors)
        p2p_0, n2p_0, p2p_1, n2p_1 = (float(v) for v in params[chosen])

        logger.debug(
            "Equalized Odds の混合: a=0 (p2p=%.3f, n2p=%.3f), a=1 (p2p=%.3f, n2p=%.3f), 誤り率 %.4f",
            p2p_0, n2p_0, p2p_1, n2p_1, errors[chosen],
        )
        return EqOddsMixer(
            p2p_0=p2p_0, n2p_0=n2p_0, p2p_1=p2p_1, n2p_1=n2p_1,
            seed=seed, validation_error=float(errors[chosen]),
        )

    def apply_eqodds(
        self,
        mixer: EqOddsMixer,
        scores: np.ndarray,
        a: np.ndarray,
        seed: Optional[int] = None,
    ) -> np.ndarray:
        """混合器で判定を確率的に反転する。

        行 i の一様乱数は (seed, i) だけで決まるため、同じシードなら常に同じ判定になります。
        """
        scores = np.asarray(scores, dtype=float).ravel()
        a = np.asarray(a).ravel()
        base = FairnessMetrics.threshold(scores, self.threshold)
        u = np.random.default_rng(mixer.seed if seed is None else seed).random(scores.shape[0])
        p2p = np.where(a == 1, mixer.p2p_1, mixer.p2p_0)
        n2p = np.where(a == 1, mixer.n2p_1, mixer.n2p_0)
        return np.where(base == 1, u < p2p, u < n2p).astype(int)

    # ------------------------------------------------------------------
    # Reject Option Classification
    # ------------------------------------------------------------------
    @staticmethod
    def apply_reject_option(rule: RejectOptionRule, scores: np.ndarray, a: np.ndarray) -> np.ndarray:
        """|s - 0.5| <= theta の帯の中では favored_group に1、それ以外に0を出力する。

        theta = 0 のときは帯を持たず、通常の0.5しきい値判定と一致します。
        """
        scores = np.asarray(scores, dtype=float).ravel()
        a = np.asarray(a).ravel()
        base = FairnessMetrics.threshold(scores, DEFAULT_THRESHOLD)
        if rule.theta == 0.0:
            return base
        band = np.abs(scores - DEFAULT_THRESHOLD) <= rule.theta
        return np.where(band, (a == rule.favored_group).astype(int), base)

    def select_theta(
        self,
        val_scores: np.ndarray,
        val_a: np.ndarray,
        val_y: np.ndarray,
        grid: Iterable[float] = REJECT_THETA_GRID,
        favored_group: int = UNPRIVILEGED,
        max_accuracy_loss: float = MAX_REJECT_ACCURACY_LOSS,
    ) -> RejectOptionRule:
        """検証データで |DPD| を最小にする帯幅 theta を選ぶ。

        theta=0 に対する正解率の低下が `max_accuracy_loss` 以下の候補に限ります。
        |DPD| が等しい候補は theta の小さいものを選びます。

        Raises:
            ValueError: 候補が空、または [0, 0.5] の範囲外の値を含む場合。
        """
        candidates = sorted(set(float(t) for t in grid))
        if not candidates:
            raise ValueError("theta の候補が空です。")
        if candidates[0] < 0.0 or candidates[-1] > 0.5:
            raise ValueError("theta の候補は [0, 0.5] の範囲でなければなりません。")
        y = np.asarray(val_y).ravel()
        a = np.asarray(val_a).ravel()
        base_accuracy = FairnessMetrics.accuracy(FairnessMetrics.threshold(val_scores, DEFAULT_THRESHOLD), y)

        chosen: Optional[float] = None
        chosen_dpd = np.inf
        for theta in candidates:
            rule = RejectOptionRule(theta=theta, favored_group=favored_group)
            pred = self.apply_reject_option(rule, val_scores, a)
            if base_accuracy - FairnessMetrics.accuracy(pred, y) > max_accuracy_loss + TIE_TOLERANCE:
                continue
            _, dpd_abs = FairnessMetrics.dpd(pred, a)
            if dpd_abs < chosen_dpd - TIE_TOLERANCE:
                chosen, chosen_dpd = theta, dpd_abs
        if chosen is None:
            chosen = candidates[0]
            logger.warning("正解率の条件を満たす theta がないため、最小の候補 %.2f を使います。", chosen)
        logger.debug("Reject Option の theta=%.2f を選択しました (|DPD|=%.4f)", chosen, chosen_dpd)
        return RejectOptionRule(theta=chosen, favored_group=favored_group)
