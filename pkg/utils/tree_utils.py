# utils/tree_utils.py
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from models.classifier_models import DecisionTree

logger = logging.getLogger(__name__)

# 分割利得の比較に用いる許容誤差
GAIN_TOLERANCE: float = 1e-12
HESSIAN_FLOOR: float = 1e-150


@dataclass
class SplitCandidate:
    """ノードの分割候補。"""
    feature: int
    threshold: float
    gain: float


class TreeBuilder:
    """CART 方式で二分決定木を構築するクラス。

    分割基準は S_l²/n_l + S_r²/n_r（S は目的値の和）の最大化です。
    目的値が 0/1 ラベルのときは Gini 不純度の減少量、残差のときは二乗誤差の減少量と
    等価になるため、フォレストとブースティングで同じ構築器を使います。

    分割候補は各特徴量の相異なる値の中点です。利得が等しい候補は、
    特徴量番号の小さいもの、次にしきい値の小さいものを優先します。

    Attributes:
        max_depth (int): 最大深さ。
        min_samples_leaf (int): 葉の最小サンプル数。
        max_features (Optional[int]): 分割ごとに候補とする特徴量数。None なら全特徴量。
        rng (Optional[np.random.Generator]): 特徴量の抽出に使う乱数生成器。
    """

    def __init__(
        self,
        max_depth: int,
        min_samples_leaf: int = 1,
        max_features: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> None:
        self.max_depth = max_depth
        self.min_samples_leaf = max(1, min_samples_leaf)
        self.max_features = max_features
        self.rng = rng
        self._feature: List[int] = []
        self._threshold: List[float] = []
        self._left: List[int] = []
        self._right: List[int] = []
        self._value: List[float] = []

    def build(self, Z: np.ndarray, target: np.ndarray, hessian: Optional[np.ndarray] = None) -> DecisionTree:
        """木を構築する。

        Args:
            Z (np.ndarray): n×p の入力行列（保護属性の列を含む）。
            target (np.ndarray): 目的値（ラベルまたは残差）。
            hessian (Optional[np.ndarray]): 指定された場合、葉の値を Σtarget / Σhessian
                （ニュートン法の1ステップ）とする。None なら目的値の平均。

        Returns:
            DecisionTree: 構築された木。
        """
        self._feature, self._threshold, self._left, self._right, self._value = [], [], [], [], []
        target = np.asarray(target, dtype=float)
        self._grow(Z, target, hessian, np.arange(Z.shape[0]), depth=0)
        tree = DecisionTree(
            feature=np.asarray(self._feature, dtype=int),
            threshold=np.asarray(self._threshold, dtype=float),
            left=np.asarray(self._left, dtype=int),
            right=np.asarray(self._right, dtype=int),
            value=np.asarray(self._value, dtype=float),
            max_depth=self.max_depth,
            min_samples_leaf=self.min_samples_leaf,
        )
        logger.debug("木を構築しました: ノード数 %d, 深さ %d", tree.node_count, tree.depth)
        return tree

    def _new_node(self) -> int:
        self._feature.append(-1)
        self._threshold.append(0.0)
        self._left.append(-1)
        self._right.append(-1)
        self._value.append(0.0)
        return len(self._feature) - 1

    def _leaf_value(self, target: np.ndarray, hessian: Optional[np.ndarray]) -> float:
        if hessian is None:
            return float(np.mean(target))
        denominator = float(np.sum(hessian))
        if denominator < HESSIAN_FLOOR:
            return 0.0
        return float(np.sum(target) / denominator)

    def _grow(
        self,
        Z: np.ndarray,
        target: np.ndarray,
        hessian: Optional[np.ndarray],
        rows: np.ndarray,
        depth: int,
    ) -> int:
        node = self._new_node()
        node_target = target[rows]
        node_hessian = hessian[rows] if hessian is not None else None
        self._value[node] = self._leaf_value(node_target, node_hessian)

        if depth >= self.max_depth or rows.shape[0] < 2 * self.min_samples_leaf:
            return node
        if np.ptp(node_target) == 0.0:
            return node

        split = self.find_best_split(Z[rows], node_target)
        if split is None:
            return node

        go_left = Z[rows, split.feature] <= split.threshold
        self._feature[node] = split.feature
        self._threshold[node] = split.threshold
        left = self._grow(Z, target, hessian, rows[go_left], depth + 1)
        self._left[node] = left
        right = self._grow(Z, target, hessian, rows[~go_left], depth + 1)
        self._right[node] = right
        return node

    def _candidate_features(self, n_features: int) -> np.ndarray:
        if self.max_features is None or self.max_features >= n_features:
            return np.arange(n_features)
        rng = self.rng if self.rng is not None else np.random.default_rng(0)
        return np.sort(rng.choice(n_features, size=self.max_features, replace=False))

    def find_best_split(self, Z: np.ndarray, target: np.ndarray) -> Optional[SplitCandidate]:
        """ノード内の最良の分割を探す。正の利得を持つ分割がなければ None。"""
        n = target.shape[0]
        total = float(np.sum(target))
        parent_score = total * total / n
        n_left = np.arange(1, n)
        allowed = (n_left >= self.min_samples_leaf) & (n - n_left >= self.min_samples_leaf)

        best: Optional[SplitCandidate] = None
        for feature in self._candidate_features(Z.shape[1]):
            order = np.argsort(Z[:, feature], kind="stable")
            values = Z[order, feature]
            sums = np.cumsum(target[order])[:-1]
            valid = allowed & (values[1:] > values[:-1])
            if not np.any(valid):
                continue
            scores = sums ** 2 / n_left + (total - sums) ** 2 / (n - n_left)
            scores = np.where(valid, scores, -np.inf)
            position = int(np.argmax(scores >= scores.max() - GAIN_TOLERANCE))
            gain = float(scores[position] - parent_score)
            if gain <= GAIN_TOLERANCE:
                continue
            if best is None or gain > best.gain + GAIN_TOLERANCE:
                threshold = float((values[position] + values[position + 1]) / 2.0)
                best = SplitCandidate(feature=int(feature), threshold=threshold, gain=gain)
        return best
