# models/classifier_models.py
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Union

import numpy as np
from scipy.special import expit

from utils.exceptions import ShapeError

ArrayLike = Union[np.ndarray, List[float]]


class ProbClassifier(ABC):
    """保護属性を独立した入力として受け取る確率的分類器のインターフェース。

    `predict_proba(x, a)` は f(x, a) ≈ P(Y=1 | X=x, A=a) を返します。
    保護属性は内部で特徴量ベクトルの末尾に1列として追加されるため、
    反実仮想入力の生成は1座標の書き換えだけで済みます。
    x に含まれる代理変数には手を加えません。
    """

    kind: str = "base"

    @property
    @abstractmethod
    def n_features(self) -> int:
        """保護属性を除いた特徴量の次元。"""

    @abstractmethod
    def _predict_augmented(self, Z: np.ndarray) -> np.ndarray:
        """保護属性を末尾に追加した行列 Z (n×(d+1)) に対する確率を返す。"""

    def predict_proba(self, x: ArrayLike, a: Union[int, ArrayLike]) -> Union[float, np.ndarray]:
        """f(x, a) を評価する。

        Args:
            x (ArrayLike): 長さdの特徴量ベクトル、または n×d の行列。
            a (Union[int, ArrayLike]): 保護属性。スカラーなら全行に適用される。

        Returns:
            Union[float, np.ndarray]: [0,1] の確率。x がベクトルならスカラー。

        Raises:
            ShapeError: 特徴量の次元がモデルと一致しない場合。
        """
        X = np.asarray(x, dtype=float)
        single = X.ndim == 1
        if single:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"特徴量の次元が一致しません: 期待 {self.n_features}, 入力 {X.shape}")
        a_col = np.broadcast_to(np.asarray(a, dtype=float), (X.shape[0],))
        Z = np.column_stack([X, a_col])
        proba = np.clip(self._predict_augmented(Z), 0.0, 1.0)
        return float(proba[0]) if single else proba

    @abstractmethod
    def to_params(self) -> Dict[str, Any]:
        """シリアライズ用のパラメータ辞書を返す。"""


@dataclass
class LogisticModel(ProbClassifier):
    """ロジスティック回帰モデル。

    Attributes:
        weights (np.ndarray): 長さ d+1 の重み（末尾が保護属性の係数）。
        bias (float): バイアス項。
        feature_names (List[str]): 特徴量名。
        training_meta (Dict[str, Any]): 反復回数・最終損失・損失履歴など。
    """
    weights: np.ndarray
    bias: float
    feature_names: List[str] = field(default_factory=list)
    training_meta: Dict[str, Any] = field(default_factory=dict)

    kind = "logistic"

    @property
    def n_features(self) -> int:
        return int(self.weights.shape[0]) - 1

    @property
    def protected_coefficient(self) -> float:
        return float(self.weights[-1])

    def _predict_augmented(self, Z: np.ndarray) -> np.ndarray:
        return expit(Z @ self.weights + self.bias)

    def to_params(self) -> Dict[str, Any]:
        return {
            "weights": self.weights.tolist(),
            "bias": float(self.bias),
            "training_meta": {k: v for k, v in self.training_meta.items() if k != "loss_history"},
        }

    @classmethod
    def from_params(cls, params: Dict[str, Any], feature_names: List[str]) -> "LogisticModel":
        return cls(
            weights=np.asarray(params["weights"], dtype=float),
            bias=float(params["bias"]),
            feature_names=list(feature_names),
            training_meta=dict(params.get("training_meta", {})),
        )


@dataclass
class DecisionTree:
    """配列表現の二分決定木。

    ノード i が内部ノードなら `feature[i] >= 0` で、`X[:, feature[i]] <= threshold[i]`
    の行は `left[i]`、それ以外は `right[i]` に進みます。葉では `feature[i] == -1` で、
    `value[i]` が出力です（フォレストでは正例率、ブースティングでは残差木の出力）。

    Attributes:
        feature (np.ndarray): 分割に用いる特徴量の番号。葉は -1。
        threshold (np.ndarray): 分割しきい値。
        left (np.ndarray): 左の子ノード番号。
        right (np.ndarray): 右の子ノード番号。
        value (np.ndarray): ノードの出力値。
        max_depth (int): 学習時の最大深さ。
        min_samples_leaf (int): 学習時の葉の最小サンプル数。
    """
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    max_depth: int
    min_samples_leaf: int

    @property
    def node_count(self) -> int:
        return int(self.feature.shape[0])

    @property
    def depth(self) -> int:
        depths = np.zeros(self.node_count, dtype=int)
        for node in range(self.node_count):
            if self.feature[node] >= 0:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max()) if self.node_count else 0

    def apply(self, Z: np.ndarray) -> np.ndarray:
        """各行が到達する葉のノード番号を返す。"""
        nodes = np.zeros(Z.shape[0], dtype=int)
        active = self.feature[nodes] >= 0
        while np.any(active):
            idx = np.nonzero(active)[0]
            current = nodes[idx]
            go_left = Z[idx, self.feature[current]] <= self.threshold[current]
            nodes[idx] = np.where(go_left, self.left[current], self.right[current])
            active[idx] = self.feature[nodes[idx]] >= 0
        return nodes

    def predict(self, Z: np.ndarray) -> np.ndarray:
        return self.value[self.apply(Z)]

    def to_params(self) -> Dict[str, Any]:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
        }

    @classmethod
    def from_params(cls, params: Dict[str, Any]) -> "DecisionTree":
        return cls(
            feature=np.asarray(params["feature"], dtype=int),
            threshold=np.asarray(params["threshold"], dtype=float),
            left=np.asarray(params["left"], dtype=int),
            right=np.asarray(params["right"], dtype=int),
            value=np.asarray(params["value"], dtype=float),
            max_depth=int(params["max_depth"]),
            min_samples_leaf=int(params["min_samples_leaf"]),
        )


@dataclass
class ForestModel(ProbClassifier):
    """ランダムフォレスト。予測は各木の葉の値（正例率）の平均。

    Attributes:
        trees (List[DecisionTree]): 学習済みの木。
        tree_seeds (List[int]): 木ごとのシード。
        feature_subsample (float): 分割ごとに候補とした特徴量の割合。
        n_inputs (int): 保護属性を含む入力次元 d+1。
        feature_names (List[str]): 特徴量名。
        training_meta (Dict[str, Any]): 学習時の情報。
    """
    trees: List[DecisionTree]
    tree_seeds: List[int]
    feature_subsample: float
    n_inputs: int
    feature_names: List[str] = field(default_factory=list)
    training_meta: Dict[str, Any] = field(default_factory=dict)

    kind = "forest"

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_features(self) -> int:
        return self.n_inputs - 1

    def _predict_augmented(self, Z: np.ndarray) -> np.ndarray:
        if not self.trees:
            return np.full(Z.shape[0], 0.5)
        per_tree = np.stack([tree.predict(Z) for tree in self.trees])
        # 木の並び順で結果が変わらないよう、加算の前に整列する
        return np.sort(per_tree, axis=0).mean(axis=0)

    def to_params(self) -> Dict[str, Any]:
        return {
            "trees": [tree.to_params() for tree in self.trees],
            "tree_seeds": list(self.tree_seeds),
            "feature_subsample": self.feature_subsample,
            "n_inputs": self.n_inputs,
            "training_meta": dict(self.training_meta),
        }

    @classmethod
    def from_params(cls, params: Dict[str, Any], feature_names: List[str]) -> "ForestModel":
        return cls(
            trees=[DecisionTree.from_params(t) for t in params["trees"]],
            tree_seeds=[int(s) for s in params["tree_seeds"]],
            feature_subsample=float(params["feature_subsample"]),
            n_inputs=int(params["n_inputs"]),
            feature_names=list(feature_names),
            training_meta=dict(params.get("training_meta", {})),
        )


@dataclass
class GbtModel(ProbClassifier):
    """勾配ブースティング木。予測は sigmoid(base_score + Σ learning_rate·tree(x))。

    Attributes:
        trees (List[DecisionTree]): 残差に当てはめた回帰木。
        learning_rate (float): 縮小率。
        base_score (float): 初期の対数オッズ。
        n_inputs (int): 保護属性を含む入力次元 d+1。
        feature_names (List[str]): 特徴量名。
        training_meta (Dict[str, Any]): 損失履歴など。
    """
    trees: List[DecisionTree]
    learning_rate: float
    base_score: float
    n_inputs: int
    feature_names: List[str] = field(default_factory=list)
    training_meta: Dict[str, Any] = field(default_factory=dict)

    kind = "gbt"

    @property
    def n_features(self) -> int:
        return self.n_inputs - 1

    def raw_score(self, Z: np.ndarray) -> np.ndarray:
        raw = np.full(Z.shape[0], self.base_score)
        for tree in self.trees:
            raw = raw + self.learning_rate * tree.predict(Z)
        return raw

    def _predict_augmented(self, Z: np.ndarray) -> np.ndarray:
        return expit(self.raw_score(Z))

    def to_params(self) -> Dict[str, Any]:
        return {
            "trees": [tree.to_params() for tree in self.trees],
            "learning_rate": self.learning_rate,
            "base_score": self.base_score,
            "n_inputs": self.n_inputs,
            "training_meta": {k: v for k, v in self.training_meta.items() if k != "loss_history"},
        }

    @classmethod
    def from_params(cls, params: Dict[str, Any], feature_names: List[str]) -> "GbtModel":
        return cls(
            trees=[DecisionTree.from_params(t) for t in params["trees"]],
            learning_rate=float(params["learning_rate"]),
            base_score=float(params["base_score"]),
            n_inputs=int(params["n_inputs"]),
            feature_names=list(feature_names),
            training_meta=dict(params.get("training_meta", {})),
        )


@dataclass
class CafpClassifier(ProbClassifier):
    """任意の分類器を包み、平均化した予測 ½(f(x,0) + f(x,1)) を返す分類器。

    `predict_proba(x, a)` の a は無視されるため、推論時に保護属性は不要です。

    Attributes:
        base (ProbClassifier): 包む分類器。
    """
    base: ProbClassifier

    kind = "cafp"

    @property
    def n_features(self) -> int:
        return self.base.n_features

    @property
    def feature_names(self) -> List[str]:
        return list(getattr(self.base, "feature_names", []))

    def predict_proba(self, x: ArrayLike, a: Union[int, ArrayLike, None] = None) -> Union[float, np.ndarray]:
        p0 = self.base.predict_proba(x, 0)
        p1 = self.base.predict_proba(x, 1)
        averaged = 0.5 * (np.asarray(p0) + np.asarray(p1))
        return float(averaged) if np.ndim(averaged) == 0 else averaged

    def _predict_augmented(self, Z: np.ndarray) -> np.ndarray:
        Z0 = Z.copy()
        Z0[:, -1] = 0.0
        Z1 = Z.copy()
        Z1[:, -1] = 1.0
        return 0.5 * (self.base._predict_augmented(Z0) + self.base._predict_augmented(Z1))

    def to_params(self) -> Dict[str, Any]:
        return {"base_kind": self.base.kind, "base": self.base.to_params()}

    @classmethod
    def from_params(cls, params: Dict[str, Any], feature_names: List[str]) -> "CafpClassifier":
        base_cls = {
            LogisticModel.kind: LogisticModel,
            ForestModel.kind: ForestModel,
            GbtModel.kind: GbtModel,
        }[params["base_kind"]]
        return cls(base=base_cls.from_params(params["base"], feature_names))
