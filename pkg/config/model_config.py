# config/model_config.py
"""学習器ごとのハイパーパラメータ設定。"""
from dataclasses import dataclass, replace, asdict
from typing import Any, Dict, Optional


@dataclass(frozen=True)
class LogisticConfig:
    """ロジスティック回帰の学習設定。

    Attributes:
        learning_rate (float): 初期学習率。損失が増加した反復では半減される。
        l2_penalty (float): L2正則化の係数（バイアス項には掛けない）。
        max_iters (int): 最大反復回数。
        tolerance (float): 勾配の最大成分がこの値を下回ったら停止する。
        seed (int): 乱数シード（初期値は0ベクトルのため結果には影響しない）。
    """
    learning_rate: float = 0.1
    l2_penalty: float = 1e-4
    max_iters: int = 2000
    tolerance: float = 1e-6
    seed: int = 0

    def with_seed(self, seed: int) -> "LogisticConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ForestConfig:
    """ランダムフォレストの学習設定。

    Attributes:
        n_trees (int): 木の本数。
        max_depth (int): 木の最大深さ。
        min_samples_leaf (int): 葉に含まれる最小サンプル数。
        feature_subsample (Optional[float]): 分割ごとに候補とする特徴量の割合。
            Noneの場合は sqrt(d)/d を用いる。
        bootstrap (bool): 木ごとにブートストラップ標本を用いるかどうか。
        seed (int): 木 i の乱数シードは seed + i となる。
        n_jobs (int): 木の並列学習に使うジョブ数。
    """
    n_trees: int = 200
    max_depth: int = 12
    min_samples_leaf: int = 5
    feature_subsample: Optional[float] = None
    bootstrap: bool = True
    seed: int = 0
    n_jobs: int = 1

    def with_seed(self, seed: int) -> "ForestConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class GbtConfig:
    """勾配ブースティング木の学習設定。

    Attributes:
        n_trees (int): ブースティングの段数。
        max_depth (int): 各回帰木の最大深さ。
        learning_rate (float): 縮小率（shrinkage）。
        min_samples_leaf (int): 葉に含まれる最小サンプル数。
        subsample (float): 各段で用いる行の割合。1.0なら全行を使い乱数は使わない。
        seed (int): 段 m の行サンプリングのシードは seed + m となる。
    """
    n_trees: int = 200
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 1
    subsample: float = 1.0
    seed: int = 0

    def with_seed(self, seed: int) -> "GbtConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
