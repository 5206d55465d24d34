# services/forest_service.py
import logging
import math
from typing import Optional

import numpy as np
from joblib import Parallel, delayed

from config.model_config import ForestConfig
from models.classifier_models import DecisionTree, ForestModel
from models.dataset_models import Dataset
from services.base_service import ModelService
from services.logistic_service import augment
from utils.exceptions import DatasetError
from utils.tree_utils import TreeBuilder

logger = logging.getLogger(__name__)


def _fit_tree(Z: np.ndarray, y: np.ndarray, cfg: ForestConfig, max_features: int, seed: int) -> DecisionTree:
    rng = np.random.default_rng(seed)
    n = Z.shape[0]
    rows = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
    builder = TreeBuilder(cfg.max_depth, cfg.min_samples_leaf, max_features=max_features, rng=rng)
    return builder.build(Z[rows], y[rows])


class ForestService(ModelService[ForestModel]):
    """
    ランダムフォレストの学習と保存を行うサービスクラス。

    木 i は seed + i から生成した乱数だけを使うため、並列実行の順序によらず
    同じフォレストが得られます。
    """

    model_file = "forest_model.json"

    @staticmethod
    def feature_fraction(cfg: ForestConfig, n_inputs: int) -> float:
        if cfg.feature_subsample is not None:
            return float(cfg.feature_subsample)
        return math.sqrt(n_inputs) / n_inputs

    def train_forest(self, train: Dataset, cfg: Optional[ForestConfig] = None) -> ForestModel:
        """Gini 基準の CART 木をブートストラップ標本で学習し、フォレストを構成する。

        Args:
            train (Dataset): 訓練データ。
            cfg (Optional[ForestConfig]): 学習設定。

        Returns:
            ForestModel: 学習済みフォレスト。

        Raises:
            DatasetError: 訓練データが空の場合。
        """
        cfg = cfg or ForestConfig()
        if train.n == 0:
            raise DatasetError("訓練データが空です。")
        Z = augment(train)
        y = train.y.astype(float)
        fraction = self.feature_fraction(cfg, Z.shape[1])
        max_features = max(1, int(round(fraction * Z.shape[1])))
        seeds = [cfg.seed + i for i in range(cfg.n_trees)]

        trees = Parallel(n_jobs=cfg.n_jobs)(
            delayed(_fit_tree)(Z, y, cfg, max_features, seed) for seed in seeds
        )
        logger.debug("ランダムフォレストを学習しました: 木 %d 本, 分割ごとの特徴量 %d", len(trees), max_features)
        return ForestModel(
            trees=list(trees),
            tree_seeds=seeds,
            feature_subsample=fraction,
            n_inputs=Z.shape[1],
            feature_names=list(train.feature_names),
            training_meta={
                "max_features": max_features,
                "mean_depth": float(np.mean([t.depth for t in trees])) if trees else 0.0,
                "mean_node_count": float(np.mean([t.node_count for t in trees])) if trees else 0.0,
            },
        )
