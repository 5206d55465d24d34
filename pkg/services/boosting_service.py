# services/boosting_service.py
import logging
from typing import Optional

import numpy as np
from scipy.special import expit

from config.model_config import GbtConfig
from models.classifier_models import GbtModel
from models.dataset_models import Dataset
from services.base_service import ModelService
from services.logistic_service import augment
from utils.exceptions import DatasetError
from utils.math_utils import MathUtils
from utils.tree_utils import TreeBuilder

logger = logging.getLogger(__name__)


class BoostingService(ModelService[GbtModel]):
    """
    対数損失の勾配ブースティング木の学習と保存を行うサービスクラス。
    """

    model_file = "gbt_model.json"

    def train_gbt(self, train: Dataset, cfg: Optional[GbtConfig] = None) -> GbtModel:
        """残差 y - p に回帰木を段階的に当てはめる。

        初期値は訓練データの陽性率の対数オッズ（[1e-6, 1-1e-6] に丸める）です。
        各段の木の葉の値はニュートン法の1ステップ Σr / Σp(1-p) とし、
        `cfg.subsample < 1` の場合は段 m ごとに seed + m で行を非復元抽出します。

        Args:
            train (Dataset): 訓練データ。
            cfg (Optional[GbtConfig]): 学習設定。

        Returns:
            GbtModel: 学習済みモデル。

        Raises:
            DatasetError: 訓練データが空の場合。
        """
        cfg = cfg or GbtConfig()
        if train.n == 0:
            raise DatasetError("訓練データが空です。")
        Z = augment(train)
        y = train.y.astype(float)
        n = Z.shape[0]
        base_score = MathUtils.log_odds(float(np.mean(y)))
        raw = np.full(n, base_score)
        history = [MathUtils.logistic_loss(raw, y)]
        trees = []

        for m in range(cfg.n_trees):
            p = expit(raw)
            residual = y - p
            hessian = p * (1.0 - p)
            if cfg.subsample < 1.0:
                rng = np.random.default_rng(cfg.seed + m)
                size = max(1, int(round(cfg.subsample * n)))
                rows = np.sort(rng.choice(n, size=size, replace=False))
            else:
                rows = np.arange(n)
            builder = TreeBuilder(cfg.max_depth, cfg.min_samples_leaf)
            tree = builder.build(Z[rows], residual[rows], hessian=hessian[rows])
            trees.append(tree)
            raw = raw + cfg.learning_rate * tree.predict(Z)
            history.append(MathUtils.logistic_loss(raw, y))

        logger.debug("勾配ブースティングを学習しました: 段数 %d, 最終損失 %.6f", len(trees), history[-1])
        return GbtModel(
            trees=trees,
            learning_rate=cfg.learning_rate,
            base_score=base_score,
            n_inputs=Z.shape[1],
            feature_names=list(train.feature_names),
            training_meta={
                "final_loss": history[-1],
                "loss_history": history,
                "subsample": cfg.subsample,
            },
        )
