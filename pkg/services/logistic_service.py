# services/logistic_service.py
import logging
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from config.model_config import LogisticConfig
from models.classifier_models import LogisticModel
from models.dataset_models import Dataset
from services.base_service import ModelService
from utils.exceptions import DatasetError, DivergenceError
from utils.math_utils import MathUtils

logger = logging.getLogger(__name__)

# 1反復で学習率を半減する回数の上限
MAX_HALVINGS: int = 60
GRADIENT_CHECK_STEP: float = 1e-5


def augment(ds: Dataset) -> np.ndarray:
    """特徴量行列の末尾に保護属性の列を追加する。"""
    return np.column_stack([ds.X, ds.a.astype(float)])


class LogisticService(ModelService[LogisticModel]):
    """
    L2正則化ロジスティック回帰の学習と保存を行うサービスクラス。
    """

    model_file = "logistic_model.json"

    @staticmethod
    def loss_and_gradient(
        Z: np.ndarray, y: np.ndarray, weights: np.ndarray, bias: float, l2_penalty: float
    ) -> Tuple[float, np.ndarray, float]:
        """正則化付き平均負の対数尤度とその勾配を返す。バイアス項には正則化を掛けない。

        Returns:
            Tuple[float, np.ndarray, float]: (損失, 重みの勾配, バイアスの勾配)。
        """
        z = Z @ weights + bias
        loss = MathUtils.logistic_loss(z, y) + 0.5 * l2_penalty * float(weights @ weights)
        residual = expit(z) - y
        grad_w = Z.T @ residual / Z.shape[0] + l2_penalty * weights
        grad_b = float(np.mean(residual))
        return loss, grad_w, grad_b

    def train_logistic(self, train: Dataset, cfg: Optional[LogisticConfig] = None) -> LogisticModel:
        """全バッチ勾配降下法でロジスティック回帰を学習する。

        損失が増加する反復では学習率を半減して再試行します。勾配の最大成分が
        `cfg.tolerance` を下回るか、`cfg.max_iters` 回に達したら停止します。

        Args:
            train (Dataset): 訓練データ（両ラベルを含むこと）。
            cfg (Optional[LogisticConfig]): 学習設定。

        Returns:
            LogisticModel: 学習済みモデル。

        Raises:
            DatasetError: 訓練データが空の場合。
            DivergenceError: 損失が有限値でなくなった場合。
        """
        cfg = cfg or LogisticConfig()
        if train.n == 0:
            raise DatasetError("訓練データが空です。")
        Z = augment(train)
        y = train.y.astype(float)
        weights = np.zeros(Z.shape[1])
        bias = 0.0
        step = cfg.learning_rate

        loss, grad_w, grad_b = self.loss_and_gradient(Z, y, weights, bias, cfg.l2_penalty)
        if not np.isfinite(loss):
            raise DivergenceError(0, loss)
        history = [loss]
        iteration = 0
        converged = False
        for iteration in range(1, cfg.max_iters + 1):
            if max(float(np.max(np.abs(grad_w))), abs(grad_b)) < cfg.tolerance:
                converged = True
                iteration -= 1
                break
            accepted = False
            for _ in range(MAX_HALVINGS):
                new_weights = weights - step * grad_w
                new_bias = bias - step * grad_b
                new_loss, new_grad_w, new_grad_b = self.loss_and_gradient(Z, y, new_weights, new_bias, cfg.l2_penalty)
                if not np.isfinite(new_loss):
                    raise DivergenceError(iteration, new_loss)
                if new_loss <= loss:
                    accepted = True
                    break
                step /= 2.0
            if not accepted:
                # 学習率を下げても損失が減らない場合は数値的に収束したとみなす
                converged = True
                iteration -= 1
                break
            weights, bias = new_weights, new_bias
            loss, grad_w, grad_b = new_loss, new_grad_w, new_grad_b
            history.append(loss)
            if iteration % 500 == 0:
                logger.debug("反復 %d: 損失 %.6f, 学習率 %.3g", iteration, loss, step)

        logger.debug("ロジスティック回帰の学習を終了しました: 反復 %d, 損失 %.6f", iteration, loss)
        return LogisticModel(
            weights=weights,
            bias=float(bias),
            feature_names=list(train.feature_names),
            training_meta={
                "iterations": iteration,
                "final_loss": float(loss),
                "converged": converged,
                "final_learning_rate": step,
                "loss_history": history,
            },
        )

    def gradient_check(
        self,
        toy: Dataset,
        l2_penalty: float = 1e-4,
        weights: Optional[np.ndarray] = None,
        bias: float = 0.0,
    ) -> float:
        """解析的な勾配と中心差分による数値勾配を比較する。

        Args:
            toy (Dataset): 小さなデータセット。
            l2_penalty (float): 正則化係数。
            weights (Optional[np.ndarray]): 評価点の重み（長さ d+1）。Noneなら0ベクトル。
            bias (float): 評価点のバイアス。

        Returns:
            float: パラメータごとの相対誤差 |a-n| / max(1, |a|, |n|) の最大値。
        """
        Z = augment(toy)
        y = toy.y.astype(float)
        weights = np.zeros(Z.shape[1]) if weights is None else np.asarray(weights, dtype=float)
        _, grad_w, grad_b = self.loss_and_gradient(Z, y, weights, bias, l2_penalty)
        analytic = np.append(grad_w, grad_b)
        params = np.append(weights, bias)

        worst = 0.0
        for i in range(params.shape[0]):
            shift = np.zeros_like(params)
            shift[i] = GRADIENT_CHECK_STEP
            plus, minus = params + shift, params - shift
            loss_plus = self.loss_and_gradient(Z, y, plus[:-1], plus[-1], l2_penalty)[0]
            loss_minus = self.loss_and_gradient(Z, y, minus[:-1], minus[-1], l2_penalty)[0]
            numeric = (loss_plus - loss_minus) / (2.0 * GRADIENT_CHECK_STEP)
            worst = max(worst, MathUtils.relative_error(float(analytic[i]), numeric))
        return worst
