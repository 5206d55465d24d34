# services/cafp_service.py
"""反実仮想平均化（CAFP）による後処理と、その診断・証明書の計算。

CAFPは学習済みの分類器 f に対して f̂(x) = ½(f(x,0) + f(x,1)) を出力します。
保護属性の観測値は f̂ の計算には不要で、反実仮想バイアスの符号の診断にだけ使います。
"""
import logging
from typing import List, Optional, Sequence, Union

import numpy as np

from models.classifier_models import ArrayLike, ProbClassifier
from models.dataset_models import Dataset
from models.fairness_models import EOBoundCertificate, ScoreBatch, ScoreTriple
from utils.constants import DISTORTION_TOLERANCE
from utils.exceptions import (
    CertificateError,
    FairnessToolkitError,
    MetricError,
    ModelQueryError,
    ShapeError,
)

logger = logging.getLogger(__name__)


class CafpService:
    """CAFPスコアと反実仮想バイアスの診断を計算するサービスクラス。"""

    @staticmethod
    def _query(model: ProbClassifier, X: np.ndarray, value: int) -> np.ndarray:
        try:
            return np.asarray(model.predict_proba(X, value), dtype=float)
        except ShapeError:
            raise
        except Exception as exc:
            # 失敗した行を特定するため1行ずつ問い合わせる
            for index in range(X.shape[0]):
                try:
                    model.predict_proba(X[index], value)
                except Exception as row_exc:
                    raise ModelQueryError(index, row_exc) from row_exc
            raise ModelQueryError(None, exc) from exc

    def score_batch(
        self,
        model: ProbClassifier,
        X: np.ndarray,
        a_observed: Optional[np.ndarray] = None,
    ) -> ScoreBatch:
        """行列の全行に対してCAFPスコアを計算する。

        モデルへの問い合わせは a=0 と a=1 の2回です。計算後、すべての行で
        |p_factual - p_avg| = ½|cb| が許容誤差 1e-12 で成り立つことを検査します。

        Args:
            model (ProbClassifier): 学習済みモデル。
            X (np.ndarray): n×d の特徴量行列。
            a_observed (Optional[np.ndarray]): 観測された保護属性。Noneの場合は
                p_factual = f(x,0), p_counterfactual = f(x,1) とする。

        Returns:
            ScoreBatch: 行の順序を保ったスコア。

        Raises:
            ShapeError: 特徴量の次元がモデルと一致しない場合。
            ModelQueryError: モデルの呼び出しに失敗した場合（行番号付き）。
            FairnessToolkitError: 歪みの恒等式が破れた場合。
        """
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ShapeError(f"特徴量は2次元の行列でなければなりません: {X.shape}")
        if X.shape[0] == 0:
            empty = np.zeros(0)
            return ScoreBatch(empty, empty, empty, empty, empty, empty)

        p0 = self._query(model, X, 0)
        p1 = self._query(model, X, 1)
        p_avg = 0.5 * (p0 + p1)
        if a_observed is None:
            p_factual, p_counterfactual = p0, p1
        else:
            observed = np.asarray(a_observed).ravel() == 1
            if observed.shape[0] != X.shape[0]:
                raise ShapeError("a_observed の長さが行数と一致しません。")
            p_factual = np.where(observed, p1, p0)
            p_counterfactual = np.where(observed, p0, p1)
        batch = ScoreBatch(
            p_factual=p_factual,
            p_counterfactual=p_counterfactual,
            p_avg=p_avg,
            cb=p_factual - p_counterfactual,
            p_group0=p0,
            p_group1=p1,
        )
        gap = batch.distortion_gap()
        if gap >= DISTORTION_TOLERANCE:
            raise FairnessToolkitError(f"歪みの恒等式が成り立ちません: 最大誤差 {gap:.3e}")
        return batch

    def cafp_score(self, model: ProbClassifier, x: ArrayLike, a_observed: Optional[int] = None) -> ScoreTriple:
        """1インスタンスのCAFPスコアを計算する。

        Examples:
            f(x,0)=0.8, f(x,1)=0.4, a_observed=0 なら p_avg=0.6, cb=+0.4。
        """
        X = np.asarray(x, dtype=float).reshape(1, -1)
        a = None if a_observed is None else np.array([a_observed])
        return self.score_batch(model, X, a).to_triples()[0]

    def cafp_batch(self, model: ProbClassifier, ds: Dataset) -> List[ScoreTriple]:
        """データセットの各行のCAFPスコアを行の順序どおりに返す。"""
        return self.score_batch(model, ds.X, ds.a).to_triples()

    @staticmethod
    def certificate_from_batch(
        batch: ScoreBatch, y: np.ndarray, model_id: str = "", dataset_id: str = ""
    ) -> EOBoundCertificate:
        """計算済みのスコアからEOD上界の証明書を作る。

        B_y = ½·mean{|cb_i| : y_i = y}, bound = max(B_0, B_1)。

        Raises:
            CertificateError: どちらかのラベルの行がない場合。
        """
        y = np.asarray(y).ravel()
        magnitude = np.abs(batch.cb)
        halves = {}
        counts = {}
        for label in (0, 1):
            rows = y == label
            counts[label] = int(np.sum(rows))
            if counts[label] == 0:
                raise CertificateError(f"ラベル y={label} の行がないため証明書を計算できません。")
            halves[label] = 0.5 * float(np.mean(magnitude[rows]))
        return EOBoundCertificate(
            b0=halves[0],
            b1=halves[1],
            bound=max(halves[0], halves[1]),
            n0=counts[0],
            n1=counts[1],
            model_id=model_id,
            dataset_id=dataset_id,
        )

    def eo_bound_certificate(self, model: ProbClassifier, ds: Dataset, model_id: str = "") -> EOBoundCertificate:
        """平均化予測器のスコア版EODに対する上界を計算する。"""
        if not np.any(ds.y == 0) or not np.any(ds.y == 1):
            raise CertificateError("証明書の計算には両方のラベルが必要です。")
        batch = self.score_batch(model, ds.X, ds.a)
        certificate = self.certificate_from_batch(batch, ds.y, model_id=model_id or model.kind, dataset_id=ds.dataset_id)
        logger.info("EOD上界: B0=%.4f, B1=%.4f, B=%.4f", certificate.b0, certificate.b1, certificate.bound)
        return certificate

    @staticmethod
    def mean_distortion(triples: Union[ScoreBatch, Sequence[ScoreTriple]]) -> float:
        """平均歪み mean|p_factual - p_avg| を返す。値は ½·mean|cb| と一致する。

        Raises:
            MetricError: 入力が空の場合。
        """
        if isinstance(triples, ScoreBatch):
            factual, averaged = triples.p_factual, triples.p_avg
        else:
            factual = np.array([t.p_factual for t in triples], dtype=float)
            averaged = np.array([t.p_avg for t in triples], dtype=float)
        if factual.shape[0] == 0:
            raise MetricError("空の入力に対して平均歪みは定義されません。")
        return float(np.mean(np.abs(factual - averaged)))
