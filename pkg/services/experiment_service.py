# services/experiment_service.py
import logging
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from config.settings import Settings
from models.classifier_models import CafpClassifier, ProbClassifier
from models.dataset_models import Dataset, SplitPlan
from models.experiment_models import (
    AblationTable,
    ExperimentConfig,
    FairnessReport,
    LatencyResult,
    ReportRow,
    SweepResult,
)
from models.baseline_models import RejectOptionRule
from models.fairness_models import ScoreBatch
from services.baseline_service import BaselineService
from services.boosting_service import BoostingService
from services.cafp_service import CafpService
from services.data_service import DataService
from services.forest_service import ForestService
from services.logistic_service import LogisticService
from services.storage_service import StorageService
from utils.constants import (
    DISTORTION_TOLERANCE,
    LATENCY_TRIALS,
    LATENCY_WARMUP,
    METRIC_NAMES,
    MIN_SUCCESS_RATIO,
    SWEEP_MAX,
    SWEEP_MIN,
    SWEEP_POINTS,
)
from utils.exceptions import DatasetError, ExperimentAbortedError, FitError
from utils.math_utils import MathUtils
from utils.metric_utils import FairnessMetrics

logger = logging.getLogger(__name__)

ABLATION_METRICS: List[str] = ["accuracy", "dpd_signed", "aod_signed", "dpd_abs", "aod_abs"]


@dataclass
class RepeatData:
    """1回の反復で用いる分割と学習済みモデル。"""
    fit: Dataset
    validation: Dataset
    test: Dataset
    model: ProbClassifier
    batch: ScoreBatch


class ExperimentService:
    """
    反復評価・しきい値掃引・アブレーション・レイテンシ測定を実行するサービスクラス。

    各反復 r は SplitPlan(seed, train_fraction, r) による分割と、シード seed + r の
    学習器を使います。訓練データの標準化後、その20%を検証データとして切り出し、
    学習器は残りの80%で、ベースラインは検証データで学習します。

    Attributes:
        settings (Settings): 学習器と後処理の設定。
        data_service (DataService): データの読み込みと分割。
        cafp_service (CafpService): CAFPスコアの計算。
        baseline_service (BaselineService): ベースライン後処理。
    """

    def __init__(
        self,
        settings: Optional[Settings] = None,
        data_service: Optional[DataService] = None,
        storage_service: Optional[StorageService] = None,
    ) -> None:
        self.settings = settings or Settings()
        storage_service = storage_service or StorageService()
        self.data_service = data_service or DataService(storage_service=storage_service)
        self.cafp_service = CafpService()
        self.baseline_service = BaselineService(
            grid_step=self.settings.eqodds_grid_step,
            refine_step=self.settings.eqodds_refine_step,
        )
        self.logistic_service = LogisticService(storage_service)
        self.forest_service = ForestService(storage_service)
        self.boosting_service = BoostingService(storage_service)

    # ------------------------------------------------------------------
    # 準備
    # ------------------------------------------------------------------
    def train_model(self, model_key: str, train: Dataset, seed: int) -> ProbClassifier:
        """学習器のキーに応じてモデルを学習する。"""
        learners: Dict[str, Callable[[], ProbClassifier]] = {
            "lr": lambda: self.logistic_service.train_logistic(train, self.settings.logistic.with_seed(seed)),
            "rf": lambda: self.forest_service.train_forest(train, self.settings.forest.with_seed(seed)),
            "gbt": lambda: self.boosting_service.train_gbt(train, self.settings.gbt.with_seed(seed)),
        }
        if model_key not in learners:
            raise ValueError(f"未知のモデルです: {model_key}")
        return learners[model_key]()

    def load_dataset(self, cfg: ExperimentConfig) -> Dataset:
        if not cfg.dataset_path or not cfg.schema_path:
            raise ValueError("データセットとスキーマのパスが必要です。")
        schema = self.data_service.load_schema(cfg.schema_path)
        return self.data_service.load_csv(cfg.dataset_path, schema)

    def _resolve(self, cfg: ExperimentConfig, dataset: Optional[Dataset]) -> Dataset:
        dataset = dataset if dataset is not None else self.load_dataset(cfg)
        dataset.validate()
        return dataset

    def prepare_repeat(self, dataset: Dataset, cfg: ExperimentConfig, repeat_index: int) -> RepeatData:
        """反復 repeat_index の分割・標準化・学習を行い、テストデータのスコアを計算する。"""
        train, test = self.data_service.split(dataset, SplitPlan(cfg.seed, cfg.train_fraction, repeat_index))
        standardizer = self.data_service.fit_standardizer(train)
        train = self.data_service.apply_standardizer(standardizer, train)
        test = self.data_service.apply_standardizer(standardizer, test)
        fit, validation = self.data_service.split(
            train, SplitPlan(cfg.seed, 1.0 - self.settings.validation_fraction, repeat_index)
        )
        model = self.train_model(cfg.model, fit, cfg.seed + repeat_index)
        batch = self.cafp_service.score_batch(model, test.X, test.a)
        return RepeatData(fit=fit, validation=validation, test=test, model=model, batch=batch)

    def _run_repeats(
        self, dataset: Dataset, cfg: ExperimentConfig, task: Callable[[Dataset, ExperimentConfig, int], Dict[str, Any]]
    ) -> Tuple[List[Dict[str, Any]], List[Dict[str, Any]]]:
        """反復を（必要なら並列に）実行し、成功した結果と失敗の記録を返す。

        Raises:
            ExperimentAbortedError: 成功した反復が80%未満の場合。
        """
        results = Parallel(n_jobs=self.settings.n_jobs)(
            delayed(self._guarded)(task, dataset, cfg, r) for r in range(cfg.repeats)
        )
        successes = [outcome for _, outcome, error in results if error is None]
        failures = [{"repeat": r, "error": error} for r, _, error in results if error is not None]
        if len(successes) < MIN_SUCCESS_RATIO * cfg.repeats:
            raise ExperimentAbortedError(
                f"成功した反復が {len(successes)}/{cfg.repeats} のため実験を中止しました: {failures[:3]}"
            )
        return successes, failures

    @staticmethod
    def _guarded(
        task: Callable[[Dataset, ExperimentConfig, int], Dict[str, Any]],
        dataset: Dataset,
        cfg: ExperimentConfig,
        repeat_index: int,
    ) -> Tuple[int, Optional[Dict[str, Any]], Optional[str]]:
        try:
            outcome = task(dataset, cfg, repeat_index)
        except Exception as exc:
            logger.warning("反復 %d が失敗しました: %s", repeat_index, exc)
            return repeat_index, None, f"{type(exc).__name__}: {exc}"
        logger.debug("反復 %d が完了しました。", repeat_index)
        return repeat_index, outcome, None

    # ------------------------------------------------------------------
    # 反復評価
    # ------------------------------------------------------------------
    def _reject_rule(self, data: RepeatData) -> RejectOptionRule:
        if not self.settings.select_reject_theta:
            return RejectOptionRule(theta=self.settings.reject_theta)
        val_scores = data.model.predict_proba(data.validation.X, data.validation.a)
        return self.baseline_service.select_theta(
            val_scores, data.validation.a, data.validation.y, grid=self.settings.reject_theta_grid
        )

    def evaluate_repeat(self, dataset: Dataset, cfg: ExperimentConfig, repeat_index: int) -> Dict[str, Any]:
        """1回の反復で、要求されたすべての後処理の指標を計算する。"""
        data = self.prepare_repeat(dataset, cfg, repeat_index)
        test, batch = data.test, data.batch
        outcome: Dict[str, Any] = {"repeat": repeat_index, "metrics": {}}

        for postproc in cfg.postprocessors:
            if postproc == "none":
                pred = FairnessMetrics.threshold(batch.p_factual, cfg.threshold)
            elif postproc == "cafp":
                pred = FairnessMetrics.threshold(batch.p_avg, cfg.threshold)
                certificate = self.cafp_service.certificate_from_batch(
                    batch, test.y, model_id=cfg.model, dataset_id=dataset.dataset_id
                )
                score_eod = FairnessMetrics.score_eod(batch.p_avg, test.y, test.a)
                if score_eod > certificate.bound + DISTORTION_TOLERANCE:
                    logger.warning(
                        "反復 %d: スコア版EOD %.4f が上界 %.4f を超えました。",
                        repeat_index, score_eod, certificate.bound,
                    )
                outcome["certificate"] = certificate.to_dict()
                outcome["score_eod"] = score_eod
                outcome["mean_distortion"] = self.cafp_service.mean_distortion(batch)
                if test.n >= self.settings.mi_bins:
                    outcome["mi_factual"] = FairnessMetrics.mutual_info(batch.p_factual, test.a, self.settings.mi_bins).nats
                    outcome["mi_cafp"] = FairnessMetrics.mutual_info(batch.p_avg, test.a, self.settings.mi_bins).nats
            elif postproc == "eqodds":
                val_scores = data.model.predict_proba(data.validation.X, data.validation.a)
                mixer = self.baseline_service.fit_eqodds(
                    val_scores, data.validation.a, data.validation.y, seed=cfg.seed + repeat_index
                )
                pred = self.baseline_service.apply_eqodds(mixer, batch.p_factual, test.a)
                outcome["eqodds"] = mixer.to_dict()
            else:
                rule = self._reject_rule(data)
                pred = self.baseline_service.apply_reject_option(rule, batch.p_factual, test.a)
                outcome["reject"] = rule.to_dict()
            threshold = cfg.threshold if postproc in ("none", "cafp") else None
            outcome["metrics"][postproc] = FairnessMetrics.metric_set(pred, test.y, test.a, threshold).to_dict()
        return outcome

    def run_experiment(self, cfg: ExperimentConfig, dataset: Optional[Dataset] = None) -> FairnessReport:
        """反復評価を実行し、平均・95%信頼区間・標準偏差を集計したレポートを返す。

        Args:
            cfg (ExperimentConfig): 実験設定。
            dataset (Optional[Dataset]): 読み込み済みのデータセット。Noneなら設定のパスから読み込む。

        Returns:
            FairnessReport: 集計結果。

        Raises:
            DatasetError: データセットの不変条件が満たされない場合。
            ExperimentAbortedError: 成功した反復が80%未満の場合。
        """
        dataset = self._resolve(cfg, dataset)
        logger.info("実験を開始します: %s / %s, 反復 %d", dataset.dataset_id, cfg.model, cfg.repeats)
        successes, failures = self._run_repeats(dataset, cfg, self.evaluate_repeat)

        rows = []
        for postproc in cfg.postprocessors:
            metrics = {
                name: MathUtils.summarize(o["metrics"][postproc][name] for o in successes)
                for name in METRIC_NAMES
            }
            row = ReportRow(model=cfg.model, postproc=postproc, metrics=metrics)
            if postproc == "cafp":
                row.certificate = self._certificate_summary(successes)
                row.extras["mean_distortion"] = MathUtils.summarize(o["mean_distortion"] for o in successes).mean
                if all("mi_cafp" in o for o in successes):
                    row.extras["mi_factual"] = MathUtils.summarize(o["mi_factual"] for o in successes).mean
                    row.extras["mi_cafp"] = MathUtils.summarize(o["mi_cafp"] for o in successes).mean
            elif postproc == "eqodds":
                row.extras["mixers"] = [o["eqodds"] for o in successes]
            elif postproc == "reject":
                row.extras["thetas"] = [o["reject"]["theta"] for o in successes]
            rows.append(row)

        logger.info("実験を集計しました: 成功 %d / %d", len(successes), cfg.repeats)
        return FairnessReport(
            config={"experiment": cfg.to_dict(), "settings": self.settings.to_dict(), "dataset_id": dataset.dataset_id,
                    "schema_hash": dataset.schema_hash},
            rows=rows,
            runs_requested=cfg.repeats,
            runs_succeeded=len(successes),
            failed_runs=failures,
            notes=[
                "信頼区間は反復した層化分割にわたる mean ± 1.96·SD/√k（正規近似）。",
                f"ベースラインは訓練データの {self.settings.validation_fraction:.0%} を検証データとして学習。",
                "証明書はスコア版EODに対する上界。判定版のEODは指標 eod として別に報告。",
            ],
        )

    @staticmethod
    def _certificate_summary(successes: List[Dict[str, Any]]) -> Dict[str, Any]:
        certificates = [o["certificate"] for o in successes]
        violations = sum(
            1 for o in successes if o["score_eod"] > o["certificate"]["bound"] + DISTORTION_TOLERANCE
        )
        return {
            "b0": MathUtils.summarize(c["b0"] for c in certificates).mean,
            "b1": MathUtils.summarize(c["b1"] for c in certificates).mean,
            "bound": MathUtils.summarize(c["bound"] for c in certificates).mean,
            "score_eod": MathUtils.summarize(o["score_eod"] for o in successes).mean,
            "violations": violations,
            "repeats": len(successes),
        }

    # ------------------------------------------------------------------
    # しきい値掃引・アブレーション・証明書
    # ------------------------------------------------------------------
    def threshold_sweep(self, cfg: ExperimentConfig, dataset: Optional[Dataset] = None) -> SweepResult:
        """反復0のテストデータで判定しきい値を [0.01, 0.99] の25点で掃引する。

        系列は元のスコア ('base')、CAFPスコア ('cafp')、Equalized Odds の判定 ('eqodds') です。
        'eqodds' はしきい値に依存しないため同じ値が並びます。
        """
        dataset = self._resolve(cfg, dataset)
        data = self.prepare_repeat(dataset, cfg, 0)
        test, batch = data.test, data.batch
        thresholds = np.linspace(SWEEP_MIN, SWEEP_MAX, SWEEP_POINTS)
        notes = []

        def curve(scores: np.ndarray) -> Dict[str, List[float]]:
            preds = [FairnessMetrics.threshold(scores, t) for t in thresholds]
            return {
                "balanced_accuracy": [FairnessMetrics.balanced_accuracy(p, test.y) for p in preds],
                "dpd_signed": [FairnessMetrics.dpd(p, test.a)[0] for p in preds],
            }

        series = {"base": curve(batch.p_factual), "cafp": curve(batch.p_avg)}
        try:
            val_scores = data.model.predict_proba(data.validation.X, data.validation.a)
            mixer = self.baseline_service.fit_eqodds(val_scores, data.validation.a, data.validation.y, seed=cfg.seed)
            pred = self.baseline_service.apply_eqodds(mixer, batch.p_factual, test.a)
            series["eqodds"] = {
                "balanced_accuracy": [FairnessMetrics.balanced_accuracy(pred, test.y)] * SWEEP_POINTS,
                "dpd_signed": [FairnessMetrics.dpd(pred, test.a)[0]] * SWEEP_POINTS,
            }
            notes.append("比較系列には Calibrated Equalized Odds の代わりに Equalized Odds の判定混合を用いる。")
        except FitError as exc:
            logger.warning("Equalized Odds の系列を省略します: %s", exc)
            notes.append(f"Equalized Odds の系列は省略: {exc}")
        return SweepResult(thresholds=thresholds, series=series, dataset_id=dataset.dataset_id, model=cfg.model, notes=notes)

    def _ablation_repeat(self, dataset: Dataset, cfg: ExperimentConfig, repeat_index: int) -> Dict[str, Any]:
        data = self.prepare_repeat(dataset, cfg, repeat_index)
        batch, test = data.batch, data.test
        variants = {"factual": batch.p_factual, "counterfactual": batch.p_counterfactual, "averaged": batch.p_avg}
        outcome: Dict[str, Any] = {
            "max_mean_error": float(np.max(np.abs(batch.p_avg - 0.5 * (batch.p_factual + batch.p_counterfactual))))
            if len(batch) else 0.0,
        }
        for name, scores in variants.items():
            pred = FairnessMetrics.threshold(scores, cfg.threshold)
            outcome[name] = FairnessMetrics.metric_set(pred, test.y, test.a, cfg.threshold).to_dict()
        return outcome

    def ablation(self, cfg: ExperimentConfig, dataset: Optional[Dataset] = None) -> AblationTable:
        """事実・反実仮想・平均化の3種類のスコアを同じしきい値で判定し、指標を比較する。"""
        dataset = self._resolve(cfg, dataset)
        successes, _ = self._run_repeats(dataset, cfg, self._ablation_repeat)
        rows = {
            variant: {
                name: MathUtils.summarize(o[variant][name] for o in successes) for name in ABLATION_METRICS
            }
            for variant in ("factual", "counterfactual", "averaged")
        }
        return AblationTable(
            rows=rows,
            max_mean_error=max(o["max_mean_error"] for o in successes),
            repeats=len(successes),
            threshold=cfg.threshold,
        )

    def certify(self, cfg: ExperimentConfig, dataset: Optional[Dataset] = None) -> Dict[str, Any]:
        """反復0のテストデータでEOD上界の証明書を計算し、測定したEODと並べて返す。"""
        dataset = self._resolve(cfg, dataset)
        data = self.prepare_repeat(dataset, cfg, 0)
        if not np.any(data.test.y == 0) or not np.any(data.test.y == 1):
            raise DatasetError("テストデータに両方のラベルが必要です。")
        certificate = self.cafp_service.certificate_from_batch(
            data.batch, data.test.y, model_id=cfg.model, dataset_id=dataset.dataset_id
        )
        score_eod = FairnessMetrics.score_eod(data.batch.p_avg, data.test.y, data.test.a)
        decision = FairnessMetrics.threshold(data.batch.p_avg, cfg.threshold)
        result = certificate.to_dict()
        result["score_eod"] = score_eod
        result["decision_eod"] = FairnessMetrics.eod(decision, data.test.y, data.test.a)
        result["holds"] = bool(score_eod <= certificate.bound + DISTORTION_TOLERANCE)
        return result

    # ------------------------------------------------------------------
    # レイテンシ
    # ------------------------------------------------------------------
    def latency_probe(
        self,
        model: ProbClassifier,
        ds: Dataset,
        batch: int = 100,
        trials: int = LATENCY_TRIALS,
        warmup: int = LATENCY_WARMUP,
    ) -> LatencyResult:
        """元のモデルとCAFPのバッチ推論時間を測定する。

        ウォームアップの後、元のモデルとCAFPを交互に `trials` 回（最低20回）計測し、
        中央値を100行あたりのミリ秒に換算します。

        Raises:
            ValueError: batch が1未満、またはデータセットが空の場合。
        """
        if batch < 1:
            raise ValueError(f"batch は1以上でなければなりません: {batch}")
        if ds.n == 0:
            raise ValueError("空のデータセットではレイテンシを測定できません。")
        rows = np.resize(np.arange(ds.n), batch)
        X, a = ds.X[rows], ds.a[rows]
        averaged = CafpClassifier(base=model)

        for _ in range(warmup):
            model.predict_proba(X, a)
            averaged.predict_proba(X)
        base_times, cafp_times = [], []
        for _ in range(max(trials, LATENCY_TRIALS)):
            start = time.perf_counter()
            model.predict_proba(X, a)
            base_times.append(time.perf_counter() - start)
            start = time.perf_counter()
            averaged.predict_proba(X)
            cafp_times.append(time.perf_counter() - start)

        base_ms = MathUtils.median_ms_per_100(base_times, batch)
        cafp_ms = MathUtils.median_ms_per_100(cafp_times, batch)
        return LatencyResult(
            base_ms_per_100=base_ms,
            cafp_ms_per_100=cafp_ms,
            ratio=cafp_ms / base_ms if base_ms > 0 else float("inf"),
            batch=batch,
            trials=len(base_times),
        )
