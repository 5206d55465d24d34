# models/experiment_models.py
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from utils.constants import (
    DEFAULT_REPEATS,
    DEFAULT_THRESHOLD,
    DEFAULT_TRAIN_FRACTION,
    MODEL_CHOICES,
    POSTPROC_CHOICES,
    REPORT_FORMAT_VERSION,
)


@dataclass(frozen=True)
class ExperimentConfig:
    """1回の実験（反復評価）の設定。

    Attributes:
        dataset_id (str): データセットの識別子。
        model (str): 学習器 ('lr' / 'rf' / 'gbt')。
        postprocessors (List[str]): 評価する後処理 ('none' / 'cafp' / 'eqodds' / 'reject')。
        repeats (int): 反復回数。
        seed (int): 基準シード。
        train_fraction (float): 訓練データの割合。
        threshold (float): 'none' と 'cafp' の判定しきい値。
        dataset_path (Optional[str]): CSVのパス。
        schema_path (Optional[str]): スキーマJSONのパス。
    """
    dataset_id: str = "dataset"
    model: str = "lr"
    postprocessors: List[str] = field(default_factory=lambda: list(POSTPROC_CHOICES))
    repeats: int = DEFAULT_REPEATS
    seed: int = 0
    train_fraction: float = DEFAULT_TRAIN_FRACTION
    threshold: float = DEFAULT_THRESHOLD
    dataset_path: Optional[str] = None
    schema_path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.repeats < 1:
            raise ValueError(f"repeats は1以上でなければなりません: {self.repeats}")
        if self.model not in MODEL_CHOICES:
            raise ValueError(f"未知のモデルです: {self.model}")
        unknown = [p for p in self.postprocessors if p not in POSTPROC_CHOICES]
        if unknown:
            raise ValueError(f"未知の後処理です: {unknown}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction は (0, 1) の範囲でなければなりません: {self.train_fraction}")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["postprocessors"] = list(self.postprocessors)
        return data


@dataclass(frozen=True)
class MetricSummary:
    """反復にわたる指標の要約統計。

    Attributes:
        mean (float): 平均。
        ci_low (float): 95%信頼区間の下限。
        ci_high (float): 95%信頼区間の上限。
        sd (float): 標本標準偏差（反復1回なら0）。
        n (int): 集計に用いた反復数。
    """
    mean: float
    ci_low: float
    ci_high: float
    sd: float
    n: int

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2.0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ReportRow:
    """レポートの1行（学習器 × 後処理）。

    Attributes:
        model (str): 学習器のキー。
        postproc (str): 後処理のキー。
        metrics (Dict[str, MetricSummary]): 指標名ごとの要約。
        certificate (Optional[Dict[str, Any]]): CAFP行の証明書の要約。
        extras (Dict[str, Any]): 平均歪み、相互情報量、ベースラインのパラメータなど。
    """
    model: str
    postproc: str
    metrics: Dict[str, MetricSummary]
    certificate: Optional[Dict[str, Any]] = None
    extras: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "model": self.model,
            "postproc": self.postproc,
            "metrics": {name: summary.to_dict() for name, summary in self.metrics.items()},
        }
        if self.certificate is not None:
            data["certificate"] = dict(self.certificate)
        if self.extras:
            data["extras"] = dict(self.extras)
        return data


@dataclass
class FairnessReport:
    """反復評価の結果レポート。

    Attributes:
        config (Dict[str, Any]): 実験設定と学習器設定の写し。
        rows (List[ReportRow]): 後処理ごとの行。
        runs_requested (int): 要求された反復数。
        runs_succeeded (int): 成功した反復数。
        failed_runs (List[Dict[str, Any]]): 失敗した反復の番号とエラー内容。
        notes (List[str]): 補足事項。
    """
    config: Dict[str, Any]
    rows: List[ReportRow]
    runs_requested: int
    runs_succeeded: int
    failed_runs: List[Dict[str, Any]] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    def row(self, postproc: str) -> ReportRow:
        for item in self.rows:
            if item.postproc == postproc:
                return item
        raise KeyError(postproc)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "format_version": REPORT_FORMAT_VERSION,
            "config": self.config,
            "rows": [row.to_dict() for row in self.rows],
            "certificates": {
                row.postproc: row.certificate for row in self.rows if row.certificate is not None
            },
            "runs": {"requested": self.runs_requested, "succeeded": self.runs_succeeded},
            "failed_runs": list(self.failed_runs),
            "notes": list(self.notes),
        }
        return data


@dataclass
class SweepResult:
    """判定しきい値の掃引結果。

    Attributes:
        thresholds (np.ndarray): 昇順のしきい値。
        series (Dict[str, Dict[str, List[float]]]): 系列名 → 指標名 → しきい値ごとの値。
        dataset_id (str): データセットの識別子。
        model (str): 学習器のキー。
        notes (List[str]): 補足事項。
    """
    thresholds: np.ndarray
    series: Dict[str, Dict[str, List[float]]]
    dataset_id: str = "dataset"
    model: str = "lr"
    notes: List[str] = field(default_factory=list)

    def dpd_not_worse_fraction(self, series: str = "cafp", reference: str = "base") -> float:
        """|DPD| が reference 以下であるしきい値の割合を返す。"""
        ours = np.abs(np.asarray(self.series[series]["dpd_signed"]))
        theirs = np.abs(np.asarray(self.series[reference]["dpd_signed"]))
        return float(np.mean(ours <= theirs + 1e-12))

    def to_columns(self) -> Dict[str, List[Any]]:
        """CSV出力用の縦持ちの列を返す。"""
        columns: Dict[str, List[Any]] = {
            "threshold": [], "series": [], "balanced_accuracy": [], "dpd_signed": [],
        }
        for name in sorted(self.series):
            values = self.series[name]
            for i, t in enumerate(self.thresholds):
                columns["threshold"].append(float(t))
                columns["series"].append(name)
                columns["balanced_accuracy"].append(values["balanced_accuracy"][i])
                columns["dpd_signed"].append(values["dpd_signed"][i])
        return columns

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dataset_id": self.dataset_id,
            "model": self.model,
            "thresholds": [float(t) for t in self.thresholds],
            "series": {name: dict(values) for name, values in self.series.items()},
            "notes": list(self.notes),
        }


@dataclass
class AblationTable:
    """事実・反実仮想・平均化の3種類のスコアの比較表。

    Attributes:
        rows (Dict[str, Dict[str, MetricSummary]]): 'factual' / 'counterfactual' / 'averaged' ごとの要約。
        max_mean_error (float): 平均化スコアと要素ごとの平均との差の最大値（全反復）。
        repeats (int): 集計した反復数。
        threshold (float): 判定しきい値。
    """
    rows: Dict[str, Dict[str, MetricSummary]]
    max_mean_error: float
    repeats: int
    threshold: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rows": {
                variant: {name: summary.to_dict() for name, summary in metrics.items()}
                for variant, metrics in self.rows.items()
            },
            "max_mean_error": self.max_mean_error,
            "repeats": self.repeats,
            "threshold": self.threshold,
        }


@dataclass(frozen=True)
class LatencyResult:
    """推論レイテンシの測定結果（100行あたりのミリ秒）。"""
    base_ms_per_100: float
    cafp_ms_per_100: float
    ratio: float
    batch: int
    trials: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
