# models/fairness_models.py
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np


@dataclass(frozen=True)
class ScoreTriple:
    """1インスタンス分のCAFPスコア。

    Attributes:
        p_factual (float): 観測された保護属性での予測 f(x, a)。
        p_counterfactual (float): 保護属性を反転した予測 f(x, 1-a)。
        p_avg (float): 平均化した予測 ½(f(x,0) + f(x,1))。
        cb (float): 反実仮想バイアス p_factual - p_counterfactual（符号付き）。
    """
    p_factual: float
    p_counterfactual: float
    p_avg: float
    cb: float

    @property
    def distortion(self) -> float:
        return abs(self.p_factual - self.p_avg)


@dataclass
class ScoreBatch:
    """`ScoreTriple` のリストを列形式で保持したもの。

    Attributes:
        p_factual (np.ndarray): f(x, a)。
        p_counterfactual (np.ndarray): f(x, 1-a)。
        p_avg (np.ndarray): 平均化した予測。
        cb (np.ndarray): 符号付きの反実仮想バイアス。
        p_group0 (np.ndarray): f(x, 0)。
        p_group1 (np.ndarray): f(x, 1)。
    """
    p_factual: np.ndarray
    p_counterfactual: np.ndarray
    p_avg: np.ndarray
    cb: np.ndarray
    p_group0: np.ndarray
    p_group1: np.ndarray

    def __len__(self) -> int:
        return int(self.p_avg.shape[0])

    def to_triples(self) -> List[ScoreTriple]:
        return [
            ScoreTriple(float(f), float(c), float(m), float(b))
            for f, c, m, b in zip(self.p_factual, self.p_counterfactual, self.p_avg, self.cb)
        ]

    def distortion_gap(self) -> float:
        """max | |p_factual - p_avg| - ½|cb| | を返す。"""
        if len(self) == 0:
            return 0.0
        return float(np.max(np.abs(np.abs(self.p_factual - self.p_avg) - 0.5 * np.abs(self.cb))))


@dataclass(frozen=True)
class EOBoundCertificate:
    """平均化予測器のEODに対する上界の証明書。

    Attributes:
        b0 (float): y=0 の行における ½·mean|cb|。
        b1 (float): y=1 の行における ½·mean|cb|。
        bound (float): max(b0, b1)。
        n0 (int): y=0 の行数。
        n1 (int): y=1 の行数。
        model_id (str): モデルの識別子。
        dataset_id (str): データセットの識別子。
    """
    b0: float
    b1: float
    bound: float
    n0: int
    n1: int
    model_id: str = ""
    dataset_id: str = ""

    @property
    def n_per_label(self) -> Dict[int, int]:
        return {0: self.n0, 1: self.n1}

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class GroupRates:
    """1つの保護属性グループにおける混同行列由来の率。

    分母が0の率は None（未定義）で表します。

    Attributes:
        tpr (Optional[float]): 真陽性率。
        fpr (Optional[float]): 偽陽性率。
        positive_rate (float): 陽性判定の割合。
        n (int): グループの行数。
        n_pos (int): y=1 の行数。
        n_neg (int): y=0 の行数。
    """
    tpr: Optional[float]
    fpr: Optional[float]
    positive_rate: float
    n: int
    n_pos: int
    n_neg: int


@dataclass(frozen=True)
class MetricSet:
    """判定に対する有用性・公平性指標の組。"""
    accuracy: float
    balanced_accuracy: float
    dpd_signed: float
    dpd_abs: float
    aod_signed: float
    aod_abs: float
    eod: float
    threshold: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class MIEstimate:
    """ヒストグラムによる相互情報量のプラグイン推定値。

    Attributes:
        nats (float): 推定値（自然対数）。
        bins (int): スコアのビン数。
        n (int): 標本数。
    """
    nats: float
    bins: int
    n: int

    @property
    def bias_bound(self) -> float:
        """独立な場合のプラグイン推定量の一次のバイアス (bins-1)/(2n)。"""
        return (self.bins - 1) / (2.0 * self.n)


@dataclass
class LedgerEntry:
    """定理検証の1項目。

    Attributes:
        check (str): 検証項目の名前。
        status (str): 'pass' / 'fail' / 'premise_violated'。
        measured (float): 測定値。
        required (str): 満たすべき条件の説明。
        note (str): 補足。
    """
    check: str
    status: str
    measured: float
    required: str
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"


@dataclass
class TheoremLedger:
    """合成データによる定理検証の結果一覧。"""
    entries: List[LedgerEntry] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(entry.status != "fail" for entry in self.entries)

    def get(self, check: str) -> LedgerEntry:
        for entry in self.entries:
            if entry.check == check:
                return entry
        raise KeyError(check)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "config": dict(self.config),
            "entries": [asdict(entry) for entry in self.entries],
        }
