# models/baseline_models.py
from dataclasses import asdict, dataclass
from typing import Any, Dict

from utils.exceptions import FitError


@dataclass(frozen=True)
class EqOddsMixer:
    """Equalized Odds のための確率的な判定反転器。

    グループ a の行について、元の判定が1なら確率 p2p_a、0なら確率 n2p_a で1を出力します。

    Attributes:
        p2p_0 (float): グループ0で元の判定1を1のまま出力する確率。
        n2p_0 (float): グループ0で元の判定0を1に変える確率。
        p2p_1 (float): グループ1の p2p。
        n2p_1 (float): グループ1の n2p。
        seed (int): 適用時の乱数シード。
        validation_error (float): 検証データ上の期待誤り率。
    """
    p2p_0: float
    n2p_0: float
    p2p_1: float
    n2p_1: float
    seed: int = 0
    validation_error: float = 0.0

    def __post_init__(self) -> None:
        for name in ("p2p_0", "n2p_0", "p2p_1", "n2p_1"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise FitError(f"混合パラメータ {name}={value} が [0,1] の範囲外です。")

    @classmethod
    def identity(cls, seed: int = 0) -> "EqOddsMixer":
        return cls(p2p_0=1.0, n2p_0=0.0, p2p_1=1.0, n2p_1=0.0, seed=seed)

    def p2p(self, group: int) -> float:
        return self.p2p_1 if group == 1 else self.p2p_0

    def n2p(self, group: int) -> float:
        return self.n2p_1 if group == 1 else self.n2p_0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class RejectOptionRule:
    """Reject Option Classification の規則。

    スコアが 0.5 から theta 以内の距離にある帯（境界を含む）の中では、favored_group の行に1、
    それ以外に0を出力します。帯の外では通常の0.5しきい値判定です。

    Attributes:
        theta (float): 帯の半幅 [0, 0.5]。
        favored_group (int): 帯の中で有利な判定を受けるグループ（非特権グループ）。
    """
    theta: float
    favored_group: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta <= 0.5:
            raise FitError(f"theta={self.theta} は [0, 0.5] の範囲外です。")
        if self.favored_group not in (0, 1):
            raise FitError(f"favored_group={self.favored_group} は 0 か 1 でなければなりません。")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
