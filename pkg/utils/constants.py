# utils/constants.py
"""ツールキット全体で使用される定数を定義するモジュール。

判定しきい値、掃引点数、CLIの選択肢など、実行中に変更されることのない
静的な値がまとめられています。
"""
from typing import List, Tuple

# 非特権グループの符号（Reject Option で優遇する既定のグループ）
UNPRIVILEGED: int = 0

DEFAULT_THRESHOLD: float = 0.5
DEFAULT_MI_BINS: int = 20
DEFAULT_TRAIN_FRACTION: float = 0.7
DEFAULT_VALIDATION_FRACTION: float = 0.2
DEFAULT_REPEATS: int = 100

# 反復のうちこの割合以上が成功しなければ実験を中止する
MIN_SUCCESS_RATIO: float = 0.8

# 閾値掃引
SWEEP_MIN: float = 0.01
SWEEP_MAX: float = 0.99
SWEEP_POINTS: int = 25

# Reject Option
DEFAULT_REJECT_THETA: float = 0.1
REJECT_THETA_GRID: Tuple[float, ...] = tuple(i / 100 for i in range(0, 51))
MAX_REJECT_ACCURACY_LOSS: float = 0.10

# Equalized Odds の格子探索
EQODDS_GRID_STEP: float = 0.01
EQODDS_REFINE_STEP: float = 0.001

# 95%信頼区間の正規近似の係数
CI_Z: float = 1.96

# 数値許容誤差
DISTORTION_TOLERANCE: float = 1e-12
PROBABILITY_CLIP: float = 1e-6

# レイテンシ測定
LATENCY_WARMUP: int = 3
LATENCY_TRIALS: int = 20

# 合成データによる定理検証
SYNTHETIC_DPD_LIMIT: float = 0.01
SYNTHETIC_MI_LIMIT: float = 0.005
SYNTHETIC_FEATURES: int = 5
SYNTHETIC_A_COEFFICIENT: float = 1.5

MODEL_CHOICES: List[str] = ["lr", "rf", "gbt"]
POSTPROC_CHOICES: List[str] = ["none", "cafp", "eqodds", "reject"]

# レポートに出力する指標名
METRIC_NAMES: List[str] = [
    "accuracy",
    "balanced_accuracy",
    "dpd_signed",
    "dpd_abs",
    "aod_signed",
    "aod_abs",
    "eod",
]

MODEL_FORMAT_VERSION: int = 1
REPORT_FORMAT_VERSION: int = 1
