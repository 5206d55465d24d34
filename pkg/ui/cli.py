"""
コマンドラインのフロントエンド。

サブコマンド（audit / sweep / ablate / certify / synthcheck / latency）を解析し、
対応するハンドラに処理を振り分けます。結果のJSONは標準出力（または --out のファイル）に、
ログは標準エラーに書き出します。

終了コード:
    0: 成功
    1: 計算の失敗（データセットが見つからない、学習の発散、反復の中止など）
    2: 引数の誤り
"""
import argparse
import logging
import math
import os
import sys
from dataclasses import replace
from typing import Any, Callable, Dict, List, Optional, TextIO, Tuple

from config.settings import Settings, configure_logging
from models.experiment_models import ExperimentConfig
from services.data_service import DataService
from services.experiment_service import ExperimentService
from services.storage_service import StorageService
from services.synthetic_service import MIN_SYNTHETIC_ROWS
from ui.handlers.audit_handler import AuditHandler
from ui.handlers.certify_handler import CertifyHandler
from ui.handlers.export_handler import ExportHandler
from ui.handlers.synthetic_handler import SyntheticHandler
from utils.constants import (
    DEFAULT_REPEATS,
    DEFAULT_TRAIN_FRACTION,
    LATENCY_TRIALS,
    MODEL_CHOICES,
    POSTPROC_CHOICES,
    SYNTHETIC_A_COEFFICIENT,
    SYNTHETIC_FEATURES,
)
from utils.exceptions import FairnessToolkitError

logger = logging.getLogger(__name__)

CommandResult = Tuple[Dict[str, Any], int]


def positive_int(text: str) -> int:
    """1以上の整数を受け付ける argparse の型。"""
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"整数ではありません: {text}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"1以上の整数を指定してください: {value}")
    return value


def sample_size(text: str) -> int:
    """合成データの標本の大きさ（MIN_SYNTHETIC_ROWS 以上）。"""
    value = positive_int(text)
    if value < MIN_SYNTHETIC_ROWS:
        raise argparse.ArgumentTypeError(f"{MIN_SYNTHETIC_ROWS}以上を指定してください: {value}")
    return value


def _float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"数値ではありません: {text}")
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"有限の数値を指定してください: {text}")
    return value


def open_fraction(text: str) -> float:
    """開区間 (0, 1) の割合。"""
    value = _float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"0より大きく1未満の値を指定してください: {value}")
    return value


def probability(text: str) -> float:
    """閉区間 [0, 1] の確率。"""
    value = _float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"0以上1以下の値を指定してください: {value}")
    return value


class CommandLineApp:
    """
    コマンドラインアプリケーション本体。

    各ハンドラは `CommandLineApp` を受け取り、設定やサービスを参照して処理を行います。

    Attributes:
        stdout (TextIO): JSONの出力先。
        stderr (TextIO): エラーメッセージの出力先。
        settings (Settings): 実行時の設定。
        storage_service (StorageService): ファイル入出力。
    """

    def __init__(self, stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None) -> None:
        self.stdout: TextIO = stdout or sys.stdout
        self.stderr: TextIO = stderr or sys.stderr
        self.settings = Settings()
        self.storage_service = StorageService()

        self.audit_handler = AuditHandler(self)
        self.certify_handler = CertifyHandler(self)
        self.synthetic_handler = SyntheticHandler(self)
        self.export_handler = ExportHandler(self)

        self.commands: Dict[str, Callable[[argparse.Namespace], CommandResult]] = {
            "audit": self.audit_handler.audit,
            "sweep": self.audit_handler.sweep,
            "ablate": self.audit_handler.ablate,
            "certify": self.certify_handler.certify,
            "latency": self.certify_handler.latency,
            "synthcheck": self.synthetic_handler.synthcheck,
        }

    def build_parser(self) -> argparse.ArgumentParser:
        """サブコマンドと引数の定義を持つパーサを作る。"""
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--seed", type=int, default=0, help="基準シード（既定: 0）")
        common.add_argument("--out", help="結果のJSONを書き出すファイル。省略時は標準出力")
        common.add_argument("--reproducible", action="store_true", help="生成時刻を出力せず、同じ入力で同じバイト列を出力する")
        common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
        common.add_argument("--n-jobs", type=int, default=1, help="反復を並列に実行するジョブ数")

        data = argparse.ArgumentParser(add_help=False)
        data.add_argument("--dataset", required=True, help="CSVファイルのパス")
        data.add_argument("--schema", required=True, help="スキーマJSONのパス")
        data.add_argument("--model", default="lr", choices=MODEL_CHOICES, help="学習器（既定: lr）")
        data.add_argument("--threshold", type=probability, default=None, help="判定しきい値（既定: 0.5）")
        data.add_argument("--train-fraction", type=open_fraction, default=DEFAULT_TRAIN_FRACTION, help="訓練データの割合")

        parser = argparse.ArgumentParser(
            prog="main.py",
            description="保護属性の反実仮想平均化（CAFP）による公平性の監査ツール",
        )
        subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

        audit = subparsers.add_parser("audit", parents=[common, data], help="反復評価を行いレポートを出力する")
        audit.add_argument(
            "--postproc", action="append", choices=POSTPROC_CHOICES,
            help="評価する後処理（複数指定可。省略時はすべて）",
        )
        audit.add_argument("--repeats", type=positive_int, default=DEFAULT_REPEATS, help="反復回数（既定: 100）")
        audit.add_argument("--plot-data", metavar="DIR", help="グラフ用のCSVを書き出すディレクトリ")

        sweep = subparsers.add_parser("sweep", parents=[common, data], help="判定しきい値を掃引する")
        sweep.add_argument("--plot-data", metavar="DIR", help="グラフ用のCSVを書き出すディレクトリ")

        ablate = subparsers.add_parser("ablate", parents=[common, data], help="事実・反実仮想・平均化のスコアを比較する")
        ablate.add_argument("--repeats", type=positive_int, default=DEFAULT_REPEATS, help="反復回数（既定: 100）")

        subparsers.add_parser("certify", parents=[common, data], help="EOD上界の証明書を計算する")

        latency = subparsers.add_parser("latency", parents=[common, data], help="推論レイテンシを測定する")
        latency.add_argument("--batch", type=positive_int, default=100, help="1回の推論の行数（既定: 100）")
        latency.add_argument("--trials", type=positive_int, default=LATENCY_TRIALS, help="計測回数（最低20）")

        synth = subparsers.add_parser("synthcheck", parents=[common], help="合成データで理論的性質を検証する")
        synth.add_argument("--n", type=sample_size, default=10000, help="標本の大きさ（1000以上）")
        synth.add_argument("--d", type=positive_int, default=SYNTHETIC_FEATURES, help="特徴量の次元")
        synth.add_argument("--a-coefficient", type=float, default=SYNTHETIC_A_COEFFICIENT, help="保護属性の真の効果")
        synth.add_argument("--correlated", action="store_true", help="X と A を相関させる")
        return parser

    # ------------------------------------------------------------------
    # ハンドラから使う補助
    # ------------------------------------------------------------------
    def experiment_service(self) -> ExperimentService:
        return ExperimentService(
            settings=self.settings,
            data_service=DataService(storage_service=self.storage_service),
            storage_service=self.storage_service,
        )

    def experiment_config(
        self,
        args: argparse.Namespace,
        postprocessors: Optional[List[str]] = None,
        repeats: int = 1,
    ) -> ExperimentConfig:
        """引数から実験設定を組み立てる。"""
        threshold = args.threshold if args.threshold is not None else self.settings.threshold
        return ExperimentConfig(
            dataset_id=os.path.splitext(os.path.basename(args.dataset))[0],
            model=args.model,
            postprocessors=list(postprocessors or POSTPROC_CHOICES),
            repeats=repeats,
            seed=args.seed,
            train_fraction=args.train_fraction,
            threshold=threshold,
            dataset_path=args.dataset,
            schema_path=args.schema,
        )

    def run(self, argv: Optional[List[str]] = None) -> int:
        """引数を解析してサブコマンドを実行し、終了コードを返す。

        Args:
            argv (Optional[List[str]]): 引数のリスト。Noneなら sys.argv[1:]。

        Returns:
            int: 終了コード。
        """
        parser = self.build_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return exc.code if isinstance(exc.code, int) else 2

        configure_logging(args.log_level)
        self.settings = replace(self.settings, n_jobs=args.n_jobs, log_level=args.log_level)
        try:
            payload, exit_code = self.commands[args.command](args)
            self.export_handler.emit(payload, args)
        except (FairnessToolkitError, OSError, ValueError) as exc:
            logger.error("%s が失敗しました: %s", args.command, exc)
            print(f"エラー: {exc}", file=self.stderr)
            return 1
        return exit_code


def main(argv: Optional[List[str]] = None) -> int:
    """コマンドラインのエントリーポイント。"""
    return CommandLineApp().run(argv)
