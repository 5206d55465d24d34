from __future__ import annotations
import argparse
import logging
from typing import TYPE_CHECKING, Any, Dict, Tuple

if TYPE_CHECKING:
    from ..cli import CommandLineApp

logger = logging.getLogger(__name__)


class AuditHandler:
    """
    反復評価（audit）、しきい値掃引（sweep）、アブレーション（ablate）の各サブコマンドを処理するクラス。
    """
    def __init__(self, app: CommandLineApp) -> None:
        """
        AuditHandlerのコンストラクタ。

        Args:
            app (CommandLineApp): 親となるアプリケーションインスタンス。
        """
        self.app: CommandLineApp = app

    def audit(self, args: argparse.Namespace) -> Tuple[Dict[str, Any], int]:
        """
        データセットを読み込み、学習器と後処理の組み合わせを反復評価する。
        `--plot-data` が指定されていれば棒グラフ用のCSVも書き出します。
        """
        service = self.app.experiment_service()
        cfg = self.app.experiment_config(args, postprocessors=args.postproc, repeats=args.repeats)
        dataset = service.load_dataset(cfg)
        report = service.run_experiment(cfg, dataset)
        if args.plot_data:
            self.app.export_handler.write_bars(report, args.plot_data, dataset.dataset_id, cfg.model)
        return report.to_dict(), 0

    def sweep(self, args: argparse.Namespace) -> Tuple[Dict[str, Any], int]:
        """判定しきい値を掃引し、系列ごとの平衡正解率と符号付きDPDを返す。"""
        service = self.app.experiment_service()
        cfg = self.app.experiment_config(args)
        result = service.threshold_sweep(cfg, service.load_dataset(cfg))
        if args.plot_data:
            self.app.export_handler.write_sweep(result, args.plot_data)
        payload = result.to_dict()
        payload["cafp_dpd_not_worse_fraction"] = result.dpd_not_worse_fraction()
        return payload, 0

    def ablate(self, args: argparse.Namespace) -> Tuple[Dict[str, Any], int]:
        service = self.app.experiment_service()
        cfg = self.app.experiment_config(args, repeats=args.repeats)
        table = service.ablation(cfg, service.load_dataset(cfg))
        return table.to_dict(), 0
