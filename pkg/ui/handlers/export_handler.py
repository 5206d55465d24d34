from __future__ import annotations
import argparse
import logging
import os
from datetime import datetime
from typing import TYPE_CHECKING, Any, Dict, List

from models.experiment_models import FairnessReport, SweepResult

if TYPE_CHECKING:
    from ..cli import CommandLineApp

logger = logging.getLogger(__name__)


class ExportHandler:
    """
    コマンドの結果をJSONとグラフ用のCSVとして書き出す機能を提供します。
    """
    def __init__(self, app: CommandLineApp) -> None:
        """
        ExportHandlerのコンストラクタ。

        Args:
            app (CommandLineApp): 親となるアプリケーションインスタンス。
        """
        self.app: CommandLineApp = app

    def emit(self, payload: Dict[str, Any], args: argparse.Namespace) -> None:
        """
        結果をJSONとして出力する。
        `--out` が指定されていればファイルに、なければ標準出力に書き出します。
        `--reproducible` が指定されていない場合だけ生成時刻を付けます。
        """
        payload = dict(payload)
        if not args.reproducible:
            payload["generated_at"] = datetime.now().isoformat(timespec="seconds")
        if args.out:
            self.app.storage_service.save_json(args.out, payload)
        else:
            self.app.stdout.write(self.app.storage_service.dumps(payload))
            self.app.stdout.flush()

    def write_bars(self, report: FairnessReport, directory: str, dataset_id: str, model: str) -> str:
        """後処理ごと・指標ごとの平均と信頼区間を `bars_<dataset>_<model>.csv` に書き出す。"""
        columns: Dict[str, List[Any]] = {
            "method": [], "metric": [], "mean": [], "ci_low": [], "ci_high": [], "sd": [],
        }
        for row in report.rows:
            for metric, summary in row.metrics.items():
                columns["method"].append(row.postproc)
                columns["metric"].append(metric)
                columns["mean"].append(summary.mean)
                columns["ci_low"].append(summary.ci_low)
                columns["ci_high"].append(summary.ci_high)
                columns["sd"].append(summary.sd)
        path = os.path.join(directory, f"bars_{dataset_id}_{model}.csv")
        return self.app.storage_service.save_csv_columns(path, columns)

    def write_sweep(self, sweep: SweepResult, directory: str) -> str:
        """しきい値掃引の結果を `sweep_<dataset>_<model>.csv` に書き出す。"""
        path = os.path.join(directory, f"sweep_{sweep.dataset_id}_{sweep.model}.csv")
        return self.app.storage_service.save_csv_columns(path, sweep.to_columns())
