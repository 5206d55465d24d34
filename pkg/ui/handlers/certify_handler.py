from __future__ import annotations
import argparse
import logging
from typing import TYPE_CHECKING, Any, Dict, Tuple

if TYPE_CHECKING:
    from ..cli import CommandLineApp

logger = logging.getLogger(__name__)


class CertifyHandler:
    """
    EOD上界の証明書（certify）と推論レイテンシ（latency）のサブコマンドを処理するクラス。

    どちらも反復0の分割で学習したモデルを、テストデータで評価します。
    """
    def __init__(self, app: CommandLineApp) -> None:
        self.app: CommandLineApp = app

    def certify(self, args: argparse.Namespace) -> Tuple[Dict[str, Any], int]:
        """
        証明書 {b0, b1, bound, n0, n1, model_id, dataset_id} と、測定したスコア版EODを返す。
        `holds` は測定値が上界以下かどうかを表します。
        """
        service = self.app.experiment_service()
        cfg = self.app.experiment_config(args)
        result = service.certify(cfg, service.load_dataset(cfg))
        if not result["holds"]:
            logger.warning("スコア版EOD %.4f が上界 %.4f を超えています。", result["score_eod"], result["bound"])
        return result, 0

    def latency(self, args: argparse.Namespace) -> Tuple[Dict[str, Any], int]:
        """元のモデルとCAFPのバッチ推論時間を比較する。"""
        service = self.app.experiment_service()
        cfg = self.app.experiment_config(args)
        dataset = service.load_dataset(cfg)
        dataset.validate()
        data = service.prepare_repeat(dataset, cfg, 0)
        result = service.latency_probe(data.model, data.test, batch=args.batch, trials=args.trials)
        payload = result.to_dict()
        payload["model"] = cfg.model
        payload["dataset_id"] = dataset.dataset_id
        logger.info("レイテンシ: 元 %.3f ms, CAFP %.3f ms (100行あたり)", result.base_ms_per_100, result.cafp_ms_per_100)
        return payload, 0
