from __future__ import annotations
import argparse
import logging
from typing import TYPE_CHECKING, Any, Dict, Tuple

from services.synthetic_service import SyntheticService

if TYPE_CHECKING:
    from ..cli import CommandLineApp

logger = logging.getLogger(__name__)


class SyntheticHandler:
    """
    合成データによる定理検証（synthcheck）を処理するクラス。
    検証項目に 'fail' が1つでもあれば終了コード1を返します。
    """
    def __init__(self, app: CommandLineApp) -> None:
        """
        SyntheticHandlerのコンストラクタ。

        Args:
            app (CommandLineApp): 親となるアプリケーションインスタンス。
        """
        self.app: CommandLineApp = app
        self.service = SyntheticService()

    def synthcheck(self, args: argparse.Namespace) -> Tuple[Dict[str, Any], int]:
        ledger = self.service.synthetic_theorem_suite(
            seed=args.seed,
            n=args.n,
            d=args.d,
            a_coefficient=args.a_coefficient,
            correlated=args.correlated,
            bins=self.app.settings.mi_bins,
            cfg=self.app.settings.logistic.with_seed(args.seed),
        )
        if ledger.passed:
            logger.info("すべての検証項目が成り立ちました。")
        else:
            failed = [entry.check for entry in ledger.entries if entry.status == "fail"]
            logger.warning("成り立たない検証項目があります: %s", failed)
        return ledger.to_dict(), 0 if ledger.passed else 1
