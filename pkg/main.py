"""
アプリケーションのエントリーポイント。

プロジェクトのルートディレクトリをPythonのパスに追加し、
他のモジュール（ui, services など）を正しくインポートできるようにしてから、
コマンドラインのフロントエンドを起動します。

使い方:
    python main.py audit --dataset adult.csv --schema config/schemas/adult.json --model lr
"""
import sys
import os

# このファイル(main.py)があるディレクトリを sys.path に追加します。
current_dir: str = os.path.dirname(os.path.abspath(__file__))
if current_dir not in sys.path:
    sys.path.append(current_dir)

from ui.cli import main

if __name__ == "__main__":
    # 終了コード: 0 成功, 1 計算の失敗, 2 引数の誤り
    sys.exit(main())
