# services/base_service.py
from abc import ABC, abstractmethod
from typing import TYPE_CHECKING, Any, Generic, Optional, TypeVar

if TYPE_CHECKING:
    from services.storage_service import StorageService

# サービスが扱うデータモデルを表すジェネリック型
T = TypeVar('T')


class BaseService(Generic[T], ABC):
    """
    データを読み書きするサービスクラスの基底となる抽象クラス（ABC）。

    具象サービスクラスは、特定のデータモデル（例: Dataset, LogisticModel）を
    扱うために、このクラスを継承し、抽象メソッドを実装する必要があります。

    Attributes:
        storage_service (Optional['StorageService']): ローカルストレージサービスへの参照。
    """

    def __init__(self, storage_service: Optional['StorageService'] = None) -> None:
        """BaseServiceのコンストラクタ。

        Args:
            storage_service (Optional[StorageService]): ストレージサービスインスタンス。
                省略した場合はカレントディレクトリを基準とするものを生成する。
        """
        if storage_service is None:
            from services.storage_service import StorageService
            storage_service = StorageService()
        self.storage_service = storage_service

    @abstractmethod
    def load_data(self, identifier: Any) -> Optional[T]:
        """
        指定された識別子を使用してデータを読み込むための抽象メソッド。

        Args:
            identifier (Any): データを一意に識別するためのキー（例: ファイルパス）。

        Returns:
            Optional[T]: 読み込まれたデータモデルオブジェクト。見つからない場合はNone。
        """

    @abstractmethod
    def save_data(self, data: T) -> None:
        """
        データを永続化するための抽象メソッド。

        Args:
            data (T): 保存するデータモデルオブジェクト。
        """


class ModelService(BaseService[T]):
    """学習済みモデルを版付きJSON文書として読み書きする学習器サービスの基底クラス。

    Attributes:
        model_file (str): `save_data` の保存先ファイル名。
        schema_hash (str): モデル文書に記録するスキーマのハッシュ値。
    """

    model_file: str = "model.json"

    def __init__(self, storage_service: Optional['StorageService'] = None, model_file: Optional[str] = None) -> None:
        super().__init__(storage_service)
        if model_file is not None:
            self.model_file = model_file
        self.schema_hash = ""

    def load_data(self, identifier: Any) -> Optional[T]:
        """モデル文書のパスからモデルを読み込む。"""
        return self.storage_service.load_model(identifier)

    def save_data(self, data: T) -> None:
        self.storage_service.save_model(self.model_file, data, self.schema_hash)
