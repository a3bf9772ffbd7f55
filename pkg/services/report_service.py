"""
報告輸出服務 - 將求解、驗證與診斷結果寫成 JSON/CSV

此服務採用門面模式（Facade Pattern），所有輸出都經由 FieldService 的原子寫入。
"""

from typing import Any, Callable, Dict

import numpy as np
import pandas as pd
from pydantic import BaseModel

from config import PathManager
from core import ClassificationSummary, GasModel, ScalarField
from .field_service import FieldService


class ReportService:
    """報告輸出服務（門面）"""

    def __init__(self, output_callback: Callable = None):
        """
        初始化報告服務

        Args:
            output_callback: 輸出訊息的回調函數
        """
        self.output_callback = output_callback or (lambda x: None)
        self.fields = FieldService(self.output_callback)

    def write_model(self, model: BaseModel, path: str, extra: Dict[str, Any] = None) -> str:
        """
        將 pydantic 報告寫成 JSON

        Args:
            model: 任一報告模型（SolveReport、EllipticityReport ...）
            path: 輸出路徑
            extra: 附加欄位

        Returns:
            輸出檔案路徑
        """
        payload = model.model_dump(mode='json')
        if extra:
            payload.update(extra)
        return self.fields.write_json(payload, path)

    def write_classification(self, field: ScalarField, L: np.ndarray, tags: np.ndarray,
                             summary: ClassificationSummary, path: str) -> str:
        """逐節點型別表（CSV）與統計（同名 JSON）"""
        grid = field.grid
        coords = grid.mesh().reshape(-1, grid.ndim)
        names = ['xi1', 'xi2'] if grid.ndim == 2 else ['xi']
        data = {name: coords[:, k] for k, name in enumerate(names)}
        data['L'] = np.asarray(L).ravel()
        data['tag'] = np.asarray(tags).ravel()
        self.fields.write_table(pd.DataFrame(data, columns=names + ['L', 'tag']), path)
        self.write_model(summary, PathManager.sidecar_path(path))
        return path

    def write_residual(self, residual: ScalarField, norms, path: str, gas: GasModel) -> str:
        r_max, r_l2 = norms
        self.fields.write_field(residual, path, gas, extra={'residual_max': r_max, 'residual_l2': r_l2})
        return path
