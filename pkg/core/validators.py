"""
資料驗證器 - 使用 Pydantic 驗證場 CSV 的每一列
"""

import logging
import math
from typing import Callable, List, Tuple, Type

import pandas as pd
from pydantic import BaseModel, ValidationError, field_validator

from config import FileFormatConfig
from .models import ValidationResult

logger = logging.getLogger(__name__)


class _FiniteRow(BaseModel):
    @field_validator('*')
    @classmethod
    def finite(cls, v):
        if not math.isfinite(v):
            raise ValueError('必須為有限數')
        return v


class FieldRow2D(_FiniteRow):
    """二維場的一列"""
    xi1: float
    xi2: float
    value: float


class FieldRow1D(_FiniteRow):
    """一維場的一列"""
    xi: float
    value: float


class DataValidator:
    """Pydantic 逐列驗證器"""

    def __init__(self, model: Type[BaseModel], stop_on_error: bool = False, max_errors: int = 100):
        self.model = model
        self.stop_on_error = stop_on_error
        self.max_errors = max_errors

    def validate(self, df: pd.DataFrame, output_callback: Callable = None) -> Tuple[List[BaseModel], ValidationResult]:
        output_callback = output_callback or (lambda x: None)
        output_callback(f"開始驗證 {len(df)} 筆資料...")

        valid_records = []
        result = ValidationResult(success=True)

        for idx, row in enumerate(df.to_dict('records')):
            try:
                valid_records.append(self.model(**row))
                result.add_valid()
            except ValidationError as e:
                result.success = False
                for err in e.errors():
                    field = '.'.join(str(loc) for loc in err['loc'])
                    if result.error_count < self.max_errors:
                        result.add_error(idx + 1, field, err['msg'], row)
                if self.stop_on_error:
                    break

        output_callback(result.summary)
        if result.error_count > 0:
            output_callback(result.get_error_summary(5))
        return valid_records, result


class FieldFrameValidator:
    """
    場 CSV 驗證器

    依欄位判斷一維或二維格式，檢查必要欄位並逐列驗證數值為有限數。
    """

    def __init__(self, max_errors: int = 100):
        self.max_errors = max_errors

    def validate(self, df: pd.DataFrame, output_callback: Callable = None) -> ValidationResult:
        columns = list(df.columns)
        if columns == FileFormatConfig.FIELD_COLUMNS_2D:
            model = FieldRow2D
        elif columns == FileFormatConfig.FIELD_COLUMNS_1D:
            model = FieldRow1D
        else:
            result = ValidationResult(success=False)
            result.add_error(0, 'header', f'欄位 {columns} 不符合 {FileFormatConfig.FIELD_COLUMNS_2D} '
                                          f'或 {FileFormatConfig.FIELD_COLUMNS_1D}')
            return result
        if df.empty:
            result = ValidationResult(success=False)
            result.add_error(0, 'rows', '場檔案沒有任何資料列')
            return result
        _, result = DataValidator(model, max_errors=self.max_errors).validate(df, output_callback)
        return result
