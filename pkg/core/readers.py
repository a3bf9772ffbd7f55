"""
資料讀取器 - 場 CSV（含 JSON 中繼資料）、剖面 CSV 與 key=value 設定檔
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from config import FileFormatConfig, PathManager
from .errors import PreconditionError
from .models import GasModel, GridSpec, Profile1D, ScalarField, SolverConfig, Variable
from .validators import FieldFrameValidator

logger = logging.getLogger(__name__)


class CSVReader:
    """CSV 檔案讀取器"""

    def __init__(self, file_path: str, encoding: str = FileFormatConfig.ENCODING, delimiter: str = ','):
        self.file_path = Path(file_path)
        self.encoding = encoding
        self.delimiter = delimiter
        if not self.file_path.exists():
            raise FileNotFoundError(f"CSV 檔案不存在: {file_path}")

    def read(self) -> pd.DataFrame:
        logger.info(f"正在讀取 CSV: {self.file_path}")
        df = pd.read_csv(self.file_path, encoding=self.encoding, delimiter=self.delimiter,
                         float_precision='round_trip')
        df = df.dropna(axis=1, how='all').dropna(axis=0, how='all')
        return df


def read_sidecar(csv_path: str) -> Optional[Dict[str, Any]]:
    """讀取 CSV 旁的 JSON 中繼資料，不存在時回傳 None"""
    path = Path(PathManager.sidecar_path(csv_path))
    if not path.exists():
        return None
    with open(path, 'r', encoding=FileFormatConfig.ENCODING) as f:
        return json.load(f)


def _infer_grid(coords: np.ndarray) -> GridSpec:
    """由節點座標推斷均勻網格（無中繼資料時）"""
    origin, spacing, dims = [], [], []
    for k in range(coords.shape[1]):
        axis = np.unique(coords[:, k])
        steps = np.diff(axis)
        if len(axis) < 3 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise PreconditionError(f'第 {k + 1} 軸座標不構成均勻網格')
        origin.append(float(axis[0]))
        spacing.append(float((axis[-1] - axis[0]) / (len(axis) - 1)))
        dims.append(len(axis))
    return GridSpec(origin=tuple(origin), spacing=tuple(spacing), dims=tuple(dims))


class FieldCSVReader:
    """
    場 CSV 讀取器

    欄位為 xi1,xi2,value（二維）或 xi,value（一維），節點以 C 順序（最後一軸最快）排列。
    同名 .json 中繼資料提供網格（含牆邊）、變數種類與氣體參數；缺少時由座標推斷網格。
    """

    def __init__(self, file_path: str):
        self.file_path = Path(file_path)
        if not self.file_path.exists():
            raise FileNotFoundError(f"場檔案不存在: {file_path}")
        self.metadata: Optional[Dict[str, Any]] = None

    def read_frame(self) -> pd.DataFrame:
        df = CSVReader(str(self.file_path)).read()
        result = FieldFrameValidator().validate(df)
        if not result.success:
            raise PreconditionError(f'場檔案格式錯誤：\n{result.get_error_summary(5)}')
        return df

    def read(self) -> ScalarField:
        df = self.read_frame()
        self.metadata = read_sidecar(str(self.file_path))
        coord_cols = [c for c in df.columns if c != 'value']
        coords = df[coord_cols].to_numpy(dtype=float)

        if self.metadata and 'grid' in self.metadata:
            grid = GridSpec(**self.metadata['grid'])
        else:
            grid = _infer_grid(coords)

        if grid.ndim != len(coord_cols):
            raise PreconditionError(f'中繼資料維度 {grid.ndim} 與 CSV 欄位 {coord_cols} 不符')
        if len(df) != int(np.prod(grid.dims)):
            raise PreconditionError(f'CSV 有 {len(df)} 列，網格需要 {int(np.prod(grid.dims))} 個節點')
        expected = grid.mesh().reshape(-1, grid.ndim)
        if not np.allclose(coords, expected, rtol=0.0, atol=1e-9 * (1.0 + np.max(np.abs(expected)))):
            raise PreconditionError('CSV 座標與網格節點順序不一致（需 C 順序）')

        variable = Variable((self.metadata or {}).get('variable', Variable.CHI.value))
        return ScalarField(grid=grid, values=df['value'].to_numpy(dtype=float), variable=variable)

    def read_gas(self) -> Optional[GasModel]:
        """中繼資料中的氣體參數（需先呼叫 read）"""
        if self.metadata and self.metadata.get('gas'):
            return GasModel(**self.metadata['gas'])
        return None

    def get_source_info(self) -> Dict[str, Any]:
        return {'type': 'field_csv', 'file': str(self.file_path),
                'sidecar': self.metadata is not None}


class ProfileCSVReader:
    """一維/徑向剖面讀取器，欄位 xi,chi,dchi"""

    def __init__(self, file_path: str):
        self.file_path = Path(file_path)
        if not self.file_path.exists():
            raise FileNotFoundError(f"剖面檔案不存在: {file_path}")

    def read(self) -> Profile1D:
        df = CSVReader(str(self.file_path)).read()
        missing = [c for c in FileFormatConfig.PROFILE_COLUMNS if c not in df.columns]
        if missing:
            raise PreconditionError(f'剖面檔案缺少欄位: {missing}')
        meta = read_sidecar(str(self.file_path)) or {}
        return Profile1D(
            xi=df['xi'].to_numpy(dtype=float),
            chi=df['chi'].to_numpy(dtype=float),
            dchi=df['dchi'].to_numpy(dtype=float),
            branch=meta.get('branch', 'profile'),
            truncated=bool(meta.get('truncated', False)),
            sonic_points=meta.get('sonic_points', []),
            vacuum_points=meta.get('vacuum_points', []),
        )


class KeyValueConfigReader:
    """
    平面 key=value 設定檔讀取器

    # 開頭為註解，空白行忽略；值依序嘗試解析為 int、float，否則保留字串。
    """

    def __init__(self, file_path: str):
        self.file_path = Path(file_path)
        if not self.file_path.exists():
            raise FileNotFoundError(f"設定檔不存在: {file_path}")

    @staticmethod
    def _parse_value(text: str):
        for cast in (int, float):
            try:
                return cast(text)
            except ValueError:
                continue
        return text

    def read(self) -> Dict[str, Any]:
        values = {}
        with open(self.file_path, 'r', encoding=FileFormatConfig.ENCODING) as f:
            for line_no, raw in enumerate(f, 1):
                line = raw.strip()
                if not line or line.startswith('#'):
                    continue
                if '=' not in line:
                    raise PreconditionError(f'設定檔第 {line_no} 行缺少 "=": {line}')
                key, value = (part.strip() for part in line.split('=', 1))
                values[key] = self._parse_value(value)
        return values

    def to_solver_config(self) -> SolverConfig:
        values = self.read()
        unknown = set(values) - set(SolverConfig.model_fields)
        if unknown:
            logger.warning(f'設定檔中未知的鍵已忽略: {sorted(unknown)}')
        return SolverConfig(**values)
