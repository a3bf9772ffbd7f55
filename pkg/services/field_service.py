"""
場資料輸入輸出服務 - CSV/JSON 成品的原子寫入、中繼資料與 manifest

浮點數一律以最短可還原十進位（repr）輸出，相同輸入產生位元相同的檔案。
"""

import json
import logging
import os
import tempfile
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config import AppConfig, FileFormatConfig, PathManager
from core import FieldCSVReader, GasModel, GridSpec, Profile1D, ScalarField

logger = logging.getLogger(__name__)


def _atomic_write(path: str, text: str):
    """寫入同目錄的暫存檔後以 os.replace 取代目標"""
    PathManager.ensure_parent(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix='.tmp-', dir=directory)
    try:
        with os.fdopen(fd, 'w', encoding=FileFormatConfig.ENCODING, newline='') as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, ensure_ascii=False, indent=2, default=_json_default) + '\n'


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f'無法序列化 {type(obj).__name__}')


def _csv_text(df: pd.DataFrame) -> str:
    # float_format=None 時 pandas 以 repr 輸出浮點數
    return df.to_csv(index=False, lineterminator='\n')


class FieldService:
    """場成品讀寫"""

    def __init__(self, output_callback: Callable = None):
        self.output_callback = output_callback or (lambda x: None)

    # ========== 寫入 ==========

    def field_frame(self, field: ScalarField) -> pd.DataFrame:
        """節點以 C 順序展開為 DataFrame"""
        grid = field.grid
        coords = grid.mesh().reshape(-1, grid.ndim)
        columns = FileFormatConfig.FIELD_COLUMNS_2D if grid.ndim == 2 else FileFormatConfig.FIELD_COLUMNS_1D
        data = {name: coords[:, k] for k, name in enumerate(columns[:-1])}
        data['value'] = field.values.ravel()
        return pd.DataFrame(data, columns=columns)

    def write_field(self, field: ScalarField, path: str, gas: Optional[GasModel] = None,
                    extra: Optional[Dict[str, Any]] = None) -> Tuple[str, str]:
        """
        寫出場 CSV 與同名 JSON 中繼資料

        Returns:
            (csv 路徑, json 路徑)
        """
        _atomic_write(path, _csv_text(self.field_frame(field)))
        meta = {
            'variable': field.variable.value,
            'grid': field.grid.model_dump(mode='json'),
            'gas': gas.model_dump(mode='json') if gas is not None else None,
        }
        if extra:
            meta.update(extra)
        sidecar = PathManager.sidecar_path(path)
        _atomic_write(sidecar, _json_text(meta))
        self.output_callback(f"已寫出場資料: {path}（{field.grid.dims}，{field.variable.value}）")
        return path, sidecar

    def write_profile(self, profile: Profile1D, path: str, gas: Optional[GasModel] = None) -> Tuple[str, str]:
        """寫出剖面 CSV（xi,chi,dchi）與中繼資料"""
        df = pd.DataFrame({'xi': profile.xi, 'chi': profile.chi, 'dchi': profile.dchi},
                          columns=FileFormatConfig.PROFILE_COLUMNS)
        _atomic_write(path, _csv_text(df))
        meta = profile.model_dump(mode='json', exclude={'xi', 'chi', 'dchi', 'dense'})
        meta['gas'] = gas.model_dump(mode='json') if gas is not None else None
        sidecar = PathManager.sidecar_path(path)
        _atomic_write(sidecar, _json_text(meta))
        self.output_callback(f"已寫出剖面: {path}（{len(profile.xi)} 點，分支 {profile.branch}）")
        return path, sidecar

    def write_table(self, df: pd.DataFrame, path: str) -> str:
        _atomic_write(path, _csv_text(df))
        self.output_callback(f"已寫出表格: {path}（{len(df)} 列）")
        return path

    def write_json(self, payload: Dict[str, Any], path: str) -> str:
        _atomic_write(path, _json_text(payload))
        self.output_callback(f"已寫出 JSON: {path}")
        return path

    def write_manifest(self, out_path: str, subcommand: str, argv: List[str],
                       gas: Optional[GasModel] = None, grid: Optional[GridSpec] = None,
                       config: Optional[Dict[str, Any]] = None,
                       outputs: Optional[List[str]] = None) -> str:
        """每次執行的 manifest：工具版本、子命令、參數、氣體、網格、設定與輸出路徑"""
        payload = {
            'tool': AppConfig.PROG_NAME,
            'version': AppConfig.VERSION,
            'subcommand': subcommand,
            'argv': list(argv),
            'gas': gas.model_dump(mode='json') if gas is not None else None,
            'grid': grid.model_dump(mode='json') if grid is not None else None,
            'config': config or {},
            'outputs': list(outputs or [out_path]),
        }
        path = PathManager.manifest_path(out_path)
        _atomic_write(path, _json_text(payload))
        return path

    # ========== 讀取 ==========

    def read_field(self, path: str) -> Tuple[ScalarField, Optional[GasModel]]:
        """讀取場 CSV，回傳 (場, 中繼資料中的氣體或 None)"""
        reader = FieldCSVReader(path)
        field = reader.read()
        logger.debug(f"場資料來源: {reader.get_source_info()}")
        self.output_callback(f"已讀取場資料: {path}（{field.grid.dims}）")
        return field, reader.read_gas()
