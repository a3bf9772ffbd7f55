"""
應用程式配置 - 集中管理所有配置常數

數值容差、檔案格式變更只需修改此檔案，不需要修改程式碼！
"""

import os
import sys
from pathlib import Path


def get_app_base_dir():
    """取得應用程式基礎目錄"""
    if getattr(sys, 'frozen', False):
        return os.path.dirname(sys.executable)
    else:
        return os.path.dirname(os.path.abspath(__file__))


class NumericsConfig:
    """
    數值計算配置類別

    所有容差與預設參數集中於此，SolverConfig 等模型的預設值由此讀取。
    """

    # ========== 型別分類 ==========
    # L 與 1 的判定帶寬（相對值）
    TOL_L = 1e-6

    # ========== Newton 求解器 ==========
    MAX_NEWTON_ITERS = 50
    # 殘差目標：RESIDUAL_TOL_FACTOR * (1 + max c²)
    RESIDUAL_TOL_FACTOR = 1e-10
    LINE_SEARCH_FACTOR = 0.5
    MIN_STEP = 2.0 ** -20
    PICARD_WARMUP_ITERS = 5
    # c² 下限：C2_FLOOR_FACTOR * ĉ²（僅迭代期間使用）
    C2_FLOOR_FACTOR = 1e-8
    L_GUARD = 0.999999
    # 超過此比例的節點 c² 被截斷視為退化
    DEGENERATE_FRACTION = 0.01
    # 直接分解的最大節點數（257²），超過則改用迭代法
    DIRECT_SOLVE_MAX_NODES = 257 * 257
    # 線性子問題精度：線性殘差 ≤ LINEAR_RTOL * 非線性殘差
    LINEAR_RTOL = 1e-2

    # ========== 參考解 ==========
    RADIAL_RTOL = 1e-10
    RADIAL_ATOL = 1e-12
    # |c² - (χ')²| < SONIC_THRESHOLD * c² 時停止積分
    SONIC_THRESHOLD = 1e-8
    # 稀疏化 IC 一致性檢查
    RAREFACTION_IC_TOL = 1e-9

    # ========== 橢圓性驗證 ==========
    K_VER = 10.0
    C_HAT_SLACK = 1e-12
    # 牆面 slip 檢查：tol = SLIP_TOL_FACTOR * h² * (1 + max|χ_nn|)
    SLIP_TOL_FACTOR = 10.0
    # 最大值點診斷的絕對下限
    DIAGNOSTIC_ABS_FLOOR = 1e-10
    DELTA_SWEEP = (0.001, 0.01, 0.05, 0.1)


class FileFormatConfig:
    """
    檔案格式配置類別

    CSV 欄位順序固定，浮點數輸出使用最短可還原十進位表示。
    """

    FIELD_COLUMNS_2D = ['xi1', 'xi2', 'value']
    FIELD_COLUMNS_1D = ['xi', 'value']
    PROFILE_COLUMNS = ['xi', 'chi', 'dchi']
    SIDECAR_SUFFIX = '.json'
    MANIFEST_SUFFIX = '.manifest.json'
    ENCODING = 'utf-8'


class AppConfig:
    """應用程式配置類別"""

    PROG_NAME = 'sspf'
    VERSION = '1.0.0'
    DESCRIPTION = '自相似多方位勢流工具 - χ 方程求解、型別分類與橢圓性原理驗證'

    # 日誌格式
    LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


class PathManager:
    """路徑管理類別"""

    @staticmethod
    def sidecar_path(csv_path: str) -> str:
        """取得欄位 CSV 對應的 JSON 中繼資料路徑"""
        return str(Path(csv_path).with_suffix(FileFormatConfig.SIDECAR_SUFFIX))

    @staticmethod
    def manifest_path(out_path: str) -> str:
        """取得輸出檔案對應的 manifest 路徑"""
        p = Path(out_path)
        return str(p.with_name(p.stem + FileFormatConfig.MANIFEST_SUFFIX))

    @staticmethod
    def ensure_parent(path: str) -> str:
        """確保檔案所在目錄存在並返回路徑"""
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        return path
