"""
資料模型定義 - 使用 Pydantic 進行資料驗證

網格節點值以 numpy 陣列保存（arbitrary_types_allowed），
欄位建構後即設為唯讀，所有運算都配置新的輸出。
"""

from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config import NumericsConfig


class TypeTag(str, Enum):
    """方程在單點的型別（由 pseudo-Mach 數 L 決定）"""
    ELLIPTIC = 'Elliptic'
    PARABOLIC = 'Parabolic'
    HYPERBOLIC = 'Hyperbolic'


class Variable(str, Enum):
    """節點值的變數種類"""
    CHI = 'Chi'
    PSI = 'Psi'
    RESIDUAL = 'Residual'


class WallEdge(str, Enum):
    """網格邊界；left/right 垂直於 ξ¹，bottom/top 垂直於 ξ²"""
    LEFT = 'left'
    RIGHT = 'right'
    BOTTOM = 'bottom'
    TOP = 'top'

    @property
    def axis(self) -> int:
        return 0 if self in (WallEdge.LEFT, WallEdge.RIGHT) else 1

    @property
    def is_low(self) -> bool:
        return self in (WallEdge.LEFT, WallEdge.BOTTOM)


# 逆時針旋轉 90° 時邊界的對應
_EDGE_ROTATION = {
    WallEdge.LEFT: WallEdge.BOTTOM,
    WallEdge.BOTTOM: WallEdge.RIGHT,
    WallEdge.RIGHT: WallEdge.TOP,
    WallEdge.TOP: WallEdge.LEFT,
}


def rotate_edge(edge: WallEdge) -> WallEdge:
    return _EDGE_ROTATION[WallEdge(edge)]


class GasModel(BaseModel):
    """多方氣體模型：γ、參考聲速 c0、參考密度 ρ0 與 Bernoulli 常數 A"""

    model_config = ConfigDict(frozen=True)

    gamma: float
    c0: float = Field(..., gt=0)
    rho0: float = Field(1.0, gt=0)
    bernoulli_A: float = 0.0

    @property
    def is_isothermal(self) -> bool:
        return self.gamma == 1.0

    def exponent_warnings(self) -> List[str]:
        """回傳與 γ 範圍相關的警告（不阻止計算）"""
        warnings = []
        if self.gamma == 0.0:
            warnings.append('γ=0：壓力律未定義，僅 π 與 c² 可用')
        if self.gamma <= -1.0:
            warnings.append(f'γ={self.gamma} ≤ -1：超出橢圓性原理的假設範圍')
        elif self.gamma < 0.0:
            warnings.append(f'γ={self.gamma} 介於 -1 與 0：公式有效但物理上不常見')
        return warnings


class GridSpec(BaseModel):
    """均勻笛卡兒網格：原點、各軸間距、節點數與帶 slip 條件的牆邊"""

    model_config = ConfigDict(frozen=True)

    origin: Tuple[float, ...]
    spacing: Tuple[float, ...]
    dims: Tuple[int, ...]
    wall_edges: Tuple[WallEdge, ...] = ()

    @field_validator('wall_edges', mode='before')
    @classmethod
    def normalize_walls(cls, v):
        if v is None:
            return ()
        edges = sorted({WallEdge(e) for e in v}, key=lambda e: list(WallEdge).index(e))
        return tuple(edges)

    @model_validator(mode='after')
    def check_shape(self):
        d = len(self.dims)
        if d not in (1, 2):
            raise ValueError(f'僅支援 d=1 或 d=2 的網格，收到 d={d}')
        if len(self.origin) != d or len(self.spacing) != d:
            raise ValueError('origin、spacing 與 dims 的維度必須一致')
        if any(h <= 0 for h in self.spacing):
            raise ValueError(f'網格間距必須為正: {self.spacing}')
        if any(n < 3 for n in self.dims):
            raise ValueError(f'每軸至少需要 3 個節點: {self.dims}')
        for edge in self.wall_edges:
            if edge.axis >= d:
                raise ValueError(f'{d} 維網格不存在邊界 {edge.value}')
        return self

    @classmethod
    def from_extent(cls, extent: List[Tuple[float, float]], dims: List[int],
                    wall_edges=()) -> 'GridSpec':
        """由 [(lo, hi), ...] 與節點數建立網格"""
        spacing = tuple((hi - lo) / (n - 1) for (lo, hi), n in zip(extent, dims))
        return cls(origin=tuple(lo for lo, _ in extent), spacing=spacing,
                   dims=tuple(dims), wall_edges=tuple(wall_edges))

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def h_max(self) -> float:
        return max(self.spacing)

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing[axis] * np.arange(self.dims[axis])

    def extent(self) -> List[Tuple[float, float]]:
        return [(self.origin[k], self.origin[k] + self.spacing[k] * (self.dims[k] - 1))
                for k in range(self.ndim)]

    def mesh(self) -> np.ndarray:
        """節點座標，形狀為 dims + (d,)"""
        axes = [self.axis_coords(k) for k in range(self.ndim)]
        return np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)

    def centroid(self) -> np.ndarray:
        return np.array([(lo + hi) / 2 for lo, hi in self.extent()])

    def corners(self) -> np.ndarray:
        ext = self.extent()
        grids = np.meshgrid(*[np.array(e) for e in ext], indexing='ij')
        return np.stack([g.ravel() for g in grids], axis=-1)

    def edge_mask(self, edges=None) -> np.ndarray:
        """指定邊界（預設全部）上的節點遮罩"""
        mask = np.zeros(self.dims, dtype=bool)
        edges = list(WallEdge)[:2 * self.ndim] if edges is None else edges
        for edge in edges:
            edge = WallEdge(edge)
            index = [slice(None)] * self.ndim
            index[edge.axis] = 0 if edge.is_low else -1
            mask[tuple(index)] = True
        return mask

    def dirichlet_mask(self) -> np.ndarray:
        """非牆邊界上的節點（角點若屬於任一非牆邊也算）"""
        non_walls = [e for e in list(WallEdge)[:2 * self.ndim] if e not in self.wall_edges]
        return self.edge_mask(non_walls)

    def equation_mask(self) -> np.ndarray:
        """方程成立的節點：內部節點加上牆邊節點"""
        return ~self.dirichlet_mask()


class ScalarField(BaseModel):
    """網格上的節點純量場（χ、ψ 或殘差）"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: GridSpec
    values: np.ndarray
    variable: Variable = Variable.CHI

    @field_validator('values', mode='before')
    @classmethod
    def validate_values(cls, v, info):
        arr = np.array(v, dtype=float)
        grid = info.data.get('grid')
        if grid is not None:
            expected = int(np.prod(grid.dims))
            if arr.size != expected:
                raise ValueError(f'節點數 {arr.size} 與網格 {grid.dims} 不符')
            arr = arr.reshape(grid.dims)
        if not np.all(np.isfinite(arr)):
            raise ValueError('節點值必須全部為有限數')
        arr.flags.writeable = False
        return arr

    def with_values(self, values: np.ndarray, variable: Variable = None,
                    grid: GridSpec = None) -> 'ScalarField':
        return ScalarField(grid=grid or self.grid, values=values,
                           variable=variable or self.variable)


class PointState(BaseModel):
    """單點求值結果"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    xi: Tuple[float, ...]
    chi: float
    grad_chi: Tuple[float, ...]
    hess_chi: Tuple[Tuple[float, ...], ...]
    c2: float
    L: float
    tag: TypeTag

    @property
    def velocity(self) -> Tuple[float, ...]:
        """流速 v = ∇ψ = ∇χ + ξ"""
        return tuple(g + x for g, x in zip(self.grad_chi, self.xi))


# ==================== 場變換 ====================

class Translate(BaseModel):
    kind: Literal['translate'] = 'translate'
    v0: Tuple[float, ...]


class Rotate(BaseModel):
    """網格層級僅允許 90° 的整數倍（逆時針）"""
    kind: Literal['rotate'] = 'rotate'
    quarter_turns: int = 1


class Scale(BaseModel):
    kind: Literal['scale'] = 'scale'
    s: float = Field(..., gt=0)


TransformOp = Union[Translate, Rotate, Scale]


# ==================== 參考解 ====================

class Profile1D(BaseModel):
    """一維或徑向剖面 (ξ 或 r, χ, χ')"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    xi: np.ndarray
    chi: np.ndarray
    dchi: np.ndarray
    branch: str
    truncated: bool = False
    sonic_points: List[float] = Field(default_factory=list)
    vacuum_points: List[float] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)


class RadialProfile(Profile1D):
    """徑向常微分方程解；dense 保存 scipy 的連續輸出"""

    d: int = 2
    dense: Optional[object] = Field(default=None, exclude=True)

    def evaluate(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """在任意半徑上以連續輸出求 (χ, χ')"""
        r = np.asarray(r, dtype=float)
        lo, hi = float(self.xi[0]), float(self.xi[-1])
        if np.any(r < lo - 1e-12) or np.any(r > hi + 1e-12):
            raise ValueError(f'半徑超出積分範圍 [{lo}, {hi}]')
        y = self.dense(np.clip(r.ravel(), lo, hi))
        return y[0].reshape(r.shape), y[1].reshape(r.shape)


# ==================== 求解器 ====================

class SolverConfig(BaseModel):
    """Newton 求解器設定（預設值來自 NumericsConfig）"""

    model_config = ConfigDict(extra='ignore')

    max_newton_iters: int = Field(NumericsConfig.MAX_NEWTON_ITERS, ge=0)
    residual_tol: Optional[float] = Field(None, gt=0)
    line_search_factor: float = Field(NumericsConfig.LINE_SEARCH_FACTOR, gt=0, lt=1)
    min_step: float = Field(NumericsConfig.MIN_STEP, gt=0, le=1)
    picard_warmup_iters: int = Field(NumericsConfig.PICARD_WARMUP_ITERS, ge=0)
    c2_floor: Optional[float] = Field(None, gt=0)
    L_guard: float = Field(NumericsConfig.L_GUARD, gt=0, lt=1)
    linear_rtol: float = Field(NumericsConfig.LINEAR_RTOL, gt=0)
    direct_max_nodes: int = Field(NumericsConfig.DIRECT_SOLVE_MAX_NODES, gt=0)


class SolveReport(BaseModel):
    """求解報告"""

    converged: bool
    iterations: int
    picard_iterations: int = 0
    residual_history: List[float] = Field(default_factory=list)
    residual_tol: float
    final_residual: float
    max_L: float
    clamped_nodes: int = 0
    guard_nodes: int = 0
    guard_activations: int = 0
    uniformly_elliptic: bool = True
    wall_norms: Dict[str, float] = Field(default_factory=dict)
    linear_solver: str = 'direct'
    warnings: List[str] = Field(default_factory=list)


# ==================== 橢圓性驗證 ====================

class BarrierSpec(BaseModel):
    """
    障礙函數 b(ξ) = (δ/ĉ²)·β·|ξ-ξ₀|²/2

    make_barrier 的輸出保證滿足 |∇b| ≤ δ/ĉ 與 |∇²b| ≤ δ/ĉ²；
    直接建構時允許任意 β（含負值），供診斷用的構造使用。
    """

    model_config = ConfigDict(frozen=True)

    center: Tuple[float, ...]
    delta: float = Field(..., ge=0)
    c_hat: float = Field(..., gt=0)
    beta: float
    radius: Optional[float] = None

    @property
    def coefficient(self) -> float:
        return self.delta / self.c_hat ** 2 * self.beta

    def evaluate(self, xi: np.ndarray) -> np.ndarray:
        x = np.asarray(xi, dtype=float) - np.asarray(self.center)
        return 0.5 * self.coefficient * np.sum(x * x, axis=-1)

    def gradient(self, xi: np.ndarray) -> np.ndarray:
        return self.coefficient * (np.asarray(xi, dtype=float) - np.asarray(self.center))

    def sup_gradient(self, radius: float = None) -> float:
        radius = self.radius if radius is None else radius
        return abs(self.coefficient) * radius

    def sup_hessian(self) -> float:
        return abs(self.coefficient)

    def satisfies_bounds(self, radius: float = None, rel_tol: float = 1e-12) -> bool:
        grad_ok = self.sup_gradient(radius) <= self.delta / self.c_hat * (1 + rel_tol)
        hess_ok = self.sup_hessian() <= self.delta / self.c_hat ** 2 * (1 + rel_tol)
        return grad_ok and hess_ok


class Verdict(str, Enum):
    MAX_ON_BOUNDARY = 'MaxOnBoundary'
    UNIFORMLY_SUB_ELLIPTIC = 'UniformlySubElliptic'
    VIOLATION_CANDIDATE = 'ViolationCandidate'


class WallConditionReport(BaseModel):
    """牆面恆等式的數值範數（各量理論上為 0）"""

    wall_edge: WallEdge
    chi_n: float
    chi_nt: float
    chi_ntt: float
    c2_n: float
    chi_nnn: float
    slip_tol: float
    slip_violated: bool

    @property
    def norms(self) -> Dict[str, float]:
        return {'chi_n': self.chi_n, 'chi_nt': self.chi_nt, 'chi_ntt': self.chi_ntt,
                'c2_n': self.c2_n, 'chi_nnn': self.chi_nnn}


class EllipticityReport(BaseModel):
    """最大值原理驗證報告"""

    verdict: Verdict
    delta: float
    argmax_index: Tuple[int, ...]
    argmax_xi: Tuple[float, ...]
    max_F_interior: float
    max_F_boundary: float
    max_L2_interior: float
    max_L2: float
    tolerance: float
    k_ver: float
    residual_max: float
    residual_l2: float
    residual_tolerance: float
    wall_mode: Optional[str] = None
    wall_norms: Dict[str, Dict[str, float]] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)


class MaxPointDiagnostics(BaseModel):
    """最大值點一階條件診斷"""

    index: Tuple[int, ...]
    xi: Tuple[float, ...]
    L: float
    c: float
    chi_1: float
    b_1: float
    chi_11: float
    chi_11_formula: float
    chi_11_sonic_limit: float
    chi_1j: List[float]
    chi_jj_sum: float
    chi_jj_formula: float
    chi_jj_sonic_limit: float
    error_scale: float
    is_local_max: bool

    @property
    def chi_11_defect(self) -> float:
        return abs(self.chi_11 - self.chi_11_formula)

    @property
    def chi_jj_defect(self) -> float:
        return abs(self.chi_jj_sum - self.chi_jj_formula)


class DeltaSweepResult(BaseModel):
    """δ 掃描結果；empirical_delta_margin 為最大的非違反 δ"""

    deltas: List[float]
    verdicts: List[Verdict]
    empirical_delta_margin: Optional[float]
    reports: List[EllipticityReport] = Field(default_factory=list)


class ClassificationSummary(BaseModel):
    """整個場的型別統計"""

    counts: Dict[str, int]
    max_L: float
    min_L: float
    tol_L: float


class ValidationResult(BaseModel):
    """資料驗證結果"""
    success: bool
    valid_count: int = 0
    error_count: int = 0
    errors: List[dict] = Field(default_factory=list)

    def add_error(self, row_number: int, field: str, error: str, data: dict = None):
        self.error_count += 1
        self.errors.append({
            'row': row_number, 'field': field, 'error': error, 'data': data
        })

    def add_valid(self):
        self.valid_count += 1

    @property
    def summary(self) -> str:
        return f"驗證完成：成功 {self.valid_count} 筆，錯誤 {self.error_count} 筆"

    def get_error_summary(self, max_errors: int = 10) -> str:
        if not self.errors:
            return "無錯誤"
        lines = [f"發現 {self.error_count} 筆錯誤："]
        for i, err in enumerate(self.errors[:max_errors], 1):
            lines.append(f"  {i}. 第 {err['row']} 列，欄位 '{err['field']}'：{err['error']}")
        if len(self.errors) > max_errors:
            lines.append(f"  ... 還有 {len(self.errors) - max_errors} 筆錯誤")
        return '\n'.join(lines)
