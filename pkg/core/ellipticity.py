"""
橢圓性驗證 - 障礙函數、L²+b 的離散最大值原理、拋物型測度、最大值點診斷與牆面恆等式

所有函式都是對不可變場的純分析，不修改輸入。
"""

import logging
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from config import NumericsConfig
from .errors import PreconditionError
from .field import (central_derivatives, convert, derivatives, interior_slices,
                    normal_stencils, point_state, pseudo_mach_field, reflect_even,
                    residual_chi, residual_norms, slip_tolerance, third_derivative_scale)
from .gas import pseudo_mach, sound_speed_sq
from .models import (BarrierSpec, DeltaSweepResult, EllipticityReport, GasModel, GridSpec,
                     MaxPointDiagnostics, ScalarField, Variable, Verdict, WallConditionReport,
                     WallEdge)

logger = logging.getLogger(__name__)


def _as_chi(field: ScalarField) -> ScalarField:
    if field.variable == Variable.RESIDUAL:
        raise PreconditionError('殘差場無法做橢圓性分析')
    return field if field.variable == Variable.CHI else convert(field)


# ==================== 障礙函數 ====================

def barrier_center(domain: GridSpec) -> np.ndarray:
    """區域形心；只有一側為牆的軸，中心投影到牆線上（反射後障礙函數保持偶對稱）"""
    center = domain.centroid()
    extent = domain.extent()
    for axis in range(domain.ndim):
        walls = [e for e in domain.wall_edges if e.axis == axis]
        if len(walls) == 1:
            center[axis] = extent[axis][0] if walls[0].is_low else extent[axis][1]
    return center


def make_barrier(domain: GridSpec, c_hat: float, delta: float) -> BarrierSpec:
    """
    建立二次徑向障礙函數 b = (δ/ĉ²)·β·|ξ-ξ₀|²/2，β = min(1, ĉ/R)

    R 為中心到區域各角點的最大距離，於是 sup|∇b| ≤ δ/ĉ 與 sup|∇²b| ≤ δ/ĉ² 解析成立。
    """
    if not 0.0 <= delta <= 1.0:
        raise PreconditionError(f'δ 必須介於 0 與 1 之間，收到 {delta}')
    if not c_hat > 0:
        raise PreconditionError(f'ĉ 必須為正，收到 {c_hat}')
    center = barrier_center(domain)
    R = float(np.max(np.sqrt(np.sum((domain.corners() - center) ** 2, axis=-1))))
    beta = min(1.0, c_hat / R)
    return BarrierSpec(center=tuple(float(x) for x in center), delta=delta,
                       c_hat=c_hat, beta=beta, radius=R)


def auto_c_hat(field: ScalarField, gas: GasModel) -> float:
    """ĉ = 場上最大的 c 乘以 (1 + 1e-12)"""
    _, c2 = pseudo_mach_field(_as_chi(field), gas)
    return float(np.sqrt(np.max(c2))) * (1.0 + NumericsConfig.C_HAT_SLACK)


# ==================== 最大值原理 ====================

def _require_gamma(gas: GasModel):
    """橢圓性驗證需要 γ > -1"""
    if not gas.gamma > -1.0:
        raise PreconditionError(f'γ = {gas.gamma:g} ≤ -1，超出橢圓性驗證的適用範圍')


def _check_hypotheses(chi: ScalarField, gas: GasModel, barrier: BarrierSpec,
                      tol_L: float) -> Tuple[np.ndarray, np.ndarray]:
    _require_gamma(gas)
    L, c2 = pseudo_mach_field(chi, gas)
    over = L > 1.0 + tol_L
    if np.any(over):
        node = tuple(np.argwhere(over)[0])
        raise PreconditionError(f'L = {L[node]:.8f} > 1，場含雙曲型節點', node)
    c_limit = barrier.c_hat * (1.0 + NumericsConfig.C_HAT_SLACK)
    too_fast = np.sqrt(c2) > c_limit
    if np.any(too_fast):
        node = tuple(np.argwhere(too_fast)[0])
        raise PreconditionError(f'c = {np.sqrt(c2[node]):.12g} 超過 ĉ = {barrier.c_hat:.12g}', node)
    return L, c2


def _objective(chi: ScalarField, gas: GasModel, barrier: BarrierSpec) -> Tuple[np.ndarray, np.ndarray]:
    """全部節點上的 (F = L² + b, L²)"""
    L, _ = pseudo_mach_field(chi, gas)
    L2 = L ** 2
    return L2 + barrier.evaluate(chi.grid.mesh()), L2


def _comparison_tolerance(F: np.ndarray, grid: GridSpec, k_ver: float) -> float:
    """tol = k_ver·h²·max|∇²F|（中央差分估計）"""
    _, hess = central_derivatives(F, grid.spacing)
    scale = float(np.max(np.abs(hess))) if hess.size else 0.0
    return k_ver * grid.h_max ** 2 * scale


def _unreflect_index(index: Tuple[int, ...], reflections: List[Tuple[int, bool, int]]) -> Tuple[int, ...]:
    """反射後網格的節點索引映回原網格"""
    index = list(index)
    for axis, is_low, n in reflections:
        i = index[axis]
        if is_low:
            index[axis] = abs(i - (n - 1))
        else:
            index[axis] = i if i <= n - 1 else 2 * (n - 1) - i
    return tuple(index)


def verify_max_principle(field: ScalarField, gas: GasModel, barrier: BarrierSpec,
                         delta: Optional[float] = None,
                         k_ver: float = NumericsConfig.K_VER,
                         wall_mode: str = 'reflect',
                         tol_L: float = NumericsConfig.TOL_L) -> EllipticityReport:
    """
    檢查 F = L² + b 是否在區域內部取得最大值

    判定順序：閉區域上 L² ≤ 1-δ 為 UniformlySubElliptic（不加容差）；
    否則內部最大值 ≤ 邊界最大值 + tol 為 MaxOnBoundary；其餘為 ViolationCandidate。
    牆邊節點視為內部。wall_mode='reflect' 時先跨牆偶反射再做標準檢查，
    'interior' 時直接把牆邊節點計入內部。

    Raises:
        PreconditionError: γ ≤ -1，或 L > 1 + tol_L、c > ĉ 的節點
        ReflectionError: reflect 模式下牆面不滿足 slip
    """
    if wall_mode not in ('reflect', 'interior'):
        raise PreconditionError(f'未知的 wall_mode: {wall_mode}')
    chi = _as_chi(field)
    delta = barrier.delta if delta is None else delta
    grid = chi.grid
    _check_hypotheses(chi, gas, barrier, tol_L)

    work = chi
    reflections = []
    if wall_mode == 'reflect':
        for axis in range(grid.ndim):
            walls = [e for e in grid.wall_edges if e.axis == axis]
            if len(walls) == 1:
                reflections.append((axis, walls[0].is_low, work.grid.dims[axis]))
                work = reflect_even(work, walls[0])

    F, L2 = _objective(work, gas, barrier)
    inner = work.grid.equation_mask()
    outer = ~inner
    tol = _comparison_tolerance(F, work.grid, k_ver)

    max_int = float(np.max(F[inner])) if np.any(inner) else -np.inf
    max_bdry = float(np.max(F[outer]))
    max_L2_int = float(np.max(L2[inner])) if np.any(inner) else 0.0
    max_L2 = float(np.max(L2))

    if max_L2 <= 1.0 - delta:
        verdict = Verdict.UNIFORMLY_SUB_ELLIPTIC
    elif max_int <= max_bdry + tol:
        verdict = Verdict.MAX_ON_BOUNDARY
    else:
        verdict = Verdict.VIOLATION_CANDIDATE

    argmax = _unreflect_index(tuple(int(i) for i in np.unravel_index(np.argmax(F), F.shape)),
                              reflections)
    r_max, r_l2 = residual_norms(residual_chi(chi, gas))
    _, c2 = pseudo_mach_field(chi, gas)

    warnings = list(gas.exponent_warnings())
    wall_norms = {}
    for edge in grid.wall_edges:
        if grid.dims[edge.axis] < 5:
            warnings.append(f'邊界 {edge.value} 法向節點不足 5 個，略過牆面恆等式')
            continue
        wall_norms[edge.value] = check_wall_conditions(chi, gas, edge).norms
    if verdict == Verdict.VIOLATION_CANDIDATE:
        logger.warning(f'疑似違反最大值原理：內部 max F = {max_int:.8g} > 邊界 {max_bdry:.8g} + {tol:.2e}，'
                       f'殘差 ∞-範數 {r_max:.3e}')

    return EllipticityReport(
        verdict=verdict,
        delta=delta,
        argmax_index=argmax,
        argmax_xi=tuple(float(x) for x in grid.mesh()[argmax]),
        max_F_interior=max_int,
        max_F_boundary=max_bdry,
        max_L2_interior=max_L2_int,
        max_L2=max_L2,
        tolerance=tol,
        k_ver=k_ver,
        residual_max=r_max,
        residual_l2=r_l2,
        residual_tolerance=NumericsConfig.RESIDUAL_TOL_FACTOR * (1.0 + float(np.max(c2))),
        wall_mode=wall_mode if grid.wall_edges else None,
        wall_norms=wall_norms,
        warnings=warnings,
    )


def sweep_delta(field: ScalarField, gas: GasModel,
                deltas: Sequence[float] = NumericsConfig.DELTA_SWEEP,
                c_hat: Optional[float] = None,
                k_ver: float = NumericsConfig.K_VER,
                wall_mode: str = 'reflect',
                output_callback: Optional[Callable[[str], None]] = None) -> DeltaSweepResult:
    """
    對一組 δ 逐一驗證

    empirical_delta_margin 為判定未違反的最大 δ（經驗值，並非定理中的 δ）。
    """
    output = output_callback or logger.info
    chi = _as_chi(field)
    c_hat = auto_c_hat(chi, gas) if c_hat is None else c_hat
    reports = []
    for delta in sorted(deltas):
        barrier = make_barrier(chi.grid, c_hat, delta)
        report = verify_max_principle(chi, gas, barrier, delta, k_ver, wall_mode)
        output(f'δ = {delta:g}: {report.verdict.value}')
        reports.append(report)
    passing = [r.delta for r in reports if r.verdict != Verdict.VIOLATION_CANDIDATE]
    return DeltaSweepResult(
        deltas=[r.delta for r in reports],
        verdicts=[r.verdict for r in reports],
        empirical_delta_margin=max(passing) if passing else None,
        reports=reports,
    )


# ==================== 拋物型測度 ====================

def parabolic_measure(field: ScalarField, gas: GasModel,
                      band: float = NumericsConfig.TOL_L) -> float:
    """內部節點中 |L-1| ≤ band 的比例"""
    _require_gamma(gas)
    chi = _as_chi(field)
    grad, _ = derivatives(chi)
    c2 = sound_speed_sq(gas, chi.values[interior_slices(chi.grid)], grad)
    L = pseudo_mach(grad, c2)
    return float(np.mean(np.abs(np.asarray(L) - 1.0) <= band))


def parabolic_measure_family(fields: Iterable[ScalarField], gas: GasModel,
                             band: float = NumericsConfig.TOL_L) -> List[Tuple[float, float]]:
    """網格加密序列上的 (h, 比例)"""
    return [(f.grid.h_max, parabolic_measure(f, gas, band)) for f in fields]


# ==================== 最大值點診斷 ====================

def _is_local_max(F: np.ndarray, index: Tuple[int, ...]) -> bool:
    window = F[tuple(slice(i - 1, i + 2) for i in index)]
    return bool(F[index] >= np.max(window))


def _frame(g: np.ndarray) -> np.ndarray:
    """第一欄為 ∇χ 方向的正交矩陣"""
    e1 = g / np.linalg.norm(g)
    if len(g) == 1:
        return e1.reshape(1, 1)
    return np.array([[e1[0], -e1[1]], [e1[1], e1[0]]])


def maxpoint_diagnostics(field: ScalarField, gas: GasModel, barrier: BarrierSpec,
                         point: Tuple[int, ...], check_local_max: bool = True) -> MaxPointDiagnostics:
    """
    在 L²+b 的內部極大點檢查一階條件推得的恆等式

    旋轉座標使 ∇χ 對齊第一軸（χ₁ > 0，χⱼ = 0），回報：
        χ₁₁ 與 (-c·b₁ - (γ-1)L³) / (L(2 + (γ-1)L²))
        |χ₁ⱼ|（j > 1）
        Σ_{j>1} χⱼⱼ 與 (L²-1)χ₁₁ + L² - d
    以及 h²·(三階導數估計) 的差分誤差尺度。
    """
    _require_gamma(gas)
    chi = _as_chi(field)
    grid = chi.grid
    point = tuple(int(i) for i in point)
    if len(point) != grid.ndim or any(i < 1 or i > n - 2 for i, n in zip(point, grid.dims)):
        raise PreconditionError('最大值點必須是內部節點', point)

    F, _ = _objective(chi, gas, barrier)
    local_max = _is_local_max(F, point)
    if check_local_max and not local_max:
        raise PreconditionError(f'節點不是 L²+b 的局部極大（F = {F[point]:.10g}）', point)

    state = point_state(chi, gas, point)
    g = np.array(state.grad_chi)
    H = np.array(state.hess_chi)
    if not state.L > 0:
        raise PreconditionError('極大點上 L = 0，無法對齊座標', point)

    Q = _frame(g)
    H_rot = Q.T @ H @ Q
    xi = np.array(state.xi)
    b_rot = Q.T @ barrier.gradient(xi)
    d = grid.ndim
    L, c = state.L, float(np.sqrt(state.c2))
    gm1 = gas.gamma - 1.0

    chi_11 = float(H_rot[0, 0])
    chi_11_formula = (-c * b_rot[0] - gm1 * L ** 3) / (L * (2.0 + gm1 * L ** 2))
    chi_jj_sum = float(np.trace(H_rot) - H_rot[0, 0])
    chi_jj_formula = (L ** 2 - 1.0) * chi_11 + L ** 2 - d

    inner = tuple(i - 1 for i in point)
    third = third_derivative_scale(chi)
    error_scale = max(grid.h_max ** 2 * float(third[inner]), NumericsConfig.DIAGNOSTIC_ABS_FLOOR)

    return MaxPointDiagnostics(
        index=point,
        xi=state.xi,
        L=L,
        c=c,
        chi_1=float(np.linalg.norm(g)),
        b_1=float(b_rot[0]),
        chi_11=chi_11,
        chi_11_formula=float(chi_11_formula),
        chi_11_sonic_limit=(1.0 - gas.gamma) / (gas.gamma + 1.0),
        chi_1j=[abs(float(H_rot[0, j])) for j in range(1, d)],
        chi_jj_sum=chi_jj_sum,
        chi_jj_formula=float(chi_jj_formula),
        chi_jj_sonic_limit=1.0 - d,
        error_scale=error_scale,
        is_local_max=local_max,
    )


# ==================== 牆面恆等式 ====================

def _tangential_derivative(values: np.ndarray, spacing: float) -> np.ndarray:
    return np.gradient(values, spacing, edge_order=2)


def check_wall_conditions(field: ScalarField, gas: GasModel, wall_edge: WallEdge) -> WallConditionReport:
    """
    牆上 slip 及其切向導數推得的恆等式

    χ_n、χ_nt、χ_ntt、(c²)_n、χ_nnn 在牆上理論上皆為 0；離散解應為 O(h²)。

    Raises:
        PreconditionError: 牆法向節點少於 5 個，或 γ ≤ -1
    """
    _require_gamma(gas)
    edge = WallEdge(wall_edge)
    chi = _as_chi(field)
    grid = chi.grid
    if edge.axis >= grid.ndim:
        raise PreconditionError(f'{grid.ndim} 維網格不存在邊界 {edge.value}')
    h = grid.spacing
    first, _, third = normal_stencils(chi.values, h, edge)

    _, c2 = pseudo_mach_field(chi, gas)
    c2_n, _, _ = normal_stencils(c2, h, edge)

    if grid.ndim == 2:
        t_axis = 1 - edge.axis
        chi_nt = _tangential_derivative(first, h[t_axis])
        chi_ntt = _tangential_derivative(chi_nt, h[t_axis])
        nt, ntt = float(np.max(np.abs(chi_nt))), float(np.max(np.abs(chi_ntt)))
    else:
        nt = ntt = 0.0

    chi_n = float(np.max(np.abs(first)))
    tol = slip_tolerance(chi, edge)
    if chi_n > tol:
        logger.warning(f'邊界 {edge.value} 不滿足 slip：max|χ_n| = {chi_n:.3e} > {tol:.3e}')
    return WallConditionReport(
        wall_edge=edge,
        chi_n=chi_n,
        chi_nt=nt,
        chi_ntt=ntt,
        c2_n=float(np.max(np.abs(c2_n))),
        chi_nnn=float(np.max(np.abs(third))),
        slip_tol=tol,
        slip_violated=chi_n > tol,
    )


def observed_order(errors: Sequence[float], spacings: Sequence[float]) -> float:
    """log(誤差) 對 log(h) 的最小平方斜率"""
    errors = np.asarray(errors, dtype=float)
    spacings = np.asarray(spacings, dtype=float)
    if len(errors) < 2 or len(errors) != len(spacings):
        raise PreconditionError('計算收斂階數至少需要兩組對應的誤差與網格間距')
    if np.any(errors <= 0) or np.any(spacings <= 0):
        raise PreconditionError('誤差與網格間距必須為正')
    slope, _ = np.polyfit(np.log(spacings), np.log(errors), 1)
    return float(slope)
