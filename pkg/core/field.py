"""
結構化網格純量場 - 有限差分導數、χ/ψ 方程殘差、變數轉換、對稱變換與牆面偶反射

節點陣列以 indexing='ij' 排列：values[i, j] 位於 ξ = origin + (i·h1, j·h2)。
內部導數一律使用二階中央差分；牆邊節點以鏡射鬼點（χ_ghost = χ_mirror）補齊模板。
"""

import logging
from typing import NamedTuple, Optional, Tuple

import numpy as np

from config import NumericsConfig
from .errors import InvalidStateError, PreconditionError, ReflectionError
from .gas import classify_L, pseudo_mach, sound_speed_sq_unchecked
from .models import (ClassificationSummary, GasModel, GridSpec, PointState, Rotate, Scale,
                     ScalarField, Translate, TransformOp, TypeTag, Variable, WallEdge,
                     rotate_edge)

logger = logging.getLogger(__name__)


class Derivatives(NamedTuple):
    """內部節點的梯度（... , d）與 Hessian（... , d, d）"""
    grad: np.ndarray
    hess: np.ndarray


# ==================== 差分模板 ====================

def _shifted(u: np.ndarray, offsets: Tuple[int, ...]) -> np.ndarray:
    """取出內部區域平移 offsets 後的子陣列"""
    index = tuple(slice(1 + o, n - 1 + o) for o, n in zip(offsets, u.shape))
    return u[index]


def _unit(d: int, k: int, sign: int = 1) -> Tuple[int, ...]:
    return tuple(sign if i == k else 0 for i in range(d))


def central_derivatives(u: np.ndarray, spacing: Tuple[float, ...]) -> Derivatives:
    """
    二階中央差分（對二次多項式精確）

    ∂ᵢ 用 (u₊ - u₋)/2h，∂ᵢᵢ 用 (u₊ - 2u + u₋)/h²，∂ᵢⱼ 用四點交叉模板。
    結果只涵蓋 u 的內部節點。
    """
    d = u.ndim
    center = _shifted(u, (0,) * d)
    grad = np.empty(center.shape + (d,))
    hess = np.empty(center.shape + (d, d))
    for k in range(d):
        hk = spacing[k]
        plus, minus = _shifted(u, _unit(d, k, 1)), _shifted(u, _unit(d, k, -1))
        grad[..., k] = (plus - minus) / (2.0 * hk)
        hess[..., k, k] = (plus - 2.0 * center + minus) / hk ** 2
        for m in range(k + 1, d):
            hm = spacing[m]
            pp = _shifted(u, tuple(1 if i in (k, m) else 0 for i in range(d)))
            mm = _shifted(u, tuple(-1 if i in (k, m) else 0 for i in range(d)))
            pm = _shifted(u, tuple(1 if i == k else (-1 if i == m else 0) for i in range(d)))
            mp = _shifted(u, tuple(-1 if i == k else (1 if i == m else 0) for i in range(d)))
            mixed = (pp - pm - mp + mm) / (4.0 * hk * hm)
            hess[..., k, m] = mixed
            hess[..., m, k] = mixed
    return Derivatives(grad, hess)


def pad_mirror(values: np.ndarray) -> np.ndarray:
    """每個方向補一層鏡射鬼點；非牆邊的鬼點不參與任何方程"""
    return np.pad(values, 1, mode='reflect')


def padded_coords(grid: GridSpec) -> np.ndarray:
    """含鬼點的座標網格，形狀 (n+2, ...) + (d,)"""
    axes = [grid.origin[k] + grid.spacing[k] * np.arange(-1, grid.dims[k] + 1)
            for k in range(grid.ndim)]
    return np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)


def nodal_derivatives(field: ScalarField) -> Derivatives:
    """全部節點上的鏡射模板導數（非牆邊界節點的值無意義）"""
    return central_derivatives(pad_mirror(field.values), field.grid.spacing)


def derivatives(field: ScalarField) -> Derivatives:
    """內部節點的 ∇χ 與 ∇²χ（二階中央差分）"""
    return central_derivatives(field.values, field.grid.spacing)


def gradient_full(field: ScalarField) -> np.ndarray:
    """
    全部節點的梯度

    內部為中央差分；非牆邊界用二階單側差分；牆邊法向分量為 0（鏡射）。
    """
    grid = field.grid
    parts = np.gradient(field.values, *grid.spacing, edge_order=2)
    if grid.ndim == 1:
        parts = [parts]
    grad = np.stack(parts, axis=-1)
    for edge in grid.wall_edges:
        index = [slice(None)] * grid.ndim
        index[edge.axis] = 0 if edge.is_low else -1
        grad[tuple(index) + (edge.axis,)] = 0.0
    return grad


def normal_stencils(values: np.ndarray, spacing: Tuple[float, ...],
                    edge: WallEdge) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    邊界上的單側法向差分（沿內法向）

    Returns:
        (一階導數 O(h²), 二階導數 O(h), 三階導數 O(h²))，各為沿邊的陣列
    """
    edge = WallEdge(edge)
    axis = edge.axis
    n = values.shape[axis]
    h = spacing[axis]
    u = np.moveaxis(values, axis, 0)
    if not edge.is_low:
        u = u[::-1]
    if n < 5:
        raise PreconditionError(f'邊界 {edge.value} 法向節點數 {n} < 5，無法使用單側三階模板')
    first = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
    second = (u[0] - 2.0 * u[1] + u[2]) / h ** 2
    third = (-5.0 * u[0] + 18.0 * u[1] - 24.0 * u[2] + 14.0 * u[3] - 3.0 * u[4]) / (2.0 * h ** 3)
    return first, second, third


# ==================== 殘差 ====================

def _equation_residual(grad: np.ndarray, hess: np.ndarray, c2: np.ndarray, d: int) -> np.ndarray:
    """R = c²Δχ - Σχᵢχⱼχᵢⱼ - |∇χ|² + d·c²"""
    laplacian = np.trace(hess, axis1=-2, axis2=-1)
    convective = np.einsum('...i,...j,...ij->...', grad, grad, hess)
    speed2 = np.sum(grad * grad, axis=-1)
    return c2 * laplacian - convective - speed2 + d * c2


def _checked_c2(gas: GasModel, chi: np.ndarray, grad: np.ndarray, mask: np.ndarray) -> np.ndarray:
    c2 = sound_speed_sq_unchecked(gas, chi, grad)
    bad = mask & ~(c2 > 0)
    if np.any(bad):
        node = tuple(np.argwhere(bad)[0])
        raise InvalidStateError(f'節點上聲速平方非正（c² = {c2[node]:.6g}）', node)
    return c2


def residual_chi(field: ScalarField, gas: GasModel) -> ScalarField:
    """
    χ 方程殘差 R := c²Δχ - Σχᵢχⱼχᵢⱼ - |∇χ|² + d·c²

    在內部節點與牆邊節點（鏡射鬼點）求值；非牆邊界節點不含方程，其值為 0。

    Raises:
        InvalidStateError: 任一求值節點 c² ≤ 0（例外帶有節點索引）
    """
    if field.variable != Variable.CHI:
        raise PreconditionError(f'residual_chi 需要 Chi 變數，收到 {field.variable.value}')
    grid = field.grid
    grad, hess = nodal_derivatives(field)
    mask = grid.equation_mask()
    c2 = _checked_c2(gas, field.values, grad, mask)
    R = np.where(mask, _equation_residual(grad, hess, c2, grid.ndim), 0.0)
    return field.with_values(R, Variable.RESIDUAL)


def residual_psi(field: ScalarField, gas: GasModel) -> ScalarField:
    """
    ψ 方程殘差 R := c²Δψ - Σ(ψᵢ-ξⁱ)(ψⱼ-ξʲ)ψᵢⱼ

    c² 經由 χ = ψ - |ξ|²/2 與 ∇χ = ∇ψ - ξ 計算；牆邊鬼點以 χ 鏡射後再換回 ψ。
    """
    if field.variable != Variable.PSI:
        raise PreconditionError(f'residual_psi 需要 Psi 變數，收到 {field.variable.value}')
    grid = field.grid
    xi_pad = padded_coords(grid)
    chi_pad = pad_mirror(convert(field).values)
    psi_pad = chi_pad + 0.5 * np.sum(xi_pad ** 2, axis=-1)
    grad_psi, hess_psi = central_derivatives(psi_pad, grid.spacing)

    xi = grid.mesh()
    grad_chi = grad_psi - xi
    chi = field.values - 0.5 * np.sum(xi ** 2, axis=-1)
    mask = grid.equation_mask()
    c2 = _checked_c2(gas, chi, grad_chi, mask)

    laplacian = np.trace(hess_psi, axis1=-2, axis2=-1)
    convective = np.einsum('...i,...j,...ij->...', grad_chi, grad_chi, hess_psi)
    R = np.where(mask, c2 * laplacian - convective, 0.0)
    return field.with_values(R, Variable.RESIDUAL)


def residual_norms(residual: ScalarField) -> Tuple[float, float]:
    """殘差在方程節點上的 (∞-範數, 離散 L²-範數)"""
    mask = residual.grid.equation_mask()
    vals = residual.values[mask]
    if vals.size == 0:
        return 0.0, 0.0
    cell = float(np.prod(residual.grid.spacing))
    return float(np.max(np.abs(vals))), float(np.sqrt(np.sum(vals ** 2) * cell))


# ==================== 變數轉換 ====================

def convert(field: ScalarField) -> ScalarField:
    """χ ↔ ψ，χ = ψ - |ξ|²/2"""
    half_r2 = 0.5 * np.sum(field.grid.mesh() ** 2, axis=-1)
    if field.variable == Variable.CHI:
        return field.with_values(field.values + half_r2, Variable.PSI)
    if field.variable == Variable.PSI:
        return field.with_values(field.values - half_r2, Variable.CHI)
    raise PreconditionError('殘差場無法進行 χ/ψ 轉換')


def velocity_field(field: ScalarField) -> np.ndarray:
    """內部節點的流速 v = ∇ψ = ∇χ + ξ"""
    chi = field if field.variable == Variable.CHI else convert(field)
    grad, _ = derivatives(chi)
    xi = field.grid.mesh()[interior_slices(field.grid)]
    return grad + xi


# ==================== 逐點求值與分類 ====================

def point_state(field: ScalarField, gas: GasModel, index: Tuple[int, ...],
                tol_L: float = NumericsConfig.TOL_L) -> PointState:
    """內部節點的 χ、∇χ、∇²χ、c²、L 與型別"""
    grid = field.grid
    index = tuple(int(i) for i in index)
    if any(i < 1 or i > n - 2 for i, n in zip(index, grid.dims)):
        raise PreconditionError('point_state 僅適用於內部節點', index)
    grad, hess = derivatives(field)
    inner = tuple(i - 1 for i in index)
    g, H = grad[inner], hess[inner]
    chi = float(field.values[index])
    c2 = float(sound_speed_sq_unchecked(gas, chi, g))
    if not c2 > 0:
        raise InvalidStateError(f'聲速平方非正（c² = {c2:.6g}）', index)
    L = float(pseudo_mach(g, c2))
    return PointState(
        xi=tuple(float(x) for x in grid.mesh()[index]),
        chi=chi,
        grad_chi=tuple(float(x) for x in g),
        hess_chi=tuple(tuple(float(x) for x in row) for row in 0.5 * (H + H.T)),
        c2=c2,
        L=L,
        tag=classify_L(L, tol_L),
    )


def pseudo_mach_field(field: ScalarField, gas: GasModel) -> Tuple[np.ndarray, np.ndarray]:
    """全部節點的 (L, c²)"""
    chi = field if field.variable == Variable.CHI else convert(field)
    grad = gradient_full(chi)
    mask = np.ones(chi.grid.dims, dtype=bool)
    c2 = _checked_c2(gas, chi.values, grad, mask)
    return pseudo_mach(grad, c2), c2


def classify_field(field: ScalarField, gas: GasModel,
                   tol_L: float = NumericsConfig.TOL_L) -> Tuple[np.ndarray, np.ndarray, ClassificationSummary]:
    """逐節點計算 L 與型別，並統計各型別節點數"""
    L, _ = pseudo_mach_field(field, gas)
    tags = classify_L(L, tol_L)
    counts = {tag.value: int(np.sum(tags == tag.value)) for tag in TypeTag}
    summary = ClassificationSummary(counts=counts, max_L=float(np.max(L)),
                                    min_L=float(np.min(L)), tol_L=tol_L)
    return L, tags, summary


# ==================== 對稱變換 ====================

def _rotate_quarter(field: ScalarField) -> ScalarField:
    """逆時針旋轉 90°：χ̃(ξ) = χ(Qᵀξ)，Q = [[0,-1],[1,0]]"""
    grid = field.grid
    (o1, o2), (h1, h2), (n1, n2) = grid.origin, grid.spacing, grid.dims
    new_grid = GridSpec(
        origin=(-(o2 + (n2 - 1) * h2), o1),
        spacing=(h2, h1),
        dims=(n2, n1),
        wall_edges=tuple(rotate_edge(e) for e in grid.wall_edges),
    )
    return field.with_values(np.rot90(field.values, 1), grid=new_grid)


def transform(field: ScalarField, op: TransformOp) -> ScalarField:
    """
    對稱變換（只變換網格中繼資料，不做內插）

    translate: χ̃(ξ) = χ(ξ - v0)
    rotate:    χ̃(ξ) = χ(Qᵀξ)，Q 為 90° 的整數倍
    scale:     χ̃(ξ) = s²χ(ξ/s)
    殘差場依相同規則變換（縮放時 R̃(ξ) = s²R(ξ/s)）。
    """
    grid = field.grid
    if isinstance(op, Translate):
        if len(op.v0) != grid.ndim:
            raise PreconditionError(f'平移向量維度 {len(op.v0)} 與網格 {grid.ndim} 不符')
        if field.variable == Variable.PSI:
            return convert(transform(convert(field), op))
        new_grid = grid.model_copy(update={
            'origin': tuple(o + v for o, v in zip(grid.origin, op.v0))})
        return field.with_values(field.values, grid=new_grid)

    if isinstance(op, Rotate):
        if grid.ndim != 2:
            raise PreconditionError('網格旋轉僅支援 d=2')
        result = field
        for _ in range(op.quarter_turns % 4):
            result = _rotate_quarter(result)
        return result

    if isinstance(op, Scale):
        s = op.s
        new_grid = grid.model_copy(update={
            'origin': tuple(s * o for o in grid.origin),
            'spacing': tuple(s * h for h in grid.spacing)})
        return field.with_values(s ** 2 * field.values, grid=new_grid)

    raise PreconditionError(f'未知的變換: {op!r}')


# ==================== 牆面偶反射 ====================

def slip_tolerance(field: ScalarField, edge: WallEdge,
                   factor: float = NumericsConfig.SLIP_TOL_FACTOR) -> float:
    """slip 檢查容差：factor·h²·(1 + max|χ_nn|)"""
    edge = WallEdge(edge)
    h = field.grid.spacing[edge.axis]
    u = np.moveaxis(field.values, edge.axis, 0)
    if not edge.is_low:
        u = u[::-1]
    chi_nn = (u[0] - 2.0 * u[1] + u[2]) / h ** 2
    return factor * h ** 2 * (1.0 + float(np.max(np.abs(chi_nn))))


def slip_defect(field: ScalarField, edge: WallEdge) -> float:
    """牆邊上 |χ_n| 的最大值（二階單側差分）"""
    edge = WallEdge(edge)
    h = field.grid.spacing[edge.axis]
    u = np.moveaxis(field.values, edge.axis, 0)
    if not edge.is_low:
        u = u[::-1]
    first = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
    return float(np.max(np.abs(first)))


def _opposite(edge: WallEdge) -> WallEdge:
    return {WallEdge.LEFT: WallEdge.RIGHT, WallEdge.RIGHT: WallEdge.LEFT,
            WallEdge.BOTTOM: WallEdge.TOP, WallEdge.TOP: WallEdge.BOTTOM}[edge]


def reflect_even(field: ScalarField, wall_edge: WallEdge,
                 slip_tol: Optional[float] = None) -> ScalarField:
    """
    跨牆偶反射到加倍的區域

    χ(ξ_w - s, ξ′) = χ(ξ_w + s, ξ′)；牆上節點只出現一次，新網格有 2n-1 個節點。
    反射後該牆成為內部線；對邊若為牆，鏡像後兩側皆為牆。

    Raises:
        ReflectionError: 牆上 |χ_n| 超過容差
    """
    edge = WallEdge(wall_edge)
    grid = field.grid
    if edge.axis >= grid.ndim:
        raise PreconditionError(f'{grid.ndim} 維網格不存在邊界 {edge.value}')
    if edge not in grid.wall_edges:
        raise PreconditionError(f'邊界 {edge.value} 不是牆邊，無法反射')
    if field.variable == Variable.CHI:
        tol = slip_tolerance(field, edge) if slip_tol is None else slip_tol
        defect = slip_defect(field, edge)
        if defect > tol:
            raise ReflectionError(f'邊界 {edge.value} 不滿足 slip 條件：max|χ_n| = {defect:.3e} > {tol:.3e}')

    axis = edge.axis
    n, h = grid.dims[axis], grid.spacing[axis]
    values = field.values
    if edge.is_low:
        mirrored = np.flip(np.take(values, range(1, n), axis=axis), axis=axis)
        new_values = np.concatenate([mirrored, values], axis=axis)
        new_origin_axis = grid.origin[axis] - (n - 1) * h
    else:
        mirrored = np.flip(np.take(values, range(0, n - 1), axis=axis), axis=axis)
        new_values = np.concatenate([values, mirrored], axis=axis)
        new_origin_axis = grid.origin[axis]

    walls = [e for e in grid.wall_edges if e != edge]
    if _opposite(edge) in grid.wall_edges:
        walls.append(edge)
    origin = list(grid.origin)
    origin[axis] = new_origin_axis
    dims = list(grid.dims)
    dims[axis] = 2 * n - 1
    new_grid = GridSpec(origin=tuple(origin), spacing=grid.spacing, dims=tuple(dims),
                        wall_edges=tuple(walls))
    logger.debug(f'偶反射 {edge.value}: {grid.dims} -> {new_grid.dims}')
    return field.with_values(new_values, grid=new_grid)


def restrict_half(field: ScalarField, wall_edge: WallEdge) -> ScalarField:
    """reflect_even 的反運算：取回牆所在的一半並恢復牆邊"""
    edge = WallEdge(wall_edge)
    grid = field.grid
    axis = edge.axis
    N = grid.dims[axis]
    if N % 2 == 0:
        raise PreconditionError(f'軸 {axis} 的節點數 {N} 為偶數，無法對半')
    n = (N + 1) // 2
    if edge.is_low:
        values = np.take(field.values, range(n - 1, N), axis=axis)
        origin_axis = grid.origin[axis] + (n - 1) * grid.spacing[axis]
    else:
        values = np.take(field.values, range(0, n), axis=axis)
        origin_axis = grid.origin[axis]
    walls = set(grid.wall_edges) | {edge}
    origin = list(grid.origin)
    origin[axis] = origin_axis
    dims = list(grid.dims)
    dims[axis] = n
    new_grid = GridSpec(origin=tuple(origin), spacing=grid.spacing, dims=tuple(dims),
                        wall_edges=tuple(walls))
    return field.with_values(values, grid=new_grid)


def interior_slices(grid: GridSpec) -> Tuple[slice, ...]:
    return tuple(slice(1, -1) for _ in range(grid.ndim))


def sample_function(grid: GridSpec, func, variable: Variable = Variable.CHI) -> ScalarField:
    """以 func(ξ 陣列) 在網格節點上取值建立場"""
    return ScalarField(grid=grid, values=func(grid.mesh()), variable=variable)


def third_derivative_scale(field: ScalarField) -> np.ndarray:
    """內部節點三階導數大小的估計（中央 Hessian 的再差分）"""
    _, hess = derivatives(field)
    d = field.grid.ndim
    if min(hess.shape[:d]) < 3:
        return np.zeros(hess.shape[:d])
    scale = np.zeros(hess.shape[:d])
    for i in range(d):
        for j in range(d):
            parts = np.gradient(hess[..., i, j], *field.grid.spacing, edge_order=1)
            if d == 1:
                parts = [parts]
            for part in parts:
                scale = np.maximum(scale, np.abs(part))
    return scale
