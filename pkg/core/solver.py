"""
Dirichlet 問題求解器 - 矩形區域上的 χ 方程，牆邊以鏡射鬼點施加 slip 條件

流程：
1. 初始猜測：ψ = χ + |ξ|²/2 邊界值的 Coons（transfinite 雙線性）插值
2. Picard 暖身：凍結 c² 與 ∇χ，只解二階部分的線性化方程
3. Newton：9 點模板的解析 Jacobian（含 ∂c²/∂χ 與 ∂c²/∂∇χ），殘差 ∞-範數回溯線搜尋

未知量為方程節點（內部節點加牆邊節點）；非牆邊界節點固定為邊界資料。
"""

import logging
from typing import Callable, List, NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from config import NumericsConfig
from .errors import DegenerateStateError, PreconditionError
from .field import _equation_residual, central_derivatives, pad_mirror, slip_defect
from .gas import sound_speed_sq_unchecked
from .models import GasModel, GridSpec, ScalarField, SolveReport, SolverConfig, Variable, WallEdge

logger = logging.getLogger(__name__)


class _State(NamedTuple):
    """一個迭代點的所有求值結果（僅方程節點）"""
    F: np.ndarray
    norm: float
    grad: np.ndarray
    hess: np.ndarray
    c2: np.ndarray
    clamped: np.ndarray
    L: np.ndarray

    @property
    def max_L(self) -> float:
        return float(np.max(self.L)) if self.L.size else 0.0


# ==================== 初始猜測 ====================

def _axis_weights(grid: GridSpec, axis: int) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """沿某軸的插值權重；缺一側資料時改為由另一側常數延拓，兩側皆為牆則回傳 None"""
    lo_edge, hi_edge = [e for e in WallEdge if e.axis == axis]
    has_lo = lo_edge not in grid.wall_edges
    has_hi = hi_edge not in grid.wall_edges
    s = np.linspace(0.0, 1.0, grid.dims[axis])
    if has_lo and has_hi:
        return 1.0 - s, s
    if has_lo:
        return np.ones_like(s), np.zeros_like(s)
    if has_hi:
        return np.zeros_like(s), np.ones_like(s)
    return None


def coons_initial_guess(grid: GridSpec, boundary: np.ndarray) -> np.ndarray:
    """
    以 ψ = χ + |ξ|²/2 的邊界值做 transfinite 雙線性插值，再換回 χ

    均勻流的 ψ 為線性函數，此猜測即為精確解。
    """
    half_r2 = 0.5 * np.sum(grid.mesh() ** 2, axis=-1)
    psi = boundary + half_r2

    if grid.ndim == 1:
        w_lo, w_hi = _axis_weights(grid, 0)
        guess = w_lo * psi[0] + w_hi * psi[-1]
        return guess - half_r2

    wx = _axis_weights(grid, 0)
    wy = _axis_weights(grid, 1)
    P0 = P1 = None
    if wx is not None:
        P0 = np.outer(wx[0], np.ones(grid.dims[1])) * psi[0][None, :] \
            + np.outer(wx[1], np.ones(grid.dims[1])) * psi[-1][None, :]
    if wy is not None:
        P1 = psi[:, 0][:, None] * wy[0][None, :] + psi[:, -1][:, None] * wy[1][None, :]
    if P0 is not None and P1 is not None:
        P01 = (np.outer(wx[0], wy[0]) * psi[0, 0] + np.outer(wx[0], wy[1]) * psi[0, -1]
               + np.outer(wx[1], wy[0]) * psi[-1, 0] + np.outer(wx[1], wy[1]) * psi[-1, -1])
        guess = P0 + P1 - P01
    else:
        guess = P0 if P0 is not None else P1
    return guess - half_r2


# ==================== 求值與 Jacobian ====================

class _Problem:
    """固定網格、氣體與遮罩後的離散問題"""

    def __init__(self, grid: GridSpec, gas: GasModel, c2_floor: float):
        self.grid = grid
        self.gas = gas
        self.c2_floor = c2_floor
        self.mask = grid.equation_mask()
        self.eq_nodes = np.argwhere(self.mask)
        self.numbering = np.full(grid.dims, -1, dtype=int)
        self.numbering[self.mask] = np.arange(len(self.eq_nodes))

    @property
    def size(self) -> int:
        return len(self.eq_nodes)

    def evaluate(self, u: np.ndarray) -> _State:
        grid, mask = self.grid, self.mask
        grad, hess = central_derivatives(pad_mirror(u), grid.spacing)
        raw = sound_speed_sq_unchecked(self.gas, u, grad)
        c2 = np.maximum(raw, self.c2_floor)
        R = _equation_residual(grad, hess, c2, grid.ndim)
        F = R[mask]
        g = grad[mask]
        L = np.sqrt(np.sum(g * g, axis=-1) / c2[mask])
        norm = float(np.max(np.abs(F))) if F.size else 0.0
        return _State(F=F, norm=norm, grad=g, hess=hess[mask], c2=c2[mask],
                      clamped=(raw[mask] < self.c2_floor), L=L)

    def _stencil(self, state: _State, newton: bool) -> List[Tuple[Tuple[int, ...], np.ndarray]]:
        """每個方程節點對 9 點模板各偏移的線性化係數"""
        d = self.grid.ndim
        h = self.grid.spacing
        g, H, c2 = state.grad, state.hess, state.c2
        N = len(c2)
        C = c2[:, None, None] * np.eye(d)[None] - g[:, :, None] * g[:, None, :]

        if newton:
            lapd = np.trace(H, axis1=-2, axis2=-1) + d
            active = (~state.clamped).astype(float)
            gm1 = 0.0 if self.gas.is_isothermal else self.gas.gamma - 1.0
            a = -gm1 * lapd * active
            b = (-gm1 * g * (lapd * active)[:, None]
                 - 2.0 * np.einsum('nj,nkj->nk', g, H) - 2.0 * g)
        else:
            a = np.zeros(N)
            b = np.zeros((N, d))

        zero = (0,) * d
        center = a.copy()
        entries = []
        for k in range(d):
            center += -2.0 * C[:, k, k] / h[k] ** 2
            plus = tuple(1 if i == k else 0 for i in range(d))
            minus = tuple(-1 if i == k else 0 for i in range(d))
            entries.append((plus, b[:, k] / (2.0 * h[k]) + C[:, k, k] / h[k] ** 2))
            entries.append((minus, -b[:, k] / (2.0 * h[k]) + C[:, k, k] / h[k] ** 2))
            for m in range(k + 1, d):
                for sk in (1, -1):
                    for sm in (1, -1):
                        offset = tuple(sk if i == k else (sm if i == m else 0) for i in range(d))
                        weight = 2.0 * C[:, k, m] * sk * sm / (4.0 * h[k] * h[m])
                        entries.append((offset, weight))
        entries.insert(0, (zero, center))
        return entries

    def matrix(self, state: _State, newton: bool = True) -> sparse.csr_matrix:
        """
        組裝稀疏矩陣

        牆外的鄰點映射到鏡像節點；Dirichlet 欄位直接捨去；重複座標在轉 CSR 時相加。
        """
        dims = np.array(self.grid.dims)
        N = self.size
        rows, cols, vals = [], [], []
        for offset, weight in self._stencil(state, newton):
            nbr = self.eq_nodes + np.array(offset)
            nbr = np.where(nbr < 0, -nbr, nbr)
            nbr = np.where(nbr > dims - 1, 2 * (dims - 1) - nbr, nbr)
            col = self.numbering[tuple(nbr.T)]
            keep = col >= 0
            rows.append(np.arange(N)[keep])
            cols.append(col[keep])
            vals.append(weight[keep])
        return sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(N, N)).tocsr()


def _linear_solve(J: sparse.csr_matrix, rhs: np.ndarray, config: SolverConfig) -> Tuple[np.ndarray, str]:
    """小規模用直接分解，大規模用 ILU 前置條件的 GMRES"""
    if J.shape[0] <= config.direct_max_nodes:
        return spla.spsolve(J.tocsc(), rhs), 'direct'
    ilu = spla.spilu(J.tocsc(), drop_tol=1e-5, fill_factor=20)
    M = spla.LinearOperator(J.shape, ilu.solve)
    x, info = spla.gmres(J, rhs, M=M, rtol=config.linear_rtol, atol=0.0, restart=50, maxiter=200)
    if info != 0:
        logger.warning(f'GMRES 未在迭代上限內達到 rtol={config.linear_rtol}（info={info}）')
    return x, 'gmres+ilu'


# ==================== 主流程 ====================

def _boundary_values(grid: GridSpec, boundary: Union[ScalarField, np.ndarray]) -> np.ndarray:
    if isinstance(boundary, ScalarField):
        if boundary.grid.dims != grid.dims:
            raise PreconditionError(f'邊界資料網格 {boundary.grid.dims} 與求解網格 {grid.dims} 不符')
        chi = boundary if boundary.variable == Variable.CHI else None
        if chi is None:
            raise PreconditionError('邊界資料必須是 Chi 變數')
        values = np.array(chi.values, dtype=float)
    else:
        values = np.array(boundary, dtype=float).reshape(grid.dims)
    dirichlet = grid.dirichlet_mask()
    if not np.all(np.isfinite(values[dirichlet])):
        raise PreconditionError('非牆邊界節點的邊界資料必須為有限數')
    return values


def solve_dirichlet(grid: GridSpec, boundary: Union[ScalarField, np.ndarray], gas: GasModel,
                    config: Optional[SolverConfig] = None,
                    initial_guess: Optional[ScalarField] = None,
                    output_callback: Optional[Callable[[str], None]] = None
                    ) -> Tuple[ScalarField, SolveReport]:
    """
    解 χ 方程的 Dirichlet 問題

    Args:
        grid: 求解網格（wall_edges 上施加 slip）
        boundary: 在所有非牆邊界節點上的 χ 值（ScalarField 或 dims 形狀的陣列，其餘節點忽略）
        config: 求解設定，None 時使用預設
        initial_guess: 初始猜測；其 Dirichlet 節點會被邊界資料覆蓋
        output_callback: 進度輸出

    Returns:
        (χ 場, 求解報告)；未收斂時回傳殘差最小的迭代點

    Raises:
        DegenerateStateError: 結束時超過 1% 的方程節點 c² 仍被截斷
    """
    output = output_callback or logger.info
    config = config or SolverConfig()
    if not np.any(grid.dirichlet_mask()):
        raise PreconditionError('至少需要一條非牆邊界以提供 Dirichlet 資料')

    values = _boundary_values(grid, boundary)
    dirichlet = grid.dirichlet_mask()
    if initial_guess is not None:
        if initial_guess.grid.dims != grid.dims:
            raise PreconditionError('初始猜測的網格與求解網格不符')
        u = np.array(initial_guess.values if initial_guess.variable == Variable.CHI
                     else initial_guess.values - 0.5 * np.sum(grid.mesh() ** 2, axis=-1))
    else:
        u = coons_initial_guess(grid, np.where(dirichlet, values, 0.0))
    u[dirichlet] = values[dirichlet]

    # 由初始猜測估計 ĉ² 與殘差容差
    grad0, _ = central_derivatives(pad_mirror(u), grid.spacing)
    c2_est = float(np.max(np.maximum(sound_speed_sq_unchecked(gas, u, grad0), 0.0)))
    c2_floor = config.c2_floor or NumericsConfig.C2_FLOOR_FACTOR * max(c2_est, np.finfo(float).tiny)
    tol = config.residual_tol or NumericsConfig.RESIDUAL_TOL_FACTOR * (1.0 + c2_est)

    problem = _Problem(grid, gas, c2_floor)
    state = problem.evaluate(u)
    history = [state.norm]
    output('=' * 50)
    output(f'開始求解：網格 {grid.dims}，未知數 {problem.size}，γ={gas.gamma}')
    output(f'初始殘差 {state.norm:.3e}，容差 {tol:.3e}')

    picard_done = 0
    picard_steps = 0
    iterations = 0
    guard_activations = 0
    linear_solver = 'direct'
    converged = state.norm <= tol

    while not converged and iterations < config.max_newton_iters:
        newton = picard_done >= config.picard_warmup_iters
        J = problem.matrix(state, newton=newton)
        delta, linear_solver = _linear_solve(J, -state.F, config)

        step = 1.0
        accepted = None
        while step >= config.min_step:
            trial = u.copy()
            trial[problem.mask] += step * delta
            trial_state = problem.evaluate(trial)
            if trial_state.max_L >= config.L_guard and trial_state.max_L > state.max_L:
                guard_activations += 1
                step *= config.line_search_factor
                continue
            if trial_state.norm < state.norm:
                accepted = (trial, trial_state)
                break
            step *= config.line_search_factor

        if accepted is None:
            if not newton:
                # Picard 方向無法下降，直接進入 Newton
                picard_done = config.picard_warmup_iters
                output('Picard 步無法降低殘差，切換至 Newton')
                continue
            output(f'線搜尋失敗（步長 < {config.min_step:.1e}），停止於殘差 {state.norm:.3e}')
            break

        u, state = accepted
        iterations += 1
        if not newton:
            picard_done += 1
            picard_steps += 1
        history.append(state.norm)
        output(f'{"Picard" if not newton else "Newton"} 第 {iterations} 步：'
               f'步長 {step:.3g}，殘差 {state.norm:.3e}，max L = {state.max_L:.6f}')
        converged = state.norm <= tol

    clamped = int(np.sum(state.clamped))
    if problem.size and clamped > NumericsConfig.DEGENERATE_FRACTION * problem.size:
        node = tuple(problem.eq_nodes[np.argmax(state.clamped)])
        raise DegenerateStateError(
            f'{clamped}/{problem.size} 個節點的 c² 持續截斷於下限 {c2_floor:.3e}', node)

    guard_nodes = int(np.sum(state.L >= config.L_guard))
    field = ScalarField(grid=grid, values=u, variable=Variable.CHI)

    warnings = list(gas.exponent_warnings())
    if not converged:
        warnings.append(f'未收斂：{iterations} 步後殘差 {state.norm:.3e} > {tol:.3e}')
    if guard_activations:
        warnings.append(f'橢圓性保護啟動 {guard_activations} 次（L ≥ {config.L_guard}）')
    if guard_nodes:
        warnings.append(f'結束時有 {guard_nodes} 個節點 L ≥ {config.L_guard}，非一致橢圓')

    wall_norms = {}
    for edge in grid.wall_edges:
        wall_norms[edge.value] = slip_defect(field, edge)

    report = SolveReport(
        converged=converged,
        iterations=iterations,
        picard_iterations=picard_steps,
        residual_history=history,
        residual_tol=tol,
        final_residual=state.norm,
        max_L=state.max_L,
        clamped_nodes=clamped,
        guard_nodes=guard_nodes,
        guard_activations=guard_activations,
        uniformly_elliptic=guard_nodes == 0,
        wall_norms=wall_norms,
        linear_solver=linear_solver,
        warnings=warnings,
    )
    output(f'求解結束：{"收斂" if converged else "未收斂"}，{iterations} 步，殘差 {state.norm:.3e}')
    output('=' * 50)
    return field, report
