"""
參考解產生器 - 均勻流、一維方程的仿射/稀疏化分支、χ 方程的徑向約化

徑向約化（代入 χ = χ(r)）：
    c²(χ″ + (d-1)χ′/r) - (χ′)²χ″ = (χ′)² - d·c²
以 scipy 的 DOP853（內嵌誤差控制、連續輸出）積分，作為二維求解器的參考解。
"""

import logging
from typing import Literal, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from config import NumericsConfig
from .errors import InvalidStateError, PreconditionError, SonicPointError
from .gas import sound_speed_sq_unchecked
from .models import GasModel, GridSpec, Profile1D, RadialProfile, ScalarField, Variable

logger = logging.getLogger(__name__)


# ==================== 均勻流 ====================

def uniform_flow_values(v: Sequence[float], A_prime: float, xi: np.ndarray) -> np.ndarray:
    """χ = v·ξ - |ξ|²/2 + A′ 於任意點（最後一軸為座標分量）"""
    xi = np.asarray(xi, dtype=float)
    v = np.asarray(v, dtype=float)
    return xi @ v - 0.5 * np.sum(xi * xi, axis=-1) + A_prime


def uniform_flow_c2(gas: GasModel, v: Sequence[float], A_prime: float) -> float:
    """均勻流的常數聲速平方 (γ-1)(A - A′ - |v|²/2)；γ=1 時為 c0²"""
    speed2 = float(np.sum(np.asarray(v, dtype=float) ** 2))
    return float(sound_speed_sq_unchecked(gas, A_prime, np.sqrt([speed2])))


def uniform_flow(v: Sequence[float], A_prime: float, gas: GasModel, grid: GridSpec) -> ScalarField:
    """
    均勻流 χ = v·ξ - |ξ|²/2 + A′

    ∇χ = v - ξ，∇²χ = -I，c² 為常數，residual_chi 恆為 0。

    Raises:
        InvalidStateError: c² ≤ 0
    """
    if len(v) != grid.ndim:
        raise PreconditionError(f'速度維度 {len(v)} 與網格 {grid.ndim} 不符')
    c2 = uniform_flow_c2(gas, v, A_prime)
    if not c2 > 0:
        raise InvalidStateError(f'均勻流聲速平方非正：c² = {c2:.6g}')
    return ScalarField(grid=grid, values=uniform_flow_values(v, A_prime, grid.mesh()),
                       variable=Variable.CHI)


# ==================== 一維方程 ====================

def rarefaction_vertex(gas: GasModel, xi0: float, dchi0: float) -> float:
    """γ≠1 稀疏化拋物線的頂點 ξ₁ = ξ₀ - χ′₀(1+γ)/(1-γ)"""
    k = (1.0 - gas.gamma) / (1.0 + gas.gamma)
    return xi0 - dchi0 / k


def _sample_mesh(lo: float, hi: float, n: int) -> np.ndarray:
    return np.linspace(lo, hi, n)


def solve_1d(gas: GasModel, branch: Literal['affine', 'rarefaction'],
             ic: Tuple[float, float, float], interval: Tuple[float, float],
             n: int = 201, sign: int = 1) -> Profile1D:
    """
    一維方程 (c² - (χ′)²)χ″ = (χ′)² - c² 的解

    Affine：χ″ = -1，沿解 χ + (χ′)²/2 為常數，故 c² 為常數；
            遇到 |χ′| = c 的音速點即截斷並回報。
    Rarefaction：c² = (χ′)²；γ=1 時 χ′ = sign·c0，γ≠1 時
            χ(ξ) = A + (1-γ)(ξ-ξ₁)²/(2(1+γ))，頂點 ξ₁ 由初始條件決定。

    Args:
        ic: (ξ₀, χ₀, χ′₀)
        interval: 取樣區間，需包含 ξ₀
        n: 取樣點數
    """
    xi0, chi0, dchi0 = (float(x) for x in ic)
    lo, hi = (float(x) for x in interval)
    if not lo <= xi0 <= hi:
        raise PreconditionError(f'初始點 ξ₀={xi0} 不在區間 [{lo}, {hi}] 內')
    if n < 3:
        raise PreconditionError('取樣點數至少為 3')

    if branch == 'affine':
        return _solve_affine(gas, xi0, chi0, dchi0, lo, hi, n)
    if branch == 'rarefaction':
        return _solve_rarefaction(gas, xi0, chi0, dchi0, lo, hi, n, sign)
    raise PreconditionError(f'未知的分支: {branch}')


def _solve_affine(gas, xi0, chi0, dchi0, lo, hi, n) -> Profile1D:
    c2 = float(sound_speed_sq_unchecked(gas, chi0, [dchi0]))
    if not c2 > 0:
        raise InvalidStateError(f'初始狀態聲速平方非正：c² = {c2:.6g}')
    c = np.sqrt(c2)
    if abs(dchi0 ** 2 - c2) <= NumericsConfig.SONIC_THRESHOLD * c2:
        raise SonicPointError('仿射分支需要 (χ′₀)² ≠ c²（初始點為音速點）')

    # χ′(ξ) = χ′₀ - (ξ-ξ₀)，|χ′| = c 於 ξ = ξ₀ + χ′₀ ∓ c
    candidates = sorted([xi0 + dchi0 - c, xi0 + dchi0 + c])
    sonic_inside = [s for s in candidates if lo <= s <= hi]
    left, right = lo, hi
    for s in candidates:
        if s < xi0:
            left = max(left, s)
        elif s > xi0:
            right = min(right, s)
    truncated = left > lo or right < hi
    if truncated:
        logger.info(f'仿射分支於音速點截斷：[{left:.6g}, {right:.6g}]')

    xi = _sample_mesh(left, right, n)
    dx = xi - xi0
    chi = chi0 + dchi0 * dx - 0.5 * dx ** 2
    dchi = dchi0 - dx
    return Profile1D(xi=xi, chi=chi, dchi=dchi, branch='affine', truncated=truncated,
                     sonic_points=[float(s) for s in sonic_inside],
                     notes=[f'c² = {c2:.17g}（沿解為常數）'])


def _solve_rarefaction(gas, xi0, chi0, dchi0, lo, hi, n, sign) -> Profile1D:
    tol = NumericsConfig.RAREFACTION_IC_TOL
    xi = _sample_mesh(lo, hi, n)
    if gas.is_isothermal:
        if sign not in (1, -1):
            raise PreconditionError('sign 必須為 +1 或 -1')
        if abs(dchi0 - sign * gas.c0) > tol * max(1.0, gas.c0):
            raise SonicPointError(f'稀疏化初始條件不一致：需 χ′₀ = {sign}·c0 = {sign * gas.c0}')
        dchi = np.full_like(xi, sign * gas.c0)
        chi = chi0 + sign * gas.c0 * (xi - xi0)
        return Profile1D(xi=xi, chi=chi, dchi=dchi, branch='rarefaction',
                         notes=['γ=1：χ 為仿射且處處為拋物型'])

    if gas.gamma == -1.0:
        raise PreconditionError('γ = -1 時稀疏化閉式解不存在')
    k = (1.0 - gas.gamma) / (1.0 + gas.gamma)
    vertex = rarefaction_vertex(gas, xi0, dchi0)
    expected = gas.bernoulli_A + 0.5 * k * (xi0 - vertex) ** 2
    if abs(chi0 - expected) > tol * max(1.0, abs(expected)):
        raise SonicPointError(f'稀疏化初始條件不一致：由 χ′₀ 推得頂點 ξ₁={vertex:.6g}，'
                              f'需 χ₀ = {expected:.12g}，收到 {chi0:.12g}')
    dx = xi - vertex
    chi = gas.bernoulli_A + 0.5 * k * dx ** 2
    dchi = k * dx
    vacuum = [float(vertex)] if lo <= vertex <= hi else []
    notes = [f'頂點 ξ₁ = {vertex:.17g}']
    if vacuum:
        notes.append('頂點處 c² = 0（真空），不屬於有效狀態')
    return Profile1D(xi=xi, chi=chi, dchi=dchi, branch='rarefaction',
                     vacuum_points=vacuum, notes=notes)


def profile_to_field(profile: Profile1D) -> ScalarField:
    """一維剖面轉為 d=1 的 χ 場（需均勻取樣）"""
    xi = profile.xi
    h = float(xi[1] - xi[0])
    if not np.allclose(np.diff(xi), h, rtol=1e-9, atol=0.0):
        raise PreconditionError('剖面取樣不均勻，無法轉為網格場')
    grid = GridSpec(origin=(float(xi[0]),), spacing=(h,), dims=(len(xi),))
    return ScalarField(grid=grid, values=profile.chi, variable=Variable.CHI)


# ==================== 徑向約化 ====================

def _radial_rhs(gas: GasModel, d: int):
    def rhs(r, y):
        chi, p = y
        c2 = float(sound_speed_sq_unchecked(gas, chi, [p]))
        if r == 0.0:
            # 正則中心的極限：χ″(0) = -1
            return [p, -1.0]
        num = p * p - d * c2 - c2 * (d - 1) * p / r
        return [p, num / (c2 - p * p)]
    return rhs


def solve_radial(gas: GasModel, d: int, ic: Tuple[float, float, float],
                 interval_end: float, n: int = 201,
                 rtol: float = NumericsConfig.RADIAL_RTOL,
                 atol: float = NumericsConfig.RADIAL_ATOL) -> RadialProfile:
    """
    χ 方程徑向約化的高精度積分

    Args:
        d: 空間維度（d=1 時 r 即 ξ）
        ic: (r₀, χ₀, χ′₀)；r₀ = 0 時需 χ′₀ = 0（正則中心）
        interval_end: r₁
        n: 均勻 r 取樣點數

    Returns:
        RadialProfile；遇到 |c² - (χ′)²| < 1e-8·c² 時停止並標記 truncated
    """
    r0, chi0, dchi0 = (float(x) for x in ic)
    r1 = float(interval_end)
    if d < 1:
        raise PreconditionError('維度 d 必須 ≥ 1')
    if r0 < 0 or r1 <= r0:
        raise PreconditionError(f'需 0 ≤ r₀ < r₁，收到 [{r0}, {r1}]')
    if r0 == 0.0 and dchi0 != 0.0 and d > 1:
        raise PreconditionError('正則中心需 χ′(0) = 0')
    c2_0 = float(sound_speed_sq_unchecked(gas, chi0, [dchi0]))
    if not c2_0 > 0:
        raise InvalidStateError(f'初始狀態聲速平方非正：c² = {c2_0:.6g}')
    threshold = NumericsConfig.SONIC_THRESHOLD
    if abs(c2_0 - dchi0 ** 2) < threshold * c2_0:
        raise SonicPointError('初始點即為音速點，無法積分')

    def sonic_event(r, y):
        c2 = float(sound_speed_sq_unchecked(gas, y[0], [y[1]]))
        return abs(c2 - y[1] ** 2) - threshold * abs(c2)
    sonic_event.terminal = True
    sonic_event.direction = -1

    def vacuum_event(r, y):
        return float(sound_speed_sq_unchecked(gas, y[0], [y[1]]))
    vacuum_event.terminal = True
    vacuum_event.direction = -1

    sol = integrate.solve_ivp(
        _radial_rhs(gas, d), (r0, r1), [chi0, dchi0],
        method='DOP853', rtol=rtol, atol=atol, dense_output=True,
        events=[sonic_event, vacuum_event],
    )
    if sol.status == -1:
        raise InvalidStateError(f'徑向積分失敗: {sol.message}')
    if len(sol.t_events[1]):
        raise InvalidStateError(f'徑向解在 r = {sol.t_events[1][0]:.6g} 處 c² 降至 0')

    r_end = float(sol.t[-1])
    truncated = len(sol.t_events[0]) > 0
    sonic = [float(sol.t_events[0][0])] if truncated else []
    if truncated:
        logger.info(f'徑向積分於音速點 r = {sonic[0]:.8g} 停止')

    r = _sample_mesh(r0, r_end, n)
    y = sol.sol(r)
    return RadialProfile(xi=r, chi=y[0], dchi=y[1], branch=f'radial-d{d}', truncated=truncated,
                         sonic_points=sonic, d=d, dense=sol.sol,
                         notes=[f'DOP853 rtol={rtol:g} atol={atol:g}, 步數 {len(sol.t)}'])


def sample_radial(profile: RadialProfile, grid: GridSpec,
                  center: Optional[Sequence[float]] = None) -> ScalarField:
    """以連續輸出將徑向剖面取樣到二維網格，χ(ξ) = χ(|ξ - center|)"""
    center = np.zeros(grid.ndim) if center is None else np.asarray(center, dtype=float)
    r = np.sqrt(np.sum((grid.mesh() - center) ** 2, axis=-1))
    chi, _ = profile.evaluate(r)
    return ScalarField(grid=grid, values=chi, variable=Variable.CHI)
