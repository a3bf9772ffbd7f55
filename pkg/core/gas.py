"""
多方氣體熱力學 - 壓力律、π 與其反函數、自相似 Bernoulli 聲速、pseudo-Mach 分類

所有函式皆為輸入的純函數，可接受 numpy 陣列（逐點運算）。
"""

import logging
from typing import Optional, Tuple

import numpy as np

from config import NumericsConfig
from .errors import InvalidStateError
from .models import GasModel, TypeTag

logger = logging.getLogger(__name__)


def _first_bad_index(mask: np.ndarray) -> Optional[Tuple[int, ...]]:
    if np.ndim(mask) == 0:
        return None
    idx = np.argwhere(mask)
    return tuple(idx[0]) if len(idx) else None


def eval_eos(gas: GasModel, rho) -> Tuple[Optional[float], float, float]:
    """
    計算壓力、π 與 c²

    Args:
        gas: 氣體模型
        rho: 密度（純量或陣列）

    Returns:
        (p, π, c²)；γ=0 時壓力律未定義，p 回傳 None
    """
    rho = np.asarray(rho, dtype=float)
    bad = ~(rho > 0)
    if np.any(bad):
        raise InvalidStateError(f'密度必須為正，收到 {rho[bad].ravel()[0] if rho.ndim else float(rho)}',
                                _first_bad_index(bad))

    ratio = rho / gas.rho0
    g = gas.gamma
    c2 = gas.c0 ** 2 * ratio ** (g - 1.0)
    if g == 1.0:
        pi = gas.c0 ** 2 * np.log(ratio)
    else:
        pi = c2 / (g - 1.0)

    if g == 0.0:
        logger.warning('γ=0 時壓力律未定義，僅回傳 π 與 c²')
        p = None
    else:
        p = gas.c0 ** 2 * gas.rho0 / g * ratio ** g
    return _unwrap(p), _unwrap(pi), _unwrap(c2)


def pi_prime(gas: GasModel, rho):
    """π′(ρ) = c²(ρ)/ρ"""
    _, _, c2 = eval_eos(gas, rho)
    return c2 / np.asarray(rho, dtype=float)


def pi_inverse(gas: GasModel, w):
    """
    π 的反函數：由 w = π(ρ) 求密度

    γ=1 時對所有 w 有定義；γ≠1 時需 (γ-1)·w > 0，否則為真空/無效狀態。
    """
    w = np.asarray(w, dtype=float)
    g = gas.gamma
    if g == 1.0:
        return _unwrap(gas.rho0 * np.exp(w / gas.c0 ** 2))

    base = (g - 1.0) * w / gas.c0 ** 2
    bad = ~(base > 0)
    if np.any(bad):
        raise InvalidStateError(f'w 超出 π 的值域（γ={g}）：需 (γ-1)·w > 0', _first_bad_index(bad))
    return _unwrap(gas.rho0 * base ** (1.0 / (g - 1.0)))


def bernoulli_head(gas: GasModel, chi, grad_chi):
    """A - χ - |∇χ|²/2，即自相似 Bernoulli 關係中的 π(ρ)"""
    grad_chi = np.asarray(grad_chi, dtype=float)
    return gas.bernoulli_A - np.asarray(chi, dtype=float) - 0.5 * np.sum(grad_chi ** 2, axis=-1)


def sound_speed_sq_unchecked(gas: GasModel, chi, grad_chi):
    """c² 不做正值檢查（求解器在迭代中自行截斷）"""
    head = bernoulli_head(gas, chi, grad_chi)
    if gas.is_isothermal:
        return np.full(np.shape(head), gas.c0 ** 2)
    return (gas.gamma - 1.0) * head


def sound_speed_sq(gas: GasModel, chi, grad_chi):
    """
    由自相似 Bernoulli 關係計算聲速平方

    γ=1: c² = c0²；γ≠1: c² = (γ-1)(A - χ - |∇χ|²/2)。

    Args:
        chi: χ 值（純量或陣列）
        grad_chi: ∇χ，最後一軸為分量

    Raises:
        InvalidStateError: 任一點 c² ≤ 0
    """
    c2 = sound_speed_sq_unchecked(gas, chi, grad_chi)
    bad = ~(c2 > 0)
    if np.any(bad):
        raise InvalidStateError(f'聲速平方必須為正（c² = {np.asarray(c2)[bad].ravel()[0]:.6g}）',
                                _first_bad_index(bad))
    return _unwrap(c2)


def density_from_chi(gas: GasModel, chi, grad_chi):
    """ρ = π⁻¹(A - χ - |∇χ|²/2)"""
    return pi_inverse(gas, bernoulli_head(gas, chi, grad_chi))


def pseudo_mach(grad_chi, c2):
    """L = |∇χ| / c"""
    c2 = np.asarray(c2, dtype=float)
    bad = ~(c2 > 0)
    if np.any(bad):
        raise InvalidStateError('計算 pseudo-Mach 數需要 c² > 0', _first_bad_index(bad))
    speed = np.sqrt(np.sum(np.asarray(grad_chi, dtype=float) ** 2, axis=-1))
    return _unwrap(speed / np.sqrt(c2))


def classify_L(L, tol_L: float = NumericsConfig.TOL_L):
    """依 L 判定型別；陣列輸入回傳字串陣列"""
    L = np.asarray(L, dtype=float)
    tags = np.where(L < 1.0 - tol_L, TypeTag.ELLIPTIC.value,
                    np.where(L > 1.0 + tol_L, TypeTag.HYPERBOLIC.value, TypeTag.PARABOLIC.value))
    if tags.ndim == 0:
        return TypeTag(str(tags))
    return tags


def pseudo_mach_classify(grad_chi, c2, tol_L: float = NumericsConfig.TOL_L):
    """
    計算 pseudo-Mach 數並分類

    Returns:
        (L, tag)；L<1-tol 為 Elliptic，L>1+tol 為 Hyperbolic，其餘為 Parabolic
    """
    L = pseudo_mach(grad_chi, c2)
    return L, classify_L(L, tol_L)


def _unwrap(value):
    if value is None:
        return None
    arr = np.asarray(value)
    return float(arr) if arr.ndim == 0 else arr
