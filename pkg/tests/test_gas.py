"""
單元測試 - 多方氣體熱力學與 pseudo-Mach 分類
"""

import os
import sys
import unittest

import numpy as np
from pydantic import ValidationError

# 確保可以導入專案模組
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.errors import InvalidStateError
from core.gas import (density_from_chi, eval_eos, pi_inverse, pi_prime, pseudo_mach_classify,
                      sound_speed_sq)
from core.models import GasModel, TypeTag


class TestGasModel(unittest.TestCase):
    """測試氣體模型"""

    def test_nonpositive_c0_rejected(self):
        """c0 ≤ 0 應被 pydantic 拒絕"""
        with self.assertRaises(ValidationError):
            GasModel(gamma=1.4, c0=0.0)

    def test_exponent_warnings(self):
        """γ 的範圍警告"""
        self.assertEqual(GasModel(gamma=1.4, c0=1.0).exponent_warnings(), [])
        self.assertEqual(len(GasModel(gamma=-0.5, c0=1.0).exponent_warnings()), 1)
        self.assertEqual(len(GasModel(gamma=-1.0, c0=1.0).exponent_warnings()), 1)
        self.assertEqual(len(GasModel(gamma=0.0, c0=1.0).exponent_warnings()), 1)


class TestEquationOfState(unittest.TestCase):
    """測試壓力律、π 與 c²"""

    def test_reference_state(self):
        """ρ = ρ0 時 c² = c0²；γ=1 時 π = 0"""
        gas = GasModel(gamma=1.0, c0=2.0, rho0=3.0)
        p, pi, c2 = eval_eos(gas, 3.0)
        self.assertAlmostEqual(c2, 4.0)
        self.assertAlmostEqual(pi, 0.0)
        self.assertAlmostEqual(p, 12.0)

    def test_pressure_relation(self):
        """p = ρc²/γ 對多方氣體成立"""
        for gamma in (0.5, 1.4, 2.0, 3.0):
            gas = GasModel(gamma=gamma, c0=1.3, rho0=0.7)
            rho = np.array([0.2, 0.7, 1.9])
            p, _, c2 = eval_eos(gas, rho)
            np.testing.assert_allclose(p, rho * c2 / gamma, rtol=1e-13)

    def test_pi_prime_matches_difference(self):
        """π′(ρ) = c²/ρ 與中央差分一致"""
        gas = GasModel(gamma=1.4, c0=1.0)
        rho, eps = 1.7, 1e-6
        _, pi_plus, _ = eval_eos(gas, rho + eps)
        _, pi_minus, _ = eval_eos(gas, rho - eps)
        self.assertAlmostEqual(pi_prime(gas, rho), (pi_plus - pi_minus) / (2 * eps), places=7)

    def test_pi_inverse_recovers_density(self):
        """π⁻¹(π(ρ)) = ρ"""
        for gamma in (0.5, 1.0, 1.4, 3.0):
            gas = GasModel(gamma=gamma, c0=0.8, rho0=1.2)
            rho = np.array([0.3, 1.0, 2.5])
            _, pi, _ = eval_eos(gas, rho)
            np.testing.assert_allclose(pi_inverse(gas, pi), rho, rtol=1e-12)

    def test_isothermal_pi_inverse_any_value(self):
        """γ=1 時 π⁻¹ 對負值也有定義"""
        gas = GasModel(gamma=1.0, c0=1.0)
        self.assertAlmostEqual(pi_inverse(gas, -2.0), np.exp(-2.0))

    def test_pi_inverse_vacuum(self):
        """γ=2 時 w ≤ 0 超出值域"""
        gas = GasModel(gamma=2.0, c0=1.0)
        with self.assertRaises(InvalidStateError):
            pi_inverse(gas, -1.0)

    def test_nonpositive_density(self):
        """ρ ≤ 0 應拋出 InvalidStateError 並帶節點索引"""
        gas = GasModel(gamma=1.4, c0=1.0)
        with self.assertRaises(InvalidStateError) as ctx:
            eval_eos(gas, np.array([1.0, 0.0, 2.0]))
        self.assertEqual(ctx.exception.node, (1,))

    def test_gamma_zero_has_no_pressure(self):
        """γ=0 時壓力律未定義"""
        gas = GasModel(gamma=0.0, c0=1.0)
        with self.assertLogs('core.gas', level='WARNING'):
            p, pi, c2 = eval_eos(gas, 2.0)
        self.assertIsNone(p)
        self.assertAlmostEqual(c2, 0.5)
        self.assertAlmostEqual(pi, -0.5)


class TestSoundSpeed(unittest.TestCase):
    """測試自相似 Bernoulli 聲速"""

    def test_polytropic(self):
        """γ=2, A=0：c² = -χ - |∇χ|²/2"""
        gas = GasModel(gamma=2.0, c0=1.0)
        self.assertAlmostEqual(sound_speed_sq(gas, -1.0, [0.0, 0.0]), 1.0)
        self.assertAlmostEqual(sound_speed_sq(gas, -1.0, [0.6, 0.8]), 0.5)

    def test_isothermal(self):
        """γ=1：c² = c0² 與 χ 無關"""
        gas = GasModel(gamma=1.0, c0=0.55)
        self.assertAlmostEqual(sound_speed_sq(gas, 10.0, [3.0, 4.0]), 0.3025)

    def test_nonpositive_sound_speed(self):
        """c² ≤ 0 應拋出 InvalidStateError"""
        gas = GasModel(gamma=2.0, c0=1.0)
        with self.assertRaises(InvalidStateError):
            sound_speed_sq(gas, 1.0, [0.0, 0.0])

    def test_density_from_chi(self):
        """由 χ 回推的密度與 c² 一致"""
        gas = GasModel(gamma=1.4, c0=1.0)
        chi, grad = -1.5, np.array([0.3, -0.2])
        rho = density_from_chi(gas, chi, grad)
        _, _, c2 = eval_eos(gas, rho)
        self.assertAlmostEqual(c2, sound_speed_sq(gas, chi, grad), places=12)


class TestPseudoMachClassify(unittest.TestCase):
    """測試 pseudo-Mach 數分類"""

    def test_three_types(self):
        """L = 0.5、1、2 分別為 Elliptic、Parabolic、Hyperbolic"""
        L, tag = pseudo_mach_classify([0.3, 0.4], 1.0)
        self.assertAlmostEqual(L, 0.5)
        self.assertEqual(tag, TypeTag.ELLIPTIC)
        self.assertEqual(pseudo_mach_classify([0.6, 0.8], 1.0)[1], TypeTag.PARABOLIC)
        self.assertEqual(pseudo_mach_classify([1.2, 1.6], 1.0)[1], TypeTag.HYPERBOLIC)

    def test_band(self):
        """|L-1| ≤ tol_L 視為 Parabolic"""
        self.assertEqual(pseudo_mach_classify([1.0 + 1e-7], 1.0)[1], TypeTag.PARABOLIC)
        self.assertEqual(pseudo_mach_classify([1.0 - 1e-5], 1.0)[1], TypeTag.ELLIPTIC)
        self.assertEqual(pseudo_mach_classify([1.0 + 1e-5], 1.0, tol_L=1e-4)[1], TypeTag.PARABOLIC)

    def test_array_input(self):
        """陣列輸入逐點分類"""
        grad = np.array([[0.1, 0.0], [1.0, 0.0], [3.0, 0.0]])
        L, tags = pseudo_mach_classify(grad, np.ones(3))
        np.testing.assert_allclose(L, [0.1, 1.0, 3.0])
        self.assertEqual(list(tags), ['Elliptic', 'Parabolic', 'Hyperbolic'])

    def test_requires_positive_c2(self):
        with self.assertRaises(InvalidStateError):
            pseudo_mach_classify([0.1, 0.0], 0.0)


if __name__ == '__main__':
    unittest.main()
