"""
單元測試 - 參考解：均勻流、一維仿射/稀疏化分支、徑向約化
"""

import os
import sys
import unittest

import numpy as np

# 確保可以導入專案模組
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.errors import InvalidStateError, PreconditionError, SonicPointError
from core.exact import (profile_to_field, rarefaction_vertex, sample_radial, solve_1d, solve_radial,
                        uniform_flow)
from core.field import convert, residual_chi, residual_norms
from core.ellipticity import observed_order
from core.gas import sound_speed_sq
from core.models import GasModel, GridSpec


class TestUniformFlow(unittest.TestCase):
    """測試均勻流"""

    def test_nonpositive_sound_speed(self):
        """γ=2、A′=1 時 c² < 0"""
        gas = GasModel(gamma=2.0, c0=1.0)
        grid = GridSpec.from_extent([(-0.5, 0.5)] * 2, [9, 9])
        with self.assertRaises(InvalidStateError):
            uniform_flow((0.0, 0.0), 1.0, gas, grid)

    def test_dimension_mismatch(self):
        gas = GasModel(gamma=2.0, c0=1.0)
        grid = GridSpec.from_extent([(-0.5, 0.5)] * 2, [9, 9])
        with self.assertRaises(PreconditionError):
            uniform_flow((0.0,), -1.0, gas, grid)


class TestAffineBranch(unittest.TestCase):
    """測試一維仿射分支"""

    def setUp(self):
        self.gas = GasModel(gamma=1.4, c0=1.0)
        # c² = 0.4·(1 - 0.02) = 0.392
        self.ic = (0.0, -1.0, 0.2)

    def test_psi_is_affine(self):
        """ψ = χ + ξ²/2 的二階差分為 0，c² 沿解不變"""
        profile = solve_1d(self.gas, 'affine', self.ic, (-0.3, 0.3), n=61)
        self.assertFalse(profile.truncated)
        psi = convert(profile_to_field(profile)).values
        self.assertLessEqual(float(np.max(np.abs(np.diff(psi, 2)))), 1e-12)
        c2 = sound_speed_sq(self.gas, profile.chi, profile.dchi[:, None])
        np.testing.assert_allclose(c2, 0.392, rtol=1e-12)

    def test_truncated_at_sonic_points(self):
        """音速點位於 ξ₀ + χ′₀ ∓ c"""
        profile = solve_1d(self.gas, 'affine', self.ic, (-1.0, 1.0))
        c = np.sqrt(0.392)
        self.assertTrue(profile.truncated)
        self.assertAlmostEqual(profile.xi[0], 0.2 - c, places=12)
        self.assertAlmostEqual(profile.xi[-1], 0.2 + c, places=12)
        self.assertEqual(len(profile.sonic_points), 2)

    def test_sonic_initial_point(self):
        gas = GasModel(gamma=1.0, c0=1.0)
        with self.assertRaises(SonicPointError):
            solve_1d(gas, 'affine', (0.0, 0.0, 1.0), (-1.0, 1.0))

    def test_initial_point_outside_interval(self):
        with self.assertRaises(PreconditionError):
            solve_1d(self.gas, 'affine', (2.0, -1.0, 0.2), (-1.0, 1.0))


class TestRarefactionBranch(unittest.TestCase):
    """測試一維稀疏化分支"""

    def test_isothermal(self):
        """γ=1：χ′ = c0，L 處處為 1"""
        gas = GasModel(gamma=1.0, c0=1.0)
        profile = solve_1d(gas, 'rarefaction', (0.0, 0.0, 1.0), (-0.5, 0.5), n=101, sign=1)
        np.testing.assert_allclose(profile.dchi, 1.0)
        np.testing.assert_allclose(profile.chi, profile.xi, atol=1e-15)

    def test_isothermal_inconsistent(self):
        gas = GasModel(gamma=1.0, c0=1.0)
        with self.assertRaises(SonicPointError):
            solve_1d(gas, 'rarefaction', (0.0, 0.0, 0.5), (-0.5, 0.5))

    def test_polytropic_vertex(self):
        """γ=2：k = -1/3，頂點 ξ₁ = 2，(χ′)² = c²"""
        gas = GasModel(gamma=2.0, c0=1.0)
        self.assertAlmostEqual(rarefaction_vertex(gas, 0.0, 2.0 / 3.0), 2.0)
        profile = solve_1d(gas, 'rarefaction', (0.0, -2.0 / 3.0, 2.0 / 3.0), (-1.0, 1.0), n=41)
        self.assertEqual(profile.vacuum_points, [])
        c2 = sound_speed_sq(gas, profile.chi, profile.dchi[:, None])
        np.testing.assert_allclose(np.abs(profile.dchi) / np.sqrt(c2), 1.0, rtol=1e-9)

    def test_polytropic_vacuum_vertex(self):
        gas = GasModel(gamma=2.0, c0=1.0)
        profile = solve_1d(gas, 'rarefaction', (0.0, -2.0 / 3.0, 2.0 / 3.0), (-1.0, 3.0))
        self.assertEqual(len(profile.vacuum_points), 1)
        self.assertAlmostEqual(profile.vacuum_points[0], 2.0)

    def test_polytropic_inconsistent(self):
        """χ₀ 與頂點不相容"""
        gas = GasModel(gamma=2.0, c0=1.0)
        with self.assertRaises(SonicPointError):
            solve_1d(gas, 'rarefaction', (0.0, -0.5, 2.0 / 3.0), (-1.0, 1.0))


class TestRadial(unittest.TestCase):
    """測試徑向約化"""

    def test_recovers_uniform_flow(self):
        """v=0、γ=2、A′=-1：χ = -1 - r²/2"""
        gas = GasModel(gamma=2.0, c0=1.0)
        profile = solve_radial(gas, 2, (0.0, -1.0, 0.0), 0.9, n=91)
        self.assertFalse(profile.truncated)
        np.testing.assert_allclose(profile.chi, -1.0 - 0.5 * profile.xi ** 2, atol=1e-9)
        np.testing.assert_allclose(profile.dchi, -profile.xi, atol=1e-9)

    def test_stops_at_sonic_circle(self):
        """同一流場在 r = 1 處 L = 1"""
        gas = GasModel(gamma=2.0, c0=1.0)
        profile = solve_radial(gas, 2, (0.0, -1.0, 0.0), 1.5)
        self.assertTrue(profile.truncated)
        self.assertAlmostEqual(profile.sonic_points[0], 1.0, places=6)

    def test_regular_center(self):
        gas = GasModel(gamma=2.0, c0=1.0)
        with self.assertRaises(PreconditionError):
            solve_radial(gas, 2, (0.0, -1.0, 0.3), 0.5)

    def test_annulus_subsonic_range(self):
        """γ=1.4 的環形解在 [1, 1.36] 內保持亞音速"""
        gas = GasModel(gamma=1.4, c0=1.0)
        profile = solve_radial(gas, 2, (1.0, -2.0, 0.3), 3.0)
        self.assertGreater(profile.xi[-1], 1.36)
        chi, dchi = profile.evaluate(np.array([1.0, 1.2]))
        self.assertAlmostEqual(float(chi[0]), -2.0, places=12)
        self.assertAlmostEqual(float(dchi[0]), 0.3, places=12)

    def test_sampled_residual_second_order(self):
        """取樣到網格後的離散殘差為 O(h²)"""
        gas = GasModel(gamma=1.4, c0=1.0)
        profile = solve_radial(gas, 2, (1.0, -2.0, 0.3), 1.4)
        errors, spacings = [], []
        for n in (17, 33, 65):
            grid = GridSpec.from_extent([(1.05, 1.35), (-0.15, 0.15)], [n, n])
            field = sample_radial(profile, grid)
            errors.append(residual_norms(residual_chi(field, gas))[0])
            spacings.append(grid.h_max)
        order = observed_order(errors, spacings)
        self.assertGreater(order, 1.7)
        self.assertLess(order, 2.3)

    def test_sample_outside_range(self):
        gas = GasModel(gamma=1.4, c0=1.0)
        profile = solve_radial(gas, 2, (1.0, -2.0, 0.3), 1.2)
        grid = GridSpec.from_extent([(1.05, 1.35), (-0.15, 0.15)], [9, 9])
        with self.assertRaises(ValueError):
            sample_radial(profile, grid)


if __name__ == '__main__':
    unittest.main()
