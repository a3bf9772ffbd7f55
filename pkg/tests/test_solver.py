"""
單元測試 - Dirichlet 求解器
"""

import os
import sys
import unittest

import numpy as np

# 確保可以導入專案模組
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.ellipticity import observed_order
from core.errors import DegenerateStateError, PreconditionError
from core.exact import sample_radial, solve_radial, uniform_flow, uniform_flow_values
from core.field import restrict_half, sample_function, transform
from core.models import GasModel, GridSpec, Rotate, Scale, SolverConfig, Translate, Variable, WallEdge
from core.solver import coons_initial_guess, solve_dirichlet


def _bump(grid: GridSpec, amplitude: float = 0.01) -> np.ndarray:
    """在非牆邊界上為 0 的擾動"""
    (lo1, hi1), (lo2, hi2) = grid.extent()
    xi = grid.mesh()
    s = (xi[..., 0] - lo1) / (hi1 - lo1)
    t = (xi[..., 1] - lo2) / (hi2 - lo2)
    return amplitude * np.sin(np.pi * s) * np.sin(np.pi * t)


class TestInitialGuess(unittest.TestCase):
    """測試 Coons 初始猜測"""

    def test_exact_for_uniform_flow(self):
        """ψ 為線性時插值即為精確解"""
        grid = GridSpec.from_extent([(-0.5, 0.5), (-0.3, 0.4)], [17, 9])
        exact = uniform_flow_values((0.2, -0.1), -1.0, grid.mesh())
        boundary = np.where(grid.dirichlet_mask(), exact, 0.0)
        np.testing.assert_allclose(coons_initial_guess(grid, boundary), exact, atol=1e-12)

    def test_wall_side_extends_constant(self):
        """牆側缺資料時沿該軸由另一側延拓"""
        grid = GridSpec.from_extent([(0.0, 0.5), (-0.25, 0.25)], [9, 9], wall_edges=('left',))
        exact = uniform_flow_values((0.0, 0.2), -1.0, grid.mesh())
        boundary = np.where(grid.dirichlet_mask(), exact, 0.0)
        guess = coons_initial_guess(grid, boundary)
        np.testing.assert_allclose(guess[:, 0], exact[:, 0], atol=1e-12)
        self.assertTrue(np.all(np.isfinite(guess)))


class TestUniformRecovery(unittest.TestCase):
    """測試均勻流的重現"""

    def test_recovers_uniform_flow(self):
        """v=0、γ=2、A′=-1 在 33² 與 129² 上重現到 1e-9"""
        gas = GasModel(gamma=2.0, c0=1.0)
        for n in (33, 129):
            with self.subTest(n=n):
                grid = GridSpec.from_extent([(-0.5, 0.5)] * 2, [n, n])
                exact = uniform_flow((0.0, 0.0), -1.0, gas, grid)
                field, report = solve_dirichlet(grid, exact, gas, output_callback=lambda _: None)
                self.assertTrue(report.converged)
                self.assertLessEqual(report.iterations, 2)
                self.assertLessEqual(float(np.max(np.abs(field.values - exact.values))), 1e-9)
                self.assertTrue(report.uniformly_elliptic)

    def test_newton_from_perturbed_guess(self):
        """從擾動的猜測出發仍收斂到均勻流"""
        for gamma, c0, v, a_prime, half_width in ((2.0, 1.0, (0.0, 0.0), -1.0, 0.5),
                                                  (1.0, 1.0, (0.1, 0.0), 0.0, 0.4),
                                                  (1.4, 1.0, (0.05, 0.1), -1.0, 0.2)):
            with self.subTest(gamma=gamma):
                gas = GasModel(gamma=gamma, c0=c0)
                grid = GridSpec.from_extent([(-half_width, half_width)] * 2, [33, 33])
                exact = uniform_flow(v, a_prime, gas, grid)
                guess = exact.with_values(exact.values + _bump(grid))
                field, report = solve_dirichlet(grid, exact, gas, initial_guess=guess,
                                                output_callback=lambda _: None)
                self.assertTrue(report.converged)
                self.assertLessEqual(float(np.max(np.abs(field.values - exact.values))), 1e-9)
                history = report.residual_history
                self.assertTrue(all(b < a for a, b in zip(history, history[1:])))

    def test_rerun_from_solution(self):
        """以收斂解為初始猜測時至多 2 步"""
        gas = GasModel(gamma=2.0, c0=1.0)
        grid = GridSpec.from_extent([(-0.5, 0.5)] * 2, [33, 33])
        exact = uniform_flow((0.0, 0.0), -1.0, gas, grid)
        guess = exact.with_values(exact.values + _bump(grid))
        field, _ = solve_dirichlet(grid, exact, gas, initial_guess=guess, output_callback=lambda _: None)
        _, report = solve_dirichlet(grid, exact, gas, initial_guess=field, output_callback=lambda _: None)
        self.assertTrue(report.converged)
        self.assertLessEqual(report.iterations, 2)

    def test_iteration_cap(self):
        """迭代上限過小時回報未收斂，殘差仍下降"""
        gas = GasModel(gamma=2.0, c0=1.0)
        grid = GridSpec.from_extent([(-0.5, 0.5)] * 2, [17, 17])
        exact = uniform_flow((0.0, 0.0), -1.0, gas, grid)
        guess = exact.with_values(exact.values + _bump(grid, 0.05))
        _, report = solve_dirichlet(grid, exact, gas, SolverConfig(max_newton_iters=1),
                                    initial_guess=guess, output_callback=lambda _: None)
        self.assertFalse(report.converged)
        self.assertEqual(report.iterations, 1)
        self.assertLess(report.final_residual, report.residual_history[0])
        self.assertTrue(any('未收斂' in w for w in report.warnings))


class TestWalls(unittest.TestCase):
    """測試牆面 slip 條件"""

    def test_uniform_flow_with_wall(self):
        """v 平行於牆的均勻流，牆上節點也是未知數"""
        gas = GasModel(gamma=2.0, c0=1.0)
        grid = GridSpec.from_extent([(0.0, 0.5), (-0.25, 0.25)], [33, 33], wall_edges=('left',))
        exact = uniform_flow((0.0, 0.2), -1.0, gas, grid)
        guess = exact.with_values(exact.values + 0.01 * np.cos(np.pi * grid.mesh()[..., 0])
                                  * np.cos(2.0 * np.pi * grid.mesh()[..., 1]))
        field, report = solve_dirichlet(grid, exact, gas, initial_guess=guess,
                                        output_callback=lambda _: None)
        self.assertTrue(report.converged)
        self.assertLessEqual(float(np.max(np.abs(field.values - exact.values))), 1e-9)
        self.assertLessEqual(report.wall_norms['left'], 1e-9)

    def test_half_domain_matches_full_domain(self):
        """牆邊半區域的解等於對稱全區域解的一半"""
        gas = GasModel(gamma=1.4, c0=1.0)
        profile = solve_radial(gas, 2, (1.0, -2.0, 0.3), 1.4)
        half = GridSpec.from_extent([(0.0, 0.3), (1.05, 1.35)], [17, 17], wall_edges=('left',))
        full = GridSpec.from_extent([(-0.3, 0.3), (1.05, 1.35)], [33, 17])
        half_sol, half_report = solve_dirichlet(half, sample_radial(profile, half), gas,
                                                output_callback=lambda _: None)
        full_sol, full_report = solve_dirichlet(full, sample_radial(profile, full), gas,
                                                output_callback=lambda _: None)
        self.assertTrue(half_report.converged and full_report.converged)
        restricted = restrict_half(full_sol, WallEdge.LEFT)
        self.assertEqual(restricted.grid.dims, half.dims)
        self.assertLessEqual(float(np.max(np.abs(restricted.values - half_sol.values))), 1e-8)

    def test_all_walls_rejected(self):
        gas = GasModel(gamma=2.0, c0=1.0)
        grid = GridSpec.from_extent([(-0.5, 0.5)] * 2, [9, 9],
                                    wall_edges=('left', 'right', 'bottom', 'top'))
        with self.assertRaises(PreconditionError):
            solve_dirichlet(grid, np.zeros(grid.dims), gas)


class TestConvergence(unittest.TestCase):
    """測試對徑向參考解的收斂"""

    def test_second_order(self):
        """γ=1.4 環形解在 33²、65²、129² 上的觀測階數約為 2"""
        gas = GasModel(gamma=1.4, c0=1.0)
        profile = solve_radial(gas, 2, (1.0, -2.0, 0.3), 1.4)
        errors, spacings = [], []
        for n in (33, 65, 129):
            grid = GridSpec.from_extent([(1.05, 1.35), (-0.15, 0.15)], [n, n])
            reference = sample_radial(profile, grid)
            field, report = solve_dirichlet(grid, reference, gas, output_callback=lambda _: None)
            self.assertTrue(report.converged)
            self.assertLessEqual(report.final_residual, report.residual_tol)
            errors.append(float(np.max(np.abs(field.values - reference.values))))
            spacings.append(grid.h_max)
        order = observed_order(errors, spacings)
        self.assertGreater(order, 1.7)
        self.assertLess(order, 2.3)


class TestTransformInvariance(unittest.TestCase):
    """測試求解與對稱變換可交換"""

    @classmethod
    def setUpClass(cls):
        cls.gas = GasModel(gamma=1.4, c0=1.0)
        profile = solve_radial(cls.gas, 2, (1.0, -2.0, 0.3), 1.4)
        grid = GridSpec.from_extent([(1.05, 1.35), (-0.15, 0.15)], [33, 33])
        cls.boundary = sample_radial(profile, grid)
        cls.solution, _ = solve_dirichlet(grid, cls.boundary, cls.gas, output_callback=lambda _: None)

    def _check(self, op):
        moved = transform(self.boundary, op)
        solved, report = solve_dirichlet(moved.grid, moved, self.gas, output_callback=lambda _: None)
        self.assertTrue(report.converged)
        expected = transform(self.solution, op)
        self.assertLessEqual(float(np.max(np.abs(solved.values - expected.values))), 1e-9)

    def test_translate(self):
        self._check(Translate(v0=(0.2, -0.1)))

    def test_rotate(self):
        self._check(Rotate(quarter_turns=1))

    def test_scale(self):
        """A = 0 時縮放把解映到解（放大與縮小）"""
        for s in (0.5, 2.0):
            with self.subTest(s=s):
                self._check(Scale(s=s))


class TestDegenerate(unittest.TestCase):
    """測試退化狀態"""

    def test_clamped_sound_speed(self):
        """c² 全部為負的邊界資料"""
        gas = GasModel(gamma=2.0, c0=1.0)
        grid = GridSpec.from_extent([(-0.1, 0.1)] * 2, [9, 9])
        boundary = sample_function(grid, lambda xi: np.ones(xi.shape[:-1]))
        config = SolverConfig(max_newton_iters=0, c2_floor=1e-6)
        with self.assertRaises(DegenerateStateError):
            solve_dirichlet(grid, boundary, gas, config, output_callback=lambda _: None)

    def test_boundary_must_be_chi(self):
        gas = GasModel(gamma=2.0, c0=1.0)
        grid = GridSpec.from_extent([(-0.5, 0.5)] * 2, [9, 9])
        psi = uniform_flow((0.0, 0.0), -1.0, gas, grid).with_values(np.zeros((9, 9)), Variable.PSI)
        with self.assertRaises(PreconditionError):
            solve_dirichlet(grid, psi, gas)


if __name__ == '__main__':
    unittest.main()
