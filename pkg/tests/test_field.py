"""
單元測試 - 網格場：差分模板、殘差、變數轉換、對稱變換與偶反射
"""

import os
import sys
import unittest

import numpy as np

# 確保可以導入專案模組
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.errors import InvalidStateError, PreconditionError, ReflectionError
from core.exact import uniform_flow, uniform_flow_c2, uniform_flow_values
from core.field import (classify_field, convert, derivatives, gradient_full, normal_stencils,
                        point_state, reflect_even, residual_chi, residual_norms, residual_psi,
                        restrict_half, sample_function, transform, velocity_field)
from core.models import (GasModel, GridSpec, Rotate, Scale, ScalarField, Translate, TypeTag,
                         Variable, WallEdge)


def _square(half_width: float, n: int, walls=()) -> GridSpec:
    return GridSpec.from_extent([(-half_width, half_width)] * 2, [n, n], wall_edges=walls)


def _quadratic(xi):
    x, y = xi[..., 0], xi[..., 1]
    return 1.0 + 2.0 * x - 3.0 * y + 0.5 * x ** 2 + 0.7 * x * y - 0.2 * y ** 2


class TestDerivatives(unittest.TestCase):
    """測試差分模板"""

    def test_central_exact_on_quadratic(self):
        """中央差分對二次多項式精確"""
        grid = GridSpec.from_extent([(-0.3, 0.5), (0.1, 0.7)], [9, 13])
        field = sample_function(grid, _quadratic)
        grad, hess = derivatives(field)
        xi = grid.mesh()[1:-1, 1:-1]
        np.testing.assert_allclose(grad[..., 0], 2.0 + xi[..., 0] + 0.7 * xi[..., 1], atol=1e-12)
        np.testing.assert_allclose(grad[..., 1], -3.0 + 0.7 * xi[..., 0] - 0.4 * xi[..., 1], atol=1e-12)
        np.testing.assert_allclose(hess[..., 0, 0], 1.0, atol=1e-10)
        np.testing.assert_allclose(hess[..., 0, 1], 0.7, atol=1e-10)
        np.testing.assert_allclose(hess[..., 1, 1], -0.4, atol=1e-10)

    def test_gradient_full_exact_on_quadratic(self):
        """邊界單側差分同樣對二次多項式精確"""
        grid = GridSpec.from_extent([(-0.3, 0.5), (0.1, 0.7)], [9, 13])
        grad = gradient_full(sample_function(grid, _quadratic))
        xi = grid.mesh()
        np.testing.assert_allclose(grad[..., 0], 2.0 + xi[..., 0] + 0.7 * xi[..., 1], atol=1e-11)
        np.testing.assert_allclose(grad[..., 1], -3.0 + 0.7 * xi[..., 0] - 0.4 * xi[..., 1], atol=1e-11)

    def test_gradient_full_wall_normal_zero(self):
        """牆邊法向梯度為 0"""
        grid = _square(0.5, 9, walls=('left',))
        grad = gradient_full(sample_function(grid, _quadratic))
        np.testing.assert_array_equal(grad[0, :, 0], 0.0)

    def test_normal_stencils(self):
        """單側三階模板對四次多項式精確"""
        grid = GridSpec.from_extent([(0.1, 0.5), (0.0, 0.4)], [9, 5])
        values = sample_function(grid, lambda xi: xi[..., 0] ** 3 + xi[..., 0] ** 4).values
        _, _, third = normal_stencils(values, grid.spacing, WallEdge.LEFT)
        np.testing.assert_allclose(third, 6.0 + 24.0 * 0.1, rtol=1e-6)

        quad = sample_function(grid, lambda xi: xi[..., 0] ** 2).values
        first, _, _ = normal_stencils(quad, grid.spacing, WallEdge.RIGHT)
        # 沿內法向（-ξ¹）的導數
        np.testing.assert_allclose(first, -1.0, atol=1e-12)

    def test_normal_stencils_needs_five_nodes(self):
        grid = GridSpec.from_extent([(0.0, 0.3), (0.0, 0.4)], [4, 5])
        with self.assertRaises(PreconditionError):
            normal_stencils(np.zeros(grid.dims), grid.spacing, WallEdge.LEFT)


class TestResidual(unittest.TestCase):
    """測試 χ/ψ 方程殘差"""

    def test_uniform_flow_is_exact(self):
        """均勻流在各 γ 下殘差為捨入誤差"""
        v = (0.3, -0.2)
        for gamma in (0.5, 1.0, 1.4, 2.0, 3.0):
            for n in (33, 65):
                with self.subTest(gamma=gamma, n=n):
                    gas = GasModel(gamma=gamma, c0=1.0)
                    a_prime = 1.0 if gamma < 1.0 else -1.0
                    field = uniform_flow(v, a_prime, gas, _square(0.5, n))
                    c2 = uniform_flow_c2(gas, v, a_prime)
                    r_inf, _ = residual_norms(residual_chi(field, gas))
                    self.assertLessEqual(r_inf, 1e-9 * (1.0 + c2))

    def test_psi_residual_of_uniform_flow(self):
        """ψ 形式的殘差同樣為 0"""
        gas = GasModel(gamma=1.4, c0=1.0)
        field = uniform_flow((0.1, 0.2), -1.0, gas, _square(0.4, 33))
        psi = convert(field)
        self.assertEqual(psi.variable, Variable.PSI)
        r_inf, _ = residual_norms(residual_psi(psi, gas))
        self.assertLessEqual(r_inf, 1e-9)

    def test_residual_on_wall_nodes(self):
        """對稱於牆的均勻流在牆邊節點上殘差也為 0"""
        gas = GasModel(gamma=2.0, c0=1.0)
        grid = GridSpec.from_extent([(0.0, 0.5), (-0.25, 0.25)], [17, 17], wall_edges=('left',))
        field = uniform_flow((0.0, 0.2), -1.0, gas, grid)
        residual = residual_chi(field, gas)
        self.assertLessEqual(float(np.max(np.abs(residual.values[0, 1:-1]))), 1e-9)

    def test_nonsolution_residual(self):
        """非解的殘差明顯不為 0，Dirichlet 節點記為 0"""
        gas = GasModel(gamma=1.0, c0=0.55)
        field = sample_function(_square(1.0, 33), lambda xi: -0.5 * np.sum(xi ** 2, axis=-1)
                                + np.sum(xi ** 2, axis=-1) ** 2 / 8)
        residual = residual_chi(field, gas)
        self.assertEqual(residual.variable, Variable.RESIDUAL)
        self.assertGreater(residual_norms(residual)[0], 0.5)
        np.testing.assert_array_equal(residual.values[0, :], 0.0)

    def test_nonpositive_c2_raises(self):
        """c² ≤ 0 的節點回報索引"""
        gas = GasModel(gamma=2.0, c0=1.0)
        field = ScalarField(grid=_square(0.5, 9), values=np.ones((9, 9)))
        with self.assertRaises(InvalidStateError) as ctx:
            residual_chi(field, gas)
        self.assertIsNotNone(ctx.exception.node)

    def test_wrong_variable(self):
        gas = GasModel(gamma=1.4, c0=1.0)
        psi = convert(uniform_flow((0.0, 0.0), -1.0, gas, _square(0.4, 9)))
        with self.assertRaises(PreconditionError):
            residual_chi(psi, gas)


class TestConversion(unittest.TestCase):
    """測試 χ/ψ 轉換與流速"""

    def test_convert_back(self):
        gas = GasModel(gamma=1.4, c0=1.0)
        field = uniform_flow((0.1, 0.2), -1.0, gas, _square(0.4, 9))
        back = convert(convert(field))
        self.assertEqual(back.variable, Variable.CHI)
        np.testing.assert_allclose(back.values, field.values, atol=1e-15)

    def test_velocity_of_uniform_flow(self):
        """v = ∇χ + ξ 為常數"""
        gas = GasModel(gamma=1.4, c0=1.0)
        field = uniform_flow((0.1, 0.2), -1.0, gas, _square(0.4, 17))
        velocity = velocity_field(field)
        np.testing.assert_allclose(velocity[..., 0], 0.1, atol=1e-12)
        np.testing.assert_allclose(velocity[..., 1], 0.2, atol=1e-12)

    def test_residual_field_cannot_convert(self):
        gas = GasModel(gamma=1.4, c0=1.0)
        residual = residual_chi(uniform_flow((0.0, 0.0), -1.0, gas, _square(0.4, 9)), gas)
        with self.assertRaises(PreconditionError):
            convert(residual)


class TestPointStateAndClassify(unittest.TestCase):
    """測試逐點求值與型別統計"""

    def test_point_state_uniform_flow(self):
        """均勻流 v=0、γ=2、A′=-1：c² = 1，L = |ξ|"""
        gas = GasModel(gamma=2.0, c0=1.0)
        grid = _square(0.5, 33)
        field = uniform_flow((0.0, 0.0), -1.0, gas, grid)
        state = point_state(field, gas, (24, 16))
        self.assertAlmostEqual(state.c2, 1.0, places=10)
        self.assertAlmostEqual(state.L, 0.25, places=10)
        self.assertEqual(state.tag, TypeTag.ELLIPTIC)
        np.testing.assert_allclose(state.hess_chi, -np.eye(2), atol=1e-9)
        np.testing.assert_allclose(state.velocity, (0.0, 0.0), atol=1e-12)

    def test_point_state_rejects_boundary(self):
        gas = GasModel(gamma=2.0, c0=1.0)
        field = uniform_flow((0.0, 0.0), -1.0, gas, _square(0.5, 9))
        with self.assertRaises(PreconditionError):
            point_state(field, gas, (0, 4))

    def test_classify_counts(self):
        """小區域內全為橢圓型"""
        gas = GasModel(gamma=2.0, c0=1.0)
        field = uniform_flow((0.0, 0.0), -1.0, gas, _square(0.3, 17))
        L, tags, summary = classify_field(field, gas)
        self.assertEqual(summary.counts['Elliptic'], 17 * 17)
        self.assertEqual(sum(summary.counts.values()), 17 * 17)
        self.assertAlmostEqual(summary.max_L, 0.3 * np.sqrt(2.0), places=10)
        self.assertEqual(tags.shape, (17, 17))

    def test_classify_mixed(self):
        """大區域同時包含三種型別"""
        gas = GasModel(gamma=1.0, c0=1.0)
        field = uniform_flow((0.0, 0.0), 0.0, gas, _square(1.0, 21))
        _, _, summary = classify_field(field, gas)
        self.assertGreater(summary.counts['Elliptic'], 0)
        self.assertGreater(summary.counts['Hyperbolic'], 0)
        # ξ = (±1, 0) 與 (0, ±1) 上 L = 1
        self.assertGreaterEqual(summary.counts['Parabolic'], 4)


class TestTransforms(unittest.TestCase):
    """測試平移、旋轉與縮放"""

    def setUp(self):
        self.gas = GasModel(gamma=2.0, c0=1.0)
        self.v = np.array([0.3, -0.1])
        self.field = uniform_flow(tuple(self.v), -1.0, self.gas,
                                  GridSpec.from_extent([(-0.4, 0.4), (-0.2, 0.3)], [17, 11]))

    def test_translate(self):
        """平移後仍為均勻流：速度 v+v0，A′ 相應改變"""
        v0 = np.array([0.05, 0.1])
        moved = transform(self.field, Translate(v0=tuple(v0)))
        a_prime = -1.0 - float(self.v @ v0) - 0.5 * float(v0 @ v0)
        expected = uniform_flow_values(self.v + v0, a_prime, moved.grid.mesh())
        np.testing.assert_allclose(moved.values, expected, atol=1e-12)
        self.assertLessEqual(residual_norms(residual_chi(moved, self.gas))[0], 1e-9)

    def test_rotate(self):
        """逆時針旋轉 90°：速度變為 Qv，牆邊 left → bottom"""
        field = self.field.with_values(self.field.values,
                                       grid=self.field.grid.model_copy(update={'wall_edges': (WallEdge.LEFT,)}))
        rotated = transform(field, Rotate(quarter_turns=1))
        qv = (-self.v[1], self.v[0])
        expected = uniform_flow_values(qv, -1.0, rotated.grid.mesh())
        np.testing.assert_allclose(rotated.values, expected, atol=1e-12)
        self.assertEqual(rotated.grid.wall_edges, (WallEdge.BOTTOM,))
        self.assertEqual(rotated.grid.dims, (11, 17))

        full_turn = transform(self.field, Rotate(quarter_turns=4))
        np.testing.assert_array_equal(full_turn.values, self.field.values)

    def test_scale(self):
        """縮放 s：速度 s·v、A′ 變為 s²A′"""
        for s in (0.5, 2.0):
            with self.subTest(s=s):
                scaled = transform(self.field, Scale(s=s))
                expected = uniform_flow_values(s * self.v, s ** 2 * -1.0, scaled.grid.mesh())
                np.testing.assert_allclose(scaled.values, expected, atol=1e-12)

    def test_scale_residual(self):
        """A=0 時非解的殘差以 s² 縮放"""
        grid = _square(0.3, 17)
        field = sample_function(grid, lambda xi: -1.0 - 0.5 * np.sum(xi ** 2, axis=-1)
                                + 0.1 * xi[..., 0] ** 3)
        base = residual_chi(field, self.gas).values
        for s in (0.5, 2.0):
            with self.subTest(s=s):
                scaled = residual_chi(transform(field, Scale(s=s)), self.gas).values
                np.testing.assert_allclose(scaled, s ** 2 * base, rtol=1e-9, atol=1e-12)

    def test_translate_dimension_mismatch(self):
        with self.assertRaises(PreconditionError):
            transform(self.field, Translate(v0=(0.1,)))


class TestReflection(unittest.TestCase):
    """測試牆面偶反射"""

    def setUp(self):
        self.gas = GasModel(gamma=2.0, c0=1.0)
        self.grid = GridSpec.from_extent([(0.0, 0.5), (-0.25, 0.25)], [17, 9], wall_edges=('left',))

    def test_reflect_uniform_flow(self):
        """v 平行於牆時反射結果即為加倍區域上的均勻流"""
        field = uniform_flow((0.0, 0.2), -1.0, self.gas, self.grid)
        full = reflect_even(field, WallEdge.LEFT)
        self.assertEqual(full.grid.dims, (33, 9))
        self.assertAlmostEqual(full.grid.origin[0], -0.5)
        self.assertEqual(full.grid.wall_edges, ())
        expected = uniform_flow_values((0.0, 0.2), -1.0, full.grid.mesh())
        np.testing.assert_allclose(full.values, expected, atol=1e-14)

    def test_restrict_half_inverts_reflect(self):
        field = uniform_flow((0.0, 0.2), -1.0, self.gas, self.grid)
        half = restrict_half(reflect_even(field, WallEdge.LEFT), WallEdge.LEFT)
        self.assertEqual(half.grid.wall_edges, (WallEdge.LEFT,))
        self.assertAlmostEqual(half.grid.origin[0], 0.0)
        np.testing.assert_array_equal(half.values, field.values)

    def test_reflect_high_edge(self):
        grid = GridSpec.from_extent([(-0.5, 0.0), (-0.25, 0.25)], [17, 9], wall_edges=('right',))
        field = uniform_flow((0.0, 0.2), -1.0, self.gas, grid)
        full = reflect_even(field, WallEdge.RIGHT)
        expected = uniform_flow_values((0.0, 0.2), -1.0, full.grid.mesh())
        np.testing.assert_allclose(full.values, expected, atol=1e-14)

    def test_slip_violation(self):
        """法向速度不為 0 時拒絕反射"""
        field = uniform_flow((0.5, 0.0), -1.0, self.gas, self.grid)
        with self.assertRaises(ReflectionError):
            reflect_even(field, WallEdge.LEFT)

    def test_reflected_edge_is_no_longer_wall(self):
        """反射後原牆成為內部線，不能再對同一邊反射"""
        field = uniform_flow((0.0, 0.2), -1.0, self.gas, self.grid)
        full = reflect_even(field, WallEdge.LEFT)
        with self.assertRaises(PreconditionError):
            reflect_even(full, WallEdge.LEFT)
        with self.assertRaises(PreconditionError):
            reflect_even(field, WallEdge.BOTTOM)


if __name__ == '__main__':
    unittest.main()
