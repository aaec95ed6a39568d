"""Tests for measurement types and the stacked inequality builders."""

import numpy as np
import pytest

from robust_consensus.errors import (
    DimensionMismatch,
    MixedResidualArity,
    NonpositiveDelta,
    NonpositiveDepth,
)
from robust_consensus.residuals import (
    DepthBounds,
    LinearMeasurement,
    Norm,
    QuasiConvexResidual,
    build_linear_system,
    build_quasiconvex_system,
    eval_residual,
    kronecker_selector,
)


def _unit_residual(norm_p=Norm.L1, depth_bounds=None):
    """``||(x1, x2)||_p / 1`` over two unknowns."""
    return QuasiConvexResidual(
        u=[1.0, 0.0],
        u_tilde=0.0,
        v=[0.0, 1.0],
        v_tilde=0.0,
        w=[0.0, 0.0],
        w_tilde=1.0,
        norm_p=norm_p,
        depth_bounds=depth_bounds,
    )


def _random_residual(rng, dim, norm_p):
    return QuasiConvexResidual(
        u=rng.normal(size=dim),
        u_tilde=rng.normal(),
        v=rng.normal(size=dim),
        v_tilde=rng.normal(),
        w=rng.normal(size=dim),
        w_tilde=rng.uniform(1.0, 3.0),
        norm_p=norm_p,
    )


class TestLinearSystem:
    def test_single_measurement_rows(self):
        system = build_linear_system([LinearMeasurement([1.0], 0.0)], 1.0)
        np.testing.assert_allclose(system.A.toarray(), [[1.0], [-1.0]])
        np.testing.assert_allclose(system.b, [1.0, 1.0])
        assert system.kappa == 2
        assert (system.M, system.N) == (1, 1)

    def test_two_dimensional_measurement_rows(self):
        system = build_linear_system([LinearMeasurement([2.0, -1.0], 3.0)], 0.5)
        np.testing.assert_allclose(system.A.toarray(), [[2.0, -1.0], [-2.0, 1.0]])
        np.testing.assert_allclose(system.b, [3.5, -2.5])

    def test_rows_feasible_exactly_for_inliers(self, four_point_system):
        x = np.array([0.0])
        assert np.all(four_point_system.block_violation(x)[:3] <= 0)
        assert four_point_system.block_violation(x)[3] == pytest.approx(9.0)
        np.testing.assert_allclose(four_point_system.residual_values(x), [0, 0, 0, 10])

    def test_measurement_of_row(self, four_point_system):
        np.testing.assert_array_equal(
            four_point_system.measurement_of_row, [0, 0, 1, 1, 2, 2, 3, 3]
        )
        assert four_point_system.rows_of(2) == slice(4, 6)

    def test_subsystem_keeps_requested_blocks(self, four_point_system):
        sub = four_point_system.subsystem([3, 0])
        assert sub.M == 2
        np.testing.assert_allclose(sub.b, [11.0, -9.0, 1.0, 1.0])
        assert sub.measurements[0].y == 10.0

    def test_nonpositive_delta(self):
        with pytest.raises(NonpositiveDelta):
            build_linear_system([LinearMeasurement([1.0], 0.0)], 0.0)

    def test_dimension_mismatch(self):
        measurements = [LinearMeasurement([1.0], 0.0), LinearMeasurement([1.0, 2.0], 0.0)]
        with pytest.raises(DimensionMismatch):
            build_linear_system(measurements, 1.0)

    def test_empty_measurement_list(self):
        with pytest.raises(DimensionMismatch):
            build_linear_system([], 1.0)

    def test_zero_coefficient_vector(self):
        with pytest.raises(ValueError, match="nonzero"):
            LinearMeasurement([0.0, 0.0], 1.0)


class TestQuasiConvexSystem:
    def test_l1_unit_rows(self):
        system = build_quasiconvex_system([_unit_residual()], 1.0)
        np.testing.assert_allclose(
            system.A.toarray(), [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]
        )
        np.testing.assert_allclose(system.b, np.ones(4))
        assert system.kappa == 4

    def test_linf_unit_rows(self):
        system = build_quasiconvex_system([_unit_residual(Norm.LINF)], 1.0)
        np.testing.assert_allclose(
            system.A.toarray(), [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
        )
        np.testing.assert_allclose(system.b, np.ones(4))

    def test_depth_rows_follow_norm_rows(self):
        residual = QuasiConvexResidual(
            u=[1.0],
            u_tilde=0.0,
            v=[0.0],
            v_tilde=0.0,
            w=[1.0],
            w_tilde=2.0,
            depth_bounds=DepthBounds(0.5, 10.0),
        )
        system = build_quasiconvex_system([residual], 0.1)
        assert system.kappa == 6
        np.testing.assert_allclose(system.A.toarray()[4:], [[-1.0], [1.0]])
        np.testing.assert_allclose(system.b[4:], [1.5, 8.0])

    def test_blocks_are_interleaved_per_residual(self):
        residuals = [_unit_residual(), _unit_residual()]
        system = build_quasiconvex_system(residuals, 1.0)
        np.testing.assert_array_equal(system.measurement_of_row, [0] * 4 + [1] * 4)
        np.testing.assert_allclose(system.A.toarray()[:4], system.A.toarray()[4:])

    def test_mixed_norms_rejected(self):
        with pytest.raises(MixedResidualArity):
            build_quasiconvex_system([_unit_residual(), _unit_residual(Norm.LINF)], 1.0)

    def test_mixed_depth_bounds_rejected(self):
        residuals = [_unit_residual(), _unit_residual(depth_bounds=DepthBounds())]
        with pytest.raises(MixedResidualArity):
            build_quasiconvex_system(residuals, 1.0)

    def test_nonpositive_delta(self):
        with pytest.raises(NonpositiveDelta):
            build_quasiconvex_system([_unit_residual()], -1.0)

    def test_crossed_depth_bounds(self):
        with pytest.raises(ValueError, match="d_min"):
            DepthBounds(5.0, 1.0)

    def test_zero_depth_lookup(self):
        def homogeneous(depth_bounds=None):
            return QuasiConvexResidual(
                u=[0.0, 1.0],
                u_tilde=0.0,
                v=[0.0, 0.0],
                v_tilde=0.0,
                w=[1.0, 0.0],
                w_tilde=0.0,
                depth_bounds=depth_bounds,
            )

        system = build_quasiconvex_system([homogeneous(), homogeneous()], 0.1)
        assert system.depth_free
        assert system.zero_depth(np.zeros(2), [0, 1], 1e-6) == [0, 1]
        assert system.zero_depth(np.array([2.0, 0.0]), [0, 1], 1e-6) == []
        bounded = build_quasiconvex_system([homogeneous(DepthBounds())], 0.1)
        assert not bounded.depth_free
        assert bounded.zero_depth(np.zeros(2), [0], 1e-6) == []
        assert not build_linear_system([LinearMeasurement([1.0], 0.0)], 1.0).depth_free

    @pytest.mark.parametrize("norm_p", list(Norm))
    @pytest.mark.parametrize("seed", range(8))
    def test_rows_agree_with_evaluator(self, norm_p, seed):
        rng = np.random.default_rng(seed)
        dim = 4
        residuals = [_random_residual(rng, dim, norm_p) for _ in range(6)]
        delta = 1.5
        system = build_quasiconvex_system(residuals, delta)
        for _ in range(20):
            x = rng.normal(size=dim)
            values = system.residual_values(x)
            feasible = system.block_violation(x) <= 1e-12
            clear = np.abs(values - delta) > 1e-9
            np.testing.assert_array_equal(feasible[clear], (values <= delta)[clear])


class TestEvalResidual:
    def _residual(self, norm_p):
        return QuasiConvexResidual(
            u=[1.0], u_tilde=2.0, v=[1.0], v_tilde=3.0, w=[1.0], w_tilde=3.0, norm_p=norm_p
        )

    def test_l1_value(self):
        assert eval_residual(self._residual(Norm.L1), np.array([1.0])) == pytest.approx(7 / 4)

    def test_linf_value(self):
        assert eval_residual(self._residual(Norm.LINF), np.array([1.0])) == pytest.approx(1.0)

    def test_nonpositive_depth_raises(self):
        with pytest.raises(NonpositiveDepth):
            eval_residual(self._residual(Norm.L1), np.array([-3.0]))

    def test_residual_values_mark_bad_depth_as_inf(self):
        system = build_quasiconvex_system([self._residual(Norm.L1)], 1.0)
        assert system.residual_values(np.array([-5.0]))[0] == np.inf

    def test_coefficient_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            QuasiConvexResidual(
                u=[1.0, 0.0], u_tilde=0.0, v=[1.0], v_tilde=0.0, w=[1.0, 0.0], w_tilde=1.0
            )


class TestKroneckerSelector:
    def test_shape_and_row_sums(self):
        J = kronecker_selector(3, 4)
        assert J.shape == (3, 12)
        np.testing.assert_allclose(np.asarray(J.sum(axis=1)).ravel(), [4, 4, 4])

    def test_transpose_repeats_slack(self):
        s = np.array([0.5, 2.0, 0.0])
        np.testing.assert_allclose(kronecker_selector(3, 2).T @ s, np.repeat(s, 2))

    def test_system_selector_matches(self, four_point_system):
        assert four_point_system.selector().shape == (4, 8)
