import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from formsim import (
    Framework,
    MotionParameters,
    ReferenceShape,
    RigidityError,
    SensingGraph,
    Unreachable,
    bearings,
    distance_rate_map,
    induced_velocities,
    induced_velocity_matrix,
    motion_spaces,
    null_space,
    parameter_matrix,
    project_out,
    rotation_field,
    rotation_params,
    scaling_params,
    translation_params,
)
from conftest import SCALE_PATTERN, SPIN_PATTERN, SQUARE_EDGES, SQUARE_POINTS


def subspace_projector(basis):
    return basis @ basis.T


class TestMotionParameters:
    def test_stacked_round_trip(self):
        pv = MotionParameters([1.0, 2.0], [3.0, 4.0])
        np.testing.assert_array_equal(pv.stacked(), [1.0, 2.0, 3.0, 4.0])
        again = MotionParameters.from_stacked(pv.stacked())
        np.testing.assert_array_equal(again.tail, pv.tail)
        np.testing.assert_array_equal(again.head, pv.head)

    def test_add_and_scale(self):
        a = MotionParameters([1.0], [2.0])
        b = MotionParameters([10.0], [20.0])
        total = a + b.scaled(0.5)
        np.testing.assert_array_equal(total.tail, [6.0])
        np.testing.assert_array_equal(total.head, [12.0])

    def test_size_mismatch_rejected(self):
        with pytest.raises(ValueError):
            MotionParameters([1.0, 2.0], [3.0])


class TestParameterMatrix:
    def test_zero_offsets(self, square_graph):
        mat = parameter_matrix(MotionParameters.zero(5), square_graph)
        assert np.array_equal(mat, np.zeros((4, 5)))

    def test_spin_pattern_placement(self, square_graph):
        pv = MotionParameters.from_stacked(SPIN_PATTERN)
        mat = parameter_matrix(pv, square_graph)
        for k, (i, j) in enumerate(SQUARE_EDGES):
            assert mat[i - 1, k] == pv.tail[k]
            assert mat[j - 1, k] == pv.head[k]
        # Exactly two slots per column, matching the incidence support.
        assert np.count_nonzero(mat[:, 0]) == 2
        assert np.count_nonzero(mat[:, 2]) == 0  # idle edge in this pattern

    def test_support_matches_incidence(self, square_graph):
        rng = np.random.default_rng(1)
        pv = MotionParameters(rng.uniform(1, 2, 5), rng.uniform(1, 2, 5))
        from formsim import incidence_matrix

        mat = parameter_matrix(pv, square_graph)
        assert np.array_equal(mat != 0.0, incidence_matrix(square_graph) != 0.0)


class TestInducedVelocityMatrix:
    def test_identity_on_random_inputs(self, square_graph):
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(200):
            units = rng.standard_normal((5, 2))
            units /= np.linalg.norm(units, axis=1)[:, None]
            stacked = rng.standard_normal(10)
            pv = MotionParameters.from_stacked(stacked)
            direct = induced_velocities(pv, square_graph, units.reshape(-1))
            via = induced_velocity_matrix(units.reshape(-1), square_graph) @ stacked
            worst = max(worst, np.linalg.norm(direct - via)
                        / max(np.linalg.norm(direct), 1e-300))
        assert worst <= 1e-12

    def test_tail_column_places_bearing_at_tail_block(self, square_framework):
        unit_vec = bearings(square_framework)
        mat = induced_velocity_matrix(unit_vec, square_framework.graph)
        units = unit_vec.reshape(5, 2)
        for k, (i, _) in enumerate(SQUARE_EDGES):
            column = mat[:, k].reshape(4, 2)
            np.testing.assert_array_equal(column[i - 1], units[k])
            others = np.delete(column, i - 1, axis=0)
            assert np.array_equal(others, np.zeros_like(others))

    def test_shape(self, square_framework):
        mat = induced_velocity_matrix(bearings(square_framework), square_framework.graph)
        assert mat.shape == (8, 10)


class TestNullSpace:
    def test_identity_has_empty_kernel(self):
        assert null_space(np.eye(3)).shape == (3, 0)

    def test_row_vector_kernel(self):
        basis = null_space(np.array([[1.0, 1.0]]))
        assert basis.shape == (2, 1)
        expected = np.array([1.0, -1.0]) / np.sqrt(2.0)
        assert min(np.linalg.norm(basis[:, 0] - expected),
                   np.linalg.norm(basis[:, 0] + expected)) <= 1e-12

    def test_expanded_incidence_kernel_is_translations(self, square_graph):
        from formsim import incidence_matrix

        expanded = np.kron(incidence_matrix(square_graph), np.eye(2))
        basis = null_space(expanded.T)
        assert basis.shape[1] == 2
        # Every kernel vector repeats one planar displacement on all agents.
        for col in basis.T:
            blocks = col.reshape(4, 2)
            np.testing.assert_allclose(blocks, np.tile(blocks[0], (4, 1)), atol=1e-12)

    @given(st.integers(0, 200))
    @settings(max_examples=25, deadline=None)
    def test_kernel_annihilated(self, seed):
        rng = np.random.default_rng(seed)
        mat = rng.standard_normal((3, 6))
        basis = null_space(mat)
        assert basis.shape[1] == 3
        np.testing.assert_allclose(mat @ basis, 0.0, atol=1e-12)
        np.testing.assert_allclose(basis.T @ basis, np.eye(3), atol=1e-12)


class TestProjectOut:
    def test_removes_first_axis(self):
        away = np.array([[1.0], [0.0]])
        candidate = np.array([[1.0], [1.0]])
        result = project_out(away, candidate)
        assert result.shape == (2, 1)
        np.testing.assert_allclose(np.abs(result[:, 0]), [0.0, 1.0], atol=1e-12)

    def test_contained_candidates_vanish(self):
        away = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        candidate = np.array([[2.0], [-1.0], [0.0]])
        assert project_out(away, candidate).shape == (3, 0)

    @given(st.integers(0, 200))
    @settings(max_examples=25, deadline=None)
    def test_output_orthogonal_to_away(self, seed):
        rng = np.random.default_rng(seed)
        away, _ = np.linalg.qr(rng.standard_normal((8, 3)))
        candidates = rng.standard_normal((8, 4))
        result = project_out(away, candidates)
        if result.shape[1]:
            assert np.abs(away.T @ result).max() <= 1e-10
            np.testing.assert_allclose(
                result.T @ result, np.eye(result.shape[1]), atol=1e-10
            )


class TestReferenceShape:
    def test_distances_are_edge_lengths(self, square_ref):
        expected = [15.0, 15.0, 15.0 * np.sqrt(2.0), 15.0, 15.0]
        np.testing.assert_allclose(square_ref.distances, expected, rtol=1e-15)

    def test_rejects_flexible_shape(self):
        graph = SensingGraph(4, ((1, 2), (2, 3), (3, 4), (4, 1)))
        with pytest.raises(RigidityError):
            ReferenceShape(Framework.from_points(graph, SQUARE_POINTS))

    def test_rejects_collinear_shape(self, square_graph):
        points = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]
        with pytest.raises(RigidityError):
            ReferenceShape(Framework.from_points(square_graph, points))


class TestMotionSpaces:
    def test_dimensions_square(self, square_spaces):
        assert square_spaces.zero_motion_basis.shape[1] == 2
        assert square_spaces.translation_basis.shape[1] == 2
        assert square_spaces.rotation_basis.shape[1] == 1
        assert square_spaces.scaling_basis.shape[1] == 1

    def test_dimensions_tetrahedron(self, tetra_ref):
        spaces = tetra_ref.spaces
        assert spaces.zero_motion_basis.shape[1] == 0
        assert spaces.translation_basis.shape[1] == 3
        assert spaces.rotation_basis.shape[1] == 3
        assert spaces.scaling_basis.shape[1] == 1

    def test_bases_orthonormal(self, square_spaces):
        for basis in (square_spaces.zero_motion_basis, square_spaces.translation_basis,
                      square_spaces.rotation_basis, square_spaces.scaling_basis):
            gram = basis.T @ basis
            np.testing.assert_allclose(gram, np.eye(basis.shape[1]), atol=1e-10)

    def test_moving_bases_orthogonal_to_zero_motion(self, square_spaces):
        zero = square_spaces.zero_motion_basis
        for basis in (square_spaces.translation_basis, square_spaces.rotation_basis,
                      square_spaces.scaling_basis):
            assert np.abs(zero.T @ basis).max() <= 1e-10

    def test_rotation_and_scaling_orthogonal_to_translation(self, square_spaces):
        trans = square_spaces.translation_basis
        assert np.abs(trans.T @ square_spaces.rotation_basis).max() <= 1e-10
        assert np.abs(trans.T @ square_spaces.scaling_basis).max() <= 1e-10

    def test_membership_residuals(self, square_ref, square_spaces):
        from formsim import membership_residuals

        residuals = membership_residuals(square_ref, square_spaces)
        assert set(residuals) == {"translation", "rotation", "scaling"}
        assert max(residuals.values()) <= 1e-10

    def test_membership_residuals_tetrahedron(self, tetra_ref):
        from formsim import membership_residuals

        assert max(membership_residuals(tetra_ref, tetra_ref.spaces).values()) <= 1e-10

    def test_translation_moves_all_agents_equally(self, square_ref, square_spaces):
        field = (square_ref.velocity_map @ square_spaces.translation_basis[:, 0]).reshape(4, 2)
        np.testing.assert_allclose(field, np.tile(field[0], (4, 1)), atol=1e-9)

    def test_rotation_field_is_tangential_with_still_centroid(self, square_ref, square_spaces):
        field = (square_ref.velocity_map @ square_spaces.rotation_basis[:, 0]).reshape(4, 2)
        np.testing.assert_allclose(field.mean(axis=0), 0.0, atol=1e-9)
        centered = square_ref.centered_points()
        radial = np.abs((field * centered).sum(axis=1))
        assert radial.max() <= 1e-9 * np.abs(field).max() * np.abs(centered).max()

    def test_scaling_field_is_radial_and_bearing_preserving(self, square_ref, square_spaces):
        field = (square_ref.velocity_map @ square_spaces.scaling_basis[:, 0]).reshape(4, 2)
        centered = square_ref.centered_points()
        cross = field[:, 0] * centered[:, 1] - field[:, 1] * centered[:, 0]
        assert np.abs(cross).max() <= 1e-9
        from formsim.motion import _incidence_expanded, _projector_diagonal
        from formsim.rigidity import unit_edge_vectors

        units = unit_edge_vectors(square_ref.framework)
        edge_rates = _incidence_expanded(square_ref.graph, 2).T @ field.reshape(-1)
        residual = _projector_diagonal(units) @ edge_rates
        assert np.abs(residual).max() <= 1e-9

    def test_dimensions_invariant_under_rotation(self, square_graph):
        angle = 0.83
        rot = np.array([[np.cos(angle), -np.sin(angle)],
                        [np.sin(angle), np.cos(angle)]])
        ref = ReferenceShape(Framework.from_points(square_graph, SQUARE_POINTS @ rot.T))
        spaces = motion_spaces(ref)
        assert spaces.translation_basis.shape[1] == 2
        assert spaces.rotation_basis.shape[1] == 1
        assert spaces.scaling_basis.shape[1] == 1

    def test_spaces_invariant_under_uniform_scaling(self, square_graph, square_spaces):
        ref = ReferenceShape(Framework.from_points(square_graph, 2.5 * SQUARE_POINTS))
        scaled = motion_spaces(ref)
        for mine, theirs in (
            (scaled.translation_basis, square_spaces.translation_basis),
            (scaled.rotation_basis, square_spaces.rotation_basis),
            (scaled.scaling_basis, square_spaces.scaling_basis),
        ):
            gap = np.abs(subspace_projector(mine) - subspace_projector(theirs)).max()
            assert gap <= 1e-9


class TestCalibration:
    def test_zero_targets_give_zero_offsets(self, square_ref, square_spaces):
        for pv in (
            translation_params(square_ref, square_spaces, [0.0, 0.0]),
            rotation_params(square_ref, square_spaces, 0.0),
            scaling_params(square_ref, square_spaces, 0.0),
        ):
            assert np.abs(pv.stacked()).max() == 0.0

    def test_translation_round_trip(self, square_ref, square_spaces):
        target = np.array([1.2, -0.4])
        pv = translation_params(square_ref, square_spaces, target)
        field = induced_velocities(pv, square_ref.graph, bearings(square_ref.framework))
        np.testing.assert_allclose(field.reshape(4, 2), np.tile(target, (4, 1)), atol=1e-9)

    def test_translation_linearity(self, square_ref, square_spaces):
        one = translation_params(square_ref, square_spaces, [0.3, 0.7])
        two = translation_params(square_ref, square_spaces, [0.6, 1.4])
        np.testing.assert_allclose(two.stacked(), 2.0 * one.stacked(), atol=1e-12)

    def test_rotation_round_trip(self, square_ref, square_spaces):
        pv = rotation_params(square_ref, square_spaces, 0.8)
        field = induced_velocities(pv, square_ref.graph, bearings(square_ref.framework))
        expected = rotation_field(square_ref.centered_points(), 0.8)
        np.testing.assert_allclose(field, expected, atol=1e-9)

    def test_rotation_matches_spin_pattern_direction(self, square_ref, square_spaces):
        pv = rotation_params(square_ref, square_spaces, 1.0).stacked()
        cosine = abs(pv @ SPIN_PATTERN) / (np.linalg.norm(pv) * np.linalg.norm(SPIN_PATTERN))
        assert cosine >= 1.0 - 1e-12

    def test_rotation_round_trip_3d(self, tetra_ref):
        spaces = tetra_ref.spaces
        omega = np.array([0.3, -0.5, 1.0])
        pv = rotation_params(tetra_ref, spaces, omega)
        field = induced_velocities(pv, tetra_ref.graph, bearings(tetra_ref.framework))
        expected = rotation_field(tetra_ref.centered_points(), omega)
        np.testing.assert_allclose(field, expected, atol=1e-9)

    def test_scaling_round_trip(self, square_ref, square_spaces):
        rate = 0.25
        pv = scaling_params(square_ref, square_spaces, rate)
        rates = distance_rate_map(square_ref) @ pv.stacked()
        np.testing.assert_allclose(rates, rate * square_ref.distances, atol=1e-9)

    def test_scaling_parallel_to_scale_pattern_modulo_zero_motion(
        self, square_ref, square_spaces
    ):
        pv = scaling_params(square_ref, square_spaces, 1.0).stacked()
        zero = square_spaces.zero_motion_basis
        moving_part = SCALE_PATTERN - zero @ (zero.T @ SCALE_PATTERN)
        cosine = abs(pv @ moving_part) / (np.linalg.norm(pv) * np.linalg.norm(moving_part))
        assert cosine >= 1.0 - 1e-9

    def test_unreachable_translation_raises(self, square_ref, square_spaces):
        # A rotation target cannot be produced from the translation span.
        target = rotation_field(square_ref.centered_points(), 1.0)
        from formsim.motion import _fit_in_span

        with pytest.raises(Unreachable):
            _fit_in_span(square_spaces.translation_basis,
                         square_ref.velocity_map, target, "translation")
