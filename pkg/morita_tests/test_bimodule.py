#!/usr/bin/env python3
"""
Tests for equivalence pairs, frames and corner realizations.
"""

import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from morita_tests.conftest import unit_matrix
from src.morita.bimodule import (
    amplify_pair,
    conjugate,
    corner_realization,
    frame_residual,
    fullness_witnesses,
    is_equivalent,
    left_frame,
    make_corner_pair,
    reconstruction_residual,
    right_frame,
    same_spans,
    tensor_compose,
    trivial_pair,
    unitary_twist,
    validate_pair,
    validate_realization,
)
from src.morita.errors import ShapeMismatchError, ValidationError
from src.morita.fdca import matrix_amplification
from src.morita.generator import rotated_corner_pair

P_CORNER = np.kron(unit_matrix(2, 0, 0), np.eye(2))


@pytest.mark.unit
class TestCornerPairs:
    """Test corner pair construction."""

    def test_corner_pair_is_valid(self, corner_pair):
        report = validate_pair(corner_pair)
        assert report.passed, report.render_text()

    def test_corner_pair_dimensions(self, corner_pair):
        assert corner_pair.X.dim == 1
        assert corner_pair.Y.dim == 4
        assert corner_pair.right.small.dim == 1
        assert corner_pair.right.large.dim == 4
        assert corner_pair.shape == (2, 4)

    def test_trivial_pair(self, diagonals_in_m2):
        pair = trivial_pair(diagonals_in_m2)
        assert validate_pair(pair).passed
        assert pair.X.dim == diagonals_in_m2.small.dim
        assert pair.Y.dim == diagonals_in_m2.large.dim

    def test_not_a_projection(self, scalars_in_m2):
        with pytest.raises(ValidationError):
            make_corner_pair(scalars_in_m2, 2, 2 * P_CORNER)

    def test_projection_outside_amplified_algebra(self, scalars_in_m2):
        p = np.kron(unit_matrix(2, 0, 0), unit_matrix(2, 0, 0))
        with pytest.raises(ValidationError):
            make_corner_pair(scalars_in_m2, 2, p)

    def test_zero_projection_is_not_full(self, scalars_in_m2):
        with pytest.raises(ValidationError):
            make_corner_pair(scalars_in_m2, 2, np.zeros((4, 4)))

    def test_projection_shape(self, scalars_in_m2):
        with pytest.raises(ShapeMismatchError):
            make_corner_pair(scalars_in_m2, 2, np.eye(2))

    def test_fullness_witnesses(self, scalars_in_m2):
        amp = matrix_amplification(scalars_in_m2.small, 2)
        a, b = fullness_witnesses(amp, P_CORNER)
        total = np.einsum("rpq,qs,rst->pt", a, P_CORNER, b)
        np.testing.assert_allclose(total, np.eye(4), atol=1e-9)


@pytest.mark.unit
class TestFrames:
    """Test right and left frames of X."""

    def test_right_frame(self, corner_pair):
        frame = right_frame(corner_pair)
        assert frame.side == "right"
        assert frame_residual(corner_pair, frame) < 1e-9
        assert reconstruction_residual(corner_pair, frame) < 1e-9

    def test_left_frame(self, diagonals_in_m2):
        pair = trivial_pair(diagonals_in_m2)
        frame = left_frame(pair)
        assert frame.side == "left"
        assert frame_residual(pair, frame) < 1e-9
        assert reconstruction_residual(pair, frame) < 1e-9

    def test_generated_frames(self, bundles):
        for name, bundle in bundles.items():
            frame = right_frame(bundle.pair)
            assert frame_residual(bundle.pair, frame) < 1e-9, name
            assert reconstruction_residual(bundle.pair, frame) < 1e-9, name


@pytest.mark.integration
class TestCornerRealization:
    """Test the isomorphism of a pair with its corner form."""

    def test_realization_of_corner_pair(self, corner_pair):
        real = corner_realization(corner_pair)
        assert real.n == 1
        assert validate_realization(real).passed

    def test_realizations_of_presets(self, bundles):
        for name, bundle in bundles.items():
            report = validate_realization(corner_realization(bundle.pair))
            assert report.passed, f"{name}: {report.worst()}"

    def test_psi_D_round_trip(self, bundles):
        real = corner_realization(bundles["diag-m2"].pair)
        D = real.pair.right.large.basis
        np.testing.assert_allclose(real.invert_psi_D(real.apply_psi_D(D)), D, atol=1e-9)


@pytest.mark.unit
class TestPairOperations:
    """Test conjugation, amplification, composition and equivalence."""

    def test_conjugate_pair(self, corner_pair):
        conj = conjugate(corner_pair)
        assert conj.shape == (4, 2)
        assert validate_pair(conj).passed

    def test_amplified_pair(self, corner_pair):
        amp = amplify_pair(corner_pair, 2)
        assert amp.X.dim == 4 * corner_pair.X.dim
        assert validate_pair(amp).passed

    def test_composition_with_trivial_pair(self, scalars_in_m2, corner_pair):
        composite = tensor_compose(trivial_pair(scalars_in_m2), corner_pair)
        assert same_spans(composite, corner_pair) < 1e-9

    def test_composition_needs_matching_middle(self, corner_pair):
        with pytest.raises(ValidationError):
            tensor_compose(corner_pair, corner_pair)

    def test_twist_must_commute_with_C(self, corner_pair):
        flip = np.array([[0.0, 1.0], [1.0, 0.0]])
        with pytest.raises(ValidationError):
            unitary_twist(corner_pair, flip)

    def test_pair_equivalent_to_itself(self, corner_pair):
        found, witness = is_equivalent(corner_pair, corner_pair)
        assert found
        assert witness.shape == (4, 4)

    def test_twisted_pair_is_equivalent(self, corner_pair):
        twisted = unitary_twist(corner_pair, 1j * np.eye(2))
        found, _ = is_equivalent(corner_pair, twisted)
        assert found

    def test_block_twist_is_equivalent(self, bundles):
        pair = bundles["multiblock"].pair
        twisted = unitary_twist(pair, np.diag([1.0, 1.0, -1.0]).astype(complex))
        assert same_spans(pair, twisted) > 1e-6
        found, witness = is_equivalent(pair, twisted)
        assert found
        np.testing.assert_allclose(witness @ witness.conj().T, pair.right.large.unit, atol=1e-6)

    @pytest.mark.parametrize("seed", [5, 29])
    def test_composition_is_associative(self, corner_pair, seed):
        rng = np.random.default_rng(seed)
        second = rotated_corner_pair(corner_pair.right, rng)
        third = rotated_corner_pair(second.right, rng)
        left_first = tensor_compose(tensor_compose(corner_pair, second), third)
        right_first = tensor_compose(corner_pair, tensor_compose(second, third))
        assert same_spans(left_first, right_first) <= 1e-9
        found, _ = is_equivalent(left_first, right_first)
        assert found

    def test_different_pairs_are_not_equivalent(self, scalars_in_m2, corner_pair):
        found, witness = is_equivalent(corner_pair, trivial_pair(scalars_in_m2))
        assert not found
        assert witness is None


if __name__ == "__main__":
    pytest.main([__file__])
