#!/usr/bin/env python3
"""
Tests for seeded scenario generation.
"""

import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from morita_tests.conftest import unit_matrix
from src.morita.bimodule import validate_pair
from src.morita.errors import ScenarioError, ValidationError
from src.morita.fdca import matrix_amplification
from src.morita.generator import (
    PRESETS,
    InclusionSpec,
    Scenario,
    build_inclusion,
    build_map,
    build_pair,
    draw_projection,
    generate,
    preset,
    random_bimodule_map,
    rotated_corner_pair,
)
from utils.config import MAX_AMPLIFICATION, MAX_RETRIES

SCALARS = InclusionSpec((1,), (2,), ((2,),))


@pytest.mark.unit
class TestInclusionSpec:
    """Test multi-matrix inclusion specs."""

    @pytest.mark.parametrize("spec,dims", [
        (SCALARS, (1, 4)),
        (InclusionSpec((1, 1), (2,), ((1, 1),)), (2, 4)),
        (InclusionSpec((1, 1), (2, 1), ((1, 1), (0, 1))), (2, 5)),
        (InclusionSpec((1,), (2,), ((2,),), multiplicity=2), (1, 4)),
    ])
    def test_dimensions(self, spec, dims):
        inc = build_inclusion(spec)
        assert (inc.small.dim, inc.large.dim) == dims
        assert inc.ambient_dim == spec.ambient_dim

    def test_embedding_must_fill_blocks(self):
        with pytest.raises(ScenarioError):
            InclusionSpec((1,), (2,), ((1,),)).check()

    def test_embedding_shape(self):
        with pytest.raises(ScenarioError):
            InclusionSpec((1,), (2,), ((2, 0),)).check()

    def test_unembedded_summand(self):
        with pytest.raises(ScenarioError):
            InclusionSpec((1, 1), (2,), ((2, 0),)).check()


@pytest.mark.unit
class TestScenario:
    """Test scenario validation."""

    def test_presets_are_valid(self):
        for scenario in PRESETS.values():
            scenario.check()

    def test_unknown_map_kind(self):
        with pytest.raises(ScenarioError):
            Scenario(1, SCALARS, 2, (1,), "bogus").check()

    def test_amplification_ceiling(self):
        with pytest.raises(ScenarioError):
            Scenario(1, SCALARS, MAX_AMPLIFICATION + 1, (1,), "trace_ce").check()

    def test_zero_rank_is_not_full(self):
        with pytest.raises(ScenarioError, match="not full"):
            Scenario(1, InclusionSpec((1, 1), (2,), ((1, 1),)), 2, (1, 0), "trace_ce").check()

    def test_rank_too_large(self):
        with pytest.raises(ScenarioError):
            Scenario(1, SCALARS, 2, (3,), "trace_ce").check()

    def test_weights_length(self):
        with pytest.raises(ScenarioError):
            Scenario(1, SCALARS, 2, (1,), "weighted_trace", weights=(1.0,)).check()

    def test_unknown_preset(self):
        with pytest.raises(ScenarioError):
            preset("nope")

    def test_preset_seed_override(self):
        assert preset("corner-m2", seed=42).seed == 42
        assert preset("corner-m2").seed == PRESETS["corner-m2"].seed


@pytest.mark.unit
class TestProjections:
    """Test full projections drawn in M_n(A)."""

    def test_projection_properties(self):
        spec = InclusionSpec((1, 1), (2,), ((1, 1),))
        inc = build_inclusion(spec)
        p = draw_projection(spec, 2, (1, 2), np.random.default_rng(0))
        np.testing.assert_allclose(p @ p, p, atol=1e-10)
        np.testing.assert_allclose(p, p.conj().T, atol=1e-12)
        assert matrix_amplification(inc.small, 2).contains(p)
        assert np.trace(p).real == pytest.approx(3.0)

    def test_untwisted_projection(self):
        p = draw_projection(SCALARS, 2, (1,), np.random.default_rng(0), twist=False)
        np.testing.assert_allclose(p, np.kron(unit_matrix(2, 0, 0), np.eye(2)), atol=1e-12)

    def test_build_pair(self, scalars_in_m2):
        scenario = Scenario(3, SCALARS, 3, (2,), "trace_ce")
        pair = build_pair(scalars_in_m2, scenario, np.random.default_rng(3))
        assert validate_pair(pair).passed

    def test_rejected_draws_are_retried(self, scalars_in_m2, mocker):
        """Every draw is rejected: the retries are used up, then the scenario fails."""
        maker = mocker.patch("src.morita.generator.make_corner_pair", side_effect=ValidationError("p is not full"))
        scenario = Scenario(1, SCALARS, 2, (1,), "trace_ce")
        with pytest.raises(ScenarioError):
            build_pair(scalars_in_m2, scenario, np.random.default_rng(1))
        assert maker.call_count == MAX_RETRIES

    def test_rotated_corner_pair(self, diagonals_in_m2):
        pair = rotated_corner_pair(diagonals_in_m2, 4, n=3, rank=2)
        p = pair.right.small.unit
        assert validate_pair(pair).passed
        assert matrix_amplification(diagonals_in_m2.small, 3).contains(p)
        assert np.trace(p).real == pytest.approx(4.0)
        assert np.max(np.abs(p - np.diag(np.diag(p)))) > 1e-6
        again = rotated_corner_pair(diagonals_in_m2, 4, n=3, rank=2)
        np.testing.assert_allclose(again.right.small.unit, p, atol=1e-12)

    def test_rotated_corner_pair_rank(self, scalars_in_m2):
        with pytest.raises(ScenarioError):
            rotated_corner_pair(scalars_in_m2, 0, n=2, rank=0)


@pytest.mark.unit
class TestMaps:
    """Test generated bimodule maps."""

    def test_bimodule_maps_on_equal_algebras_are_scalar(self, m2_in_m2):
        phi = random_bimodule_map(m2_in_m2, np.random.default_rng(0))
        lam = phi(np.eye(2))[0, 0]
        np.testing.assert_allclose(phi(unit_matrix(2, 0, 1)), lam * unit_matrix(2, 0, 1), atol=1e-9)

    def test_random_map_is_bimodular(self, multiblock):
        phi = random_bimodule_map(multiblock, 7)
        assert phi.coeffs.shape == (2, 5)
        assert phi.bimodule_residual() < 1e-9

    def test_trivial_map_space(self, scalars_in_m2, mocker):
        mocker.patch("src.morita.generator.nullspace", return_value=np.zeros((4, 0)))
        phi = random_bimodule_map(scalars_in_m2, 0)
        assert not np.any(phi.coeffs)

    def test_weights_must_be_positive(self, scalars_in_m2):
        scenario = Scenario(1, SCALARS, 2, (1,), "weighted_trace", weights=(1.0, -1.0))
        with pytest.raises(ScenarioError):
            build_map(scalars_in_m2, scenario, np.random.default_rng(1))

    def test_shifted_map_has_weight(self, scalars_in_m2):
        scenario = Scenario(1, SCALARS, 2, (1,), "shifted")
        phi, h = build_map(scalars_in_m2, scenario, np.random.default_rng(1))
        assert h is not None
        assert phi.bimodule_residual() < 1e-9


@pytest.mark.integration
class TestGenerate:
    """Test whole bundles."""

    def test_deterministic(self):
        first = generate(preset("diag-m2"))
        second = generate(preset("diag-m2"))
        assert np.array_equal(first.pair.Y.basis, second.pair.Y.basis)
        assert np.array_equal(first.phi.coeffs, second.phi.coeffs)

    def test_default_name(self):
        assert generate(preset("trivial")).name == f"trace_ce-{PRESETS['trivial'].seed}"

    def test_quasi_basis_only_for_expectations(self, bundles):
        assert bundles["corner-m2"].quasi_basis is not None
        assert bundles["weighted-m2"].quasi_basis is not None
        assert bundles["multiblock"].quasi_basis is None
        assert bundles["diag-m2"].quasi_basis is None

    def test_weighted_bundle_keeps_weight(self, bundles):
        np.testing.assert_allclose(bundles["weighted-m2"].weight, np.diag([2 / 3, 1 / 3]))


if __name__ == "__main__":
    pytest.main([__file__])
