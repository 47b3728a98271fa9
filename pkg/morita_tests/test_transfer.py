#!/usr/bin/env python3
"""
Tests for the transfer of bimodule maps and the properties it preserves.
"""

import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from morita_tests.conftest import unit_matrix
from src.morita.bimodule import corner_realization, trivial_pair, unitary_twist, is_equivalent
from src.morita.generator import generate, preset, random_bimodule_map, rotated_corner_pair
from src.morita.maps import BimoduleMap, maps_residual
from src.morita.transfer import (
    amplification_check,
    ce_check,
    check_positivity_transfer,
    composition_check,
    corner_report,
    derive_lower_bound,
    f_forward,
    f_inverse,
    f_via_corner,
    invariance_check,
    is_conditional_expectation,
    isometry_check,
    linearity_check,
    map_norm_estimate,
    pairing_gap,
    pimsner_popa_transfer,
    tau_closed_form,
    tau_from_phi,
    transfer,
    uniqueness_check,
)

E11 = unit_matrix(2, 0, 0)
P_CORNER = np.kron(E11, np.eye(2))


@pytest.fixture(scope="module")
def corner_psi(corner_pair, trace_ce):
    return f_forward(corner_pair, trace_ce)


@pytest.mark.unit
class TestTransfer:
    """Test f and its defining identities."""

    def test_conditions_hold(self, corner_pair, trace_ce):
        _, _, report = transfer(corner_pair, trace_ce)
        assert report.passed, report.render_text()

    def test_corner_image_of_trace_expectation(self, corner_psi):
        """On pM_2(M_2)p the transferred map is again the normalized trace."""
        np.testing.assert_allclose(corner_psi(np.kron(E11, E11)), P_CORNER / 2, atol=1e-9)
        np.testing.assert_allclose(corner_psi(P_CORNER), P_CORNER, atol=1e-9)

    def test_trivial_pair_leaves_map_unchanged(self, scalars_in_m2, trace_ce):
        psi = f_forward(trivial_pair(scalars_in_m2), trace_ce)
        xs = scalars_in_m2.large.basis
        np.testing.assert_allclose(psi(xs), trace_ce(xs), atol=1e-9)

    def test_closed_form_tau(self, corner_pair, trace_ce):
        solved = tau_from_phi(corner_pair, trace_ce)
        closed = tau_closed_form(corner_pair, trace_ce)
        np.testing.assert_allclose(closed.coeffs, solved.coeffs, atol=1e-9)

    def test_inverse_transfer(self, corner_pair, trace_ce, corner_psi):
        back = f_inverse(corner_pair, corner_psi)
        assert maps_residual(back, trace_ce) < 1e-9

    def test_zero_map(self, scalars_in_m2, corner_pair):
        psi = f_forward(corner_pair, BimoduleMap.zero(scalars_in_m2))
        assert np.max(np.abs(psi.coeffs)) < 1e-12

    def test_linearity(self, scalars_in_m2, corner_pair, trace_ce):
        other = random_bimodule_map(scalars_in_m2, np.random.default_rng(5))
        assert linearity_check(corner_pair, trace_ce, other).passed

    def test_corner_route_agrees(self, corner_pair, trace_ce, corner_psi):
        real = corner_realization(corner_pair)
        assert maps_residual(corner_psi, f_via_corner(real, trace_ce)) < 1e-9
        assert corner_report(real, trace_ce, corner_psi).passed

    def test_uniqueness(self, corner_pair, trace_ce, corner_psi):
        assert pairing_gap(corner_pair) > 0
        report = uniqueness_check(corner_pair, trace_ce, corner_psi)
        assert report.passed, report.render_text()
        assert len(report.entries) == 3


@pytest.mark.unit
class TestPreservedProperties:
    """Test norm, positivity and expectation properties of f(φ)."""

    def test_norm_of_expectation(self, trace_ce):
        norm, count = map_norm_estimate(trace_ce, samples=500)
        assert norm == pytest.approx(1.0, abs=1e-9)
        assert count >= 500

    def test_isometry(self, corner_pair, trace_ce, corner_psi):
        report = isometry_check(corner_pair, trace_ce, corner_psi, samples=500)
        assert report.passed, report.render_text()

    def test_positivity(self, corner_pair, trace_ce, corner_psi):
        report = check_positivity_transfer(corner_pair, trace_ce, corner_psi, samples=200)
        checks = {e.check for e in report.entries}
        assert {"positivity.selfadjoint", "positivity.positive", "positivity.2_positive"} <= checks
        assert report.passed

    def test_expectation_transfers(self, corner_pair, trace_ce, corner_psi):
        assert is_conditional_expectation(trace_ce)
        assert is_conditional_expectation(corner_psi)
        assert ce_check(corner_pair, trace_ce, corner_psi).passed

    def test_zero_map_is_not_an_expectation(self, scalars_in_m2):
        assert not is_conditional_expectation(BimoduleMap.zero(scalars_in_m2))

    def test_pimsner_popa_constants(self, corner_pair, trace_ce, corner_psi):
        assert derive_lower_bound(trace_ce, samples=200) == pytest.approx(0.5, abs=0.05)
        s, report = pimsner_popa_transfer(corner_pair, trace_ce, corner_psi, samples=200)
        assert report.passed
        assert s == pytest.approx(0.5, abs=0.05)

    def test_amplification(self, corner_pair, trace_ce, corner_psi):
        assert amplification_check(corner_pair, trace_ce, corner_psi, k=2).passed


@pytest.mark.integration
class TestCompositionAndInvariance:
    """Test transfer along composite and equivalent pairs."""

    @pytest.mark.parametrize("seed", [3, 17])
    def test_composition(self, corner_pair, trace_ce, seed):
        second = rotated_corner_pair(corner_pair.right, seed)
        p = second.right.small.unit
        assert np.max(np.abs(p[:4, 4:])) > 1e-6
        report = composition_check(corner_pair, second, trace_ce)
        assert report.passed, report.render_text()

    def test_invariance_under_twist(self, corner_pair, trace_ce):
        twisted = unitary_twist(corner_pair, 1j * np.eye(2))
        found, witness = is_equivalent(corner_pair, twisted)
        assert found
        assert invariance_check(corner_pair, twisted, witness, trace_ce).passed

    def test_invariance_under_block_twist(self, bundles):
        bundle = bundles["multiblock"]
        pair, phi = bundle.pair, bundle.phi
        twisted = unitary_twist(pair, np.diag([1.0, 1.0, -1.0]).astype(complex))
        found, witness = is_equivalent(pair, twisted)
        assert found
        assert invariance_check(pair, twisted, witness, phi).passed
        assert maps_residual(f_forward(pair, phi), f_forward(twisted, phi)) <= 1e-9 * max(phi.scale, 1.0)

    def test_missing_witness_fails(self, corner_pair, trace_ce):
        report = invariance_check(corner_pair, corner_pair, None, trace_ce)
        assert not report.passed

    def test_generated_bundles(self, bundles):
        for name, bundle in bundles.items():
            _, _, report = transfer(bundle.pair, bundle.phi)
            assert report.passed, f"{name}: {report.worst()}"


@pytest.mark.slow
class TestSeededSweep:
    """Test the transfer conditions over freshly seeded instances of every preset."""

    NAMES = ("trivial", "corner-m2", "diag-m2", "weighted-m2", "multiblock")

    @pytest.mark.parametrize("seed", range(100, 124))
    def test_conditions_hold(self, seed):
        name = self.NAMES[seed % len(self.NAMES)]
        bundle = generate(preset(name, seed), name)
        _, _, report = transfer(bundle.pair, bundle.phi)
        assert report.passed, f"{name} seed {seed}: {report.worst()}"


if __name__ == "__main__":
    pytest.main([__file__])
