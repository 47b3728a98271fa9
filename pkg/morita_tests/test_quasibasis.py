#!/usr/bin/env python3
"""
Tests for quasi-bases, the index and their transfer to the corner.
"""

import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from morita_tests.conftest import unit_matrix
from src.morita.bimodule import corner_realization
from src.morita.errors import ConditioningError
from src.morita.fdca import trace_conditional_expectation, weighted_conditional_expectation
from src.morita.maps import BimoduleMap
from src.morita.quasibasis import (
    QuasiBasis,
    construct_for_ce,
    index_report,
    pull_back_quasi_basis,
    quasi_basis_residuals,
    transfer_quasi_basis,
    verify_quasi_basis,
    watatani_index,
)
from src.morita.transfer import F_corner, f_forward


def matrix_unit_basis(size):
    """√n·e_ij paired with √n·e_ji: a quasi-basis of the normalized trace on M_n."""
    units = [(i, j) for i in range(size) for j in range(size)]
    u = np.stack([np.sqrt(size) * unit_matrix(size, i, j) for i, j in units])
    v = np.stack([np.sqrt(size) * unit_matrix(size, j, i) for i, j in units])
    return u, v


@pytest.mark.unit
class TestQuasiBasis:
    """Test verification and construction of quasi-bases."""

    def test_matrix_units(self, trace_ce):
        u, v = matrix_unit_basis(2)
        qb = QuasiBasis(u, v, trace_ce)
        assert qb.size == 4
        assert len(qb.pairs) == 4
        assert verify_quasi_basis(qb).passed

    def test_incomplete_basis_fails(self, trace_ce):
        u, v = matrix_unit_basis(2)
        qb = QuasiBasis(u[:3], v[:3], trace_ce)
        left, right = quasi_basis_residuals(qb)
        assert left > 0.1 and right > 0.1
        assert not verify_quasi_basis(qb).passed

    def test_constructed_for_trace(self, trace_ce, scalars_in_m2):
        qb = construct_for_ce(scalars_in_m2, trace_ce)
        assert qb.size == 4
        np.testing.assert_allclose(qb.v, np.conj(np.swapaxes(qb.u, 1, 2)))
        assert verify_quasi_basis(qb).passed

    def test_index_of_scalars_in_m2(self, trace_ce, scalars_in_m2):
        qb = construct_for_ce(scalars_in_m2, trace_ce)
        np.testing.assert_allclose(watatani_index(qb), 4 * np.eye(2), atol=1e-8)

    def test_index_of_diagonals(self, diagonals_in_m2):
        e = trace_conditional_expectation(diagonals_in_m2)
        qb = construct_for_ce(diagonals_in_m2, e)
        np.testing.assert_allclose(watatani_index(qb), 2 * np.eye(2), atol=1e-8)

    def test_index_of_equal_algebras(self, m2_in_m2):
        qb = construct_for_ce(m2_in_m2, trace_conditional_expectation(m2_in_m2))
        np.testing.assert_allclose(watatani_index(qb), np.eye(2), atol=1e-8)

    def test_weighted_expectation(self, scalars_in_m2):
        phi = weighted_conditional_expectation(scalars_in_m2, np.diag([0.9, 0.1]))
        qb = construct_for_ce(scalars_in_m2, phi)
        assert verify_quasi_basis(qb).passed
        assert index_report(qb, expectation=True).passed

    def test_spanning_set_not_spanning(self, trace_ce, scalars_in_m2):
        with pytest.raises(ConditioningError):
            construct_for_ce(scalars_in_m2, trace_ce, spanning=scalars_in_m2.large.basis[:2])

    def test_zero_map_has_no_quasi_basis(self, scalars_in_m2):
        with pytest.raises(ConditioningError):
            construct_for_ce(scalars_in_m2, BimoduleMap.zero(scalars_in_m2))

    def test_index_independent_of_basis(self, trace_ce, scalars_in_m2):
        constructed = construct_for_ce(scalars_in_m2, trace_ce)
        u, v = matrix_unit_basis(2)
        report = index_report(constructed, QuasiBasis(u, v, trace_ce), expectation=True)
        assert report.passed, report.render_text()
        assert len(report.entries) == 3


@pytest.mark.integration
class TestQuasiBasisTransfer:
    """Test the quasi-bases carried to F(φ) and pulled back to f(φ)."""

    @pytest.mark.parametrize("name", ["corner-m2", "diag-m2", "weighted-m2"])
    def test_transfer_and_pull_back(self, bundles, name):
        bundle = bundles[name]
        inc = bundle.inclusion
        phi = bundle.phi if bundle.quasi_basis is not None else trace_conditional_expectation(inc)
        qb = bundle.quasi_basis or construct_for_ce(inc, phi)
        real = corner_realization(bundle.pair)
        F = F_corner(real, phi)
        qb_F = transfer_quasi_basis(real, qb, F)
        assert qb_F.size == qb.size * len(real.witnesses_a)
        assert verify_quasi_basis(qb_F).passed
        psi = f_forward(bundle.pair, phi)
        pulled = pull_back_quasi_basis(real, qb_F, psi)
        assert pulled.owner is psi
        assert verify_quasi_basis(pulled).passed

    def test_corner_index_is_central(self, bundles):
        bundle = bundles["corner-m2"]
        real = corner_realization(bundle.pair)
        qb_F = transfer_quasi_basis(real, bundle.quasi_basis)
        assert index_report(qb_F, expectation=True).passed


if __name__ == "__main__":
    pytest.main([__file__])
