#!/usr/bin/env python3
"""
Pytest configuration and shared instances for the morita-lab tests.
"""

import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.morita.bimodule import make_corner_pair
from src.morita.fdca import trace_conditional_expectation
from src.morita.generator import InclusionSpec, build_inclusion, generate, preset


def unit_matrix(size, s, t):
    e = np.zeros((size, size), dtype=np.complex128)
    e[s, t] = 1.0
    return e


@pytest.fixture(scope="session")
def scalars_in_m2():
    """C·1 ⊂ M_2."""
    return build_inclusion(InclusionSpec((1,), (2,), ((2,),)))


@pytest.fixture(scope="session")
def diagonals_in_m2():
    return build_inclusion(InclusionSpec((1, 1), (2,), ((1, 1),)))


@pytest.fixture(scope="session")
def m2_in_m2():
    """A = C = M_2."""
    return build_inclusion(InclusionSpec((2,), (2,), ((1,),)))


@pytest.fixture(scope="session")
def multiblock():
    """C^2 ⊂ M_2 ⊕ C."""
    return build_inclusion(InclusionSpec((1, 1), (2, 1), ((1, 1), (0, 1))))


@pytest.fixture(scope="session")
def trace_ce(scalars_in_m2):
    return trace_conditional_expectation(scalars_in_m2)


@pytest.fixture(scope="session")
def corner_pair(scalars_in_m2):
    """The corner pair of C·1 ⊂ M_2 for n = 2 and p = e11 ⊗ 1."""
    p = np.kron(unit_matrix(2, 0, 0), np.eye(2))
    return make_corner_pair(scalars_in_m2, 2, p)


@pytest.fixture(scope="session")
def bundles():
    """Every preset, generated once per session."""
    return {name: generate(preset(name), name) for name in
            ("trivial", "corner-m2", "diag-m2", "weighted-m2", "multiblock")}
