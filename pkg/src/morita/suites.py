"""
Verification suites over a bundle, and the concurrent fan-out over many bundles.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from functools import cached_property

import numpy as np

from utils.config import ALG_TOL, DEFAULT_SEED, WORKERS
from utils.logger import logger

from .bimodule import (
    corner_realization,
    is_equivalent,
    same_spans,
    tensor_compose,
    trivial_pair,
    unitary_twist,
    validate_pair,
    validate_realization,
)
from .errors import MoritaError
from .fdca import ambient_commutant, relative_commutant, trace_conditional_expectation
from .generator import random_bimodule_map, rotated_corner_pair
from .modular import (
    automorphism_report,
    check_modular_condition,
    conjugation_check,
    frame_independence_check,
    oracle_report,
    quasi_basis_independence_check,
    shift_transfer_report,
    solve_modular_uniqueness,
    theta_from_quasibasis,
)
from .quasibasis import (
    construct_for_ce,
    index_report,
    pull_back_quasi_basis,
    transfer_quasi_basis,
    verify_quasi_basis,
)
from .report import Report
from .transfer import (
    F_corner,
    amplification_check,
    ce_check,
    check_positivity_transfer,
    composition_check,
    corner_report,
    invariance_check,
    is_conditional_expectation,
    isometry_check,
    linearity_check,
    pimsner_popa_transfer,
    positivity_violation,
    tau_closed_form,
    transfer,
    uniqueness_check,
)


SUITES = ("construction", "corner", "properties", "quasibasis", "modular", "composition")


class SuiteContext:
    """Shared, lazily computed objects for the suites of one bundle."""

    def __init__(self, bundle, tol=ALG_TOL, seed=DEFAULT_SEED):
        self.bundle = bundle
        self.tol = tol
        self.seed = seed

    @property
    def pair(self):
        return self.bundle.pair

    @property
    def phi(self):
        return self.bundle.phi

    @cached_property
    def transferred(self):
        return transfer(self.pair, self.phi, self.tol)

    @property
    def psi(self):
        return self.transferred[1]

    @cached_property
    def realization(self):
        return corner_realization(self.pair, self.tol)

    @cached_property
    def expectation(self):
        """Whether φ is a conditional expectation: A-fixing, unital on A and positive on samples."""
        if not is_conditional_expectation(self.phi, self.tol):
            return False
        rng = np.random.default_rng(self.seed)
        return positivity_violation(self.phi, self.phi.source.random_positives(rng, 200)) <= self.tol

    @cached_property
    def quasi_basis(self):
        """(map, quasi-basis): the bundle's own, or the trace expectation's when the bundle has none."""
        if self.bundle.quasi_basis is not None:
            return self.bundle.phi, self.bundle.quasi_basis
        e = trace_conditional_expectation(self.bundle.inclusion, self.tol)
        return e, construct_for_ce(self.bundle.inclusion, e, tol=self.tol)

    def second_quasi_basis(self):
        phi, _ = self.quasi_basis
        basis = self.bundle.inclusion.large.basis
        rng = np.random.default_rng(self.seed + 7)
        mix = rng.standard_normal((len(basis), len(basis))) + 1j * rng.standard_normal((len(basis), len(basis)))
        return construct_for_ce(self.bundle.inclusion, phi, spanning=np.einsum("kj,jpq->kpq", mix, basis),
                                tol=self.tol)


def construction_suite(ctx):
    pair, phi, tol = ctx.pair, ctx.phi, ctx.tol
    report = validate_pair(pair, tol)
    tau, psi, conditions = ctx.transferred
    report.extend(conditions)
    closed = tau_closed_form(pair, phi)
    report.add("transfer.tau_closed_form", float(np.max(np.abs(closed.coeffs - tau.coeffs), initial=0.0)) / phi.scale,
               tol, "τ(y) = Σ φ(y·x_i*)·x_i")
    report.extend(uniqueness_check(pair, phi, psi, seed=ctx.seed, tol=tol))
    report.extend(isometry_check(pair, phi, psi, seed=ctx.seed, tol=tol))
    other = random_bimodule_map(pair.left, np.random.default_rng(ctx.seed + 3), tol)
    report.extend(linearity_check(pair, phi, other, tol=tol))
    return report


def corner_suite(ctx):
    report = validate_realization(ctx.realization, ctx.tol)
    report.extend(corner_report(ctx.realization, ctx.phi, ctx.psi, ctx.tol))
    return report


def properties_suite(ctx):
    pair, phi, psi, tol = ctx.pair, ctx.phi, ctx.psi, ctx.tol
    report = check_positivity_transfer(pair, phi, psi, seed=ctx.seed, tol=tol)
    report.extend(amplification_check(pair, phi, psi, k=2, tol=tol))
    if ctx.expectation:
        report.extend(ce_check(pair, phi, psi, tol))
        _, pp = pimsner_popa_transfer(pair, phi, psi, seed=ctx.seed, tol=tol)
        report.extend(pp)
    return report


def quasibasis_suite(ctx):
    tol = ctx.tol
    phi, qb = ctx.quasi_basis
    real = ctx.realization
    report = verify_quasi_basis(qb, tol)
    report.extend(index_report(qb, ctx.second_quasi_basis(), expectation=is_conditional_expectation(phi, tol), tol=tol))
    F = F_corner(real, phi, tol)
    qb_F = transfer_quasi_basis(real, qb, F, tol)
    report.extend(verify_quasi_basis(qb_F, tol, label="quasibasis.corner"))
    psi = ctx.psi if phi is ctx.phi else transfer(ctx.pair, phi, tol)[1]
    report.extend(verify_quasi_basis(pull_back_quasi_basis(real, qb_F, psi, tol), tol, label="quasibasis.pulled_back"))
    return report


def modular_suite(ctx):
    tol = ctx.tol
    phi, qb = ctx.quasi_basis
    real = ctx.realization
    theta = theta_from_quasibasis(qb, tol=tol)
    report = automorphism_report(theta, tol)
    report.extend(check_modular_condition(phi, theta, tol))
    report.extend(solve_modular_uniqueness(phi, theta, tol))
    report.extend(conjugation_check(real, phi, qb, tol))
    report.extend(frame_independence_check(real, phi, qb, seed=ctx.seed, tol=tol))
    report.extend(quasi_basis_independence_check(qb, ctx.second_quasi_basis(), tol))
    weight = ctx.bundle.weight
    if weight is None:
        commutant = relative_commutant(ctx.bundle.inclusion).algebra
        weight = commutant.random_hermitian(np.random.default_rng(ctx.seed + 5))
    report.extend(shift_transfer_report(real, ctx.phi, weight, tol))
    if ctx.bundle.scenario.map_kind == "weighted_trace":
        report.extend(oracle_report(ctx.phi, weight, theta, tol))
    return report


def composition_suite(ctx):
    pair, phi, tol = ctx.pair, ctx.phi, ctx.tol
    second = rotated_corner_pair(pair.right, np.random.default_rng(ctx.seed + 7), tol=tol)
    report = composition_check(pair, second, phi, tol)
    left_unit = tensor_compose(trivial_pair(pair.left, tol), pair, tol)
    right_unit = tensor_compose(pair, trivial_pair(pair.right, tol), tol)
    report.add("composition.left_unit", same_spans(left_unit, pair), tol, "(A, C)⊗(X, Y) ≅ (X, Y)")
    report.add("composition.right_unit", same_spans(right_unit, pair), tol, "(X, Y)⊗(B, D) ≅ (X, Y)")
    rng = np.random.default_rng(ctx.seed + 11)
    u = ambient_commutant(pair.left.large).algebra.random_unitary(rng)
    twisted = unitary_twist(pair, u, tol)
    _, witness = is_equivalent(pair, twisted, tol, seed=ctx.seed)
    report.extend(invariance_check(pair, twisted, witness, phi, tol))
    return report


SUITE_FUNCTIONS = {
    "construction": construction_suite,
    "corner": corner_suite,
    "properties": properties_suite,
    "quasibasis": quasibasis_suite,
    "modular": modular_suite,
    "composition": composition_suite,
}


def resolve_suites(spec):
    """'all', a comma-separated string, or an iterable of names, validated against SUITES."""
    if spec is None or spec == "all":
        return list(SUITES)
    names = [s.strip() for s in spec.split(",")] if isinstance(spec, str) else list(spec)
    unknown = [s for s in names if s not in SUITES]
    if unknown or not names:
        raise ValueError(f"unknown suite(s) {', '.join(unknown) or '(none given)'}; expected {', '.join(SUITES)}")
    return names


def run_suites(bundle, names=None, tol=ALG_TOL, seed=DEFAULT_SEED):
    """Run the named suites; a suite that raises is recorded as one failed entry."""
    ctx = SuiteContext(bundle, tol, seed)
    report = Report()
    for name in resolve_suites(names):
        logger.info("Running suite '%s' on bundle '%s'", name, bundle.name)
        try:
            part = SUITE_FUNCTIONS[name](ctx)
        except MoritaError as exc:
            logger.error("Suite '%s' aborted on bundle '%s': %s", name, bundle.name, exc)
            residual = getattr(exc, "residual", None)
            report.add(f"{name}.aborted", residual or math.inf, 0.0, str(exc))
            continue
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            logger.exception("Suite '%s' hit a numerical error on bundle '%s'", name, bundle.name)
            report.add(f"{name}.aborted", math.inf, 0.0, f"{type(exc).__name__}: {exc}")
            continue
        logger.info("Suite '%s': %d/%d checks passed", name, len(part.entries) - len(part.failures()), len(part.entries))
        report.extend(part)
    return report


def verify_bundles(bundles, names=None, tol=ALG_TOL, seed=DEFAULT_SEED):
    """Run the suites over independent bundles concurrently; results keyed and ordered by bundle name."""
    def worker(bundle):
        return bundle.name, run_suites(bundle, names, tol, seed)

    with ThreadPoolExecutor(max_workers=WORKERS) as ex:
        results = list(ex.map(worker, bundles))
    return dict(sorted(results, key=lambda item: item[0]))
