"""
Seeded instances: multi-matrix inclusions, full projections, corner pairs and maps.
"""

from dataclasses import dataclass, replace

import backoff
import numpy as np
from scipy.stats import unitary_group

from utils.config import ALG_TOL, DEFAULT_SEED, MAX_AMBIENT_DIM, MAX_AMPLIFICATION, MAX_RETRIES
from utils.logger import logger

from .bimodule import corner_realization, make_corner_pair
from .errors import ConditioningError, ScenarioError, ValidationError
from .fdca import (
    FdStarAlgebra,
    UnitalInclusion,
    matrix_amplification,
    relative_commutant,
    relative_commutant_member,
    trace_conditional_expectation,
    weighted_conditional_expectation,
)
from .linalg import nullspace
from .maps import BimoduleMap, shift_left
from .quasibasis import construct_for_ce


MAP_KINDS = ("trace_ce", "weighted_trace", "random_bimodule", "shifted")


class ProjectionRejected(Exception):
    """A drawn projection produced an unusable corner; draw again."""


@dataclass(frozen=True)
class InclusionSpec:
    """
    A = ⊕ M_{a_i} inside C = ⊕ M_{c_j} ⊗ I_m, where summand i of A sits
    embedding[j][i] times in block j of C.
    """

    small_blocks: tuple
    large_blocks: tuple
    embedding: tuple
    multiplicity: int = 1

    @property
    def ambient_dim(self):
        return self.multiplicity * sum(self.large_blocks)

    def check(self):
        a, c, lam = self.small_blocks, self.large_blocks, np.asarray(self.embedding, dtype=int)
        if not a or not c or min(a) < 1 or min(c) < 1 or self.multiplicity < 1:
            raise ScenarioError("block sizes and multiplicity must be positive")
        if lam.shape != (len(c), len(a)) or np.any(lam < 0):
            raise ScenarioError(f"embedding must be a {len(c)}x{len(a)} matrix of non-negative integers")
        if list(lam @ np.asarray(a)) != list(c):
            raise ScenarioError("embedding does not fill the blocks of C (Σ_i Λ_ji a_i ≠ c_j)")
        if np.any(lam.sum(axis=0) == 0):
            raise ScenarioError("a summand of A is not embedded in C")


@dataclass(frozen=True)
class Scenario:
    seed: int
    inclusion: InclusionSpec
    n: int
    ranks: tuple
    map_kind: str
    twist: bool = True
    weights: tuple = None

    def check(self):
        self.inclusion.check()
        if self.map_kind not in MAP_KINDS:
            raise ScenarioError(f"unknown map kind '{self.map_kind}' (expected one of {', '.join(MAP_KINDS)})")
        if not 1 <= self.n <= MAX_AMPLIFICATION:
            raise ScenarioError(f"n must lie in 1..{MAX_AMPLIFICATION}, got {self.n}")
        if self.n * self.inclusion.ambient_dim > MAX_AMBIENT_DIM:
            raise ScenarioError(f"corner ambient dimension {self.n * self.inclusion.ambient_dim} exceeds {MAX_AMBIENT_DIM}")
        if len(self.ranks) != len(self.inclusion.small_blocks):
            raise ScenarioError("need one projection rank per summand of A")
        for r, a in zip(self.ranks, self.inclusion.small_blocks):
            if not 0 <= r <= self.n * a:
                raise ScenarioError(f"rank {r} impossible in M_{self.n * a}")
        if min(self.ranks) == 0:
            raise ScenarioError("projection is not full: every summand of A needs a positive rank")
        if self.weights is not None and len(self.weights) != self.inclusion.ambient_dim:
            raise ScenarioError(f"weights must have {self.inclusion.ambient_dim} entries")


@dataclass(eq=False)
class Bundle:
    name: str
    scenario: Scenario
    inclusion: UnitalInclusion
    pair: object
    phi: BimoduleMap
    quasi_basis: object = None
    weight: np.ndarray = None


def _unit_matrix(size, s, t):
    e = np.zeros((size, size), dtype=np.complex128)
    e[s, t] = 1.0
    return e


def _embedding_maps(spec):
    """For each summand i of A, the images ι_i(e_st) in M_N as an (a_i, a_i, N, N) array."""
    lam = np.asarray(spec.embedding, dtype=int)
    inner = sum(spec.large_blocks)
    eye_m = np.eye(spec.multiplicity)
    images = [np.zeros((a, a, spec.ambient_dim, spec.ambient_dim), dtype=np.complex128) for a in spec.small_blocks]
    offset = 0
    for j, c in enumerate(spec.large_blocks):
        pos = offset
        for i, a in enumerate(spec.small_blocks):
            for _ in range(lam[j, i]):
                for s in range(a):
                    for t in range(a):
                        images[i][s, t] += np.kron(_unit_matrix(inner, pos + s, pos + t), eye_m)
                pos += a
        offset += c
    return images


def build_inclusion(spec, tol=ALG_TOL):
    spec.check()
    inner = sum(spec.large_blocks)
    eye_m = np.eye(spec.multiplicity)
    unit = np.eye(spec.ambient_dim, dtype=np.complex128)
    units_c = []
    offset = 0
    for c in spec.large_blocks:
        units_c += [np.kron(_unit_matrix(inner, offset + s, offset + t), eye_m) for s in range(c) for t in range(c)]
        offset += c
    large = FdStarAlgebra.from_span(np.stack(units_c), unit, tol)
    units_a = np.concatenate([img.reshape(-1, spec.ambient_dim, spec.ambient_dim) for img in _embedding_maps(spec)])
    small = FdStarAlgebra.from_span(units_a, unit, tol)
    inc = UnitalInclusion(small, large)
    inc.validate(tol)
    logger.debug("Inclusion %s ⊂ %s (multiplicity %d): dim A=%d, dim C=%d",
                 list(spec.small_blocks), list(spec.large_blocks), spec.multiplicity, small.dim, large.dim)
    return inc


def _rank_projection(size, rank, rng, twist):
    q = np.diag([1.0] * rank + [0.0] * (size - rank)).astype(np.complex128)
    if twist and size > 1 and 0 < rank < size:
        u = unitary_group.rvs(size, random_state=rng)
        q = u @ q @ u.conj().T
    return q


def draw_projection(spec, n, ranks, rng, twist=True):
    """p = Σ_i Σ Q_i[(k,s),(l,t)]·(e_kl ⊗ ι_i(e_st)) with Q_i a rank-r_i projection in M_{n·a_i}."""
    maps = _embedding_maps(spec)
    size = n * spec.ambient_dim
    p = np.zeros((size, size), dtype=np.complex128)
    units = np.eye(n * n, dtype=np.complex128).reshape(n, n, n, n)
    for img, a, r in zip(maps, spec.small_blocks, ranks):
        q = _rank_projection(n * a, r, rng, twist).reshape(n, a, n, a)
        blocks = np.einsum("ksLt,stpq->kLpq", q, img)
        p += np.einsum("klab,klpq->apbq", units, blocks).reshape(size, size)
    return 0.5 * (p + p.conj().T)


@backoff.on_exception(backoff.constant, ProjectionRejected, interval=0, max_tries=MAX_RETRIES, jitter=None)
def _pair_attempt(inc, scenario, rng, tol):
    p = draw_projection(scenario.inclusion, scenario.n, scenario.ranks, rng, scenario.twist)
    try:
        pair = make_corner_pair(inc, scenario.n, p, tol)
        corner_realization(pair, tol)
    except (ValidationError, ConditioningError) as exc:
        logger.warning("Rejected projection draw: %s", exc)
        raise ProjectionRejected(str(exc)) from exc
    return pair


def build_pair(inc, scenario, rng, tol=ALG_TOL):
    try:
        return _pair_attempt(inc, scenario, rng, tol)
    except ProjectionRejected as exc:
        logger.error("No usable projection after %d draws", MAX_RETRIES)
        raise ScenarioError(f"no usable projection after {MAX_RETRIES} draws: {exc}") from exc


def rotated_corner_pair(inc, rng, n=2, rank=1, tol=ALG_TOL):
    """Corner pair over any inclusion for p = u·(1_rank ⊗ 1_A)·u*, u a seeded unitary of M_n(A)."""
    if not 0 < rank <= n:
        raise ScenarioError(f"rank {rank} must lie in 1..{n}")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    amp = matrix_amplification(inc.small, n)
    base = np.kron(np.diag([1.0] * rank + [0.0] * (n - rank)), inc.small.unit)
    u = amp.random_unitary(rng)
    p = u @ base @ u.conj().T
    return make_corner_pair(inc, n, 0.5 * (p + p.conj().T), tol)


def random_bimodule_map(inc, rng, tol=ALG_TOL):
    """A random element of the space of A-bimodule maps C → A (the zero map if that space is trivial)."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    a, c = inc.small.basis, inc.large.basis
    dA, dC = len(a), len(c)
    eye_c = np.eye(dC)
    k_left = inc.large.coords(np.einsum("ipq,jqr->ijpr", a, c).reshape(-1, *a.shape[1:])).reshape(dA, dC, dC)
    k_right = inc.large.coords(np.einsum("jpq,iqr->ijpr", c, a).reshape(-1, *a.shape[1:])).reshape(dA, dC, dC)
    left = np.einsum("ijl,rpq->ijpqrl", k_left, a) - np.einsum("jl,irpq->ijpqrl", eye_c, np.einsum("ipq,rqs->irps", a, a))
    right = np.einsum("ijl,rpq->ijpqrl", k_right, a) - np.einsum("jl,irpq->ijpqrl", eye_c, np.einsum("rpq,iqs->irps", a, a))
    op = np.concatenate([left.reshape(-1, dA * dC), right.reshape(-1, dA * dC)])
    kernel = nullspace(op)
    if kernel.shape[1] == 0:
        logger.warning("Only the zero map is A-bimodular here")
        return BimoduleMap.zero(inc)
    weights = rng.standard_normal(kernel.shape[1]) + 1j * rng.standard_normal(kernel.shape[1])
    phi = BimoduleMap(inc, (kernel @ weights).reshape(dA, dC))
    phi.validate(tol)
    logger.debug("Bimodule maps form a space of dim %d", kernel.shape[1])
    return phi


def _positive_commutant_element(inc, rng):
    commutant = relative_commutant(inc).algebra
    h = commutant.random_positive(rng)
    return h / np.linalg.norm(h, 2) + commutant.unit


def build_map(inc, scenario, rng, tol=ALG_TOL):
    """(φ, h): the map of the scenario and its weight or shift element, if any."""
    kind = scenario.map_kind
    if kind == "trace_ce":
        return trace_conditional_expectation(inc, tol), None
    if kind == "weighted_trace":
        if scenario.weights is not None:
            h = np.diag(np.asarray(scenario.weights, dtype=float)).astype(np.complex128)
            if min(scenario.weights) <= 0 or not relative_commutant_member(inc, h, tol):
                raise ScenarioError("weights must be positive and give an element of the relative commutant")
        else:
            h = _positive_commutant_element(inc, rng)
        return weighted_conditional_expectation(inc, h, tol), h
    if kind == "random_bimodule":
        return random_bimodule_map(inc, rng, tol), None
    h = _positive_commutant_element(inc, rng)
    return shift_left(trace_conditional_expectation(inc, tol), h, tol), h


def generate(scenario, name=None, tol=ALG_TOL):
    scenario.check()
    rng = np.random.default_rng(scenario.seed)
    inc = build_inclusion(scenario.inclusion, tol)
    pair = build_pair(inc, scenario, rng, tol)
    phi, h = build_map(inc, scenario, rng, tol)
    qb = construct_for_ce(inc, phi, tol=tol) if scenario.map_kind in ("trace_ce", "weighted_trace") else None
    name = name or f"{scenario.map_kind}-{scenario.seed}"
    logger.info("Generated bundle '%s': dim A=%d, dim C=%d, n=%d, dim B=%d, dim D=%d",
                name, inc.small.dim, inc.large.dim, scenario.n, pair.right.small.dim, pair.right.large.dim)
    return Bundle(name, scenario, inc, pair, phi, qb, h)


PRESETS = {
    "trivial": Scenario(DEFAULT_SEED, InclusionSpec((1,), (2,), ((2,),)), 1, (1,), "trace_ce"),
    "corner-m2": Scenario(DEFAULT_SEED, InclusionSpec((1,), (2,), ((2,),)), 2, (1,), "trace_ce", twist=False),
    "diag-m2": Scenario(DEFAULT_SEED, InclusionSpec((1, 1), (2,), ((1, 1),)), 2, (1, 2), "shifted"),
    "weighted-m2": Scenario(DEFAULT_SEED, InclusionSpec((1,), (2,), ((2,),)), 2, (1,), "weighted_trace",
                            weights=(2 / 3, 1 / 3)),
    "multiblock": Scenario(DEFAULT_SEED, InclusionSpec((1, 1), (2, 1), ((1, 1), (0, 1))), 2, (1, 1),
                           "random_bimodule"),
}


def preset(name, seed=None):
    if name not in PRESETS:
        raise ScenarioError(f"unknown preset '{name}' (expected one of {', '.join(PRESETS)})")
    scenario = PRESETS[name]
    return scenario if seed is None else replace(scenario, seed=seed)
