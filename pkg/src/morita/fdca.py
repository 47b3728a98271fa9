"""
Finite-dimensional C*-algebras as *-subalgebras of an ambient matrix algebra.

Every algebra is stored by an HS-orthonormal basis inside M_N together with its
unit, which may be a proper projection (corner algebras pM_n(A)p have unit p).
Coordinates are Hilbert-Schmidt inner products against that basis.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import expm

from utils.config import ALG_TOL, RANK_RTOL, UNIT_TOL
from utils.logger import logger

from .errors import ShapeMismatchError, ValidationError
from .linalg import as_matrix, hermitian_part, is_hermitian, nullspace, operator_norm, orthonormal_span
from .maps import BimoduleMap, shift_left


@dataclass(frozen=True, eq=False)
class MatrixSpan:
    """A linear span of equally shaped matrices with an HS-orthonormal basis."""

    basis: np.ndarray

    @classmethod
    def from_vectors(cls, vectors, shape=None):
        arr = np.asarray(vectors, dtype=np.complex128)
        if arr.size == 0:
            return cls(np.zeros((0,) + tuple(shape), dtype=np.complex128))
        return cls(orthonormal_span(arr))

    @property
    def dim(self):
        return self.basis.shape[0]

    @property
    def shape(self):
        return self.basis.shape[1:]

    def _flat(self):
        return self.basis.reshape(self.dim, int(np.prod(self.shape)))

    def coords(self, x):
        """Coordinates of one matrix (1d result) or of a stack of matrices (2d result)."""
        x = np.asarray(x, dtype=np.complex128)
        if x.shape[-2:] != self.shape:
            raise ShapeMismatchError(f"expected matrices of shape {self.shape}, got {x.shape}")
        if x.ndim == 2:
            return self._flat().conj() @ x.ravel()
        return x.reshape(-1, x.shape[-2] * x.shape[-1]) @ self._flat().conj().T

    def element(self, coords):
        coords = np.asarray(coords, dtype=np.complex128)
        return np.tensordot(coords, self.basis, axes=1)

    def project(self, x):
        return self.element(self.coords(x))

    def membership_residual(self, x):
        """Largest relative distance from the span over a matrix or a stack of matrices."""
        stack = np.asarray(x, dtype=np.complex128).reshape((-1,) + self.shape)
        if len(stack) == 0:
            return 0.0
        flat = stack.reshape(len(stack), -1)
        diff = flat - self.project(stack).reshape(len(stack), -1)
        num = np.linalg.norm(diff, axis=1)
        den = np.maximum(np.linalg.norm(flat, axis=1), 1.0)
        return float(np.max(num / den))

    def contains(self, x, tol=ALG_TOL):
        return self.membership_residual(x) <= tol

    def random_elements(self, rng, count):
        c = rng.standard_normal((count, self.dim)) + 1j * rng.standard_normal((count, self.dim))
        return self.element(c)

    def random_element(self, rng):
        return self.random_elements(rng, 1)[0]


@dataclass(frozen=True, eq=False)
class FdStarAlgebra(MatrixSpan):
    """Unital *-subalgebra of M_N given by an HS-orthonormal basis and its unit."""

    unit: np.ndarray = None

    @classmethod
    def from_span(cls, vectors, unit, tol=ALG_TOL, validate=True):
        unit = as_matrix(unit)
        vecs = np.asarray(vectors, dtype=np.complex128).reshape((-1,) + unit.shape)
        basis = orthonormal_span(np.concatenate([unit[None], vecs]))
        alg = cls(basis=basis, unit=unit)
        if validate:
            alg.validate(tol)
        return alg

    @property
    def ambient_dim(self):
        return self.unit.shape[0]

    def residuals(self):
        b = self.basis
        flat = self._flat()
        gram = flat.conj() @ flat.T
        products = np.einsum("ipq,jqr->ijpr", b, b)
        return {
            "orthonormal": float(np.linalg.norm(gram - np.eye(self.dim))),
            "product": self.membership_residual(products),
            "adjoint": self.membership_residual(np.conj(np.swapaxes(b, 1, 2))),
            "unit_member": self.membership_residual(self.unit),
            "unit_action": float(
                max(
                    np.max(np.abs(self.unit @ b - b), initial=0.0),
                    np.max(np.abs(b @ self.unit - b), initial=0.0),
                )
            ),
        }

    def validate(self, tol=ALG_TOL):
        res = self.residuals()
        bad = {k: v for k, v in res.items() if v > (UNIT_TOL if k == "unit_action" else tol)}
        if bad:
            worst = max(bad, key=bad.get)
            logger.error("Algebra of dim %d in M_%d failed %s (%.3e)", self.dim, self.ambient_dim, worst, bad[worst])
            raise ValidationError(f"algebra invariant '{worst}' violated", residual=bad[worst], tolerance=tol)
        return res

    def random_hermitian(self, rng):
        return hermitian_part(self.random_element(rng))

    def random_positives(self, rng, count):
        x = self.random_elements(rng, count)
        return np.conj(np.swapaxes(x, 1, 2)) @ x

    def random_positive(self, rng):
        return self.random_positives(rng, 1)[0]

    def random_unitary(self, rng):
        """exp(iH) compressed by the unit, H a random Hermitian element."""
        h = self.random_hermitian(rng)
        return self.unit @ expm(1j * h) @ self.unit


@dataclass(frozen=True, eq=False)
class UnitalInclusion:
    small: FdStarAlgebra
    large: FdStarAlgebra

    @property
    def ambient_dim(self):
        return self.large.ambient_dim

    def residuals(self):
        return {
            "containment": self.large.membership_residual(self.small.basis),
            "same_unit": float(np.max(np.abs(self.small.unit - self.large.unit))),
        }

    def validate(self, tol=ALG_TOL):
        if self.small.ambient_dim != self.large.ambient_dim:
            raise ShapeMismatchError("inclusion algebras live in different ambient spaces")
        res = self.residuals()
        if res["containment"] > tol:
            raise ValidationError("small algebra is not contained in the large one", res["containment"], tol)
        if res["same_unit"] > UNIT_TOL:
            raise ValidationError("inclusion is not unital", res["same_unit"], UNIT_TOL)
        return res


@dataclass(frozen=True, eq=False)
class CommutantSpace:
    """The relative commutant A' ∩ C of an inclusion."""

    inclusion: UnitalInclusion
    basis: np.ndarray

    @property
    def dim(self):
        return self.basis.shape[0]

    @cached_property
    def algebra(self):
        return FdStarAlgebra(basis=self.basis, unit=self.inclusion.large.unit)

    def commutator_residual(self):
        a = self.inclusion.small.basis
        comm = np.einsum("kpq,iqr->kipr", self.basis, a) - np.einsum("ipq,kqr->kipr", a, self.basis)
        return float(np.max(np.abs(comm), initial=0.0))

    def contains(self, x, tol=ALG_TOL):
        return relative_commutant_member(self.inclusion, x, tol)


def algebras_match(a, b, tol=ALG_TOL):
    """True when two algebras have the same span and unit inside the same ambient space."""
    if a is b:
        return True
    if a.ambient_dim != b.ambient_dim or a.dim != b.dim:
        return False
    return (
        a.membership_residual(b.basis) <= tol
        and b.membership_residual(a.basis) <= tol
        and np.max(np.abs(a.unit - b.unit)) <= UNIT_TOL
    )


def full_matrix_algebra(n):
    units = np.zeros((n * n, n, n), dtype=np.complex128)
    for k in range(n):
        for l in range(n):
            units[k * n + l, k, l] = 1.0
    return FdStarAlgebra(basis=units, unit=np.eye(n, dtype=np.complex128))


def algebra_from_generators(ambient_dim, gens, tol=ALG_TOL, rtol=RANK_RTOL):
    """
    Smallest unital *-subalgebra of M_N containing `gens`.

    Words in the generators and their adjoints are produced by left
    multiplication starting from the identity until the span stops growing.
    """
    identity = np.eye(ambient_dim, dtype=np.complex128)
    gens = np.asarray(gens, dtype=np.complex128).reshape((-1, ambient_dim, ambient_dim))
    letters = np.concatenate([gens, np.conj(np.swapaxes(gens, 1, 2))]) if len(gens) else gens
    span = orthonormal_span(np.concatenate([identity[None], letters]), rtol)
    while True:
        if span.shape[0] > ambient_dim ** 2:
            raise ValidationError(f"closure exceeded dimension bound {ambient_dim ** 2}")
        if len(letters) == 0:
            break
        words = np.einsum("gpq,kqr->gkpr", letters, span).reshape((-1, ambient_dim, ambient_dim))
        grown = orthonormal_span(np.concatenate([span, words]), rtol)
        if grown.shape[0] == span.shape[0]:
            break
        span = grown
    alg = FdStarAlgebra(basis=span, unit=identity)
    alg.validate(tol)
    logger.debug("Generated algebra of dim %d in M_%d from %d generators", alg.dim, ambient_dim, len(gens))
    return alg


def matrix_amplification(alg, n):
    """M_n(alg) inside M_{nN}, with a ⊗ e_kl realized as kron(e_kl, a)."""
    if n < 1:
        raise ValueError("amplification size must be positive")
    if n == 1:
        return alg
    units = np.eye(n * n, dtype=np.complex128).reshape(n * n, n, n)
    basis = np.einsum("kab,ipq->kiapbq", units, alg.basis).reshape(
        n * n * alg.dim, n * alg.ambient_dim, n * alg.ambient_dim
    )
    return FdStarAlgebra(basis=basis, unit=np.kron(np.eye(n), alg.unit))


def compress(alg, p, tol=ALG_TOL):
    """The corner algebra p·alg·p with unit p."""
    p = as_matrix(p)
    return FdStarAlgebra.from_span(p @ alg.basis @ p, unit=p, tol=tol)


def relative_commutant(inc, rtol=RANK_RTOL):
    """Basis of {c ∈ C : ca = ac for all a ∈ A} as the kernel of the stacked commutator maps."""
    c = inc.large.basis
    a = inc.small.basis
    comm = np.einsum("jpq,iqr->jipr", c, a) - np.einsum("ipq,jqr->jipr", a, c)
    op = comm.reshape(inc.large.dim, -1).T
    kernel = nullspace(op, rtol)
    basis = inc.large.element(kernel.T)
    logger.debug("Relative commutant of dim %d (A dim %d, C dim %d)", len(basis), inc.small.dim, inc.large.dim)
    return CommutantSpace(inclusion=inc, basis=basis)


def ambient_commutant(alg):
    """Commutant of `alg` inside unit·M_N·unit."""
    corner = compress(full_matrix_algebra(alg.ambient_dim), alg.unit)
    return relative_commutant(UnitalInclusion(alg, corner))


def trace_conditional_expectation(inc, tol=ALG_TOL, samples=8, seed=0):
    """The HS-orthogonal projection of C onto A, which is the trace-preserving conditional expectation."""
    coeffs = inc.small.coords(inc.large.basis).T
    e = BimoduleMap(inc, coeffs)
    e.validate(tol)
    imgs = e(inc.small.basis)
    fixed = float(np.max(np.abs(imgs - inc.small.basis), initial=0.0))
    traces = float(np.max(np.abs(np.trace(e.images(), axis1=1, axis2=2) - np.trace(inc.large.basis, axis1=1, axis2=2))))
    if fixed > tol or traces > tol:
        raise ValidationError("HS projection is not a trace-preserving expectation", max(fixed, traces), tol)
    # E(c*c) ≥ 0 on seeded samples
    cs = inc.large.random_elements(np.random.default_rng(seed), samples)
    for img in e(np.conj(np.swapaxes(cs, 1, 2)) @ cs):
        if not is_positive(inc.small, img, tol):
            low = float(np.linalg.eigvalsh(hermitian_part(img))[0])
            logger.error("Trace expectation sends a positive element to one with eigenvalue %.3e", low)
            raise ValidationError("HS projection is not positive", -low, tol)
    return e


def normalized_density(inc, h, tol=ALG_TOL):
    """h·E(h)^{-1} for positive h in A' ∩ C, E the trace expectation."""
    h = as_matrix(h)
    if not relative_commutant_member(inc, h, tol):
        raise ValidationError("weight is not in the relative commutant")
    if not is_positive(inc.large, h, tol):
        raise ValidationError("weight is not positive")
    e = trace_conditional_expectation(inc, tol)
    return h @ np.linalg.pinv(e(h), rcond=RANK_RTOL)


def weighted_conditional_expectation(inc, h, tol=ALG_TOL):
    """c ↦ E(h′c) with h′ = h·E(h)^{-1}; a conditional expectation for positive invertible h in A' ∩ C."""
    e = trace_conditional_expectation(inc, tol)
    return shift_left(e, normalized_density(inc, h, tol), tol)


def relative_commutant_member(inc, x, tol=ALG_TOL):
    x = as_matrix(x)
    a = inc.small.basis
    scale = max(operator_norm(x), 1.0)
    comm = float(np.max(np.abs(x @ a - a @ x), initial=0.0))
    return inc.large.membership_residual(x) <= tol and comm <= tol * scale


def is_positive(alg, x, tol=ALG_TOL):
    x = as_matrix(x)
    if alg.membership_residual(x) > tol:
        raise ValidationError("element lies outside the algebra", alg.membership_residual(x), tol)
    if not is_hermitian(x, tol):
        return False
    return float(np.linalg.eigvalsh(hermitian_part(x))[0]) >= -tol * max(operator_norm(x), 1.0)
