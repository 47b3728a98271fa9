"""
Bimodule maps between the two algebras of a unital inclusion.

A BimoduleMap over A ⊂ C is a linear map C → A stored as the matrix of
A-coordinates of the images of C's basis. Evaluation accepts one matrix or a
stack of matrices.
"""

from dataclasses import dataclass

import numpy as np

from utils.config import ALG_TOL
from utils.logger import logger

from .errors import ShapeMismatchError, ValidationError


@dataclass(frozen=True, eq=False)
class BimoduleMap:
    inclusion: object
    coeffs: np.ndarray

    @property
    def source(self):
        return self.inclusion.large

    @property
    def target(self):
        return self.inclusion.small

    def __call__(self, x):
        c = self.source.coords(x)
        if c.ndim == 1:
            return self.target.element(self.coeffs @ c)
        return self.target.element(c @ self.coeffs.T).reshape(np.shape(x)[:-2] + self.target.shape)

    def images(self):
        return self(self.source.basis)

    def _check_compatible(self, other):
        if self.coeffs.shape != other.coeffs.shape:
            raise ShapeMismatchError("maps over different inclusions cannot be combined")

    def __add__(self, other):
        self._check_compatible(other)
        return BimoduleMap(self.inclusion, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_compatible(other)
        return BimoduleMap(self.inclusion, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return BimoduleMap(self.inclusion, scalar * self.coeffs)

    __rmul__ = __mul__

    @property
    def scale(self):
        return max(float(np.linalg.norm(self.coeffs, 2)) if self.coeffs.size else 0.0, 1.0)

    def bimodule_residual(self):
        """max over basis a, c of ‖φ(ac) − aφ(c)‖ and ‖φ(ca) − φ(c)a‖, relative to the coefficient norm."""
        a = self.target.basis
        c = self.source.basis
        imgs = self.images()
        left = self(np.einsum("ipq,jqr->ijpr", a, c)) - np.einsum("ipq,jqr->ijpr", a, imgs)
        right = self(np.einsum("jpq,iqr->ijpr", c, a)) - np.einsum("jpq,iqr->ijpr", imgs, a)
        worst = max(np.max(np.abs(left), initial=0.0), np.max(np.abs(right), initial=0.0))
        return float(worst) / self.scale

    def selfadjoint_residual(self):
        c = self.source.basis
        diff = self(np.conj(np.swapaxes(c, 1, 2))) - np.conj(np.swapaxes(self(c), 1, 2))
        return float(np.max(np.abs(diff), initial=0.0)) / self.scale

    def validate(self, tol=ALG_TOL):
        res = self.bimodule_residual()
        if res > tol:
            logger.error("Map failed the bimodule identity (residual %.3e, tolerance %.1e)", res, tol)
            raise ValidationError("map is not a bimodule map", residual=res, tolerance=tol)
        return res

    @classmethod
    def from_function(cls, inclusion, fn, tol=ALG_TOL):
        """Tabulate a batched function on the source basis; images must land in the target."""
        imgs = np.asarray(fn(inclusion.large.basis), dtype=np.complex128)
        res = inclusion.small.membership_residual(imgs)
        if res > tol:
            raise ValidationError("images leave the target algebra", residual=res, tolerance=tol)
        return cls(inclusion, inclusion.small.coords(imgs).T)

    @classmethod
    def zero(cls, inclusion):
        return cls(inclusion, np.zeros((inclusion.small.dim, inclusion.large.dim), dtype=np.complex128))

    @classmethod
    def identity(cls, inclusion, tol=ALG_TOL):
        """The identity map, defined when both algebras of the inclusion coincide."""
        if inclusion.small.dim != inclusion.large.dim:
            raise ValidationError("identity map needs A = C")
        return cls.from_function(inclusion, lambda xs: xs, tol)


def maps_residual(m1, m2):
    """Largest Frobenius distance between the images of the two maps on m1's source basis."""
    xs = m1.source.basis
    if m2.source.shape != m1.source.shape:
        raise ShapeMismatchError("maps act on different ambient spaces")
    diff = m1(xs) - m2(xs)
    if len(diff) == 0:
        return 0.0
    return float(np.max(np.linalg.norm(diff.reshape(len(diff), -1), axis=1)))


def combine(coefficients, maps):
    """Linear combination Σ αᵢ φᵢ of bimodule maps over one inclusion."""
    maps = list(maps)
    coefficients = list(coefficients)
    if not maps or len(coefficients) != len(maps):
        raise ShapeMismatchError("combine needs one coefficient per map")
    total = BimoduleMap.zero(maps[0].inclusion)
    for alpha, phi in zip(coefficients, maps):
        total = total + alpha * phi
    return total


def apply_blockwise(phi, x, n):
    """(φ ⊗ id_n) on one nN×nN matrix or a stack of them."""
    x = np.asarray(x, dtype=np.complex128)
    size = phi.source.ambient_dim
    single = x.ndim == 2
    blocks = x.reshape(-1, n, size, n, size).transpose(0, 1, 3, 2, 4)
    out = phi(blocks.reshape(-1, size, size)).reshape(-1, n, n, size, size)
    out = out.transpose(0, 1, 3, 2, 4).reshape(-1, n * size, n * size)
    return out[0] if single else out


def shift_left(phi, h, tol=ALG_TOL):
    """The map c ↦ φ(hc)."""
    h = np.asarray(h, dtype=np.complex128)
    shifted = BimoduleMap.from_function(phi.inclusion, lambda xs: phi(h @ xs), tol)
    shifted.validate(tol)
    return shifted


def shift_right(phi, h, tol=ALG_TOL):
    """The map c ↦ φ(ch)."""
    h = np.asarray(h, dtype=np.complex128)
    shifted = BimoduleMap.from_function(phi.inclusion, lambda xs: phi(xs @ h), tol)
    shifted.validate(tol)
    return shifted
