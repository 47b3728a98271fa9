"""
Modular automorphisms of relative commutants and their behaviour under transfer.

For a bimodule map φ: C → A with a quasi-basis, θ^φ(c) = Σ u_i φ(c v_i) is the
unique automorphism of A' ∩ C with φ(xy) = φ(y θ(x)). The corner route carries
it along π(c) = (c ⊗ I_n)p and ρ = Ψ_D⁻¹ ∘ π.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from utils.config import ALG_TOL, DEFAULT_SEED, RANK_RTOL
from utils.logger import logger

from .bimodule import EquivalencePair, corner_realization
from .errors import ValidationError
from .fdca import MatrixSpan, normalized_density, relative_commutant, relative_commutant_member
from .linalg import nullspace, solve_least_squares
from .maps import maps_residual, shift_left, shift_right
from .quasibasis import pull_back_quasi_basis, transfer_quasi_basis
from .report import Report
from .transfer import F_corner, f_forward


def _max_abs(x):
    x = np.asarray(x)
    return float(np.max(np.abs(x))) if x.size else 0.0


@dataclass(frozen=True, eq=False)
class ModularAutomorphism:
    commutant: object
    coeffs: np.ndarray

    def __call__(self, x):
        alg = self.commutant.algebra
        c = alg.coords(x)
        if c.ndim == 1:
            return alg.element(self.coeffs @ c)
        return alg.element(c @ self.coeffs.T).reshape(np.shape(x))

    def images(self):
        return self(self.commutant.basis)


@dataclass(frozen=True, eq=False)
class CommutantIso:
    """A linear map between two relative commutants, stored on their bases in both directions."""

    domain: object
    codomain: object
    coeffs: np.ndarray
    inverse_coeffs: np.ndarray
    name: str = "iso"

    def __call__(self, x):
        c = self.domain.algebra.coords(x)
        if c.ndim == 1:
            return self.codomain.algebra.element(self.coeffs @ c)
        return self.codomain.algebra.element(c @ self.coeffs.T)

    def inverse(self, y):
        c = self.codomain.algebra.coords(y)
        if c.ndim == 1:
            return self.domain.algebra.element(self.inverse_coeffs @ c)
        return self.domain.algebra.element(c @ self.inverse_coeffs.T)

    def conjugate(self, theta):
        """The automorphism iso ∘ θ ∘ iso⁻¹ of the codomain."""
        return ModularAutomorphism(self.codomain, self.coeffs @ theta.coeffs @ self.inverse_coeffs)


def theta_from_quasibasis(qb, commutant=None, tol=ALG_TOL):
    """θ^φ on the commutant basis from Σ u_i φ(c v_i)."""
    phi = qb.owner
    commutant = commutant if commutant is not None else relative_commutant(phi.inclusion)
    xs = commutant.basis
    vals = phi(np.einsum("kpq,iqr->kipr", xs, qb.v))
    images = np.einsum("ipq,kiqr->kpr", qb.u, vals)
    res = commutant.algebra.membership_residual(images) if len(images) else 0.0
    if res > tol * max(1.0, phi.scale):
        logger.error("θ leaves the relative commutant (residual %.3e)", res)
        raise ValidationError("θ^φ does not preserve the relative commutant", residual=res, tolerance=tol)
    return ModularAutomorphism(commutant, commutant.algebra.coords(images).T)


def check_modular_condition(phi, theta, tol=ALG_TOL):
    """φ(xy) = φ(y θ(x)) over x in the commutant basis and y in the basis of C."""
    xs = theta.commutant.basis
    ys = phi.source.basis
    lhs = phi(np.einsum("kpq,jqr->kjpr", xs, ys))
    rhs = phi(np.einsum("jpq,kqr->kjpr", ys, theta.images()))
    report = Report()
    report.add("modular.condition", _max_abs(lhs - rhs) / phi.scale, tol, "φ(xy) = φ(y·θ(x))")
    return report


def automorphism_report(theta, tol=ALG_TOL, label="theta"):
    alg = theta.commutant.algebra
    xs = alg.basis
    imgs = theta.images()
    prods = np.einsum("ipq,jqr->ijpr", xs, xs)
    mult = theta(prods.reshape((-1,) + alg.shape)).reshape(prods.shape) - np.einsum("ipq,jqr->ijpr", imgs, imgs)
    scale = max(1.0, float(np.linalg.norm(theta.coeffs, 2)) if theta.coeffs.size else 1.0)
    rank = np.linalg.matrix_rank(theta.coeffs, tol=RANK_RTOL * scale) if theta.coeffs.size else 0
    report = Report()
    report.add(f"modular.{label}_multiplicative", _max_abs(mult) / scale ** 2, tol, "θ(xy) = θ(x)θ(y)")
    report.add(f"modular.{label}_unital", _max_abs(theta(alg.unit) - alg.unit), tol, "θ(1) = 1")
    report.add(f"modular.{label}_bijective", float(alg.dim - rank), 0.0, "θ is invertible")
    return report


def solve_modular_automorphism(phi, commutant=None):
    """
    Solve φ(x_a y) = Σ_b L_ba φ(y x_b) for the coefficient matrix L.

    Returns (theta, nullity, residual); nullity 0 means the solution is unique.
    """
    commutant = commutant if commutant is not None else relative_commutant(phi.inclusion)
    xs = commutant.basis
    ys = phi.source.basis
    k = len(xs)
    op = phi(np.einsum("jpq,bqr->bjpr", ys, xs)).reshape(k, -1).T
    rhs = phi(np.einsum("apq,jqr->ajpr", xs, ys)).reshape(k, -1).T
    L, residual = solve_least_squares(op, rhs) if k else (np.zeros((0, 0), dtype=np.complex128), 0.0)
    nullity = nullspace(op).shape[1] if k else 0
    return ModularAutomorphism(commutant, L), nullity, residual / phi.scale


def solve_modular_uniqueness(phi, theta=None, tol=ALG_TOL):
    """The modular condition as a linear system: a single solution, equal to θ^φ when given."""
    commutant = theta.commutant if theta is not None else None
    solved, nullity, residual = solve_modular_automorphism(phi, commutant)
    report = Report()
    report.add("modular.uniqueness_nullity", float(nullity), 0.0, "the modular condition determines θ")
    report.add("modular.uniqueness_residual", residual, tol, "φ(xy) = φ(y·L(x)) solvable")
    if theta is not None:
        report.add("modular.uniqueness_agreement", _max_abs(solved.coeffs - theta.coeffs), tol,
                   "solved L = Σ u_i φ(· v_i)")
    return report


def _iso_report(iso, tol):
    dom, cod = iso.domain.algebra, iso.codomain.algebra
    xs = dom.basis
    imgs = iso(xs)
    prods = np.einsum("ipq,jqr->ijpr", xs, xs).reshape((-1,) + dom.shape)
    mult = iso(prods) - np.einsum("ipq,jqr->ijpr", imgs, imgs).reshape((-1,) + cod.shape)
    adj = iso(np.conj(np.swapaxes(xs, 1, 2))) - np.conj(np.swapaxes(imgs, 1, 2))
    round_trip = iso.inverse(imgs) - xs
    rank = np.linalg.matrix_rank(iso.coeffs, tol=RANK_RTOL) if iso.coeffs.size else 0
    report = Report()
    name = iso.name
    report.add(f"modular.{name}_multiplicative", _max_abs(mult), tol, f"{name}(xy) = {name}(x){name}(y)")
    report.add(f"modular.{name}_adjoint", _max_abs(adj), tol, f"{name}(x*) = {name}(x)*")
    report.add(f"modular.{name}_unital", _max_abs(iso(dom.unit) - cod.unit), tol, f"{name}(1) = 1")
    report.add(f"modular.{name}_bijective", float(abs(dom.dim - cod.dim) + abs(dom.dim - rank)), 0.0,
               f"{name} is onto the target commutant")
    report.add(f"modular.{name}_round_trip", _max_abs(round_trip), tol, f"{name}⁻¹∘{name} = id")
    return report


def _pi(real, cs):
    return np.einsum("ab,kpq->kapbq", np.eye(real.n), cs).reshape(len(cs), *real.p.shape) @ real.p


def _pi_inverse(real, ms):
    """Σ a_j m b_j = c ⊗ I_n; c is the top-left block."""
    full = np.einsum("jpq,kqr,jrs->kps", real.witnesses_a, ms, real.witnesses_b)
    size = real.pair.left.ambient_dim
    return full[:, :size, :size]


def pi_iso(real, domain=None, codomain=None):
    """π(c) = (c ⊗ I_n)p from A' ∩ C onto the commutant of the corner inclusion."""
    domain = domain if domain is not None else relative_commutant(real.pair.left)
    codomain = codomain if codomain is not None else relative_commutant(real.corner_pair.right)
    coeffs = codomain.algebra.coords(_pi(real, domain.basis)).T
    inverse = domain.algebra.coords(_pi_inverse(real, codomain.basis)).T
    return CommutantIso(domain, codomain, coeffs, inverse, "pi")


def rho_iso(real, domain=None, codomain=None):
    """ρ = Ψ_D⁻¹ ∘ π, i.e. ρ(c) = Σ x_i*·c·x_i, from A' ∩ C onto B' ∩ D."""
    domain = domain if domain is not None else relative_commutant(real.pair.left)
    codomain = codomain if codomain is not None else relative_commutant(real.pair.right)
    images = real.invert_psi_D(_pi(real, domain.basis))
    coeffs = codomain.algebra.coords(images).T
    back = _pi_inverse(real, real.apply_psi_D(codomain.basis))
    inverse = domain.algebra.coords(back).T
    return CommutantIso(domain, codomain, coeffs, inverse, "rho")


def commutant_iso_report(iso, tol=ALG_TOL):
    return _iso_report(iso, tol)


def _theta_diff(theta, other):
    return _max_abs(theta.images() - other.images())


def conjugation_check(real, phi, qb, tol=ALG_TOL):
    """θ^{F(φ)} = π∘θ^φ∘π⁻¹ and θ^{f(φ)} = ρ∘θ^φ∘ρ⁻¹, each θ taken from its own quasi-basis."""
    pi = pi_iso(real)
    rho = rho_iso(real, domain=pi.domain)
    report = Report()
    report.extend(_iso_report(pi, tol))
    report.extend(_iso_report(rho, tol))

    theta = theta_from_quasibasis(qb, pi.domain, tol)
    F = F_corner(real, phi, tol)
    qb_F = transfer_quasi_basis(real, qb, F, tol)
    theta_F = theta_from_quasibasis(qb_F, pi.codomain, tol)
    psi = f_forward(real.pair, phi, tol)
    qb_f = pull_back_quasi_basis(real, qb_F, psi, tol)
    theta_f = theta_from_quasibasis(qb_f, rho.codomain, tol)

    scale = max(1.0, float(np.linalg.norm(theta.coeffs, 2)) if theta.coeffs.size else 1.0)
    report.add("modular.conjugation_F", _theta_diff(theta_F, pi.conjugate(theta)) / scale, tol,
               "θ^{F(φ)} = π∘θ^φ∘π⁻¹")
    report.add("modular.conjugation_f", _theta_diff(theta_f, rho.conjugate(theta)) / scale, tol,
               "θ^{f(φ)} = ρ∘θ^φ∘ρ⁻¹")
    for label, m, th in (("phi", phi, theta), ("F", F, theta_F), ("f", psi, theta_f)):
        entry = check_modular_condition(m, th, tol).entries[0]
        report.add(f"modular.condition_{label}", entry.residual, tol, entry.anchor)
    return report


def frame_independence_check(real, phi, qb, seed=DEFAULT_SEED, tol=ALG_TOL):
    """ρ∘θ^φ∘ρ⁻¹ does not depend on the frame: rebuild the corner from a rotated basis of X."""
    pair = real.pair
    rot = unitary_group.rvs(pair.X.dim, random_state=seed) if pair.X.dim > 1 else np.eye(pair.X.dim)
    rotated = np.einsum("ij,jpq->ipq", rot, pair.X.basis)
    other = corner_realization(EquivalencePair(pair.left, pair.right, pair.Y, MatrixSpan(rotated)), tol)
    rho1 = rho_iso(real)
    rho2 = rho_iso(other, domain=rho1.domain, codomain=rho1.codomain)
    theta = theta_from_quasibasis(qb, rho1.domain, tol)
    report = Report()
    report.add("modular.frame_independence", _theta_diff(rho1.conjugate(theta), rho2.conjugate(theta)), tol,
               "ρ∘θ^φ∘ρ⁻¹ is frame independent")
    return report


def quasi_basis_independence_check(qb1, qb2, tol=ALG_TOL):
    theta1 = theta_from_quasibasis(qb1, tol=tol)
    theta2 = theta_from_quasibasis(qb2, theta1.commutant, tol)
    report = Report()
    report.add("modular.quasibasis_independence", _theta_diff(theta1, theta2), tol,
               "θ^φ does not depend on the quasi-basis")
    return report


def shifted_maps(phi, h, tol=ALG_TOL):
    """(φ_h, _hφ) = (c ↦ φ(hc), c ↦ φ(ch)) for h ∈ A' ∩ C."""
    h = np.asarray(h, dtype=np.complex128)
    if not relative_commutant_member(phi.inclusion, h, tol):
        raise ValidationError("shift element is not in the relative commutant")
    return shift_left(phi, h, tol), shift_right(phi, h, tol)


def shift_transfer_report(real, phi, h, tol=ALG_TOL):
    """F and f intertwine the shifts by h with the shifts by π(h) and ρ(h)."""
    h_left, h_right = shifted_maps(phi, h, tol)
    pi_h = _pi(real, np.asarray(h, dtype=np.complex128)[None])[0]
    rho_h = real.invert_psi_D(pi_h)
    F = F_corner(real, phi, tol)
    psi = f_forward(real.pair, phi, tol)
    scale = max(phi.scale, h_left.scale)
    report = Report()
    report.add("modular.shift_F_left", maps_residual(F_corner(real, h_left, tol), shift_left(F, pi_h, tol)) / scale,
               tol, "F(φ_h) = F(φ)_{π(h)}")
    report.add("modular.shift_F_right",
               maps_residual(F_corner(real, h_right, tol), shift_right(F, pi_h, tol)) / scale,
               tol, "F(_hφ) = _{π(h)}F(φ)")
    report.add("modular.shift_f_left",
               maps_residual(f_forward(real.pair, h_left, tol), shift_left(psi, rho_h, tol)) / scale,
               tol, "f(φ_h) = f(φ)_{ρ(h)}")
    report.add("modular.shift_f_right",
               maps_residual(f_forward(real.pair, h_right, tol), shift_right(psi, rho_h, tol)) / scale,
               tol, "f(_hφ) = _{ρ(h)}f(φ)")
    return report


def weighted_theta_oracle(inc, h, tol=ALG_TOL):
    """θ(x) = h′·x·h′⁻¹ for the expectation c ↦ E(h′c), h′ the normalized density of h."""
    dens = normalized_density(inc, h, tol)
    dens_inv = np.linalg.pinv(dens, rcond=RANK_RTOL)
    commutant = relative_commutant(inc)
    images = dens @ commutant.basis @ dens_inv
    return ModularAutomorphism(commutant, commutant.algebra.coords(images).T)


def oracle_report(phi, h, theta, tol=ALG_TOL):
    oracle = weighted_theta_oracle(phi.inclusion, h, tol)
    report = Report()
    report.add("modular.weighted_oracle", _theta_diff(theta, oracle), tol, "θ(x) = h′·x·h′⁻¹")
    return report
