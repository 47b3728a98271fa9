"""
Quasi-bases {(u_i, v_i)} with c = Σ u_i φ(v_i c) = Σ φ(c u_i) v_i.
"""

from dataclasses import dataclass

import numpy as np

from utils.config import ALG_TOL, COND_LIMIT, RANK_RTOL
from utils.logger import logger

from .errors import ConditioningError, TransferError
from .linalg import condition_number, psd_sqrt
from .report import Report


@dataclass(frozen=True, eq=False)
class QuasiBasis:
    u: np.ndarray
    v: np.ndarray
    owner: object
    owner_name: str = "phi"

    @property
    def size(self):
        return self.u.shape[0]

    @property
    def pairs(self):
        return list(zip(self.u, self.v))


def quasi_basis_residuals(qb):
    """(left, right) identity residuals over the basis of C, relative to ‖c‖ = 1."""
    phi = qb.owner
    c = phi.source.basis
    if qb.size == 0:
        return float(np.max(np.abs(c))), float(np.max(np.abs(c)))
    left = np.einsum("ipq,icqr->cpr", qb.u, phi(np.einsum("ipq,cqr->icpr", qb.v, c))) - c
    right = np.einsum("icpq,iqr->cpr", phi(np.einsum("cpq,iqr->icpr", c, qb.u)), qb.v) - c
    return float(np.max(np.abs(left), initial=0.0)), float(np.max(np.abs(right), initial=0.0))


def verify_quasi_basis(qb, tol=ALG_TOL, label="quasibasis"):
    src = qb.owner.source
    report = Report()
    member = max(src.membership_residual(qb.u), src.membership_residual(qb.v)) if qb.size else 0.0
    report.add(f"{label}.membership", member, tol, "u_i, v_i ∈ C")
    left, right = quasi_basis_residuals(qb)
    report.add(f"{label}.left", left, tol, "c = Σ u_i·φ(v_i·c)")
    report.add(f"{label}.right", right, tol, "c = Σ φ(c·u_i)·v_i")
    return report


def _require(report, what):
    if not report.passed:
        worst = report.worst()
        raise TransferError(f"{what} failed {worst.check}", worst.residual, worst.tolerance)


def construct_for_ce(inc, phi, spanning=None, tol=ALG_TOL, cond_limit=COND_LIMIT):
    """
    Quasi-basis {(u_k, u_k*)} for a faithful positive *-preserving bimodule map.

    The spanning set is orthonormalized for ⟨x, y⟩ = Tr φ(x*y); in that basis
    T(x) = Σ g_k φ(g_k* x) is a positive matrix and u_k = T^{-1/2}(g_k).
    """
    h = inc.large.basis if spanning is None else np.asarray(spanning, dtype=np.complex128)
    gram = np.trace(phi(np.einsum("kqp,lqr->klpr", h.conj(), h)), axis1=-2, axis2=-1)
    w, vecs = np.linalg.eigh(0.5 * (gram + gram.conj().T))
    keep = w > RANK_RTOL * max(w[-1], 0.0)
    if int(np.sum(keep)) != inc.large.dim:
        raise ConditioningError("map is not faithful or the spanning set does not span C")
    g = np.einsum("kpq,kr->rpq", h, vecs[:, keep] / np.sqrt(w[keep]))
    blocks = phi(np.einsum("rqp,kqs->rkps", g.conj(), g))
    T = np.einsum("rkpq,ksqp->rs", blocks, blocks)
    T = 0.5 * (T + T.conj().T)
    cond = condition_number(np.linalg.eigvalsh(T))
    if cond > cond_limit:
        raise ConditioningError(f"Gram operator condition number {cond:.2e} exceeds {cond_limit:.0e}")
    S = psd_sqrt(T, inverse=True)
    u = np.einsum("rpq,rk->kpq", g, S)
    qb = QuasiBasis(u, np.conj(np.swapaxes(u, 1, 2)), phi)
    _require(verify_quasi_basis(qb, tol), "constructed quasi-basis")
    logger.debug("Quasi-basis of %d pairs for a map on C of dim %d", qb.size, inc.large.dim)
    return qb


def watatani_index(qb):
    return np.einsum("ipq,iqr->pr", qb.u, qb.v)


def transfer_quasi_basis(real, qb, F=None, tol=ALG_TOL):
    """{(p(u_i⊗I_n)a_j p, p b_j(v_i⊗I_n)p)}: a quasi-basis for F(φ) on the corner."""
    from .transfer import F_corner

    F = F if F is not None else F_corner(real, qb.owner, tol)
    n, p = real.n, real.p
    eye = np.eye(n)
    ua = np.einsum("ipq,jqr->ijpr", np.stack([np.kron(eye, u) for u in qb.u]), real.witnesses_a)
    bv = np.einsum("jpq,iqr->ijpr", real.witnesses_b, np.stack([np.kron(eye, v) for v in qb.v]))
    size = n * qb.owner.source.ambient_dim
    u_new = (p @ ua @ p).reshape(-1, size, size)
    v_new = (p @ bv @ p).reshape(-1, size, size)
    transferred = QuasiBasis(u_new, v_new, F, f"F({qb.owner_name})")
    _require(verify_quasi_basis(transferred, tol), "transferred quasi-basis")
    return transferred


def pull_back_quasi_basis(real, qb_corner, psi, tol=ALG_TOL):
    """Ψ_D⁻¹ applied to both members: a quasi-basis for f(φ)."""
    pulled = QuasiBasis(real.invert_psi_D(qb_corner.u), real.invert_psi_D(qb_corner.v), psi, "f(phi)")
    _require(verify_quasi_basis(pulled, tol), "pulled-back quasi-basis")
    return pulled


def index_report(qb, other=None, expectation=False, tol=ALG_TOL):
    """
    The index Σ u_i v_i is central in C and does not depend on the quasi-basis.
    For a conditional expectation it also dominates the unit.
    """
    index = watatani_index(qb)
    c = qb.owner.source.basis
    scale = max(1.0, float(np.max(np.abs(index))))
    report = Report()
    comm = np.einsum("pq,kqr->kpr", index, c) - np.einsum("kpq,qr->kpr", c, index)
    report.add("quasibasis.index_central", float(np.max(np.abs(comm), initial=0.0)), tol * scale, "Ind ∈ Z(C)")
    if other is not None:
        diff = float(np.max(np.abs(index - watatani_index(other))))
        report.add("quasibasis.index_independent", diff, tol * scale, "Σ u_i v_i is basis independent")
    if expectation:
        herm = 0.5 * (index + index.conj().T)
        lowest = float(np.linalg.eigvalsh(herm - qb.owner.source.unit)[0])
        report.add("quasibasis.index_at_least_one", max(0.0, -lowest), tol * scale, "Ind ≥ 1")
    return report
