"""
The transfer f: bimodule maps C → A  ⟶  bimodule maps D → B.

Given φ, the intermediate map τ: Y → X is the unique linear map with
τ(y)·x* = φ(y·x*). With a right frame x_1..x_n of X, f(φ)(d) = Σ x_i*·τ(x_i·d).
The corner route Ψ_B⁻¹ ∘ (φ ⊗ id) ∘ Ψ_D is implemented independently and
serves as a cross-check.
"""

from dataclasses import dataclass

import numpy as np

from utils.config import (
    ALG_TOL,
    DEFAULT_SEED,
    ITER_TOL,
    NORM_RESTARTS,
    NORM_RTOL,
    NORM_SAMPLES,
    POSITIVITY_SAMPLES,
    RANK_RTOL,
)
from utils.logger import logger

from .bimodule import amplify_pair, conjugate, right_frame, tensor_compose
from .errors import ConditioningError, TransferError
from .fdca import UnitalInclusion, matrix_amplification
from .maps import BimoduleMap, apply_blockwise, combine, maps_residual
from .report import Report


PIMSNER_POPA_FLOOR = 1e-3


def _adj(stack):
    return np.conj(np.swapaxes(stack, -1, -2))


def _pairwise(left, right):
    return np.einsum("ipq,jqr->ijpr", left, right)


def _max_diff(a, b, scale=1.0):
    diff = np.asarray(a) - np.asarray(b)
    if diff.size == 0:
        return 0.0
    return float(np.max(np.abs(diff))) / scale


@dataclass(frozen=True, eq=False)
class TauMap:
    pair: object
    coeffs: np.ndarray

    def __call__(self, y):
        c = self.pair.Y.coords(y)
        if c.ndim == 1:
            return self.pair.X.element(self.coeffs @ c)
        return self.pair.X.element(c @ self.coeffs.T).reshape(np.shape(y)[:-2] + self.pair.shape)


def tau_from_phi(pair, phi, tol=ALG_TOL):
    """Solve τ(y)·x_k* = φ(y·x_k*) for every Y basis element in one least-squares pass."""
    X, Y = pair.X.basis, pair.Y.basis
    P = pair.shape[0]
    op = _pairwise(X, _adj(X)).reshape(pair.X.dim, -1).T
    rank = np.linalg.matrix_rank(op, tol=RANK_RTOL * max(np.linalg.norm(op, 2), 1.0)) if op.size else 0
    if rank < pair.X.dim:
        raise ConditioningError(f"A-valued pairing on X is degenerate (rank {rank} < {pair.X.dim})")
    rhs = phi(_pairwise(Y, _adj(X)).reshape(-1, P, P)).reshape(pair.Y.dim, -1).T
    sol, _, _, _ = np.linalg.lstsq(op, rhs, rcond=None)
    resid = np.linalg.norm(op @ sol - rhs, axis=0)
    worst = float(np.max(resid, initial=0.0)) / phi.scale
    if worst > tol:
        logger.error("τ system inconsistent: residual %.3e", worst)
        raise TransferError("no linear τ satisfies τ(y)·x* = φ(y·x*)", residual=worst, tolerance=tol)
    return TauMap(pair, sol)


def tau_closed_form(pair, phi):
    """τ(y) = Σ φ(y·x_i*)·x_i over a right frame."""
    xs = right_frame(pair).elements
    P = pair.shape[0]
    vals = phi(_pairwise(pair.Y.basis, _adj(xs)).reshape(-1, P, P)).reshape(pair.Y.dim, len(xs), P, P)
    images = np.einsum("jipr,irq->jpq", vals, xs)
    return TauMap(pair, pair.X.coords(images).T)


def _psi_from_tau(pair, tau):
    xs = right_frame(pair).elements
    D = pair.right.large.basis
    t = tau(_pairwise(xs, D))
    images = np.einsum("ipq,ijpr->jqr", xs.conj(), t)
    return BimoduleMap(pair.right, pair.right.small.coords(images).T)


def prop_conditions(pair, phi, tau, psi, tol=ALG_TOL):
    """The six defining identities linking φ, τ and ψ, on basis elements."""
    A, C = pair.left.small.basis, pair.left.large.basis
    B, D = pair.right.small.basis, pair.right.large.basis
    X, Y = pair.X.basis, pair.Y.basis
    scale = phi.scale
    report = Report()
    report.add("transfer.tau_left_C",
               _max_diff(tau(_pairwise(C, X)), _pairwise(phi(C), X), scale), tol, "τ(c·x) = φ(c)·x")
    report.add("transfer.tau_left_A",
               _max_diff(tau(_pairwise(A, Y)), _pairwise(A, tau(Y)), scale), tol, "τ(a·y) = a·τ(y)")
    report.add("transfer.tau_inner_A",
               _max_diff(_pairwise(tau(Y), _adj(X)), phi(_pairwise(Y, _adj(X))), scale), tol,
               "τ(y)·x* = φ(y·x*)")
    report.add("transfer.tau_right_psi",
               _max_diff(tau(_pairwise(X, D)), _pairwise(X, psi(D)), scale), tol, "τ(x·d) = x·ψ(d)")
    report.add("transfer.tau_right_B",
               _max_diff(tau(_pairwise(Y, B)), _pairwise(tau(Y), B), scale), tol, "τ(y·b) = τ(y)·b")
    report.add("transfer.psi_inner_B",
               _max_diff(psi(_pairwise(_adj(X), Y)), _pairwise(_adj(X), tau(Y)), scale), tol,
               "ψ(x*·y) = x*·τ(y)")
    report.add("transfer.psi_bimodule", psi.bimodule_residual(), tol, "ψ(b·d·b′) = b·ψ(d)·b′")
    return report


def transfer(pair, phi, tol=ALG_TOL):
    """(τ, ψ, report) for ψ = f(φ)."""
    tau = tau_from_phi(pair, phi, tol)
    psi = _psi_from_tau(pair, tau)
    return tau, psi, prop_conditions(pair, phi, tau, psi, tol)


def f_forward(pair, phi, tol=ALG_TOL, check=True):
    tau = tau_from_phi(pair, phi, tol)
    psi = _psi_from_tau(pair, tau)
    if check:
        report = prop_conditions(pair, phi, tau, psi, tol)
        if not report.passed:
            worst = report.worst()
            logger.error("Transfer failed %s (residual %.3e)", worst.check, worst.residual)
            raise TransferError(f"transfer failed {worst.check}", worst.residual, worst.tolerance)
    return psi


def f_inverse(pair, psi, tol=ALG_TOL, check=True):
    """The inverse transfer, computed as the forward transfer through the conjugate pair."""
    return f_forward(conjugate(pair), psi, tol, check)


def F_corner(real, phi, tol=ALG_TOL):
    """(φ ⊗ id_n) restricted to pM_n(C)p."""
    inc = real.corner_pair.right
    return BimoduleMap.from_function(inc, lambda ms: apply_blockwise(phi, ms, real.n), tol)


def f_via_corner(real, phi, tol=ALG_TOL):
    """Ψ_B⁻¹ ∘ F(φ) ∘ Ψ_D."""
    V = real.V
    return BimoduleMap.from_function(
        real.pair.right,
        lambda ds: V.conj().T @ apply_blockwise(phi, V @ ds @ V.conj().T, real.n) @ V,
        tol,
    )


def corner_identity_residual(real, phi, F=None):
    """max ‖r·F(φ)(m)·z* − φ(r·m·z*)‖ over r, z in the corner X and m in pM_n(C)p."""
    F = F if F is not None else F_corner(real, phi)
    corner = real.corner_pair
    R = corner.X.basis
    M = corner.right.large.basis
    lhs = np.einsum("ipq,jqr,ksr->ijkps", R, F(M), R.conj())
    mats = np.einsum("ipq,jqr,ksr->ijkps", R, M, R.conj())
    P = corner.shape[0]
    rhs = phi(mats.reshape(-1, P, P)).reshape(mats.shape)
    return _max_diff(lhs, rhs, phi.scale)


def corner_report(real, phi, psi=None, tol=ALG_TOL):
    psi = psi if psi is not None else f_forward(real.pair, phi, tol)
    F = F_corner(real, phi, tol)
    report = Report()
    report.add("corner.F_bimodule", F.bimodule_residual(), tol, "F(φ) is a pM_n(A)p-bimodule map")
    report.add("corner.F_pairing", corner_identity_residual(real, phi, F), tol,
               "⟨r·F(φ)(m), z⟩ = φ(⟨r·m, z⟩)")
    report.add("corner.agreement", maps_residual(psi, f_via_corner(real, phi, tol)) / phi.scale, tol,
               "f(φ) = Ψ_B⁻¹∘F(φ)∘Ψ_D")
    if is_conditional_expectation(phi, tol):
        report.add("corner.F_fixes_p", _max_diff(F(real.p), real.p), tol, "F(φ)(p) = p")
    return report


def is_conditional_expectation(phi, tol=ALG_TOL):
    """φ restricted to A is the identity (positivity is checked separately)."""
    A = phi.target.basis
    return _max_diff(phi(A), A) <= tol


def amplify_map(phi, k, tol=ALG_TOL):
    """φ ⊗ id_k on M_k(C) → M_k(A)."""
    if k == 1:
        return phi
    inc = UnitalInclusion(matrix_amplification(phi.target, k), matrix_amplification(phi.source, k))
    return BimoduleMap.from_function(inc, lambda xs: apply_blockwise(phi, xs, k), tol)


def amplification_check(pair, phi, psi=None, k=2, tol=ALG_TOL):
    psi = psi if psi is not None else f_forward(pair, phi, tol)
    lhs = f_forward(amplify_pair(pair, k), amplify_map(phi, k, tol), tol, check=False)
    report = Report()
    report.add(f"properties.amplification_{k}", maps_residual(lhs, amplify_map(psi, k, tol)) / phi.scale, tol,
               "f_k(φ⊗id) = f(φ)⊗id")
    return report


def _ascend(phi, c, images, basis, max_iter=100):
    value = float(np.linalg.norm(phi(c), 2))
    for _ in range(max_iter):
        u, s, vh = np.linalg.svd(phi(c))
        if s[0] == 0:
            break
        eta, xi = u[:, 0], vh[0].conj()
        alphas = np.einsum("p,kpq,q->k", eta.conj(), images, xi)
        w = np.einsum("k,kqp->pq", alphas, basis.conj())
        wl, sw, wvh = np.linalg.svd(w)
        keep = sw > RANK_RTOL * sw[0]
        step = wvh[keep].conj().T @ wl[:, keep].conj().T
        new = float(np.linalg.norm(phi(step), 2))
        if new <= value * (1.0 + ITER_TOL):
            value = max(value, new)
            break
        c, value = step, new
    return value


def map_norm_estimate(phi, samples=NORM_SAMPLES, restarts=NORM_RESTARTS, seed=DEFAULT_SEED, batch=1000):
    """
    Lower bound for sup{‖φ(c)‖ : ‖c‖ ≤ 1} and the number of points evaluated.

    Random unit-ball samples are followed by an alternating ascent from the
    unit and from random unitaries: take the top singular pair (η, ξ) of φ(c),
    then step to the partial isometry maximizing |η*φ(c′)ξ| over the unit ball.
    """
    rng = np.random.default_rng(seed)
    src = phi.source
    best, count = 0.0, 0
    remaining = samples
    while remaining > 0:
        k = min(batch, remaining)
        cs = src.random_elements(rng, k)
        norms = np.linalg.norm(cs, ord=2, axis=(1, 2))
        cs = cs[norms > 0] / norms[norms > 0, None, None]
        if len(cs):
            best = max(best, float(np.max(np.linalg.norm(phi(cs), ord=2, axis=(1, 2)))))
        count += k
        remaining -= k
    images = phi.images()
    starts = [src.unit] + [src.random_unitary(rng) for _ in range(restarts)]
    for c in starts:
        best = max(best, _ascend(phi, c, images, src.basis))
        count += 1
    return best, count


def isometry_check(pair, phi, psi=None, samples=NORM_SAMPLES, seed=DEFAULT_SEED, tol=ALG_TOL, rtol=NORM_RTOL):
    psi = psi if psi is not None else f_forward(pair, phi, tol)
    n_phi, _ = map_norm_estimate(phi, samples, seed=seed)
    n_psi, _ = map_norm_estimate(psi, samples, seed=seed + 1)
    rel = abs(n_phi - n_psi) / max(n_phi, n_psi) if max(n_phi, n_psi) > 0 else 0.0
    report = Report()
    report.add("isometry.norm", rel, rtol, "‖f(φ)‖ = ‖φ‖")
    report.add("isometry.round_trip", maps_residual(f_inverse(pair, psi, tol), phi) / phi.scale, tol,
               "f⁻¹(f(φ)) = φ")
    logger.info("Sampled norms: ‖φ‖ ≈ %.6f, ‖f(φ)‖ ≈ %.6f", n_phi, n_psi)
    return report


def uniqueness_residual(pair, phi, psi):
    """Stacked Frobenius norm of x·ψ(d)·z* − φ(x·d·z*) over basis x, z ∈ X and d ∈ D."""
    X = pair.X.basis
    D = pair.right.large.basis
    P = pair.shape[0]
    lhs = np.einsum("ipq,jqr,ksr->ijkps", X, psi(D), X.conj())
    mats = np.einsum("ipq,jqr,ksr->ijkps", X, D, X.conj())
    rhs = phi(mats.reshape(-1, P, P)).reshape(mats.shape)
    return float(np.linalg.norm(lhs - rhs))


def pairing_gap(pair):
    """Smallest singular value of b ↦ [x·b·z*] over basis x, z ∈ X."""
    X = pair.X.basis
    B = pair.right.small.basis
    op = np.einsum("ipq,mqr,ksr->mikps", X, B, X.conj()).reshape(len(B), -1).T
    s = np.linalg.svd(op, compute_uv=False)
    return float(s[-1]) if s.size else 0.0


def uniqueness_check(pair, phi, psi=None, epsilons=(1e-3, 1e-6), seed=DEFAULT_SEED, tol=ALG_TOL):
    """Perturbing f(φ) by ε in a random direction raises the defining residual to at least ε·gap/2."""
    psi = psi if psi is not None else f_forward(pair, phi, tol)
    rng = np.random.default_rng(seed)
    gap = pairing_gap(pair)
    report = Report()
    report.add("uniqueness.unperturbed", uniqueness_residual(pair, phi, psi) / phi.scale, tol,
               "x·ψ(d)·z* = φ(x·d·z*)")
    direction = rng.standard_normal(psi.coeffs.shape) + 1j * rng.standard_normal(psi.coeffs.shape)
    direction /= np.linalg.norm(direction)
    for eps in epsilons:
        moved = BimoduleMap(psi.inclusion, psi.coeffs + eps * direction)
        grown = uniqueness_residual(pair, phi, moved)
        report.add(f"uniqueness.perturbed_{eps:.0e}", max(0.0, 0.5 * eps * gap - grown), 0.0,
                   "‖residual(ψ + εΔ)‖ ≥ ε·gap/2")
    return report


def linearity_check(pair, phi1, phi2, alpha=0.7 - 0.2j, beta=-1.3, tol=ALG_TOL):
    combined = f_forward(pair, combine((alpha, beta), (phi1, phi2)), tol, check=False)
    split = combine((alpha, beta), (f_forward(pair, phi1, tol, check=False), f_forward(pair, phi2, tol, check=False)))
    report = Report()
    scale = max(phi1.scale, phi2.scale)
    report.add("transfer.linearity", _max_diff(combined.coeffs, split.coeffs, scale), tol,
               "f(αφ₁ + βφ₂) = αf(φ₁) + βf(φ₂)")
    return report


def _min_eigs(stack):
    herm = 0.5 * (stack + _adj(stack))
    return np.linalg.eigvalsh(herm)[:, 0]


def _op_norms(stack):
    return np.maximum(np.linalg.norm(stack, ord=2, axis=(1, 2)), 1e-300)


def positivity_violation(phi, cs):
    """Largest relative negative eigenvalue of φ(c) over the samples."""
    if len(cs) == 0:
        return 0.0
    return float(max(0.0, np.max(-_min_eigs(phi(cs)) / _op_norms(cs))))


def check_positivity_transfer(pair, phi, psi=None, samples=POSITIVITY_SAMPLES, k=2, seed=DEFAULT_SEED,
                              tol=ALG_TOL):
    """Selfadjointness on the basis, positivity and k-positivity of f(φ) on sampled positive elements."""
    psi = psi if psi is not None else f_forward(pair, phi, tol)
    rng = np.random.default_rng(seed)
    report = Report()
    if phi.selfadjoint_residual() <= tol:
        report.add("positivity.selfadjoint", psi.selfadjoint_residual(), tol, "f(φ)(d*) = f(φ)(d)*")
    pos_c = pair.left.large.random_positives(rng, samples)
    if positivity_violation(phi, pos_c) > tol:
        logger.info("Map is not positive on samples; skipping positivity transfer")
        return report
    report.add("positivity.positive",
               positivity_violation(psi, pair.right.large.random_positives(rng, samples)), tol,
               "d ≥ 0 ⇒ f(φ)(d) ≥ 0")
    for level in range(2, k + 1):
        amp_phi = amplify_map(phi, level, tol)
        if positivity_violation(amp_phi, amp_phi.source.random_positives(rng, samples)) > tol:
            break
        amp_psi = amplify_map(psi, level, tol)
        report.add(f"positivity.{level}_positive",
                   positivity_violation(amp_psi, amp_psi.source.random_positives(rng, samples)), tol,
                   f"φ {level}-positive ⇒ f(φ) {level}-positive")
    return report


def ce_check(pair, phi, psi=None, tol=ALG_TOL):
    """A conditional expectation transfers to one: f(φ)|_B = id and f(φ)(1) = 1."""
    psi = psi if psi is not None else f_forward(pair, phi, tol)
    B = pair.right.small
    report = Report()
    report.add("ce.identity_on_B", _max_diff(psi(B.basis), B.basis, phi.scale), tol, "f(φ)(b) = b")
    report.add("ce.unital", _max_diff(psi(B.unit), B.unit), tol, "f(φ)(1) = 1")
    return report


def _positive_samples(alg, rng, samples):
    cs = alg.random_positives(rng, samples)
    cs = cs / _op_norms(cs)[:, None, None]
    powers = np.linalg.matrix_power(cs, 8)
    powers = powers / _op_norms(powers)[:, None, None]
    return np.concatenate([cs, powers])


def _best_constant(values, cs, tol, iterations=60):
    """Largest s with λ_min(values − s·cs) ≥ −tol·‖c‖ on every sample, by bisection."""
    norms = _op_norms(cs)

    def holds(s):
        return bool(np.all(_min_eigs(values - s * cs) >= -tol * norms))

    if not holds(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while holds(hi) and hi < 1e6:
        lo, hi = hi, 2.0 * hi
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    return lo


def derive_lower_bound(phi, samples=POSITIVITY_SAMPLES, seed=DEFAULT_SEED, tol=ALG_TOL):
    """Best sampled t with φ(c) ≥ t·c for positive c."""
    rng = np.random.default_rng(seed)
    cs = _positive_samples(phi.source, rng, samples)
    return _best_constant(phi(cs), cs, tol)


def pimsner_popa_transfer(pair, phi, psi=None, samples=POSITIVITY_SAMPLES, seed=DEFAULT_SEED, tol=ALG_TOL):
    """(s, report): the best sampled s with f(φ)(d) ≥ s·d, given φ(c) ≥ t·c with t > 0."""
    psi = psi if psi is not None else f_forward(pair, phi, tol)
    t = derive_lower_bound(phi, samples, seed, tol)
    rng = np.random.default_rng(seed + 1)
    ds = _positive_samples(pair.right.large, rng, samples)
    values = psi(ds)
    s = _best_constant(values, ds, tol)
    report = Report()
    report.add("pimsner_popa.t_positive", max(0.0, PIMSNER_POPA_FLOOR - t), 0.0, "φ(c) ≥ t·c, t > 0")
    report.add("pimsner_popa.s_positive", max(0.0, PIMSNER_POPA_FLOOR - s), 0.0, "f(φ)(d) ≥ s·d, s > 0")
    certificate = float(max(0.0, np.max(-(_min_eigs(values - s * ds)) / _op_norms(ds))))
    report.add("pimsner_popa.certificate", certificate, tol, "λ_min(f(φ)(d) − s·d) ≥ 0")
    logger.info("Pimsner-Popa constants: t ≈ %.6f, s ≈ %.6f", t, s)
    return s, report


def composition_check(pair1, pair2, phi, tol=ALG_TOL):
    """f through Y⊗_D W equals f through W after f through Y."""
    composite = tensor_compose(pair1, pair2, tol)
    direct = f_forward(composite, phi, tol)
    chained = f_forward(pair2, f_forward(pair1, phi, tol), tol)
    report = Report()
    report.add("composition.chain", maps_residual(direct, chained) / phi.scale, tol,
               "f_[X⊗Z, Y⊗W] = f_[Z, W]∘f_[X, Y]")
    return report


def invariance_check(pair1, pair2, witness, phi, tol=ALG_TOL):
    """Equivalent pairs induce the same transfer."""
    report = Report()
    report.add("equivalence.witness", 0.0 if witness is not None else 1.0, 0.0, "Φ: Y → W with Φ(X) = Z")
    if witness is None:
        return report
    f1 = f_forward(pair1, phi, tol)
    f2 = f_forward(pair2, phi, tol)
    report.add("equivalence.invariance", maps_residual(f1, f2) / phi.scale, tol, "f_(X,Y) = f_(Z,W)")
    return report
