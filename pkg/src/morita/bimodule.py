"""
Equivalence pairs (X, Y) for inclusions A ⊂ C and B ⊂ D.

Y is a C-D equivalence bimodule realized as a span of P×Q matrices with
C-valued inner product y·y′* and D-valued inner product y*·y′; X ⊆ Y is the
A-B sub-bimodule. Every pair is isomorphic to a corner pair over a full
projection p ∈ M_n(A), which `corner_realization` builds from a right frame.
"""

from dataclasses import dataclass

import numpy as np

from utils.config import ALG_TOL, COND_LIMIT, RANK_RTOL, UNIT_TOL
from utils.logger import logger

from .errors import ConditioningError, ShapeMismatchError, ValidationError
from .fdca import (
    MatrixSpan,
    UnitalInclusion,
    algebras_match,
    compress,
    matrix_amplification,
)
from .linalg import as_matrix, condition_number, nullspace, psd_sqrt, solve_least_squares, span_rank
from .report import Report


def _adj(stack):
    return np.conj(np.swapaxes(stack, -1, -2))


def _products(left, right):
    """All products l·r for l in `left`, r in `right`, flattened to one stack."""
    out = np.einsum("ipq,jqr->ijpr", left, right)
    return out.reshape((-1,) + out.shape[-2:])


@dataclass(frozen=True, eq=False)
class EquivalencePair:
    left: UnitalInclusion
    right: UnitalInclusion
    Y: MatrixSpan
    X: MatrixSpan

    @classmethod
    def from_spans(cls, left, right, Y_vectors, X_vectors):
        shape = (left.ambient_dim, right.ambient_dim)
        Y = MatrixSpan.from_vectors(Y_vectors, shape)
        X = MatrixSpan.from_vectors(X_vectors, shape)
        if Y.shape != shape or X.shape != shape:
            raise ShapeMismatchError(f"bimodule elements must be {shape[0]}x{shape[1]}")
        return cls(left, right, Y, X)

    @property
    def Y_basis(self):
        return self.Y.basis

    @property
    def X_basis(self):
        return self.X.basis

    @property
    def shape(self):
        return self.Y.shape


@dataclass(frozen=True, eq=False)
class Frame:
    elements: np.ndarray
    side: str

    @property
    def size(self):
        return self.elements.shape[0]


@dataclass(frozen=True, eq=False)
class CornerRealization:
    """
    The corner form of a pair, built from a right frame x_1..x_n.

    With V the column of the frame elements, p = VV*, Ψ_B(b) = VbV*,
    Ψ_D(d) = VdV*, Ψ_X(x) = xV*, Ψ_Y(y) = yV*. The coefficient matrices of the
    four maps are stored against the bases of the corner pair.
    """

    pair: EquivalencePair
    frame: Frame
    n: int
    V: np.ndarray
    p: np.ndarray
    e: np.ndarray
    corner_pair: EquivalencePair
    psi_B: np.ndarray
    psi_D: np.ndarray
    psi_X: np.ndarray
    psi_Y: np.ndarray
    witnesses_a: np.ndarray
    witnesses_b: np.ndarray

    def apply_psi_D(self, d):
        return self.V @ d @ self.V.conj().T

    def apply_psi_B(self, b):
        return self.apply_psi_D(b)

    def invert_psi_D(self, m):
        return self.V.conj().T @ m @ self.V

    def invert_psi_B(self, m):
        return self.invert_psi_D(m)

    def apply_psi_Y(self, y):
        return y @ self.V.conj().T

    def apply_psi_X(self, x):
        return self.apply_psi_Y(x)

    def invert_psi_Y(self, r):
        return r @ self.V


def _span_residual(span, vectors):
    return span.membership_residual(vectors) if len(vectors) else 0.0


def validate_pair(pair, tol=ALG_TOL):
    """Report of action, inner product, fullness and containment residuals."""
    A, C = pair.left.small, pair.left.large
    B, D = pair.right.small, pair.right.large
    Y, X = pair.Y.basis, pair.X.basis
    report = Report()
    report.add("pair.left_action_Y", _span_residual(pair.Y, _products(C.basis, Y)), tol, "C·Y ⊆ Y")
    report.add("pair.right_action_Y", _span_residual(pair.Y, _products(Y, D.basis)), tol, "Y·D ⊆ Y")
    report.add("pair.left_action_X", _span_residual(pair.X, _products(A.basis, X)), tol, "A·X ⊆ X")
    report.add("pair.right_action_X", _span_residual(pair.X, _products(X, B.basis)), tol, "X·B ⊆ X")
    report.add("pair.X_in_Y", _span_residual(pair.Y, X), tol, "X ⊆ Y")

    yy = _products(Y, _adj(Y))
    yty = _products(_adj(Y), Y)
    xx = _products(X, _adj(X))
    xtx = _products(_adj(X), X)
    report.add("pair.inner_C", _span_residual(C, yy), tol, "y·y′* ∈ C")
    report.add("pair.inner_D", _span_residual(D, yty), tol, "y*·y′ ∈ D")
    report.add("pair.inner_A", _span_residual(A, xx), tol, "x·x′* ∈ A")
    report.add("pair.inner_B", _span_residual(B, xtx), tol, "x*·x′ ∈ B")

    for name, vecs, alg, anchor in (
        ("pair.full_C", yy, C, "span{y·y′*} = C"),
        ("pair.full_D", yty, D, "span{y*·y′} = D"),
        ("pair.full_A", xx, A, "span{x·x′*} = A"),
        ("pair.full_B", xtx, B, "span{x*·x′} = B"),
    ):
        report.add(name, float(abs(alg.dim - span_rank(vecs))), 0.0, anchor)
    return report


def _check_projection(p, alg, tol):
    if np.max(np.abs(p - p.conj().T)) > UNIT_TOL or np.max(np.abs(p @ p - p)) > UNIT_TOL:
        raise ValidationError("p is not a projection")
    res = alg.membership_residual(p)
    if res > tol:
        raise ValidationError("p does not lie in M_n(A)", residual=res, tolerance=tol)


def make_corner_pair(inc, n, p, tol=ALG_TOL):
    """
    The pair ((1⊗e)M_n(A)p, (1⊗e)M_n(C)p) over A ⊂ C and pM_n(A)p ⊂ pM_n(C)p.

    Elements of Y are stored as the first block row, so A and C keep acting in
    their own ambient space.
    """
    p = as_matrix(p)
    amp_a = matrix_amplification(inc.small, n)
    amp_c = matrix_amplification(inc.large, n)
    if p.shape != amp_a.unit.shape:
        raise ShapeMismatchError(f"p must be {amp_a.unit.shape}, got {p.shape}")
    _check_projection(p, amp_a, tol)
    ideal = np.einsum("kpq,qr,lrs->klps", amp_a.basis, p, amp_a.basis).reshape((-1,) + p.shape)
    if span_rank(ideal) != amp_a.dim:
        raise ValidationError("p is not full in M_n(A)")

    right = UnitalInclusion(compress(amp_a, p, tol), compress(amp_c, p, tol))
    right.validate(tol)
    rows = inc.ambient_dim
    Y_vectors = (amp_c.basis @ p)[:, :rows, :]
    X_vectors = (amp_a.basis @ p)[:, :rows, :]
    pair = EquivalencePair.from_spans(inc, right, Y_vectors, X_vectors)
    logger.debug("Corner pair n=%d: dim X=%d, dim Y=%d, dim B=%d, dim D=%d",
                 n, pair.X.dim, pair.Y.dim, right.small.dim, right.large.dim)
    return pair


def trivial_pair(inc, tol=ALG_TOL):
    """(A, C) as an equivalence pair over A ⊂ C and itself."""
    return make_corner_pair(inc, 1, inc.small.unit, tol)


def _greedy_frame(pair, side, cond_limit):
    X = pair.X.basis
    if side == "right":
        unit = pair.right.small.unit
        gram = lambda xs: np.einsum("ipq,ipr->qr", xs.conj(), xs)
    else:
        unit = pair.left.small.unit
        gram = lambda xs: np.einsum("ipq,irq->pr", xs, xs.conj())
    target = int(np.linalg.matrix_rank(unit))
    for k in range(1, len(X) + 1):
        g = gram(X[:k])
        w = np.linalg.eigvalsh(0.5 * (g + g.conj().T))
        if int(np.sum(w > RANK_RTOL * max(w[-1], 0.0))) == target:
            break
    else:
        raise ConditioningError(f"{side} Gram of X never reaches the rank of the unit")
    cond = condition_number(w)
    if cond > cond_limit:
        raise ConditioningError(f"{side} frame Gram condition number {cond:.2e} exceeds {cond_limit:.0e}")
    return X[:k], psd_sqrt(g, inverse=True)


def right_frame(pair, cond_limit=COND_LIMIT):
    """x_1..x_n in X with Σ x_i*·x_i = 1_B."""
    xs, g_inv = _greedy_frame(pair, "right", cond_limit)
    return Frame(xs @ g_inv, "right")


def left_frame(pair, cond_limit=COND_LIMIT):
    """x_1..x_n in X with Σ x_i·x_i* = 1_A."""
    xs, g_inv = _greedy_frame(pair, "left", cond_limit)
    return Frame(g_inv @ xs, "left")


def frame_residual(pair, frame):
    xs = frame.elements
    if frame.side == "right":
        total = np.einsum("ipq,ipr->qr", xs.conj(), xs)
        return float(np.linalg.norm(total - pair.right.small.unit))
    total = np.einsum("ipq,irq->pr", xs, xs.conj())
    return float(np.linalg.norm(total - pair.left.small.unit))


def reconstruction_residual(pair, frame):
    """Right frame: x = Σ (x·x_i*)·x_i. Left frame: x = Σ x_i·(x_i*·x)."""
    X = pair.X.basis
    xs = frame.elements
    if frame.side == "right":
        rebuilt = np.einsum("kpq,irq,irs->kps", X, xs.conj(), xs)
    else:
        rebuilt = np.einsum("ipq,irq,krs->kps", xs, xs.conj(), X)
    return float(np.max(np.abs(rebuilt - X), initial=0.0))


def fullness_witnesses(alg, p, tol=ALG_TOL):
    """a_1..a_K, b_1..b_K in `alg` with Σ a_j·p·b_j = 1."""
    a = alg.basis
    d = alg.dim
    products = np.einsum("kpq,qr,lrs->klps", a, p, a).reshape(d * d, -1)
    lam, _ = solve_least_squares(products.T, alg.unit.ravel())
    u, s, vh = np.linalg.svd(lam.reshape(d, d))
    rank = int(np.sum(s > RANK_RTOL * s[0])) if s.size and s[0] > 0 else 0
    left = np.einsum("kr,kpq->rpq", u[:, :rank] * s[:rank], a)
    right = np.einsum("rl,lpq->rpq", vh[:rank], a)
    residual = float(np.linalg.norm(np.einsum("rpq,qs,rst->pt", left, p, right) - alg.unit))
    if residual > tol * max(1.0, np.sqrt(alg.dim)):
        raise ValidationError("no fullness witnesses: p is not full", residual=residual, tolerance=tol)
    return left, right


def corner_realization(pair, tol=ALG_TOL, cond_limit=COND_LIMIT):
    frame = right_frame(pair, cond_limit)
    xs = frame.elements
    n = frame.size
    P, Q = pair.shape
    V = xs.reshape(n * P, Q)
    p = V @ V.conj().T
    corner = make_corner_pair(pair.left, n, p, tol)
    B, D = pair.right.small, pair.right.large
    Bc, Dc = corner.right.small, corner.right.large
    Vh = V.conj().T
    psi_B = Bc.coords(V @ B.basis @ Vh).T
    psi_D = Dc.coords(V @ D.basis @ Vh).T
    psi_X = corner.X.coords(pair.X.basis @ Vh).T
    psi_Y = corner.Y.coords(pair.Y.basis @ Vh).T
    wa, wb = fullness_witnesses(matrix_amplification(pair.left.small, n), p, tol)
    e = np.zeros((n, n), dtype=np.complex128)
    e[0, 0] = 1.0
    real = CornerRealization(
        pair=pair, frame=frame, n=n, V=V, p=p, e=e, corner_pair=corner,
        psi_B=psi_B, psi_D=psi_D, psi_X=psi_X, psi_Y=psi_Y,
        witnesses_a=wa, witnesses_b=wb,
    )
    report = validate_realization(real, tol)
    if not report.passed:
        worst = report.worst()
        logger.error("Corner realization failed %s (residual %.3e)", worst.check, worst.residual)
        raise ValidationError(f"corner realization failed {worst.check}", worst.residual, worst.tolerance)
    logger.debug("Corner realization with frame size %d, %d fullness witnesses", n, len(wa))
    return real


def _iso_entries(report, name, coeffs, src, dst, tol):
    imgs = dst.element(src.coords(src.basis) @ coeffs.T)
    prods_src = _products(src.basis, src.basis)
    prods_img = dst.element(src.coords(prods_src) @ coeffs.T)
    mult = np.max(np.abs(prods_img - _products(imgs, imgs)), initial=0.0)
    adjoint = np.max(np.abs(dst.element(src.coords(_adj(src.basis)) @ coeffs.T) - _adj(imgs)), initial=0.0)
    unital = np.max(np.abs(dst.element(coeffs @ src.coords(src.unit)) - dst.unit))
    rank = np.linalg.matrix_rank(coeffs, tol=RANK_RTOL * max(np.linalg.norm(coeffs, 2), 1.0))
    report.add(f"corner.{name}_multiplicative", float(mult), tol, f"{name}(xy) = {name}(x){name}(y)")
    report.add(f"corner.{name}_adjoint", float(adjoint), tol, f"{name}(x*) = {name}(x)*")
    report.add(f"corner.{name}_unital", float(unital), tol, f"{name}(1) = p")
    report.add(f"corner.{name}_bijective", float(abs(dst.dim - rank) + abs(src.dim - rank)), 0.0,
               f"{name} is a bijection")


def validate_realization(real, tol=ALG_TOL):
    pair, corner = real.pair, real.corner_pair
    corner_B = corner.right.small
    p = real.p
    B, D = pair.right.small, pair.right.large
    report = Report()
    report.add("corner.frame", frame_residual(pair, real.frame), tol, "Σ x_i*·x_i = 1_B")
    report.add("corner.p_projection",
               float(np.linalg.norm(p - p.conj().T) + np.linalg.norm(p @ p - p)), tol, "p = p* = p²")
    amp = matrix_amplification(pair.left.small, real.n)
    report.add("corner.p_in_MnA", amp.membership_residual(p), tol, "p ∈ M_n(A)")
    total = np.einsum("rpq,qs,rst->pt", real.witnesses_a, p, real.witnesses_b)
    report.add("corner.witness_sum", float(np.linalg.norm(total - amp.unit)), tol, "Σ a_j·p·b_j = 1")
    _iso_entries(report, "psi_B", real.psi_B, B, corner_B, tol)
    _iso_entries(report, "psi_D", real.psi_D, D, corner.right.large, tol)

    via_D = corner.right.large.element(D.coords(B.basis) @ real.psi_D.T)
    via_B = corner_B.element(B.coords(B.basis) @ real.psi_B.T)
    report.add("corner.psi_D_restricts", float(np.max(np.abs(via_D - via_B), initial=0.0)), tol, "Ψ_D|_B = Ψ_B")

    Y = pair.Y.basis
    img_Y = corner.Y.element(pair.Y.coords(Y) @ real.psi_Y.T)
    left_inner = _products(img_Y, _adj(img_Y)) - _products(Y, _adj(Y))
    right_inner = _products(_adj(img_Y), img_Y) - real.apply_psi_D(_products(_adj(Y), Y))
    report.add("corner.psi_Y_left_inner", float(np.max(np.abs(left_inner), initial=0.0)), tol,
               "Ψ_Y(y)·Ψ_Y(y′)* = y·y′*")
    report.add("corner.psi_Y_right_inner", float(np.max(np.abs(right_inner), initial=0.0)), tol,
               "Ψ_Y(y)*·Ψ_Y(y′) = Ψ_D(y*·y′)")
    rank_Y = np.linalg.matrix_rank(real.psi_Y, tol=RANK_RTOL * max(np.linalg.norm(real.psi_Y, 2), 1.0))
    report.add("corner.psi_Y_bijective", float(abs(corner.Y.dim - rank_Y) + abs(pair.Y.dim - rank_Y)), 0.0,
               "Ψ_Y is a bijection")
    img_X = pair.X.basis @ real.V.conj().T
    report.add("corner.psi_X_onto_corner", corner.X.membership_residual(img_X), tol, "Ψ_X(X) ⊆ (1⊗e)M_n(A)p")
    rank_X = np.linalg.matrix_rank(real.psi_X, tol=RANK_RTOL * max(np.linalg.norm(real.psi_X, 2), 1.0))
    report.add("corner.psi_X_bijective", float(abs(corner.X.dim - rank_X) + abs(pair.X.dim - rank_X)), 0.0,
               "Ψ_X is a bijection")
    return report


def conjugate(pair):
    """The D-C pair (Y*, X*) over B ⊂ D and A ⊂ C."""
    return EquivalencePair.from_spans(pair.right, pair.left, _adj(pair.Y.basis), _adj(pair.X.basis))


def amplify_pair(pair, k):
    """(M_k(X), M_k(Y)) over M_k(A) ⊂ M_k(C) and M_k(B) ⊂ M_k(D)."""
    if k == 1:
        return pair
    left = UnitalInclusion(matrix_amplification(pair.left.small, k), matrix_amplification(pair.left.large, k))
    right = UnitalInclusion(matrix_amplification(pair.right.small, k), matrix_amplification(pair.right.large, k))
    units = np.eye(k * k, dtype=np.complex128).reshape(k * k, k, k)

    def amp(span):
        P, Q = span.shape
        return np.einsum("kab,ipq->kiapbq", units, span.basis).reshape(-1, k * P, k * Q)

    return EquivalencePair(left, right, MatrixSpan(amp(pair.Y)), MatrixSpan(amp(pair.X)))


def tensor_compose(pair1, pair2, tol=ALG_TOL):
    """(X⊗_B Z, Y⊗_D W) realized as the product spans {x·z}, {y·w}."""
    if not (algebras_match(pair1.right.small, pair2.left.small, tol)
            and algebras_match(pair1.right.large, pair2.left.large, tol)):
        raise ValidationError("middle inclusions of the two pairs differ")
    composite = EquivalencePair.from_spans(
        pair1.left, pair2.right,
        _products(pair1.Y.basis, pair2.Y.basis),
        _products(pair1.X.basis, pair2.X.basis),
    )
    report = validate_pair(composite, tol)
    if not report.passed:
        worst = report.worst()
        raise ValidationError(f"composite pair failed {worst.check}", worst.residual, worst.tolerance)
    return composite


def same_spans(pair1, pair2):
    """Largest two-sided membership residual between the X and Y spans of two pairs."""
    if pair1.shape != pair2.shape:
        return np.inf
    return max(
        pair1.Y.membership_residual(pair2.Y.basis),
        pair2.Y.membership_residual(pair1.Y.basis),
        pair1.X.membership_residual(pair2.X.basis),
        pair2.X.membership_residual(pair1.X.basis),
    )


def unitary_twist(pair, u, tol=ALG_TOL):
    """(uX, uY) for a unitary u commuting with C."""
    u = as_matrix(u)
    C = pair.left.large
    if np.max(np.abs(u @ u.conj().T - C.unit)) > tol or np.max(np.abs(u.conj().T @ u - C.unit)) > tol:
        raise ValidationError("twist is not a unitary on the unit of C")
    if np.max(np.abs(u @ C.basis - C.basis @ u), initial=0.0) > tol:
        raise ValidationError("twist does not commute with C")
    return EquivalencePair(pair.left, pair.right, MatrixSpan(u @ pair.Y.basis), MatrixSpan(u @ pair.X.basis))


def _complement_rows(span, ops):
    """Rows of (I − P_span)·op for each op, stacked; op maps vec(T) to vec(element)."""
    flat = span.basis.reshape(span.dim, -1)
    return ops - np.einsum("ka,kb,jbt->jat", flat, flat.conj(), ops)


def _witness_ok(pair1, pair2, T, tol):
    D = pair1.right.large.basis
    Y = pair1.Y.basis
    if np.max(np.abs(_adj(T)[None] @ D @ T - D), initial=0.0) > tol:
        return False
    YT = Y @ T
    if np.max(np.abs(_products(YT, _adj(YT)) - _products(Y, _adj(Y))), initial=0.0) > tol:
        return False
    if pair2.Y.membership_residual(YT) > tol or pair2.X.membership_residual(pair1.X.basis @ T) > tol:
        return False
    return span_rank(YT) == pair2.Y.dim and span_rank(pair1.X.basis @ T) == pair2.X.dim


def is_equivalent(pair1, pair2, tol=ALG_TOL, seed=0):
    """
    Search for a bimodule isomorphism Φ(y) = y·T of Y onto W with Φ(X) = Z.

    Returns (found, T). Left C-linearity is built in; T is constrained to
    commute with D, live in the corner of 1_D and carry Y into W and X into Z.
    """
    if pair1.shape != pair2.shape or pair1.X.dim != pair2.X.dim or pair1.Y.dim != pair2.Y.dim:
        return False, None
    if not (algebras_match(pair1.right.large, pair2.right.large, tol)
            and algebras_match(pair1.left.large, pair2.left.large, tol)):
        return False, None
    Q = pair1.shape[1]
    eye = np.eye(Q)
    unit = pair1.right.large.unit
    D = pair1.right.large.basis
    rows = [np.kron(d, eye) - np.kron(eye, d.T) for d in D]
    rows.append(np.eye(Q * Q) - np.kron(unit, unit.T))
    rows.extend(_complement_rows(pair2.Y, np.stack([np.kron(y, eye) for y in pair1.Y.basis])))
    rows.extend(_complement_rows(pair2.X, np.stack([np.kron(x, eye) for x in pair1.X.basis])))
    kernel = nullspace(np.vstack(rows))
    if kernel.shape[1] == 0:
        return False, None

    rng = np.random.default_rng(seed)
    projected = kernel @ (kernel.conj().T @ unit.ravel())
    candidates = [projected] + list(kernel.T)
    candidates.append(kernel @ (rng.standard_normal(kernel.shape[1]) + 1j * rng.standard_normal(kernel.shape[1])))
    for vec in candidates:
        if np.linalg.norm(vec) < RANK_RTOL:
            continue
        t = vec.reshape(Q, Q)
        w, s, vh = np.linalg.svd(t)
        keep = s > RANK_RTOL * s[0]
        polar = w[:, keep] @ vh[keep]
        if _witness_ok(pair1, pair2, polar, max(tol, 1e3 * tol * Q)):
            return True, polar
    return False, None
