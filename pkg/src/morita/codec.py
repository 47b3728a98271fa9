"""
JSON documents for matrices, algebras, pairs, maps, quasi-bases and scenarios.

A matrix is {"rows": r, "cols": c, "data": [[re, im], ...]} in row-major order.
Decoders re-validate what they rebuild.
"""

import numpy as np

from utils.config import ALG_TOL

from .bimodule import EquivalencePair, validate_pair
from .errors import ScenarioError, ShapeMismatchError, ValidationError
from .fdca import FdStarAlgebra, MatrixSpan, UnitalInclusion
from .generator import Bundle, InclusionSpec, Scenario
from .maps import BimoduleMap
from .quasibasis import QuasiBasis, verify_quasi_basis


def encode_matrix(m):
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2:
        raise ShapeMismatchError(f"expected a 2d matrix, got shape {m.shape}")
    return {
        "rows": m.shape[0],
        "cols": m.shape[1],
        "data": [[float(z.real), float(z.imag)] for z in m.ravel()],
    }


def decode_matrix(doc):
    rows, cols = int(doc["rows"]), int(doc["cols"])
    data = np.asarray(doc["data"], dtype=float).reshape(-1, 2)
    if len(data) != rows * cols:
        raise ShapeMismatchError(f"matrix document holds {len(data)} entries, expected {rows * cols}")
    return (data[:, 0] + 1j * data[:, 1]).reshape(rows, cols)


def _encode_stack(stack):
    return [encode_matrix(m) for m in stack]


def _decode_stack(docs, shape):
    if not docs:
        return np.zeros((0,) + tuple(shape), dtype=np.complex128)
    return np.stack([decode_matrix(d) for d in docs])


def encode_algebra(alg):
    return {"ambient_dim": alg.ambient_dim, "basis": _encode_stack(alg.basis), "unit": encode_matrix(alg.unit)}


def decode_algebra(doc, tol=ALG_TOL):
    unit = decode_matrix(doc["unit"])
    alg = FdStarAlgebra(basis=_decode_stack(doc["basis"], unit.shape), unit=unit)
    if alg.ambient_dim != int(doc["ambient_dim"]):
        raise ShapeMismatchError("unit does not match the declared ambient dimension")
    alg.validate(tol)
    return alg


def encode_inclusion(inc):
    return {"A": encode_algebra(inc.small), "C": encode_algebra(inc.large)}


def decode_inclusion(doc, tol=ALG_TOL):
    inc = UnitalInclusion(decode_algebra(doc["A"], tol), decode_algebra(doc["C"], tol))
    inc.validate(tol)
    return inc


def encode_pair(pair):
    return {
        "left": encode_inclusion(pair.left),
        "right": encode_inclusion(pair.right),
        "Y_basis": _encode_stack(pair.Y.basis),
        "X_basis": _encode_stack(pair.X.basis),
    }


def decode_pair(doc, left=None, tol=ALG_TOL):
    left = left if left is not None else decode_inclusion(doc["left"], tol)
    right = decode_inclusion(doc["right"], tol)
    shape = (left.ambient_dim, right.ambient_dim)
    pair = EquivalencePair(left, right, MatrixSpan(_decode_stack(doc["Y_basis"], shape)),
                           MatrixSpan(_decode_stack(doc["X_basis"], shape)))
    report = validate_pair(pair, tol)
    if not report.passed:
        worst = report.worst()
        raise ValidationError(f"stored pair failed {worst.check}", worst.residual, worst.tolerance)
    return pair


def encode_map(phi, weight=None):
    doc = {"source": "C", "target": "A", "coeffs": encode_matrix(phi.coeffs)}
    if weight is not None:
        doc["weight"] = encode_matrix(weight)
    return doc


def decode_map(doc, inc, tol=ALG_TOL):
    """(φ, weight or None); the map must be A-bimodular over `inc`."""
    coeffs = decode_matrix(doc["coeffs"])
    if coeffs.shape != (inc.small.dim, inc.large.dim):
        raise ShapeMismatchError(f"map coefficients must be {inc.small.dim}x{inc.large.dim}")
    phi = BimoduleMap(inc, coeffs)
    phi.validate(tol)
    weight = decode_matrix(doc["weight"]) if "weight" in doc else None
    return phi, weight


def encode_quasi_basis(qb):
    return {
        "pairs": [[encode_matrix(u), encode_matrix(v)] for u, v in qb.pairs],
        "owner_map": qb.owner_name,
    }


def decode_quasi_basis(doc, phi, tol=ALG_TOL):
    shape = phi.source.shape
    u = _decode_stack([p[0] for p in doc["pairs"]], shape)
    v = _decode_stack([p[1] for p in doc["pairs"]], shape)
    qb = QuasiBasis(u, v, phi, doc.get("owner_map", "phi"))
    report = verify_quasi_basis(qb, tol)
    if not report.passed:
        worst = report.worst()
        raise ValidationError(f"stored quasi-basis failed {worst.check}", worst.residual, worst.tolerance)
    return qb


def encode_scenario(scenario):
    spec = scenario.inclusion
    return {
        "seed": scenario.seed,
        "inclusion": {
            "small_blocks": list(spec.small_blocks),
            "large_blocks": list(spec.large_blocks),
            "embedding": [list(row) for row in spec.embedding],
            "multiplicity": spec.multiplicity,
        },
        "n": scenario.n,
        "ranks": list(scenario.ranks),
        "map_kind": scenario.map_kind,
        "twist": scenario.twist,
        "weights": None if scenario.weights is None else list(scenario.weights),
    }


def decode_scenario(doc):
    try:
        inc = doc["inclusion"]
        spec = InclusionSpec(
            tuple(int(a) for a in inc["small_blocks"]),
            tuple(int(c) for c in inc["large_blocks"]),
            tuple(tuple(int(x) for x in row) for row in inc["embedding"]),
            int(inc.get("multiplicity", 1)),
        )
        weights = doc.get("weights")
        scenario = Scenario(
            seed=int(doc["seed"]),
            inclusion=spec,
            n=int(doc["n"]),
            ranks=tuple(int(r) for r in doc["ranks"]),
            map_kind=str(doc["map_kind"]),
            twist=bool(doc.get("twist", True)),
            weights=None if weights is None else tuple(float(w) for w in weights),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"malformed scenario: {exc}") from exc
    scenario.check()
    return scenario


def encode_realization(real):
    return {
        "n": real.n,
        "frame": _encode_stack(real.frame.elements),
        "p": encode_matrix(real.p),
        "psi_B": encode_matrix(real.psi_B),
        "psi_D": encode_matrix(real.psi_D),
        "psi_X": encode_matrix(real.psi_X),
        "psi_Y": encode_matrix(real.psi_Y),
        "witnesses": [[encode_matrix(a), encode_matrix(b)] for a, b in zip(real.witnesses_a, real.witnesses_b)],
    }


def encode_bundle(bundle):
    """Documents keyed by file stem."""
    docs = {
        "scenario": encode_scenario(bundle.scenario),
        "inclusion": encode_inclusion(bundle.inclusion),
        "pair": encode_pair(bundle.pair),
        "map": encode_map(bundle.phi, bundle.weight),
    }
    if bundle.quasi_basis is not None:
        docs["quasibasis"] = encode_quasi_basis(bundle.quasi_basis)
    return docs


def decode_bundle(name, docs, tol=ALG_TOL):
    scenario = decode_scenario(docs["scenario"])
    inc = decode_inclusion(docs["inclusion"], tol)
    pair = decode_pair(docs["pair"], left=inc, tol=tol)
    phi, weight = decode_map(docs["map"], inc, tol)
    qb = decode_quasi_basis(docs["quasibasis"], phi, tol) if "quasibasis" in docs else None
    return Bundle(name, scenario, inc, pair, phi, qb, weight)
