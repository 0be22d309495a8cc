"""Positive unital trace-preserving maps as real superoperator matrices.

Maps are stored in the fixed hermitian coordinates of :mod:`capred.basis`
(rows indexed by the target basis, columns by the source basis); since they
preserve hermiticity this representation loses nothing and makes unitality
and trace preservation linear checks.  Positivity is certified by the way a
map was constructed, not decided after the fact: every constructor below
yields a completely positive map, and anything else must be loaded as
``UserAsserted`` and is flagged downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .algebra import AlgebraShape, Element, as_rng, haar_unitary, hermitian_parts, random_state
from .basis import (
    HermitianBasis,
    coords_to_element,
    element_to_coords,
    identity_coords,
)
from .errors import CertificateError, DomainError, ShapeError

UNITALITY_TOL = 1e-9
TRACE_TOL = 1e-9
SPOTCHECK_TOL = -1e-8
_SPOTCHECK_STATES = 200
_SPOTCHECK_SEED = 0x5EED

CERT_PINCHING = "Pinching"
CERT_UNITARY = "UnitaryConjugation"
CERT_DEPOLARIZE_CORNER = "DepolarizeCorner"
CERT_CLASSICAL = "ClassicalStochastic"
CERT_COMPOSITION = "Composition"
CERT_DIRECT_SUM = "DirectSum"
CERT_TENSOR = "Tensor"
CERT_CONVEX = "ConvexCombination"
CERT_USER = "UserAsserted"

ALL_CERTIFICATES = frozenset({
    CERT_PINCHING, CERT_UNITARY, CERT_DEPOLARIZE_CORNER, CERT_CLASSICAL,
    CERT_COMPOSITION, CERT_DIRECT_SUM, CERT_TENSOR, CERT_CONVEX, CERT_USER,
})


def _frozen(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=float, copy=True)
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class PtpuMap:
    """A positive unital trace-preserving map between two algebras."""

    source: AlgebraShape
    target: AlgebraShape
    matrix: np.ndarray
    certificate: str
    name: str = ""

    def __init__(self, source, target, matrix, certificate: str, name: str = ""):
        if not isinstance(source, AlgebraShape):
            source = AlgebraShape(source)
        if not isinstance(target, AlgebraShape):
            target = AlgebraShape(target)
        if certificate not in ALL_CERTIFICATES:
            raise DomainError(f"unknown positivity certificate {certificate!r}")
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (target.sa_dim, source.sa_dim):
            raise ShapeError(
                f"superoperator must be {target.sa_dim}x{source.sa_dim}, got {matrix.shape}")
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "matrix", _frozen(matrix))
        object.__setattr__(self, "certificate", certificate)
        object.__setattr__(self, "name", str(name))
        self._validate()

    def _validate(self) -> None:
        if self.source.total_rank != self.target.total_rank:
            raise DomainError(
                f"unitality + trace preservation force equal total ranks, "
                f"got {self.source.total_rank} vs {self.target.total_rank}")
        id_s = identity_coords(self.source)
        id_t = identity_coords(self.target)
        unital_defect = float(np.abs(self.matrix @ id_s - id_t).max())
        if unital_defect > UNITALITY_TOL:
            raise DomainError(f"not unital: defect {unital_defect:.3e}")
        trace_defect = float(np.abs(self.matrix.T @ id_t - id_s).max())
        if trace_defect > TRACE_TOL:
            raise DomainError(f"not trace preserving: defect {trace_defect:.3e}")
        rng = as_rng(_SPOTCHECK_SEED)
        for _ in range(_SPOTCHECK_STATES):
            out = self.apply(random_state(self.source, rng).element)
            low = min(float(np.linalg.eigvalsh(b).min()) for b in out.blocks)
            if low < SPOTCHECK_TOL:
                raise DomainError(f"positivity spot-check failed: eigenvalue {low:.3e}")

    # -- action --------------------------------------------------------------

    def apply(self, x: Element) -> Element:
        if x.shape != self.source:
            raise ShapeError(f"element over {x.shape} fed to map over {self.source}")
        if x.hermitian:
            return coords_to_element(self.target, self.matrix @ element_to_coords(x))
        h, k = hermitian_parts(x)
        oh = self.apply(h)
        ok = self.apply(k)
        return Element(self.target, [a + 1j * b for a, b in zip(oh.blocks, ok.blocks)])

    @property
    def cp_by_construction(self) -> bool:
        return self.certificate != CERT_USER

    def is_idempotent(self, tol: float = 1e-9) -> bool:
        if self.source != self.target:
            return False
        return float(np.abs(self.matrix @ self.matrix - self.matrix).max()) <= tol

    def to_json(self) -> dict:
        return {
            "source": list(self.source.blocks),
            "target": list(self.target.blocks),
            "matrix": [[float(v) for v in row] for row in self.matrix],
            "certificate": self.certificate,
            "name": self.name,
        }

    @classmethod
    def from_json(cls, data: dict) -> "PtpuMap":
        return cls(
            AlgebraShape(data["source"]),
            AlgebraShape(data["target"]),
            np.array(data["matrix"], dtype=float),
            data.get("certificate", CERT_USER),
            data.get("name", ""),
        )


def _matrix_from_action(source: AlgebraShape, target: AlgebraShape,
                        action: Callable[[Element], Element]) -> np.ndarray:
    cols = [element_to_coords(action(b)) for b in HermitianBasis.for_shape(source)]
    return np.column_stack(cols)


# -- constructors ------------------------------------------------------------


def make_pinching(shape, projections: Sequence[Element], name: str = "") -> PtpuMap:
    """x -> sum_i p_i x p_i for a partition of unity {p_i}."""
    if not isinstance(shape, AlgebraShape):
        shape = AlgebraShape(shape)
    projections = list(projections)
    if not projections:
        raise DomainError("a pinching needs at least one projection")
    for p in projections:
        if p.shape != shape:
            raise ShapeError("projection over the wrong algebra")
        if not p.is_projection():
            raise DomainError("pinching argument is not a projection")
    total = projections[0]
    for p in projections[1:]:
        total = total + p
    if (total - Element.identity(shape)).hs_norm() > 1e-8:
        raise DomainError("projections do not sum to the identity")

    def action(x: Element) -> Element:
        out = Element.zeros(shape)
        for p in projections:
            out = out + (p @ x @ p)
        return out

    return PtpuMap(shape, shape, _matrix_from_action(shape, shape, action),
                   CERT_PINCHING, name or f"pinch{shape}")


def identity_map(shape, name: str = "") -> PtpuMap:
    if not isinstance(shape, AlgebraShape):
        shape = AlgebraShape(shape)
    return PtpuMap(shape, shape, np.eye(shape.sa_dim), CERT_PINCHING,
                   name or f"id{shape}")


def make_unitary_conjugation(shape, u: Element, name: str = "") -> PtpuMap:
    """x -> u x u* for a blockwise unitary u."""
    if not isinstance(shape, AlgebraShape):
        shape = AlgebraShape(shape)
    if u.shape != shape:
        raise ShapeError("unitary over the wrong algebra")
    defect = max(float(np.abs(b.conj().T @ b - np.eye(b.shape[0])).max()) for b in u.blocks)
    if defect > 1e-9:
        raise DomainError(f"not unitary: defect {defect:.3e}")
    action = lambda x: u @ x @ u.adjoint()
    return PtpuMap(shape, shape, _matrix_from_action(shape, shape, action),
                   CERT_UNITARY, name or f"conj{shape}")


def make_depolarize_corner(shape, e: Element, name: str = "") -> PtpuMap:
    """x -> (1-e)x(1-e) + Tr(exe) e / Tr(e): pinch off the corner and flatten it."""
    if not isinstance(shape, AlgebraShape):
        shape = AlgebraShape(shape)
    if e.shape != shape:
        raise ShapeError("projection over the wrong algebra")
    if not e.is_projection():
        raise DomainError("corner argument is not a projection")
    t = e.trace().real
    if t < 0.5:
        raise DomainError("corner projection must be nonzero")
    comp = Element.identity(shape) - e

    def action(x: Element) -> Element:
        corner_weight = (e @ x @ e).trace()
        return (comp @ x @ comp) + (corner_weight / t) * e

    return PtpuMap(shape, shape, _matrix_from_action(shape, shape, action),
                   CERT_DEPOLARIZE_CORNER, name or f"depolcorner{shape}")


def make_classical_stochastic(t_matrix, name: str = "") -> PtpuMap:
    """Embed a doubly stochastic matrix as a map on the abelian algebra [1,...,1]."""
    T = np.asarray(t_matrix, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {T.shape}")
    if float(T.min()) < -1e-12:
        raise DomainError(f"not doubly stochastic: negative entry {float(T.min()):.3e}")
    T = np.clip(T, 0.0, None)
    rows = np.abs(T.sum(axis=1) - 1.0).max()
    cols = np.abs(T.sum(axis=0) - 1.0).max()
    if max(float(rows), float(cols)) > 1e-10:
        raise DomainError(f"not doubly stochastic: row/column defect {max(float(rows), float(cols)):.3e}")
    shape = AlgebraShape([1] * T.shape[0])
    return PtpuMap(shape, shape, T, CERT_CLASSICAL, name or f"dstoch{T.shape[0]}")


def make_convex_combination(pairs: Sequence[tuple[float, PtpuMap]], name: str = "") -> PtpuMap:
    if not pairs:
        raise DomainError("empty convex combination")
    weights = np.array([w for w, _ in pairs], dtype=float)
    if float(weights.min()) < 0:
        raise DomainError("convex weights must be nonnegative")
    if abs(float(weights.sum()) - 1.0) > 1e-10:
        raise DomainError(f"convex weights sum to {float(weights.sum())!r}, not 1")
    first = pairs[0][1]
    for _, phi in pairs:
        if phi.source != first.source or phi.target != first.target:
            raise ShapeError("convex combination of maps with different shapes")
    matrix = sum(w * phi.matrix for w, phi in pairs)
    cert = CERT_CONVEX if all(phi.cp_by_construction for _, phi in pairs) else CERT_USER
    return PtpuMap(first.source, first.target, matrix, cert, name or "convex")


# -- combinators -------------------------------------------------------------


def compose_maps(phi: PtpuMap, psi: PtpuMap, name: str = "") -> PtpuMap:
    """The composition x -> phi(psi(x))."""
    if psi.target != phi.source:
        raise ShapeError(f"cannot compose: inner target {psi.target} vs outer source {phi.source}")
    cert = CERT_COMPOSITION if (phi.cp_by_construction and psi.cp_by_construction) else CERT_USER
    return PtpuMap(psi.source, phi.target, phi.matrix @ psi.matrix, cert,
                   name or f"compose({phi.name},{psi.name})")


def direct_sum(phi: PtpuMap, psi: PtpuMap, name: str = "") -> PtpuMap:
    source = AlgebraShape(phi.source.blocks + psi.source.blocks)
    target = AlgebraShape(phi.target.blocks + psi.target.blocks)
    m = np.zeros((target.sa_dim, source.sa_dim))
    dt, ds = phi.target.sa_dim, phi.source.sa_dim
    m[:dt, :ds] = phi.matrix
    m[dt:, ds:] = psi.matrix
    cert = CERT_DIRECT_SUM if (phi.cp_by_construction and psi.cp_by_construction) else CERT_USER
    return PtpuMap(source, target, m, cert, name or f"dsum({phi.name},{psi.name})")


def tensor_shape(a: AlgebraShape, b: AlgebraShape) -> AlgebraShape:
    return AlgebraShape([na * nb for na in a.blocks for nb in b.blocks])


def tensor_elements(x: Element, y: Element) -> Element:
    blocks = [np.kron(xb, yb) for xb in x.blocks for yb in y.blocks]
    herm = True if (x.hermitian and y.hermitian) else None
    return Element(tensor_shape(x.shape, y.shape), blocks, hermitian=herm)


_PRODUCT_BASIS_CACHE: dict[tuple[tuple[int, ...], tuple[int, ...]], np.ndarray] = {}


def _product_basis_change(a: AlgebraShape, b: AlgebraShape) -> np.ndarray:
    """Orthogonal matrix taking product-basis coordinates to canonical ones."""
    key = (a.blocks, b.blocks)
    got = _PRODUCT_BASIS_CACHE.get(key)
    if got is None:
        ea = HermitianBasis.for_shape(a).elements
        eb = HermitianBasis.for_shape(b).elements
        cols = [element_to_coords(tensor_elements(x, y)) for x in ea for y in eb]
        got = _frozen(np.column_stack(cols))
        _PRODUCT_BASIS_CACHE[key] = got
    return got


def tensor_product(phi: PtpuMap, psi: PtpuMap, name: str = "") -> PtpuMap:
    """Tensor of two maps; only certified-positive factors are accepted, since
    positivity of a tensor product of merely positive maps is unverified."""
    if not (phi.cp_by_construction and psi.cp_by_construction):
        raise CertificateError("positivity of tensor not certified")
    o_s = _product_basis_change(phi.source, psi.source)
    o_t = _product_basis_change(phi.target, psi.target)
    matrix = o_t @ np.kron(phi.matrix, psi.matrix) @ o_s.T
    return PtpuMap(tensor_shape(phi.source, psi.source), tensor_shape(phi.target, psi.target),
                   matrix, CERT_TENSOR, name or f"tensor({phi.name},{psi.name})")


def adjoint_map(phi: PtpuMap) -> PtpuMap:
    """The Hilbert-Schmidt adjoint; again unital and trace preserving."""
    return PtpuMap(phi.target, phi.source, phi.matrix.T, phi.certificate,
                   name=f"adj({phi.name})")


# -- seeded generator for experiments ----------------------------------------


def random_cp_map(shape, seed, layers: int = 2) -> PtpuMap:
    """A random composition of certified-positive generators; deterministic per seed."""
    if not isinstance(shape, AlgebraShape):
        shape = AlgebraShape(shape)
    rng = as_rng(seed)
    out = identity_map(shape)
    for _ in range(layers):
        kind = int(rng.integers(4))
        if kind == 0:
            layer = make_unitary_conjugation(shape, haar_unitary(shape, rng))
        elif kind == 1:
            layer = _random_pinching(shape, rng)
        elif kind == 2:
            layer = _random_depolarize_corner(shape, rng)
        else:
            layer = make_convex_combination([
                (0.5, make_unitary_conjugation(shape, haar_unitary(shape, rng))),
                (0.5, _random_pinching(shape, rng)),
            ])
        out = compose_maps(layer, out)
    return out


def _random_rotated_partition(shape: AlgebraShape, rng: np.random.Generator) -> list[Element]:
    """A random partition of unity: rotate the diagonal one by a Haar unitary."""
    parts = int(rng.integers(1, shape.total_rank + 1))
    u = haar_unitary(shape, rng)
    assignment: dict[int, list[tuple[int, int]]] = {}
    for bi, n in enumerate(shape.blocks):
        for k in range(n):
            assignment.setdefault(int(rng.integers(parts)), []).append((bi, k))
    projections = []
    for part in sorted(assignment):
        blocks = [np.zeros((n, n), dtype=complex) for n in shape.blocks]
        for bi, k in assignment[part]:
            col = u.blocks[bi][:, k]
            blocks[bi] = blocks[bi] + np.outer(col, col.conj())
        blocks = [(m + m.conj().T) / 2 for m in blocks]
        projections.append(Element(shape, blocks, hermitian=True))
    return projections


def _random_pinching(shape: AlgebraShape, rng: np.random.Generator) -> PtpuMap:
    return make_pinching(shape, _random_rotated_partition(shape, rng))


def _random_depolarize_corner(shape: AlgebraShape, rng: np.random.Generator) -> PtpuMap:
    parts = _random_rotated_partition(shape, rng)
    return make_depolarize_corner(shape, parts[int(rng.integers(len(parts)))])
