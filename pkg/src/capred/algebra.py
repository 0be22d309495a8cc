"""Finite-dimensional C*-algebras as block-diagonal matrix algebras.

An algebra is a direct sum of full matrix algebras and is described by the
ordered list of its block dimensions.  Elements are block-diagonal complex
matrices; the trace is the sum of the ordinary matrix traces, so it takes the
value 1 at each minimal projection.  Entropy uses the natural logarithm
throughout; any base conversion is a display concern.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ShapeError

HERMITICITY_TOL = 1e-12
STATE_POSITIVITY_TOL = 1e-10
STATE_TRACE_TOL = 1e-10
PROJECTION_TOL = 1e-9
DEGENERACY_TOL = 1e-8


@dataclass(frozen=True)
class AlgebraShape:
    """Ordered block dimensions [n1, ..., nk] of a sum of matrix algebras."""

    blocks: tuple[int, ...]

    def __init__(self, blocks: Iterable[int]):
        blocks = tuple(int(n) for n in blocks)
        if not blocks or any(n < 1 for n in blocks):
            raise ShapeError(f"block dimensions must be positive integers, got {blocks!r}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def total_rank(self) -> int:
        """Trace of the identity: the number of minimal projections summing to 1."""
        return sum(self.blocks)

    @property
    def sa_dim(self) -> int:
        """Real dimension of the self-adjoint part."""
        return sum(n * n for n in self.blocks)

    @property
    def is_abelian(self) -> bool:
        return all(n == 1 for n in self.blocks)

    def __str__(self) -> str:
        return "[" + ",".join(str(n) for n in self.blocks) + "]"


def _freeze(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=complex, copy=True)
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class Element:
    """A block-diagonal complex matrix over an :class:`AlgebraShape`."""

    shape: AlgebraShape
    blocks: tuple[np.ndarray, ...]
    hermitian: bool

    def __init__(self, shape, blocks: Sequence[np.ndarray], hermitian: bool | None = None):
        if not isinstance(shape, AlgebraShape):
            shape = AlgebraShape(shape)
        if len(blocks) != len(shape.blocks):
            raise ShapeError(f"expected {len(shape.blocks)} blocks, got {len(blocks)}")
        mats = []
        for n, b in zip(shape.blocks, blocks):
            m = np.asarray(b, dtype=complex)
            if m.shape != (n, n):
                raise ShapeError(f"block of shape {m.shape} does not match dimension {n}")
            mats.append(_freeze(m))
        herm_defect = max(float(np.abs(m - m.conj().T).max()) for m in mats)
        if hermitian is None:
            hermitian = herm_defect <= HERMITICITY_TOL
        elif hermitian and herm_defect > HERMITICITY_TOL:
            raise ShapeError(f"declared hermitian but defect {herm_defect:.3e} exceeds {HERMITICITY_TOL}")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "blocks", tuple(mats))
        object.__setattr__(self, "hermitian", bool(hermitian))

    # -- constructors -------------------------------------------------------

    @classmethod
    def identity(cls, shape) -> "Element":
        if not isinstance(shape, AlgebraShape):
            shape = AlgebraShape(shape)
        return cls(shape, [np.eye(n) for n in shape.blocks], hermitian=True)

    @classmethod
    def zeros(cls, shape) -> "Element":
        if not isinstance(shape, AlgebraShape):
            shape = AlgebraShape(shape)
        return cls(shape, [np.zeros((n, n)) for n in shape.blocks], hermitian=True)

    # -- algebra ------------------------------------------------------------

    def _binary(self, other: "Element", op) -> "Element":
        if self.shape != other.shape:
            raise ShapeError(f"shape mismatch: {self.shape} vs {other.shape}")
        return Element(self.shape, [op(a, b) for a, b in zip(self.blocks, other.blocks)])

    def __add__(self, other: "Element") -> "Element":
        return self._binary(other, np.add)

    def __sub__(self, other: "Element") -> "Element":
        return self._binary(other, np.subtract)

    def __neg__(self) -> "Element":
        return Element(self.shape, [-b for b in self.blocks], hermitian=self.hermitian)

    def __mul__(self, scalar) -> "Element":
        return Element(self.shape, [scalar * b for b in self.blocks])

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "Element":
        return self * (1.0 / scalar)

    def __matmul__(self, other: "Element") -> "Element":
        return self._binary(other, np.matmul)

    def adjoint(self) -> "Element":
        return Element(self.shape, [b.conj().T for b in self.blocks], hermitian=self.hermitian)

    def trace(self) -> complex:
        return complex(sum(np.trace(b) for b in self.blocks))

    def hs_norm(self) -> float:
        return float(np.sqrt(sum(np.vdot(b, b).real for b in self.blocks)))

    def is_projection(self, tol: float = PROJECTION_TOL) -> bool:
        if not self.hermitian:
            # tolerate tiny antihermitian dust
            if max(float(np.abs(b - b.conj().T).max()) for b in self.blocks) > tol:
                return False
        return all(float(np.abs(b @ b - b).max()) <= tol for b in self.blocks)

    def dense(self) -> np.ndarray:
        """Full block-diagonal matrix; mainly for tests and display."""
        r = self.shape.total_rank
        out = np.zeros((r, r), dtype=complex)
        pos = 0
        for b in self.blocks:
            n = b.shape[0]
            out[pos:pos + n, pos:pos + n] = b
            pos += n
        return out

    def allclose(self, other: "Element", tol: float = 1e-9) -> bool:
        return self.shape == other.shape and (self - other).hs_norm() <= tol

    # -- JSON ---------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "shape": list(self.shape.blocks),
            "blocks": [[[float(z.real), float(z.imag)] for z in b.ravel()] for b in self.blocks],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Element":
        shape = AlgebraShape(data["shape"])
        mats = []
        for n, flat in zip(shape.blocks, data["blocks"]):
            arr = np.array([complex(re, im) for re, im in flat], dtype=complex)
            if arr.size != n * n:
                raise ShapeError(f"block payload of length {arr.size} does not match {n}x{n}")
            mats.append(arr.reshape(n, n))
        return cls(shape, mats)


def hermitian_parts(x: Element) -> tuple[Element, Element]:
    """Split x = h + i*k with h, k hermitian."""
    h = Element(x.shape, [(b + b.conj().T) / 2 for b in x.blocks], hermitian=True)
    k = Element(x.shape, [(b - b.conj().T) / 2j for b in x.blocks], hermitian=True)
    return h, k


def hs_inner(x: Element, y: Element) -> complex:
    """Hilbert-Schmidt pairing Tr(x* y), summed over blocks."""
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {y.shape}")
    return complex(sum(np.vdot(a, b) for a, b in zip(x.blocks, y.blocks)))


@dataclass(frozen=True)
class State:
    """A positive element with unit (unnormalized) trace."""

    element: Element

    def __init__(self, element: Element):
        if not element.hermitian:
            raise DomainError("a state must be hermitian")
        ev = np.concatenate([np.linalg.eigvalsh(b) for b in element.blocks])
        if float(ev.min()) < -STATE_POSITIVITY_TOL:
            raise DomainError(f"not positive: eigenvalue {float(ev.min()):.3e}")
        tr = element.trace().real
        if abs(tr - 1.0) > STATE_TRACE_TOL:
            raise DomainError(f"trace {tr!r} is not 1 within {STATE_TRACE_TOL}")
        object.__setattr__(self, "element", element)

    @property
    def shape(self) -> AlgebraShape:
        return self.element.shape


def eta(t):
    """eta(t) = -t log t for t > 0, eta(0) = 0; elementwise on arrays."""
    t = np.asarray(t, dtype=float)
    safe = np.where(t > 0.0, t, 1.0)
    return np.where(t > 0.0, -t * np.log(safe), 0.0)


def entropy(a) -> float:
    """Entropy of a positive element: sum of eta over its eigenvalues (nats).

    Eigenvalues in [-1e-10, 0) are clamped to 0; anything more negative is a
    domain error.
    """
    if isinstance(a, State):
        a = a.element
    if not a.hermitian:
        raise ShapeError("entropy requires a hermitian element")
    ev = np.concatenate([np.linalg.eigvalsh(b) for b in a.blocks])
    if float(ev.min()) < -STATE_POSITIVITY_TOL:
        raise DomainError(f"not positive: eigenvalue {float(ev.min()):.3e}")
    return float(eta(np.clip(ev, 0.0, None)).sum())


@dataclass(frozen=True)
class Spectrum:
    """Grouped spectral decomposition a = sum_j lambda_j p_j."""

    eigenvalues: tuple[float, ...]
    projectors: tuple[Element, ...]

    def reconstruct(self) -> Element:
        shape = self.projectors[0].shape
        out = Element.zeros(shape)
        for lam, p in zip(self.eigenvalues, self.projectors):
            out = out + lam * p
        return out


def spectral_decompose(a: Element, degeneracy_tol: float = DEGENERACY_TOL) -> Spectrum:
    """Eigenvalues sorted descending; eigenvalues closer than the tolerance share
    one projector (which may span several blocks)."""
    if not a.hermitian:
        raise ShapeError("spectral decomposition requires a hermitian element")
    pairs = []  # (eigenvalue, block index, eigenvector)
    for bi, blk in enumerate(a.blocks):
        w, v = np.linalg.eigh(blk)
        for j in range(len(w)):
            pairs.append((float(w[j]), bi, v[:, j]))
    pairs.sort(key=lambda t: (-t[0], t[1]))
    groups: list[list[tuple[float, int, np.ndarray]]] = []
    for item in pairs:
        if groups and groups[-1][-1][0] - item[0] <= degeneracy_tol:
            groups[-1].append(item)
        else:
            groups.append([item])
    eigenvalues = []
    projectors = []
    shape = a.shape
    for grp in groups:
        eigenvalues.append(sum(t[0] for t in grp) / len(grp))
        blocks = [np.zeros((n, n), dtype=complex) for n in shape.blocks]
        for _, bi, vec in grp:
            blocks[bi] = blocks[bi] + np.outer(vec, vec.conj())
        blocks = [(m + m.conj().T) / 2 for m in blocks]
        projectors.append(Element(shape, blocks, hermitian=True))
    return Spectrum(tuple(eigenvalues), tuple(projectors))


# -- corners ---------------------------------------------------------------


def _first_nonzero_abs(col: np.ndarray) -> float:
    idx = np.flatnonzero(np.abs(col) > 1e-12)
    return float(abs(col[idx[0]])) if idx.size else 0.0


def _range_basis(p: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of the range of a projection block.

    Columns of p are taken in order of decreasing absolute value of their
    first nonzero coordinate (ties by column index) and orthonormalized.
    """
    n = p.shape[0]
    r = int(round(float(np.trace(p).real)))
    if r == 0:
        return np.zeros((n, 0), dtype=complex)
    order = sorted(range(n), key=lambda j: (-_first_nonzero_abs(p[:, j]), j))
    basis: list[np.ndarray] = []
    for j in order:
        v = p[:, j].astype(complex)
        for _ in range(2):  # two Gram-Schmidt passes for orthogonality
            for b in basis:
                v = v - b * np.vdot(b, v)
        nrm = float(np.linalg.norm(v))
        if nrm > 1e-7:
            basis.append(v / nrm)
        if len(basis) == r:
            break
    if len(basis) != r:
        raise DomainError("failed to extract an orthonormal basis of the projection range")
    return np.column_stack(basis)


@dataclass(frozen=True)
class CornerEmbedding:
    """Compression/embedding pair between an algebra and the corner eMe."""

    projection: Element
    bases: tuple[np.ndarray, ...]        # per parent block, (n, r) with r possibly 0
    corner_shape: AlgebraShape
    parent_blocks: tuple[int, ...]       # parent block index of each corner block

    @classmethod
    def from_projection(cls, e: Element) -> "CornerEmbedding":
        if not e.is_projection():
            raise DomainError("not a projection within tolerance")
        bases = tuple(_freeze(_range_basis(b)) for b in e.blocks)
        ranks = [v.shape[1] for v in bases]
        kept = [i for i, r in enumerate(ranks) if r > 0]
        if not kept:
            raise DomainError("zero projection has no corner algebra")
        return cls(e, bases, AlgebraShape([ranks[i] for i in kept]), tuple(kept))

    def compress(self, a: Element) -> Element:
        if a.shape != self.projection.shape:
            raise ShapeError("element does not live over the parent algebra")
        blocks = []
        for i in self.parent_blocks:
            v = self.bases[i]
            blocks.append(v.conj().T @ a.blocks[i] @ v)
        return Element(self.corner_shape, blocks)

    def embed(self, x: Element) -> Element:
        if x.shape != self.corner_shape:
            raise ShapeError("element does not live over the corner algebra")
        parent = self.projection.shape
        blocks = [np.zeros((n, n), dtype=complex) for n in parent.blocks]
        for cb, i in enumerate(self.parent_blocks):
            v = self.bases[i]
            blocks[i] = v @ x.blocks[cb] @ v.conj().T
        return Element(parent, blocks)


def compress(a: Element, e: Element) -> Element:
    """Rewrite eae on the corner algebra eMe; Tr(result) = Tr(eae)."""
    return CornerEmbedding.from_projection(e).compress(a)


# -- seeded generators ------------------------------------------------------


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _ginibre(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def random_hermitian(shape, seed) -> Element:
    """Deterministic-from-seed hermitian element with gaussian entries."""
    if not isinstance(shape, AlgebraShape):
        shape = AlgebraShape(shape)
    rng = as_rng(seed)
    blocks = []
    for n in shape.blocks:
        g = _ginibre(n, rng)
        blocks.append((g + g.conj().T) / 2)
    return Element(shape, blocks, hermitian=True)


def random_state(shape, seed) -> State:
    """g* g over gaussian g, renormalized to unit trace; deterministic per seed."""
    if not isinstance(shape, AlgebraShape):
        shape = AlgebraShape(shape)
    rng = as_rng(seed)
    blocks = []
    for n in shape.blocks:
        g = _ginibre(n, rng)
        blocks.append(g.conj().T @ g)
    tr = sum(float(np.trace(b).real) for b in blocks)
    return State(Element(shape, [b / tr for b in blocks], hermitian=True))


def haar_unitary(shape, seed) -> Element:
    """Blockwise Haar-distributed unitary (QR of a gaussian, phases fixed)."""
    if not isinstance(shape, AlgebraShape):
        shape = AlgebraShape(shape)
    rng = as_rng(seed)
    blocks = []
    for n in shape.blocks:
        q, r = np.linalg.qr(_ginibre(n, rng))
        d = np.diagonal(r)
        q = q * (d / np.abs(d))
        blocks.append(q)
    return Element(shape, blocks)


def diagonal_projection(shape, indices: Iterable[int]) -> Element:
    """Projection with 1 at the given positions of the concatenated diagonal."""
    if not isinstance(shape, AlgebraShape):
        shape = AlgebraShape(shape)
    wanted = set(int(i) for i in indices)
    if wanted and (min(wanted) < 0 or max(wanted) >= shape.total_rank):
        raise DomainError(f"diagonal index out of range for shape {shape}")
    blocks = []
    pos = 0
    for n in shape.blocks:
        d = np.zeros(n)
        for k in range(n):
            if pos + k in wanted:
                d[k] = 1.0
        blocks.append(np.diag(d))
        pos += n
    return Element(shape, blocks, hermitian=True)
