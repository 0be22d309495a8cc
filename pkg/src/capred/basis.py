"""Orthonormal hermitian coordinates for block matrix algebras.

The basis ordering is fixed so that superoperator matrices are reproducible:
blocks in shape order; within an n-block the n diagonal matrix units come
first, then for each index pair k<l (lexicographic) the symmetric element
(E_kl + E_lk)/sqrt(2) followed by the antisymmetric element
i(E_lk - E_kl)/sqrt(2).  Coordinates of hermitian elements are real and the
Hilbert-Schmidt inner product becomes the euclidean dot product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import AlgebraShape, Element, eta
from .errors import InconsistencyError, ShapeError

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class _BlockLayout:
    dim: int
    offset: int
    ks: np.ndarray  # row indices of the k<l pairs, lexicographic
    ls: np.ndarray


_LAYOUT_CACHE: dict[tuple[int, ...], tuple[_BlockLayout, ...]] = {}


def layouts(shape: AlgebraShape) -> tuple[_BlockLayout, ...]:
    key = shape.blocks
    got = _LAYOUT_CACHE.get(key)
    if got is None:
        out = []
        offset = 0
        for n in key:
            pairs = [(k, l) for k in range(n) for l in range(k + 1, n)]
            ks = np.array([p[0] for p in pairs], dtype=int)
            ls = np.array([p[1] for p in pairs], dtype=int)
            out.append(_BlockLayout(n, offset, ks, ls))
            offset += n * n
        got = tuple(out)
        _LAYOUT_CACHE[key] = got
    return got


def element_to_coords(x: Element) -> np.ndarray:
    """Real coordinates of a hermitian element in the fixed basis."""
    if not x.hermitian:
        raise ShapeError("coordinates are defined for hermitian elements")
    v = np.empty(x.shape.sa_dim)
    for lay, blk in zip(layouts(x.shape), x.blocks):
        n, off = lay.dim, lay.offset
        v[off:off + n] = np.diagonal(blk).real
        if lay.ks.size:
            a_kl = blk[lay.ks, lay.ls]
            a_lk = blk[lay.ls, lay.ks]
            v[off + n:off + n * n:2] = (a_kl + a_lk).real / _SQRT2
            v[off + n + 1:off + n * n:2] = (1j * (a_kl - a_lk)).real / _SQRT2
    return v


def coords_to_element(shape: AlgebraShape, v: np.ndarray) -> Element:
    v = np.asarray(v, dtype=float)
    if v.shape != (shape.sa_dim,):
        raise ShapeError(f"expected {shape.sa_dim} coordinates, got {v.shape}")
    blocks = []
    for lay in layouts(shape):
        n, off = lay.dim, lay.offset
        m = np.zeros((n, n), dtype=complex)
        m[np.arange(n), np.arange(n)] = v[off:off + n]
        if lay.ks.size:
            vals = (v[off + n:off + n * n:2] - 1j * v[off + n + 1:off + n * n:2]) / _SQRT2
            m[lay.ks, lay.ls] = vals
            m[lay.ls, lay.ks] = vals.conj()
        blocks.append(m)
    return Element(shape, blocks, hermitian=True)


# -- batched conversions (leading axis = batch) ------------------------------


def coords_from_stacks(shape: AlgebraShape, stacks: list[np.ndarray]) -> np.ndarray:
    batch = stacks[0].shape[0]
    v = np.empty((batch, shape.sa_dim))
    for lay, blk in zip(layouts(shape), stacks):
        n, off = lay.dim, lay.offset
        v[:, off:off + n] = np.diagonal(blk, axis1=1, axis2=2).real
        if lay.ks.size:
            a_kl = blk[:, lay.ks, lay.ls]
            a_lk = blk[:, lay.ls, lay.ks]
            v[:, off + n:off + n * n:2] = (a_kl + a_lk).real / _SQRT2
            v[:, off + n + 1:off + n * n:2] = (1j * (a_kl - a_lk)).real / _SQRT2
    return v


def stacks_from_coords(shape: AlgebraShape, coords: np.ndarray) -> list[np.ndarray]:
    coords = np.atleast_2d(coords)
    batch = coords.shape[0]
    out = []
    for lay in layouts(shape):
        n, off = lay.dim, lay.offset
        m = np.zeros((batch, n, n), dtype=complex)
        m[:, np.arange(n), np.arange(n)] = coords[:, off:off + n]
        if lay.ks.size:
            vals = (coords[:, off + n:off + n * n:2] - 1j * coords[:, off + n + 1:off + n * n:2]) / _SQRT2
            m[:, lay.ks, lay.ls] = vals
            m[:, lay.ls, lay.ks] = vals.conj()
        out.append(m)
    return out


def entropies_from_coords(shape: AlgebraShape, coords: np.ndarray, floor: float = -1e-6) -> np.ndarray:
    """Entropy of each row of coordinates; requires near-positive spectra."""
    coords = np.atleast_2d(coords)
    total = np.zeros(coords.shape[0])
    for stack in stacks_from_coords(shape, coords):
        ev = np.linalg.eigvalsh(stack)
        low = float(ev.min())
        if low < floor:
            raise InconsistencyError(f"entropy of a non-positive matrix (eigenvalue {low:.3e})")
        total += eta(np.clip(ev, 0.0, None)).sum(axis=1)
    return total


def rank_one_coords(shape: AlgebraShape, block: int, vecs: np.ndarray) -> np.ndarray:
    """Coordinates of |v><v| for unit rows v living in the given block."""
    vecs = np.atleast_2d(vecs)
    lay = layouts(shape)[block]
    mats = vecs[:, :, None] * vecs.conj()[:, None, :]
    coords = np.zeros((vecs.shape[0], shape.sa_dim))
    n, off = lay.dim, lay.offset
    coords[:, off:off + n] = np.diagonal(mats, axis1=1, axis2=2).real
    if lay.ks.size:
        a_kl = mats[:, lay.ks, lay.ls]
        coords[:, off + n:off + n * n:2] = 2 * a_kl.real / _SQRT2
        coords[:, off + n + 1:off + n * n:2] = -2 * a_kl.imag / _SQRT2
    return coords


def identity_coords(shape: AlgebraShape) -> np.ndarray:
    v = np.zeros(shape.sa_dim)
    for lay in layouts(shape):
        v[lay.offset:lay.offset + lay.dim] = 1.0
    return v


def trace_from_coords(shape: AlgebraShape, coords: np.ndarray) -> np.ndarray:
    coords = np.atleast_2d(coords)
    out = np.zeros(coords.shape[0])
    for lay in layouts(shape):
        out += coords[:, lay.offset:lay.offset + lay.dim].sum(axis=1)
    return out


class HermitianBasis:
    """The materialized basis elements, in the fixed order."""

    _CACHE: dict[tuple[int, ...], "HermitianBasis"] = {}

    def __init__(self, shape: AlgebraShape):
        self.shape = shape
        eye = np.eye(shape.sa_dim)
        self.elements = tuple(coords_to_element(shape, eye[j]) for j in range(shape.sa_dim))

    @classmethod
    def for_shape(cls, shape) -> "HermitianBasis":
        if not isinstance(shape, AlgebraShape):
            shape = AlgebraShape(shape)
        got = cls._CACHE.get(shape.blocks)
        if got is None:
            got = cls(shape)
            cls._CACHE[shape.blocks] = got
        return got

    def __len__(self) -> int:
        return self.shape.sa_dim

    def __iter__(self):
        return iter(self.elements)
