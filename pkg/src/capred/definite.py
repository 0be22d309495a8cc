"""The definite set of a map and the corner decomposition built from it.

For a positive unital trace-preserving map the self-adjoint elements with
``phi(a^2) = phi(a)^2`` form the kernel of the quadratic form
``Q(a) = <a,a> - <phi(a),phi(a)>``: the Schwarz inequality makes
``phi(a^2) - phi(a)^2`` positive, and trace preservation makes its trace equal
to ``Q(a)``, so the form vanishes exactly on the definite elements.  This
turns a nonlinear condition into one symmetric eigenproblem.

Projections in the definite set map to projections, and compressing the map
to such a corner yields again a unital trace-preserving map.  Extracting a
partition of unity of definite projections (by taking spectral projections of
a generic definite element and refining recursively) reduces the map to
ergodic corners.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import (
    AlgebraShape,
    CornerEmbedding,
    Element,
    as_rng,
    random_hermitian,
    spectral_decompose,
)
from .basis import coords_to_element, element_to_coords
from .errors import DomainError, ExtractionError, InconsistencyError
from .maps import CERT_COMPOSITION, CERT_USER, PtpuMap, _matrix_from_action

KERNEL_TOL = 1e-8
PARTITION_TOL = 1e-8
_MAX_DEPTH = 8
_MAX_ATTEMPTS = 5


def gram_form(phi: PtpuMap) -> np.ndarray:
    """The symmetric form I - S^T S on hermitian coordinates; PSD for positive maps."""
    s = phi.matrix
    g = np.eye(phi.source.sa_dim) - s.T @ s
    return (g + g.T) / 2


@dataclass(frozen=True)
class DefiniteSet:
    """Orthonormal hermitian basis of {a = a*: phi(a^2) = phi(a)^2}."""

    map: PtpuMap
    basis: tuple[Element, ...]
    gram_eigenvalues: np.ndarray
    tolerance: float
    positivity_verified: bool

    @property
    def dimension(self) -> int:
        return len(self.basis)


def definite_set(phi: PtpuMap, tolerance: float = KERNEL_TOL) -> DefiniteSet:
    g = gram_form(phi)
    eigenvalues, vectors = np.linalg.eigh(g)
    kernel = [vectors[:, j] for j in range(len(eigenvalues)) if eigenvalues[j] <= tolerance]
    basis = tuple(coords_to_element(phi.source, v) for v in kernel)
    for a in basis:
        defect = (phi.apply(a @ a) - phi.apply(a) @ phi.apply(a)).hs_norm()
        if defect > 10 * tolerance:
            raise InconsistencyError(
                f"gram-kernel element fails the direct check ({defect:.3e}); "
                "the map may not be positive")
    unit = element_to_coords(Element.identity(phi.source))
    unit = unit / np.linalg.norm(unit)
    span = np.column_stack([element_to_coords(a) for a in basis])
    residual = float(np.linalg.norm(unit - span @ (span.T @ unit)))
    if residual > 1e-7:
        raise InconsistencyError(f"unit not in the definite span (residual {residual:.3e})")
    eigenvalues = eigenvalues.copy()
    eigenvalues.setflags(write=False)
    return DefiniteSet(phi, basis, eigenvalues, tolerance, phi.cp_by_construction)


def is_ergodic(phi: PtpuMap) -> bool:
    """True iff only scalars satisfy phi(a^2) = phi(a)^2."""
    return definite_set(phi).dimension == 1


@dataclass(frozen=True)
class Partition:
    """Projections e_i with sum 1 whose images under the map are projections."""

    projections: tuple[Element, ...]
    images: tuple[Element, ...]
    certified: bool

    def __len__(self) -> int:
        return len(self.projections)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(int(round(e.trace().real)) for e in self.projections)


def _corner_pair(phi: PtpuMap, e: Element, f: Element,
                 name: str = "") -> tuple[CornerEmbedding, CornerEmbedding, PtpuMap]:
    emb_src = CornerEmbedding.from_projection(e)
    emb_tgt = CornerEmbedding.from_projection(f)
    action = lambda x: emb_tgt.compress(phi.apply(emb_src.embed(x)))
    matrix = _matrix_from_action(emb_src.corner_shape, emb_tgt.corner_shape, action)
    cert = CERT_COMPOSITION if phi.cp_by_construction else CERT_USER
    corner = PtpuMap(emb_src.corner_shape, emb_tgt.corner_shape, matrix, cert,
                     name or f"{phi.name}|corner")
    return emb_src, emb_tgt, corner


def _split_candidates(phi: PtpuMap, rng: np.random.Generator, depth: int) -> list[Element]:
    ds = definite_set(phi)
    if ds.dimension == 1:
        return [Element.identity(phi.source)]
    gains = rng.standard_normal(ds.dimension)
    generic = Element.zeros(phi.source)
    for g, b in zip(gains, ds.basis):
        generic = generic + float(g) * b
    spectrum = spectral_decompose(generic)
    candidates = list(spectrum.projectors)
    if len(candidates) == 1:
        raise ExtractionError("generic definite element did not split (degenerate draw)")
    result: list[Element] = []
    for e in candidates:
        rank = int(round(e.trace().real))
        if rank <= 1 or depth >= _MAX_DEPTH:
            result.append(e)
            continue
        f = phi.apply(e)
        if not f.is_projection(PARTITION_TOL):
            raise ExtractionError("candidate image is not a projection")
        emb_src, _, corner = _corner_pair(phi, e, f)
        sub = _split_candidates(corner, rng, depth + 1)
        if len(sub) == 1:
            result.append(e)
        else:
            result.extend(emb_src.embed(s) for s in sub)
    return result


def _verify_partition(phi: PtpuMap, projections: list[Element]) -> Partition:
    shape = phi.source
    total = Element.zeros(shape)
    for i, e in enumerate(projections):
        if not e.is_projection(PARTITION_TOL):
            raise ExtractionError(f"candidate {i} is not a projection")
        total = total + e
        for other in projections[:i]:
            if (e @ other).hs_norm() > PARTITION_TOL:
                raise ExtractionError("candidates are not mutually orthogonal")
    if (total - Element.identity(shape)).hs_norm() > PARTITION_TOL:
        raise ExtractionError("candidates do not sum to the identity")
    images = []
    for i, e in enumerate(projections):
        f = phi.apply(e)
        if not f.is_projection(PARTITION_TOL):
            raise ExtractionError(f"image of candidate {i} is not a projection")
        images.append(f)
    return Partition(tuple(projections), tuple(images), certified=True)


def extract_partition(ds: DefiniteSet, seed) -> Partition:
    """Deterministic-for-seed partition of unity of definite projections.

    Spectral projections of a generic element of the definite set are taken as
    candidates and refined on each corner until no candidate splits further;
    a failed verification retries with the next seed.
    """
    phi = ds.map
    if ds.dimension == 1:
        e = Element.identity(phi.source)
        return _verify_partition(phi, [e])
    if isinstance(seed, np.random.Generator):
        base = int(seed.integers(2**62))
    else:
        base = int(seed)
    last: Exception | None = None
    for attempt in range(_MAX_ATTEMPTS):
        rng = as_rng(base + attempt)
        try:
            candidates = _split_candidates(phi, rng, depth=0)
            return _verify_partition(phi, candidates)
        except (ExtractionError, DomainError) as err:
            last = err
    raise ExtractionError(f"partition extraction failed after {_MAX_ATTEMPTS} seeds: {last}")


def corner_map(phi: PtpuMap, partition: Partition, index: int) -> PtpuMap:
    """The restriction of phi to e_i M e_i, landing in phi(e_i) P phi(e_i)."""
    if not partition.certified:
        raise DomainError("partition is not certified")
    e = partition.projections[index]
    f = partition.images[index]
    _, _, corner = _corner_pair(phi, e, f, name=f"{phi.name}|corner{index}")
    return corner


def sandwich_identity_check(phi: PtpuMap, a: Element, trials: int = 100, seed: int = 0) -> bool:
    """Check phi(a b a) = phi(a) phi(b) phi(a) on random hermitian b.

    Holds for every a in the definite set; fails generically otherwise.
    """
    rng = as_rng(seed)
    fa = phi.apply(a)
    for _ in range(trials):
        b = random_hermitian(phi.source, rng)
        lhs = phi.apply(a @ b @ a)
        rhs = fa @ phi.apply(b) @ fa
        if (lhs - rhs).hs_norm() > 1e-7:
            return False
    return True
