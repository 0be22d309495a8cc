"""Reduction of capacity to ergodic corners, and the derived pipelines.

The central fact implemented here: for a partition of unity of definite
projections, the capacity of the whole map equals the stable log-sum-exp of
the corner capacities, with the optimal block weights proportional to
``exp(corner capacity)``.  Corner capacities are computed exactly where the
corner is trivial, by Blahut-Arimoto where it is abelian, and by ensemble
ascent otherwise; the corner ensembles are lifted and reassembled into a
global ensemble that certifies the combined value from below.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import exp, log

import numpy as np

from .algebra import (
    AlgebraShape,
    Element,
    State,
    as_rng,
    compress,
    entropy,
    eta,
    random_state,
)
from .capacity import (
    METHOD_EXACT,
    METHOD_REDUCTION,
    CapacityResult,
    Ensemble,
    OptimizerSettings,
    _clamped_result,
    _spawn_seeds,
    blahut_arimoto,
    holevo_chi,
    optimize_capacity,
)
from .definite import Partition, _corner_pair, definite_set, extract_partition
from .errors import DomainError, InconsistencyError
from .maps import PtpuMap, direct_sum, identity_map, tensor_product
from .maps import _random_rotated_partition


def _logsumexp(values) -> float:
    values = list(values)
    m = max(values)
    return m + log(sum(exp(v - m) for v in values))


def _exact_zero_result(corner: PtpuMap) -> CapacityResult:
    unit = Element.identity(corner.source)
    ensemble = Ensemble.build([1.0], [State(unit / unit.trace().real)])
    return _clamped_result(0.0, 0.0, 0.0, ensemble, METHOD_EXACT, 0, True,
                           corner.cp_by_construction)


def _corner_capacity(corner: PtpuMap, settings: OptimizerSettings) -> CapacityResult:
    if corner.source.blocks == (1,):
        # the corner algebra is the scalars; the unit is the only state
        return _exact_zero_result(corner)
    if corner.source.is_abelian and corner.target.is_abelian:
        result = blahut_arimoto(corner.matrix)
        if not corner.cp_by_construction:
            result = _clamped_result(result.value, result.lower_bound, result.upper_bound,
                                     result.best_ensemble, result.method, result.iterations,
                                     result.converged, False)
        return result
    return optimize_capacity(corner, settings)


@dataclass(frozen=True)
class ReductionTree:
    """Corner decomposition with per-corner capacities and their combination."""

    map: PtpuMap
    partition: Partition
    children: tuple[tuple[PtpuMap, CapacityResult], ...]
    combined_value: float
    optimal_weights: tuple[float, ...]
    assembled_ensemble: Ensemble
    assembled_chi: float
    positivity_verified: bool = True

    def to_capacity_result(self) -> CapacityResult:
        upper = _logsumexp([r.upper_bound for _, r in self.children])
        upper = min(upper, log(self.map.target.total_rank))
        return _clamped_result(self.combined_value, self.assembled_chi, upper,
                               self.assembled_ensemble, METHOD_REDUCTION,
                               sum(r.iterations for _, r in self.children),
                               all(r.converged for _, r in self.children),
                               self.positivity_verified)

    def to_json(self) -> dict:
        out = {
            "value": float(self.combined_value),
            "children": [
                {
                    "cornerRank": int(round(e.trace().real)),
                    "capacity": float(res.value),
                    "method": res.method,
                }
                for e, (_, res) in zip(self.partition.projections, self.children)
            ],
            "optimalWeights": [float(w) for w in self.optimal_weights],
            "assembledEnsembleChi": float(self.assembled_chi),
        }
        if not self.positivity_verified:
            out["positivityUnverified"] = True
        return out


def reduce_capacity(phi: PtpuMap, settings: OptimizerSettings | None = None,
                    extraction_seed: int | None = None) -> ReductionTree:
    """Decompose into ergodic corners and combine capacities by log-sum-exp."""
    st = settings or OptimizerSettings()
    eseed = st.seed if extraction_seed is None else int(extraction_seed)
    ds = definite_set(phi)
    partition = extract_partition(ds, eseed)
    child_seeds = _spawn_seeds((st.seed << 8) ^ 0x1234, len(partition))
    pairs = [
        _corner_pair(phi, e, f, name=f"{phi.name}|corner{i}")
        for i, (e, f) in enumerate(zip(partition.projections, partition.images))
    ]

    def solve(i: int) -> CapacityResult:
        return _corner_capacity(pairs[i][2], st.with_seed(child_seeds[i]))

    if st.threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=st.threads) as pool:
            results = list(pool.map(solve, range(len(pairs))))
    else:
        results = [solve(i) for i in range(len(pairs))]

    values = [r.value for r in results]
    combined = _logsumexp(values)
    weights = [exp(v - combined) for v in values]

    # reassemble a global ensemble from the corner ensembles
    lifted_weights: list[float] = []
    lifted_states: list[State] = []
    for (emb_src, _, _), w, res in zip(pairs, weights, results):
        for lam, s in zip(res.best_ensemble.weights, res.best_ensemble.states):
            lifted_weights.append(w * lam)
            lifted_states.append(State(emb_src.embed(s.element)))
    assembled = Ensemble.build(lifted_weights, lifted_states)
    chi = holevo_chi(phi, assembled)
    gaps = sum(r.value - r.lower_bound for r in results)
    if chi < combined - gaps - 1e-6:
        raise InconsistencyError(
            f"assembled ensemble certifies only {chi}, expected at least "
            f"{combined - gaps - 1e-6}")

    children = tuple((corner, res) for (_, _, corner), res in zip(pairs, results))
    return ReductionTree(phi, partition, children, float(combined),
                         tuple(float(w) for w in weights), assembled, float(chi),
                         phi.cp_by_construction)


# -- restriction to the pinched subalgebra ------------------------------------


@dataclass(frozen=True)
class RestrictionReport:
    full: CapacityResult
    restricted: CapacityResult
    gap: float

    def to_json(self) -> dict:
        return {
            "full": self.full.to_json(),
            "restricted": self.restricted.to_json(),
            "gap": float(self.gap),
        }


def restricted_map(phi: PtpuMap, partition: Partition) -> PtpuMap:
    """The direct sum of the corner maps: phi restricted to block-diagonal states."""
    if not partition.certified:
        raise DomainError("partition is not certified")
    corners = [
        _corner_pair(phi, e, f, name=f"{phi.name}|corner{i}")[2]
        for i, (e, f) in enumerate(zip(partition.projections, partition.images))
    ]
    out = corners[0]
    for corner in corners[1:]:
        out = direct_sum(out, corner)
    return out


def restriction_equality(phi: PtpuMap, partition: Partition,
                         settings: OptimizerSettings | None = None) -> RestrictionReport:
    """Optimize the full map and its block-diagonal restriction; report the gap.

    For partitions of definite projections the two capacities agree, so the
    gap should be within the combined optimizer tolerance.
    """
    st = settings or OptimizerSettings()
    full = optimize_capacity(phi, st)
    restricted = optimize_capacity(restricted_map(phi, partition), st)
    return RestrictionReport(full, restricted, float(full.value - restricted.value))


# -- entropy under pinching ----------------------------------------------------


@dataclass(frozen=True)
class PinchingEntropyReport:
    """The restricted-entropy identity and the slack of the entropy bound."""

    restricted_entropy: float        # sum_i S(e_i Q e_i), on the corners
    weighted_form: float             # sum_i eta(w_i) + w_i S(e_i Q e_i / w_i)
    equality_residual: float
    slack: float                     # S(Q) - (restricted - sum_i eta(w_i)); >= 0
    block_weights: tuple[float, ...]

    def to_json(self) -> dict:
        return {
            "restrictedEntropy": float(self.restricted_entropy),
            "weightedForm": float(self.weighted_form),
            "equalityResidual": float(self.equality_residual),
            "slack": float(self.slack),
            "blockWeights": [float(w) for w in self.block_weights],
        }


def pinching_entropy_check(state: State, projections) -> PinchingEntropyReport:
    """Check S(pinched) = sum eta(w_i) + sum w_i S(corner_i / w_i) and the bound
    ``S(pinched) - sum eta(w_i) <= S(state)``."""
    if hasattr(projections, "projections"):
        projections = projections.projections
    projections = list(projections)
    shape = state.shape
    total = Element.zeros(shape)
    for e in projections:
        if not e.is_projection():
            raise DomainError("partition member is not a projection")
        total = total + e
    if (total - Element.identity(shape)).hs_norm() > 1e-8:
        raise DomainError("projections do not sum to the identity")

    weights = []
    restricted = 0.0
    weighted = 0.0
    for e in projections:
        corner = compress(state.element, e)
        w = float(corner.trace().real)
        weights.append(w)
        s_corner = entropy(corner)
        restricted += s_corner
        if w > 1e-12:
            weighted += float(eta(w)) + w * entropy(corner / w)
    slack = entropy(state.element) - (restricted - float(eta(np.array(weights)).sum()))
    return PinchingEntropyReport(restricted, weighted, restricted - weighted,
                                 float(slack), tuple(weights))


def pinching_entropy_suite(shape, samples: int, seed: int) -> dict:
    """Random states against randomly rotated partitions; returns worst cases."""
    if not isinstance(shape, AlgebraShape):
        shape = AlgebraShape(shape)
    rng = as_rng(seed)
    slacks = []
    residuals = []
    for _ in range(int(samples)):
        state = random_state(shape, rng)
        parts = _random_rotated_partition(shape, rng)
        report = pinching_entropy_check(state, parts)
        slacks.append(report.slack)
        residuals.append(abs(report.equality_residual))
    return {
        "shape": list(shape.blocks),
        "samples": int(samples),
        "minSlack": float(min(slacks)),
        "maxEqualityResidual": float(max(residuals)),
        "slacks": [float(s) for s in slacks],
        "equalityResiduals": [float(r) for r in residuals],
    }


# -- exact value for projection maps -------------------------------------------


def projection_map_capacity(phi: PtpuMap, extraction_seed: int = 0) -> CapacityResult:
    """For idempotent maps the capacity is the log of the image rank: the
    definite set of a contractive idempotent is its fixed-point algebra, and
    every minimal corner contributes capacity zero."""
    if phi.source != phi.target:
        raise DomainError("projection maps must be endomorphisms")
    if not phi.is_idempotent():
        raise DomainError("map is not idempotent")
    ds = definite_set(phi)
    partition = extract_partition(ds, extraction_seed)
    weights = []
    states = []
    for e, f in zip(partition.projections, partition.images):
        if (f - e).hs_norm() > 1e-7:
            raise InconsistencyError("partition member is not fixed by the idempotent map")
        t = e.trace().real
        weights.append(1.0 / len(partition))
        states.append(State(e / t))
    value = log(len(partition))
    ensemble = Ensemble.build(weights, states)
    chi = holevo_chi(phi, ensemble)
    return _clamped_result(value, chi, value, ensemble, METHOD_EXACT, 0, True,
                           phi.cp_by_construction)


# -- tensor experiments ---------------------------------------------------------


@dataclass(frozen=True)
class AdditivityReport:
    factor_a: ReductionTree
    factor_b: ReductionTree
    sum_value: float
    tensor: ReductionTree
    deficit: float                     # tensor lower bound minus the sum

    def to_json(self) -> dict:
        return {
            "factorA": self.factor_a.to_json(),
            "factorB": self.factor_b.to_json(),
            "sum": float(self.sum_value),
            "tensor": self.tensor.to_json(),
            "deficit": float(self.deficit),
        }


def additivity_experiment(phi: PtpuMap, psi: PtpuMap,
                          settings: OptimizerSettings | None = None) -> AdditivityReport:
    """Compare the reduced capacity of the tensor against the sum of factors.

    The tensor side is a certified lower bound; product ensembles make the
    deficit nonnegative up to optimizer tolerance.
    """
    st = settings or OptimizerSettings()
    tree_a = reduce_capacity(phi, st)
    tree_b = reduce_capacity(psi, st)
    tensor = tensor_product(phi, psi)
    tree_t = reduce_capacity(tensor, st)
    total = tree_a.combined_value + tree_b.combined_value
    return AdditivityReport(tree_a, tree_b, float(total), tree_t,
                            float(tree_t.combined_value - total))


@dataclass(frozen=True)
class TensorIdentityReport:
    factor: ReductionTree
    identity_rank: int
    expected: float                    # factor capacity + log rank
    tensor: ReductionTree
    gap: float

    def to_json(self) -> dict:
        return {
            "factor": self.factor.to_json(),
            "identityRank": int(self.identity_rank),
            "expected": float(self.expected),
            "tensor": self.tensor.to_json(),
            "gap": float(self.gap),
        }


def tensor_with_identity(phi: PtpuMap, id_shape,
                         settings: OptimizerSettings | None = None) -> TensorIdentityReport:
    """Tensor with the identity map: the capacity grows by log of the rank."""
    if not isinstance(id_shape, AlgebraShape):
        id_shape = AlgebraShape(id_shape)
    st = settings or OptimizerSettings()
    tree = reduce_capacity(phi, st)
    tensor = tensor_product(phi, identity_map(id_shape))
    tree_t = reduce_capacity(tensor, st)
    expected = tree.combined_value + log(id_shape.total_rank)
    return TensorIdentityReport(tree, id_shape.total_rank, float(expected), tree_t,
                                float(tree_t.combined_value - expected))
