"""Holevo-type capacity of a map by ensemble optimization.

The objective for an ensemble (lambda_m, a_m) is
``S(phi(sum lambda_m a_m)) - sum lambda_m S(phi(a_m))``; the capacity is its
supremum over all ensembles.  Ensemble members are restricted to rank-one
projections (the extreme points of the state set: refining any member into
extreme points never decreases the objective, because the subtracted term is
linear in the decomposition while the leading term is fixed by the
barycenter).  The ensemble size is capped at ``sa_dim + 1`` members per the
Caratheodory bound.

Three search routes are provided: a multi-restart finite-difference ascent
(the workhorse), the Blahut-Arimoto iteration as an exact oracle on abelian
algebras, and a dense random + grid sampler usable as an independent
lower-bound oracle at small dimension.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from math import comb, log

import numpy as np

from .algebra import AlgebraShape, Element, State, as_rng, entropy, haar_unitary
from .basis import (
    entropies_from_coords,
    identity_coords,
    rank_one_coords,
)
from .errors import DomainError, InconsistencyError, ShapeError
from .maps import PtpuMap

WEIGHT_PRUNE = 1e-15
_FD_STEP = 1e-6
_BOUNDARY_MIX = 1e-9
_STALL_WINDOW = 50

METHOD_EXACT = "Exact"
METHOD_BLAHUT_ARIMOTO = "BlahutArimoto"
METHOD_ENSEMBLE_ASCENT = "EnsembleAscent"
METHOD_BRUTE_FORCE = "BruteForce"
METHOD_REDUCTION = "Reduction"


@dataclass(frozen=True)
class OptimizerSettings:
    restarts: int = 16
    max_iter: int = 2000
    tol: float = 1e-7
    seed: int = 42
    threads: int = 1

    def with_seed(self, seed: int) -> "OptimizerSettings":
        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class Ensemble:
    """Weights and states with their cached barycenter."""

    weights: tuple[float, ...]
    states: tuple[State, ...]
    barycenter: State

    @classmethod
    def build(cls, weights, states) -> "Ensemble":
        pairs = [(float(w), s) for w, s in zip(weights, states) if float(w) > WEIGHT_PRUNE]
        if not pairs:
            raise DomainError("ensemble has no members with positive weight")
        shape = pairs[0][1].shape
        if any(s.shape != shape for _, s in pairs):
            raise ShapeError("ensemble states live over different algebras")
        if len(pairs) > shape.sa_dim + 1:
            raise DomainError(
                f"ensemble of size {len(pairs)} exceeds the Caratheodory cap {shape.sa_dim + 1}")
        w = np.array([p[0] for p in pairs])
        total = float(w.sum())
        if abs(total - 1.0) > 1e-6:
            raise DomainError(f"ensemble weights sum to {total!r}")
        w = w / total
        bary = Element.zeros(shape)
        for wi, (_, s) in zip(w, pairs):
            bary = bary + float(wi) * s.element
        return cls(tuple(float(x) for x in w), tuple(s for _, s in pairs), State(bary))

    @property
    def shape(self) -> AlgebraShape:
        return self.states[0].shape

    def __len__(self) -> int:
        return len(self.weights)

    def to_json(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "states": [s.element.to_json() for s in self.states],
        }


@dataclass(frozen=True)
class CapacityResult:
    """A certified lower bound (via the ensemble), an upper bound, and the method."""

    value: float
    lower_bound: float
    upper_bound: float
    best_ensemble: Ensemble
    method: str
    iterations: int
    converged: bool
    positivity_verified: bool = True

    def __post_init__(self):
        if self.lower_bound < -1e-9 or self.lower_bound > self.value + 1e-9 \
                or self.value > self.upper_bound + 1e-9:
            raise InconsistencyError(
                f"capacity bounds out of order: {self.lower_bound} <= {self.value} "
                f"<= {self.upper_bound}")

    def to_json(self) -> dict:
        out = {
            "value": float(self.value),
            "lowerBound": float(self.lower_bound),
            "upperBound": float(self.upper_bound),
            "method": self.method,
            "ensemble": self.best_ensemble.to_json(),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }
        if not self.positivity_verified:
            out["positivityUnverified"] = True
        return out


def holevo_chi(phi: PtpuMap, ensemble: Ensemble) -> float:
    """S(phi(barycenter)) - sum_m lambda_m S(phi(a_m))."""
    if ensemble.shape != phi.source:
        raise ShapeError(f"ensemble over {ensemble.shape} fed to map over {phi.source}")
    out = entropy(phi.apply(ensemble.barycenter.element))
    for w, s in zip(ensemble.weights, ensemble.states):
        out -= w * entropy(phi.apply(s.element))
    return float(out)


def _softmax(t: np.ndarray) -> np.ndarray:
    e = np.exp(t - t.max())
    return e / e.sum()


def _spawn_seeds(seed: int, n: int) -> list[int]:
    ss = np.random.SeedSequence(int(seed) & ((1 << 63) - 1))
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in ss.spawn(n)]


def _clamped_result(value, lower, upper, ensemble, method, iterations, converged,
                    positivity_verified=True) -> CapacityResult:
    lower = max(0.0, float(lower))
    value = float(value)
    upper = float(upper)
    value = min(max(value, lower), upper)
    lower = min(lower, value)
    return CapacityResult(value, lower, upper, ensemble, method, int(iterations),
                          bool(converged), positivity_verified)


# -- finite-difference ensemble ascent ---------------------------------------


class _Workspace:
    def __init__(self, phi: PtpuMap):
        self.phi = phi
        self.matrix = phi.matrix
        self.src = phi.source
        self.tgt = phi.target
        self.mix_row = identity_coords(phi.target) / phi.target.total_rank

    def _smooth(self, coords: np.ndarray) -> np.ndarray:
        return (1.0 - _BOUNDARY_MIX) * coords + _BOUNDARY_MIX * self.mix_row

    def member_outputs(self, blocks, vecs) -> np.ndarray:
        out = np.empty((len(vecs), self.tgt.sa_dim))
        for b in sorted(set(blocks)):
            idx = [i for i, bi in enumerate(blocks) if bi == b]
            raw = np.vstack([vecs[i] for i in idx])
            norms = np.linalg.norm(raw, axis=1, keepdims=True)
            norms[norms < 1e-12] = 1.0
            coords = rank_one_coords(self.src, b, raw / norms)
            out[idx] = coords @ self.matrix.T
        return out

    def evaluate(self, blocks, vecs, theta):
        outputs = self.member_outputs(blocks, vecs)
        ent = entropies_from_coords(self.tgt, outputs)
        lam = _softmax(theta)
        bar = lam @ outputs
        h = entropies_from_coords(self.tgt, bar)[0]
        return float(h - lam @ ent), outputs, ent


def _gradient(ws: _Workspace, blocks, vecs, theta, outputs, h=_FD_STEP):
    k = len(vecs)
    lam = _softmax(theta)
    bar = lam @ outputs
    ent_s = entropies_from_coords(ws.tgt, ws._smooth(outputs))
    base_mix = float(lam @ ent_s)

    # weight logits: only the barycenter and the reweighting change
    lams = np.empty((2 * k, k))
    for m in range(k):
        for s, delta in enumerate((h, -h)):
            t2 = theta.copy()
            t2[m] += delta
            lams[2 * m + s] = _softmax(t2)
    bars = lams @ outputs
    hb = entropies_from_coords(ws.tgt, ws._smooth(bars))
    chis = hb - lams @ ent_s
    grad_theta = (chis[0::2] - chis[1::2]) / (2 * h)

    # member vectors: one member output and the barycenter change per component
    grad_vecs = []
    for m in range(k):
        v = vecs[m]
        n = v.size
        eye = np.eye(n)
        pert = np.concatenate([
            v[None, :] + h * eye, v[None, :] - h * eye,
            v[None, :] + 1j * h * eye, v[None, :] - 1j * h * eye,
        ], axis=0)
        norms = np.linalg.norm(pert, axis=1, keepdims=True)
        norms[norms < 1e-12] = 1.0
        coords = rank_one_coords(ws.src, blocks[m], pert / norms)
        om = coords @ ws.matrix.T
        sm = entropies_from_coords(ws.tgt, ws._smooth(om))
        bars_m = bar[None, :] + lam[m] * (om - outputs[m][None, :])
        hm = entropies_from_coords(ws.tgt, ws._smooth(bars_m))
        chi_m = hm - (base_mix - lam[m] * ent_s[m] + lam[m] * sm)
        gre = (chi_m[0:n] - chi_m[n:2 * n]) / (2 * h)
        gim = (chi_m[2 * n:3 * n] - chi_m[3 * n:4 * n]) / (2 * h)
        grad_vecs.append(gre + 1j * gim)
    return grad_theta, grad_vecs


@dataclass
class _RestartOutcome:
    chi: float
    blocks: list[int]
    vecs: list[np.ndarray]
    theta: np.ndarray
    iterations: int
    converged: bool


def _init_members(shape: AlgebraShape, restart_index: int, rng: np.random.Generator):
    if restart_index == 0:
        # one pure state along every matrix-unit direction, uniform weights
        blocks, vecs = [], []
        for b, n in enumerate(shape.blocks):
            eye = np.eye(n, dtype=complex)
            for j in range(n):
                blocks.append(b)
                vecs.append(eye[j].copy())
        return blocks, vecs, np.zeros(len(vecs))
    k = shape.sa_dim + 1
    nblocks = len(shape.blocks)
    weights = np.array(shape.blocks, dtype=float)
    weights /= weights.sum()
    blocks = list(range(nblocks))
    blocks += [int(rng.choice(nblocks, p=weights)) for _ in range(k - nblocks)]
    vecs = []
    for b in blocks:
        n = shape.blocks[b]
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        vecs.append(v / np.linalg.norm(v))
    return blocks, vecs, np.zeros(k)


def _run_restart(phi: PtpuMap, restart_index: int, seed: int,
                 settings: OptimizerSettings) -> _RestartOutcome:
    ws = _Workspace(phi)
    rng = as_rng(seed)
    blocks, vecs, theta = _init_members(phi.source, restart_index, rng)
    chi, outputs, _ = ws.evaluate(blocks, vecs, theta)
    best = [chi]
    iterations = 0
    converged = False
    # the step grows on success so boundary optima (weights pushed to zero
    # through the softmax) are reached in logarithmically many iterations
    alpha = 1.0
    for it in range(settings.max_iter):
        iterations += 1
        grad_theta, grad_vecs = _gradient(ws, blocks, vecs, theta, outputs)
        gmax = max(float(np.abs(grad_theta).max()),
                   max(float(np.abs(g).max()) for g in grad_vecs))
        if gmax > 1e-13:
            step = alpha
            for _ in range(60):
                cand_vecs = [v + step * g for v, g in zip(vecs, grad_vecs)]
                cand_theta = theta + step * grad_theta
                cand_chi, cand_out, _ = ws.evaluate(blocks, cand_vecs, cand_theta)
                if cand_chi > chi + 1e-12:
                    vecs = [v / max(np.linalg.norm(v), 1e-12) for v in cand_vecs]
                    theta = cand_theta - cand_theta.max()
                    chi, outputs, _ = ws.evaluate(blocks, vecs, theta)
                    alpha = min(step * 4.0, 1e6)
                    break
                step *= 0.25
        best.append(max(best[-1], chi))
        if it + 1 >= _STALL_WINDOW and best[-1] - best[-1 - _STALL_WINDOW] < settings.tol:
            converged = True
            break
    # line search only ever accepts improvements, so chi is the running best
    return _RestartOutcome(chi, blocks, vecs, theta, iterations, converged)


def _ensemble_from_members(shape: AlgebraShape, blocks, vecs, weights) -> Ensemble:
    states = []
    for b, v in zip(blocks, vecs):
        v = v / np.linalg.norm(v)
        mats = [np.zeros((n, n), dtype=complex) for n in shape.blocks]
        mats[b] = np.outer(v, v.conj())
        states.append(State(Element(shape, mats, hermitian=True)))
    return Ensemble.build(weights, states)


def optimize_capacity(phi: PtpuMap, settings: OptimizerSettings | None = None) -> CapacityResult:
    """Multi-restart projected finite-difference ascent over rank-one ensembles.

    Returns the best certified lower bound found; the first restart starts
    from the matrix-unit pure states with uniform weights, the others from
    seeded random members.
    """
    st = settings or OptimizerSettings()
    if st.restarts < 1:
        raise DomainError("restarts must be at least 1")
    seeds = _spawn_seeds(st.seed, st.restarts)

    def run(r: int) -> _RestartOutcome:
        return _run_restart(phi, r, seeds[r], st)

    if st.threads > 1 and st.restarts > 1:
        with ThreadPoolExecutor(max_workers=st.threads) as pool:
            outcomes = list(pool.map(run, range(st.restarts)))
    else:
        outcomes = [run(r) for r in range(st.restarts)]

    best = outcomes[0]
    for out in outcomes[1:]:
        if out.chi > best.chi:
            best = out
    ensemble = _ensemble_from_members(phi.source, best.blocks, best.vecs,
                                      _softmax(best.theta))
    chi = holevo_chi(phi, ensemble)
    upper = log(phi.target.total_rank)
    value = max(0.0, chi)
    return _clamped_result(value, value, upper, ensemble, METHOD_ENSEMBLE_ASCENT,
                           sum(o.iterations for o in outcomes), outcomes[-1].converged,
                           phi.cp_by_construction)


# -- Blahut-Arimoto (abelian oracle) ------------------------------------------


def blahut_arimoto(t_matrix, tol: float = 1e-10, max_iter: int = 200_000) -> CapacityResult:
    """Classical capacity of a doubly stochastic matrix, in nats.

    On abelian algebras the extreme points of the state set are point masses,
    so the ensemble objective reduces to the mutual information of the input
    distribution and the standard iteration applies.
    """
    T = np.asarray(t_matrix, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {T.shape}")
    if float(T.min()) < -1e-12:
        raise DomainError(f"not doubly stochastic: negative entry {float(T.min()):.3e}")
    T = np.clip(T, 0.0, None)
    defect = max(float(np.abs(T.sum(axis=0) - 1.0).max()),
                 float(np.abs(T.sum(axis=1) - 1.0).max()))
    if defect > 1e-10:
        raise DomainError(f"not doubly stochastic: marginal defect {defect:.3e}")
    t = T.shape[0]
    w = T.T.copy()  # rows are inputs: w[j, i] = P(out=i | in=j)
    mask = w > 0.0
    logw = np.where(mask, np.log(np.where(mask, w, 1.0)), 0.0)
    p = np.full(t, 1.0 / t)
    value = 0.0
    d = np.zeros(t)
    prev = None
    converged = False
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        qy = p @ w
        terms = np.where(mask, w * (logw - np.log(qy)[None, :]), 0.0)
        d = terms.sum(axis=1)
        value = float(p @ d)
        if prev is not None and abs(value - prev) < tol:
            converged = True
            break
        prev = value
        z = p * np.exp(d - d.max())
        p = z / z.sum()

    shape = AlgebraShape([1] * t)
    states, weights = [], []
    for j in range(t):
        if p[j] > WEIGHT_PRUNE:
            mats = [np.array([[1.0 if i == j else 0.0]]) for i in range(t)]
            states.append(State(Element(shape, mats, hermitian=True)))
            weights.append(float(p[j]))
    ensemble = Ensemble.build(weights, states)
    upper = min(float(d.max(initial=0.0)), log(t)) if converged else log(t)
    upper = max(upper, value)
    return _clamped_result(value, value, upper, ensemble, METHOD_BLAHUT_ARIMOTO,
                           iterations, converged)


# -- brute force (small-dimension oracle) -------------------------------------


def _simplex_grid(k: int, resolution: int, cap: int = 20_000) -> np.ndarray:
    if k == 1:
        return np.array([[1.0]])
    d = max(1, int(resolution))
    while d > 1 and comb(d + k - 1, k - 1) > cap:
        d -= 1
    rows = []
    for cuts in itertools.combinations(range(d + k - 1), k - 1):
        prev = -1
        parts = []
        for c in cuts:
            parts.append(c - prev - 1)
            prev = c
        parts.append(d + k - 2 - prev)
        rows.append(parts)
    return np.array(rows, dtype=float) / d


def _chi_for_weights(tgt: AlgebraShape, outputs: np.ndarray, ent: np.ndarray,
                     weights: np.ndarray) -> np.ndarray:
    bars = weights @ outputs
    h = entropies_from_coords(tgt, bars)
    return h - weights @ ent


def brute_force_capacity(phi: PtpuMap, resolution: int = 16, seed: int = 0,
                         samples: int = 100_000) -> CapacityResult:
    """Dense random + grid sampling over rank-one ensembles; a lower-bound oracle.

    Refuses sources with more than 10 self-adjoint dimensions.
    """
    src, tgt = phi.source, phi.target
    if src.sa_dim > 10:
        raise DomainError(f"dimension too large for brute force (sa_dim {src.sa_dim} > 10)")
    ws = _Workspace(phi)
    rng = as_rng(seed)
    best_chi = -np.inf
    best = None  # (blocks, vecs, weights)
    evaluated = 0

    def consider(chis: np.ndarray, weights: np.ndarray, blocks, vec_rows):
        nonlocal best_chi, best, evaluated
        evaluated += len(chis)
        i = int(np.argmax(chis))
        if chis[i] > best_chi:
            best_chi = float(chis[i])
            best = (list(blocks), [row.copy() for row in vec_rows(i)], weights[i].copy())

    # grid over the matrix-unit pure states
    std_blocks, std_vecs = [], []
    for b, n in enumerate(src.blocks):
        eye = np.eye(n, dtype=complex)
        for j in range(n):
            std_blocks.append(b)
            std_vecs.append(eye[j])
    outputs = ws.member_outputs(std_blocks, std_vecs)
    ent = entropies_from_coords(tgt, outputs)
    grid = _simplex_grid(len(std_blocks), resolution)
    chis = _chi_for_weights(tgt, outputs, ent, grid)
    consider(chis, grid, std_blocks, lambda i: std_vecs)

    # grids over randomly rotated orthonormal bases
    coarse = _simplex_grid(len(std_blocks), max(4, resolution // 2))
    for _ in range(60):
        u = haar_unitary(src, rng)
        rot_vecs = []
        for b, n in enumerate(src.blocks):
            for j in range(n):
                rot_vecs.append(u.blocks[b][:, j])
        outputs = ws.member_outputs(std_blocks, rot_vecs)
        ent = entropies_from_coords(tgt, outputs)
        chis = _chi_for_weights(tgt, outputs, ent, coarse)
        local = list(rot_vecs)
        consider(chis, coarse, std_blocks, lambda i, loc=local: loc)

    # random ensembles, one block pattern per batch
    cap = src.sa_dim + 1
    nblocks = len(src.blocks)
    block_p = np.array(src.blocks, dtype=float)
    block_p /= block_p.sum()
    batch = 2048
    size_cycle = itertools.cycle(range(2, cap + 1))
    remaining = max(0, samples - evaluated)
    while remaining > 0:
        b_size = min(batch, remaining)
        k = next(size_cycle)
        pattern = [int(rng.choice(nblocks, p=block_p)) for _ in range(k)]
        member_vecs = []
        member_out = np.empty((k, b_size, tgt.sa_dim))
        member_ent = np.empty((k, b_size))
        for j, b in enumerate(pattern):
            n = src.blocks[b]
            raw = rng.standard_normal((b_size, n)) + 1j * rng.standard_normal((b_size, n))
            raw /= np.linalg.norm(raw, axis=1, keepdims=True)
            coords = rank_one_coords(src, b, raw)
            member_out[j] = coords @ ws.matrix.T
            member_ent[j] = entropies_from_coords(tgt, member_out[j])
            member_vecs.append(raw)
        weights = rng.dirichlet(np.ones(k), size=b_size)
        bars = np.einsum("bk,kbd->bd", weights, member_out)
        h = entropies_from_coords(tgt, bars)
        chis = h - (weights * member_ent.T).sum(axis=1)
        consider(chis, weights, pattern,
                 lambda i, mv=member_vecs: [mv[j][i] for j in range(len(mv))])
        remaining -= b_size

    blocks, vecs, weights = best
    ensemble = _ensemble_from_members(src, blocks, vecs, weights)
    chi = holevo_chi(phi, ensemble)
    value = max(0.0, chi)
    return _clamped_result(value, value, log(tgt.total_rank), ensemble,
                           METHOD_BRUTE_FORCE, evaluated, True, phi.cp_by_construction)


# -- capacity at a fixed barycenter -------------------------------------------


def _fd_ascent(f, x0: np.ndarray, max_iter: int, tol: float,
               step: float = _FD_STEP, patience: int = _STALL_WINDOW):
    x = x0.copy()
    fx = f(x)
    best = [fx]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = np.zeros_like(x)
        for i in range(x.size):
            xp = x.copy()
            xp[i] += step
            xm = x.copy()
            xm[i] -= step
            g[i] = (f(xp) - f(xm)) / (2 * step)
        gmax = float(np.abs(g).max(initial=0.0))
        if gmax > 1e-13:
            alpha = min(1.0, 0.25 / gmax)
            for _ in range(30):
                cand = x + alpha * g
                fc = f(cand)
                if fc > fx + 1e-12:
                    x, fx = cand, fc
                    break
                alpha *= 0.5
        best.append(max(best[-1], fx))
        if it >= patience and best[-1] - best[-1 - patience] < tol:
            converged = True
            break
    return x, best[-1], it, converged


class _FixedBarycenter:
    """Rank-one decompositions of a fixed state via a resolution of identity.

    Member vectors live in the support of each block; the construction
    ``z_m = sqrt(a) B^{-1/2} v_m`` guarantees ``sum_m z_m z_m* = a`` exactly,
    so every parameter point is a valid decomposition of the barycenter.
    """

    def __init__(self, phi: PtpuMap, a: State):
        self.phi = phi
        self.ws = _Workspace(phi)
        self.src = phi.source
        self.supports = []  # per block: (parent index, U, sqrt eigenvalues)
        for b, blk in enumerate(a.element.blocks):
            w, v = np.linalg.eigh(blk)
            keep = w > 1e-12
            if keep.any():
                self.supports.append((b, v[:, keep], np.sqrt(w[keep])))
        self.base_entropy = entropy(phi.apply(a.element))

    def member_plan(self, extras: int, rng: np.random.Generator):
        plan = []  # (support index, initial vector in support coords)
        for si, (_, u, _) in enumerate(self.supports):
            r = u.shape[1]
            eye = np.eye(r, dtype=complex)
            for j in range(r):
                plan.append((si, eye[j].copy()))
        cap = self.src.sa_dim + 1
        for _ in range(min(extras, cap - len(plan))):
            si = int(rng.integers(len(self.supports)))
            r = self.supports[si][1].shape[1]
            v = rng.standard_normal(r) + 1j * rng.standard_normal(r)
            plan.append((si, v / np.linalg.norm(v)))
        return plan

    def pack(self, plan, theta):
        flat = []
        for (_, v), _t in zip(plan, theta):
            flat.extend(v.real)
            flat.extend(v.imag)
        return np.concatenate([np.array(flat), theta])

    def unpack(self, plan, x):
        vecs = []
        pos = 0
        for si, v0 in plan:
            r = v0.size
            vecs.append(x[pos:pos + r] + 1j * x[pos + r:pos + 2 * r])
            pos += 2 * r
        return vecs, x[pos:]

    def average_output_entropy(self, plan, x, floor: float | None = 1e-12):
        vecs, theta = self.unpack(plan, x)
        shift = theta - theta.max()
        per_support: dict[int, list[tuple[np.ndarray, float]]] = {}
        for (si, _), v, t in zip(plan, vecs, shift):
            per_support.setdefault(si, []).append((v, float(np.exp(t))))
        members = []  # (parent block, full vector, weight)
        for si, items in per_support.items():
            b, u, sqrt_w = self.supports[si]
            r = u.shape[1]
            gram = np.zeros((r, r), dtype=complex)
            for v, c in items:
                gram += c * np.outer(v, v.conj())
            w, q = np.linalg.eigh(gram)
            wmax = float(w.max())
            if floor is None and float(w.min()) < 1e-10 * max(wmax, 1.0):
                return None
            w = np.clip(w, (floor or 0.0) * max(wmax, 1.0), None)
            inv_sqrt = (q * (1.0 / np.sqrt(w))) @ q.conj().T
            sa = sqrt_w  # sqrt(a) is diagonal in support coordinates
            for v, c in items:
                z = sa * (inv_sqrt @ (np.sqrt(c) * v))
                lam = float(np.vdot(z, z).real)
                if lam < 1e-14:
                    continue
                members.append((b, u @ (z / np.sqrt(lam)), lam))
        if not members:
            return None
        blocks = [m[0] for m in members]
        raw = [m[1] for m in members]
        lams = np.array([m[2] for m in members])
        outputs = self.ws.member_outputs(blocks, raw)
        ent = entropies_from_coords(self.phi.target, outputs)
        total = float(lams @ ent)
        return total, members, lams


def capacity_at(phi: PtpuMap, a: State, restarts: int = 8, seed: int = 0,
                max_iter: int = 200, tol: float = 1e-7) -> float:
    """Best ensemble objective over decompositions of the fixed barycenter a.

    The spectral decomposition of a is always a feasible start, so the value
    returned is at least ``S(phi(a)) - sum_j eta-weighted member entropies``
    and is a certified lower bound of the true supremum.
    """
    if a.shape != phi.source:
        raise ShapeError(f"state over {a.shape} fed to map over {phi.source}")
    fixed = _FixedBarycenter(phi, a)
    seeds = _spawn_seeds(seed, max(1, restarts))
    best = 0.0  # the trivial decomposition {(1, a)} gives 0
    for r in range(max(1, restarts)):
        rng = as_rng(seeds[r])
        plan = fixed.member_plan(extras=0 if r == 0 else 2 + r % 3, rng=rng)
        theta0 = np.zeros(len(plan))
        x0 = fixed.pack(plan, theta0)

        def objective(x):
            got = fixed.average_output_entropy(plan, x)
            if got is None:
                return -1e6
            return fixed.base_entropy - got[0]

        x, val, _, _ = _fd_ascent(objective, x0, max_iter=max_iter, tol=tol)
        exact = fixed.average_output_entropy(plan, x, floor=None)
        if exact is not None:
            val = fixed.base_entropy - exact[0]
            if val > best:
                best = float(val)
    return max(0.0, best)
