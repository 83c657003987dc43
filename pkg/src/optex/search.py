"""Candidate sets, point/coordinate exchange, and seeded multi-start search.

Restarts are the unit of parallelism. Restart r draws its starting design
from a Philox stream keyed by (master seed, r), so the search result is
identical for any worker count; the Monte Carlo prior sample is drawn once
per invocation and shared read-only by every restart.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .criteria import CriterionBreakdown, CriterionEvaluator
from .experiment import ExperimentSpec
from .model import (
    Design,
    FactorGrid,
    model_matrices,
    monomial_matrix,
    treatment_labels,
)
from .numeric import PriorSample, sample_prior

CANDIDATE_CAP = 1_000_000
REL_TOL = 1e-9
MAX_PASSES = 50


@dataclass(frozen=True)
class CandidateSet:
    """Full factorial over the grid, in treatment-label order."""

    grid: FactorGrid
    rows: np.ndarray  # (C, k) grid indices; row c carries label c + 1

    def __len__(self) -> int:
        return self.rows.shape[0]


def build_candidates(grid: FactorGrid, cap: int = CANDIDATE_CAP) -> CandidateSet:
    total = grid.n_candidates
    if total > cap:
        raise ValueError(
            f"candidate set would hold {total} points, above the cap of {cap}; "
            "use coordinate exchange for this many level combinations")
    axes = [np.arange(lev, dtype=np.int64) for lev in grid.levels]
    mesh = np.meshgrid(*axes, indexing="ij")
    rows = np.column_stack([m.reshape(-1) for m in mesh])
    rows.flags.writeable = False
    return CandidateSet(grid=grid, rows=rows)


def random_start(candidates: CandidateSet, n: int, rng: np.random.Generator) -> np.ndarray:
    """n candidate indices drawn uniformly with replacement."""
    return rng.integers(0, len(candidates), size=n)


def random_design(grid: FactorGrid, n: int, rng: np.random.Generator) -> np.ndarray:
    """(n, k) grid indices with each coordinate uniform over its levels.

    Equivalent in distribution to uniform sampling from the full factorial,
    without materialising the candidate list.
    """
    cols = [rng.integers(0, lev, size=n) for lev in grid.levels]
    return np.column_stack(cols).astype(np.int64)


@dataclass
class ExchangeOutcome:
    state: np.ndarray
    objective: float
    passes: int
    converged: bool
    accepted: list[float]


def _improves(current: float, candidate: float, rel_tol: float) -> bool:
    if not candidate < current:
        return False
    if math.isinf(current):
        return True
    return (current - candidate) > rel_tol * abs(current)


def point_exchange(start: np.ndarray, candidates: CandidateSet,
                   objective: Callable[[np.ndarray], float], *,
                   rel_tol: float = REL_TOL,
                   max_passes: int = MAX_PASSES) -> ExchangeOutcome:
    """Modified-Fedorov exchange over whole rows of the candidate list.

    `start` holds candidate indices, one per run. Rows are scanned in order;
    for each, every candidate is tried and the best strictly improving swap
    (beyond rel_tol) is accepted. Stops at the first pass with no accepted
    exchange, or after max_passes.
    """
    idx = np.array(start, dtype=np.int64)
    n = idx.size
    n_cand = len(candidates)
    cur = float(objective(idx))
    accepted: list[float] = []
    converged = False
    passes = 0
    while passes < max_passes:
        passes += 1
        changed = False
        for i in range(n):
            old = idx[i]
            best_c = -1
            best_val = cur
            for c in range(n_cand):
                if c == old:
                    continue
                idx[i] = c
                val = float(objective(idx))
                if val < best_val:
                    best_val = val
                    best_c = c
            if best_c >= 0 and _improves(cur, best_val, rel_tol):
                idx[i] = best_c
                cur = best_val
                accepted.append(cur)
                changed = True
            else:
                idx[i] = old
        if not changed:
            converged = True
            break
    return ExchangeOutcome(state=idx, objective=cur, passes=passes,
                           converged=converged, accepted=accepted)


def coordinate_exchange(start: np.ndarray, grid: FactorGrid,
                        objective: Callable[[np.ndarray], float], *,
                        rel_tol: float = REL_TOL,
                        max_passes: int = MAX_PASSES) -> ExchangeOutcome:
    """One-coordinate-at-a-time exchange over the level grid.

    `start` is an (n, k) grid-index matrix. For each run and factor the
    best strictly improving level is accepted, holding everything else
    fixed; stops on a full pass without change.
    """
    state = np.array(start, dtype=np.int64)
    n, k = state.shape
    cur = float(objective(state))
    accepted: list[float] = []
    converged = False
    passes = 0
    while passes < max_passes:
        passes += 1
        changed = False
        for i in range(n):
            for j in range(k):
                old = state[i, j]
                best_l = -1
                best_val = cur
                for level in range(grid.levels[j]):
                    if level == old:
                        continue
                    state[i, j] = level
                    val = float(objective(state))
                    if val < best_val:
                        best_val = val
                        best_l = level
                if best_l >= 0 and _improves(cur, best_val, rel_tol):
                    state[i, j] = best_l
                    cur = best_val
                    accepted.append(cur)
                    changed = True
                else:
                    state[i, j] = old
        if not changed:
            converged = True
            break
    return ExchangeOutcome(state=state, objective=cur, passes=passes,
                           converged=converged, accepted=accepted)


class PointObjective:
    """Compound log-objective over candidate-index vectors (point exchange)."""

    def __init__(self, evaluator: CriterionEvaluator, candidates: CandidateSet,
                 prior: PriorSample | None):
        values = candidates.grid.value_columns(candidates.rows)
        self.cand_x1 = monomial_matrix(values, evaluator.exps1)
        self.cand_x2 = monomial_matrix(values, evaluator.exps2)
        self.evaluator = evaluator
        self.prior = prior

    def __call__(self, idx: np.ndarray) -> float:
        t = np.unique(idx).size
        return self.evaluator.log_objective(
            self.cand_x1[idx], self.cand_x2[idx], idx.size - t, self.prior)


class CoordObjective:
    """Compound log-objective over (n, k) grid-index matrices (coordinate exchange)."""

    def __init__(self, evaluator: CriterionEvaluator, grid: FactorGrid,
                 prior: PriorSample | None):
        self.evaluator = evaluator
        self.grid = grid
        self.prior = prior

    def __call__(self, settings: np.ndarray) -> float:
        values = self.grid.value_columns(settings)
        X1 = monomial_matrix(values, self.evaluator.exps1)
        X2 = monomial_matrix(values, self.evaluator.exps2)
        t = np.unique(treatment_labels(settings, self.grid)).size
        return self.evaluator.log_objective(X1, X2, settings.shape[0] - t, self.prior)


@dataclass(frozen=True)
class SearchResult:
    """Best design over all restarts plus the evidence needed to reproduce it."""

    design: Design
    labels: np.ndarray
    X1: np.ndarray
    X2: np.ndarray
    breakdown: CriterionBreakdown
    compound_value: float
    path: tuple[float, ...]
    seed: int
    prior_seed: int | None
    algorithm: str
    n_starts: int
    wall_time: float
    non_converged: tuple[int, ...]


@dataclass
class _RestartOutcome:
    index: int
    settings: np.ndarray
    log_objective: float
    passes: int
    converged: bool


def restart_rng(master_seed: int, restart: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(1, restart))
    return np.random.Generator(np.random.Philox(seq))


def derive_prior_seed(master_seed: int) -> int:
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(0,))
    return int(seq.generate_state(1, np.uint64)[0])


def prior_for_spec(spec: ExperimentSpec, master_seed: int) -> PriorSample | None:
    """The shared Monte Carlo prior draw, or None when the family never uses one."""
    if spec.criterion.family != "MSE.D" or spec.q == 0:
        return None
    return sample_prior(spec.q, spec.criterion.tau2, spec.criterion.mc_samples,
                        derive_prior_seed(master_seed))


def _run_restart_block(args) -> list[_RestartOutcome]:
    spec, prior, algorithm, indices, master_seed = args
    evaluator = CriterionEvaluator.from_spec(spec)
    outcomes = []
    if algorithm == "ptex":
        candidates = build_candidates(spec.grid)
        objective = PointObjective(evaluator, candidates, prior)
        for r in indices:
            rng = restart_rng(master_seed, r)
            start = random_start(candidates, spec.n_runs, rng)
            out = point_exchange(start, candidates, objective)
            outcomes.append(_RestartOutcome(
                index=r, settings=candidates.rows[out.state],
                log_objective=out.objective, passes=out.passes,
                converged=out.converged))
    else:
        objective = CoordObjective(evaluator, spec.grid, prior)
        for r in indices:
            rng = restart_rng(master_seed, r)
            start = random_design(spec.grid, spec.n_runs, rng)
            out = coordinate_exchange(start, spec.grid, objective)
            outcomes.append(_RestartOutcome(
                index=r, settings=out.state, log_objective=out.objective,
                passes=out.passes, converged=out.converged))
    return outcomes


def _split_blocks(n_items: int, n_blocks: int) -> list[list[int]]:
    blocks: list[list[int]] = [[] for _ in range(n_blocks)]
    size = math.ceil(n_items / n_blocks)
    for start in range(0, n_items, size):
        blocks[start // size] = list(range(start, min(start + size, n_items)))
    return [b for b in blocks if b]


def fresh_master_seed() -> int:
    return int(np.random.SeedSequence().entropy)


def multi_start(spec: ExperimentSpec, workers: int | None = None) -> SearchResult:
    """Run n_starts seeded restarts of the configured exchange algorithm.

    Deterministic for a fixed (spec, seed): the per-restart streams do not
    depend on scheduling, and the best design is chosen by objective value
    with ties broken by restart index.
    """
    t0 = time.perf_counter()
    master_seed = spec.seed if spec.seed is not None else fresh_master_seed()
    prior = prior_for_spec(spec, master_seed)
    algorithm = spec.default_algorithm()

    n_workers = workers if workers is not None else (os.cpu_count() or 1)
    n_workers = max(1, min(n_workers, spec.n_starts))
    blocks = _split_blocks(spec.n_starts, n_workers)

    if n_workers == 1 or len(blocks) == 1:
        outcomes = _run_restart_block((spec, prior, algorithm, list(range(spec.n_starts)),
                                       master_seed))
    else:
        payloads = [(spec, prior, algorithm, block, master_seed) for block in blocks]
        outcomes = []
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for block_result in pool.map(_run_restart_block, payloads):
                outcomes.extend(block_result)
        outcomes.sort(key=lambda o: o.index)

    best = min(outcomes, key=lambda o: (o.log_objective, o.index))
    path = tuple(math.exp(o.log_objective) if o.log_objective != math.inf else math.inf
                 for o in outcomes)

    labels_raw = treatment_labels(best.settings, spec.grid)
    order = np.lexsort((np.arange(best.settings.shape[0]), labels_raw))
    design = Design(best.settings[order])
    labels = labels_raw[order]
    X1, X2 = model_matrices(design, spec.primary, spec.potential, spec.grid)
    evaluator = CriterionEvaluator.from_spec(spec)
    breakdown = evaluator.breakdown(design, prior=prior, weighted_only=False)

    return SearchResult(
        design=design,
        labels=labels,
        X1=X1,
        X2=X2,
        breakdown=breakdown,
        compound_value=min(path),
        path=path,
        seed=master_seed,
        prior_seed=prior.seed if prior is not None else None,
        algorithm=algorithm,
        n_starts=spec.n_starts,
        wall_time=time.perf_counter() - t0,
        non_converged=tuple(o.index for o in outcomes if not o.converged),
    )
