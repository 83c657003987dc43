"""Factors, polynomial term sets, designs, and treatment-replication accounting.

Factor settings live on equally spaced grids over [-1, 1] and designs store
grid *indices*, so treatment equality is exact integer comparison and never
depends on float rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

PRESET_NAMES = (
    "main_effects",
    "quadratic_terms",
    "linear_interactions",
    "second_order",
    "cubic_terms",
    "third_order_terms",
)


@dataclass(frozen=True)
class FactorGrid:
    """Allowed settings per factor: L equally spaced values spanning [-1, 1]."""

    levels: tuple[int, ...]

    def __post_init__(self):
        if not self.levels:
            raise ValueError("grid needs at least one factor")
        for j, lev in enumerate(self.levels):
            if lev < 2:
                raise ValueError(f"factor {j + 1}: each factor needs >=2 levels")

    @classmethod
    def regular(cls, k: int, levels) -> "FactorGrid":
        """Grid for k factors; `levels` is one count shared by all or a length-k list."""
        if isinstance(levels, int):
            counts = (levels,) * k
        else:
            counts = tuple(int(v) for v in levels)
            if len(counts) != k:
                raise ValueError(f"levels list has {len(counts)} entries for k={k}")
        return cls(counts)

    @property
    def k(self) -> int:
        return len(self.levels)

    @property
    def n_candidates(self) -> int:
        out = 1
        for lev in self.levels:
            out *= lev
        return out

    def factor_values(self, j: int) -> np.ndarray:
        """Ordered settings of factor j: -1, -1+2/(L-1), ..., +1."""
        lev = self.levels[j]
        return -1.0 + 2.0 * np.arange(lev) / (lev - 1)

    def value_columns(self, settings: np.ndarray) -> np.ndarray:
        """Map an (n, k) grid-index array to real factor settings."""
        settings = np.asarray(settings)
        cols = [self.factor_values(j)[settings[:, j]] for j in range(self.k)]
        return np.column_stack(cols)

    def label_strides(self) -> np.ndarray:
        """Mixed-radix strides with factor k fastest (factor 1 slowest)."""
        strides = np.ones(self.k, dtype=np.int64)
        for j in range(self.k - 2, -1, -1):
            strides[j] = strides[j + 1] * self.levels[j + 1]
        return strides


@dataclass(frozen=True)
class Term:
    """A monomial over the k factors with its inference weight."""

    exponents: tuple[int, ...]
    weight: float

    def __post_init__(self):
        if any(e < 0 for e in self.exponents):
            raise ValueError("exponents must be non-negative")
        if sum(self.exponents) < 1:
            raise ValueError("the intercept is implicit; terms need degree >= 1")
        if self.weight <= 0:
            raise ValueError("term weight must be positive")

    @property
    def degree(self) -> int:
        return sum(self.exponents)


def default_weight(exponents: Sequence[int]) -> float:
    """1.0, except 0.25 for a pure quadratic (one exponent 2, rest 0)."""
    if sorted(exponents, reverse=True)[:1] == [2] and sum(exponents) == 2:
        return 0.25
    return 1.0


def make_term(exponents: Sequence[int], weight: float | None = None) -> Term:
    exps = tuple(int(e) for e in exponents)
    return Term(exps, default_weight(exps) if weight is None else weight)


@dataclass(frozen=True)
class TermSet:
    """Ordered monomial collection playing the primary or potential role."""

    terms: tuple[Term, ...]
    role: str = "primary"

    def __post_init__(self):
        if self.role not in ("primary", "potential"):
            raise ValueError(f"unknown term-set role {self.role!r}")
        seen = set()
        for t in self.terms:
            if t.exponents in seen:
                raise ValueError(f"duplicate term exponents {t.exponents}")
            seen.add(t.exponents)

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def k(self) -> int:
        return len(self.terms[0].exponents) if self.terms else 0

    def exponent_matrix(self) -> np.ndarray:
        """(m, k) integer exponent array in term order."""
        if not self.terms:
            return np.zeros((0, self.k), dtype=np.int64)
        return np.array([t.exponents for t in self.terms], dtype=np.int64)

    def weights(self) -> np.ndarray:
        return np.array([t.weight for t in self.terms])

    def exponent_set(self) -> set[tuple[int, ...]]:
        return {t.exponents for t in self.terms}


def _sorted_terms(exponent_vectors: Iterable[tuple[int, ...]]) -> list[tuple[int, ...]]:
    # Total degree first, then descending lexicographic so x1 precedes x2
    # and x1^2 precedes x1*x2 within a degree block.
    return sorted(exponent_vectors, key=lambda e: (sum(e), tuple(-x for x in e)))


def _preset_exponents(name: str, k: int) -> list[tuple[int, ...]]:
    def unit(j, power=1):
        e = [0] * k
        e[j] = power
        return tuple(e)

    if name == "main_effects":
        return [unit(j) for j in range(k)]
    if name == "quadratic_terms":
        return [unit(j, 2) for j in range(k)]
    if name == "linear_interactions":
        out = []
        for a, b in combinations(range(k), 2):
            e = [0] * k
            e[a] = e[b] = 1
            out.append(tuple(e))
        return out
    if name == "second_order":
        return (
            _preset_exponents("main_effects", k)
            + _preset_exponents("linear_interactions", k)
            + _preset_exponents("quadratic_terms", k)
        )
    if name == "cubic_terms":
        return [unit(j, 3) for j in range(k)]
    if name == "third_order_terms":
        out = []
        for a, b, c in combinations(range(k), 3):
            e = [0] * k
            e[a] = e[b] = e[c] = 1
            out.append(tuple(e))
        for a in range(k):
            for b in range(k):
                if a == b:
                    continue
                e = [0] * k
                e[a] = 2
                e[b] = 1
                out.append(tuple(e))
        return out
    raise ValueError(f"unknown model preset {name!r}")


def expand_preset(preset_name: str, k: int, role: str = "primary") -> TermSet:
    """Expand a named model preset for k factors into an ordered TermSet."""
    if k < 1:
        raise ValueError("k must be >= 1")
    exps = _preset_exponents(preset_name, k)
    if not exps:
        raise ValueError(f"preset {preset_name!r} needs more than k={k} factors")
    ordered = _sorted_terms(exps)
    return TermSet(tuple(make_term(e) for e in ordered), role=role)


def expand_presets(preset_names: Sequence[str], k: int, role: str = "primary") -> TermSet:
    """Concatenate several presets in the order given (each internally ordered)."""
    terms: list[Term] = []
    for name in preset_names:
        terms.extend(expand_preset(name, k, role=role).terms)
    return TermSet(tuple(terms), role=role)


def termset_from_exponents(vectors: Sequence[Sequence[int]], k: int,
                           role: str = "primary") -> TermSet:
    """Build a TermSet from explicit exponent vectors (default weights applied)."""
    terms = []
    for v in vectors:
        if len(v) != k:
            raise ValueError(f"exponent vector {list(v)} has length {len(v)}, expected k={k}")
        terms.append(make_term(v))
    return TermSet(tuple(terms), role=role)


@dataclass(frozen=True)
class Design:
    """n runs as grid indices; row (i, j) indexes factor j's level grid."""

    settings: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.settings, dtype=np.int64)
        if arr.ndim != 2:
            raise ValueError("design settings must be an n x k matrix")
        arr.flags.writeable = False
        object.__setattr__(self, "settings", arr)

    @classmethod
    def from_indices(cls, indices, grid: FactorGrid) -> "Design":
        d = cls(np.asarray(indices, dtype=np.int64))
        if d.k != grid.k:
            raise ValueError(f"design has {d.k} columns, grid has {grid.k} factors")
        for j, lev in enumerate(grid.levels):
            col = d.settings[:, j]
            if col.min(initial=0) < 0 or col.max(initial=0) >= lev:
                raise ValueError(f"column {j + 1} holds indices outside 0..{lev - 1}")
        return d

    @property
    def n(self) -> int:
        return self.settings.shape[0]

    @property
    def k(self) -> int:
        return self.settings.shape[1]


@dataclass(frozen=True)
class ReplicationSummary:
    """Distinct-treatment count and the pure-error / lack-of-fit df split."""

    t: int
    pe_df: int
    lof_df: int
    labels: np.ndarray


def monomial_matrix(values: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    """Columns of monomials: entry (i, t) = prod_j values[i, j] ** exponents[t, j]."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    m = len(exponents)
    out = np.empty((n, m))
    for t in range(m):
        col = np.ones(n)
        for j, e in enumerate(exponents[t]):
            if e == 1:
                col = col * values[:, j]
            elif e > 1:
                col = col * values[:, j] ** int(e)
        out[:, t] = col
    return out


def evaluate_term(term: Term, design: Design, grid: FactorGrid) -> np.ndarray:
    """Length-n column of the monomial evaluated at each run's settings."""
    if len(term.exponents) != grid.k:
        raise ValueError("term exponent length does not match factor count")
    values = grid.value_columns(design.settings)
    exps = np.array([term.exponents], dtype=np.int64)
    return monomial_matrix(values, exps)[:, 0]


def model_matrices(design: Design, primary: TermSet, potential: TermSet,
                   grid: FactorGrid) -> tuple[np.ndarray, np.ndarray]:
    """(X1, X2) model matrices; no intercept column (handled via centering)."""
    values = grid.value_columns(design.settings)
    X1 = monomial_matrix(values, primary.exponent_matrix())
    X2 = monomial_matrix(values, potential.exponent_matrix())
    return X1, X2


def treatment_labels(settings: np.ndarray, grid: FactorGrid) -> np.ndarray:
    """1-based lexicographic candidate labels (factor 1 slowest, factor k fastest)."""
    idx = np.asarray(settings, dtype=np.int64)
    return 1 + idx @ grid.label_strides()


def replication_summary(design: Design, grid: FactorGrid, p: int) -> ReplicationSummary:
    labels = treatment_labels(design.settings, grid)
    t = int(np.unique(labels).size)
    pe_df = design.n - t
    lof_df = max(t - p - 1, 0)
    return ReplicationSummary(t=t, pe_df=pe_df, lof_df=lof_df, labels=labels)
