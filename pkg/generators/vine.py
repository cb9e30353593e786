"""
Regular-vine copula generator.

Structure selection follows the sequential maximum-spanning-tree approach: tree
T1 is the maximum spanning tree of |Kendall tau| between pseudo-observations,
and each later tree is the maximum spanning tree over pairs of previous-tree
edges that share a node (proximity condition), weighted by |tau| between the
conditional pseudo-observations produced by the previous tree's h-functions.
Every edge is fitted with ``fit_pair_copula`` as soon as its tree is chosen.

Conditional values F(x | S) are cached under the key ``(x, frozenset(S))``; the
same cache drives both fitting and sampling, where the vine is walked in the
reverse of a leaf-peeling order (inverse Rosenblatt transform).
"""

import logging
from collections import Counter
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray

from config.settings import MIN_VINE_OBSERVATIONS
from core.stats import (
    EmpiricalMargin,
    kendall_tau,
    pseudo_inverse,
    pseudo_observations,
)
from data.models.dataset import ColumnSchema, MixedDataset
from generators.copulas import (
    PairCopula,
    fit_pair_copula,
    h_function,
    inverse_h,
)
from utils.errors import DomainError, ShapeError, UndefinedCorrelationError
from utils.seeding import make_rng

logger = logging.getLogger(__name__)

CondKey = tuple[int, frozenset[int]]


@dataclass(frozen=True)
class VineEdge:
    """
    One pair copula of the vine.

    ``first`` and ``second`` are the conditioned variables (first < second), the
    copula is oriented as C(F(first | D), F(second | D)) with D = ``conditioning``.
    ``nodes`` holds the two joined nodes of the tree: variable indices in T1,
    edge indices of the previous tree afterwards.
    """

    first: int
    second: int
    conditioning: frozenset[int]
    nodes: tuple[int, int]
    copula: PairCopula
    tau: float = 0.0
    aic: float = 0.0

    @property
    def conditioned(self) -> frozenset[int]:
        return frozenset((self.first, self.second))

    @property
    def union(self) -> frozenset[int]:
        return self.conditioned | self.conditioning

    def partner(self, var: int) -> int:
        if var == self.first:
            return self.second
        if var == self.second:
            return self.first
        raise DomainError(f"Variable {var} is not conditioned by this edge")


@dataclass(frozen=True)
class CategoricalMargin:
    """Category probabilities of a categorical column (codes 0..M-1)."""

    probabilities: tuple[float, ...]

    @property
    def cumulative(self) -> NDArray[np.float64]:
        cum = np.cumsum(self.probabilities)
        cum[-1] = 1.0
        return cum


Margin = EmpiricalMargin | CategoricalMargin | None


@dataclass(frozen=True)
class VineCopulaModel:
    """Fitted R-vine: trees T1..T(d-1), their pair copulas and the column margins."""

    schema: list[ColumnSchema]
    trees: list[list[VineEdge]]
    margins: list[Margin]
    diagnostics: tuple[str, ...] = field(default=(), compare=False)

    @property
    def dim(self) -> int:
        return len(self.schema)

    @property
    def n_pair_copulas(self) -> int:
        return sum(len(tree) for tree in self.trees)

    def edges(self) -> list[VineEdge]:
        return [edge for tree in self.trees for edge in tree]


# =============================================================================
# Structure validity
# =============================================================================


def validate_structure(model: VineCopulaModel) -> list[str]:
    """Problems with the tree structure; an empty list means a valid R-vine."""
    d = model.dim
    problems: list[str] = []
    if len(model.trees) != d - 1:
        problems.append(f"expected {d - 1} trees, found {len(model.trees)}")
    for level, tree in enumerate(model.trees, start=1):
        if len(tree) != d - level:
            problems.append(f"tree {level} has {len(tree)} edges, expected {d - level}")
        for edge in tree:
            if len(edge.union) != level + 1:
                problems.append(
                    f"tree {level} edge {edge.first},{edge.second} has wrong union size"
                )
            if level == 1:
                continue
            previous = model.trees[level - 2]
            a, b = (previous[i] for i in edge.nodes)
            if not set(a.nodes) & set(b.nodes):
                problems.append(
                    f"tree {level} edge {edge.first},{edge.second} violates proximity"
                )
            if a.union | b.union != edge.union or a.union & b.union != edge.conditioning:
                problems.append(f"tree {level} edge {edge.first},{edge.second} sets inconsistent")
    if model.n_pair_copulas != d * (d - 1) // 2:
        problems.append(f"{model.n_pair_copulas} pair copulas, expected {d * (d - 1) // 2}")
    return problems


# =============================================================================
# Conditional pseudo-observations
# =============================================================================


def _transposed(c: PairCopula) -> PairCopula:
    """Copula of (V, U) given the copula of (U, V)."""
    if c.rotation in (90, 270):
        return PairCopula(c.family, c.theta, 360 - c.rotation)
    return c


def _h_outputs(
    edge: VineEdge, u_first, u_second, clamps: Counter[str]
) -> tuple[NDArray, NDArray]:
    """F(first | rest) and F(second | rest) for an edge."""
    f_first = np.asarray(h_function(edge.copula, u_first, u_second, clamps))
    f_second = np.asarray(h_function(_transposed(edge.copula), u_second, u_first, clamps))
    return f_first, f_second


class _ConditionalCache:
    """Lazily evaluated F(x | S) values for a fixed set of rows."""

    def __init__(self, edges_by_key: dict[CondKey, VineEdge]):
        self.values: dict[CondKey, NDArray[np.float64]] = {}
        self.edges_by_key = edges_by_key
        self.clamps: Counter[str] = Counter()

    def get(self, var: int, given: frozenset[int]) -> NDArray[np.float64]:
        key = (var, given)
        if key in self.values:
            return self.values[key]
        edge = self.edges_by_key[key]
        other = edge.partner(var)
        u_var = self.get(var, edge.conditioning)
        u_other = self.get(other, edge.conditioning)
        if var == edge.first:
            value = np.asarray(h_function(edge.copula, u_var, u_other, self.clamps))
        else:
            value = np.asarray(
                h_function(_transposed(edge.copula), u_var, u_other, self.clamps)
            )
        self.values[key] = value
        return value


def _index_edges(trees: list[list[VineEdge]]) -> dict[CondKey, VineEdge]:
    index: dict[CondKey, VineEdge] = {}
    for tree in trees:
        for edge in tree:
            index[(edge.first, edge.union - {edge.first})] = edge
            index[(edge.second, edge.union - {edge.second})] = edge
    return index


# =============================================================================
# Fitting
# =============================================================================


def _maximum_spanning_tree(
    n_nodes: int, candidates: list[tuple[float, int, int]]
) -> list[tuple[int, int]]:
    """Kruskal on |weight| descending; ties broken by lexicographic node pair."""
    parent = list(range(n_nodes))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    chosen: list[tuple[int, int]] = []
    for _, i, j in sorted(candidates, key=lambda c: (-abs(c[0]), c[1], c[2])):
        root_i, root_j = find(i), find(j)
        if root_i != root_j:
            parent[root_i] = root_j
            chosen.append((i, j))
    return chosen


def _safe_tau(x: NDArray, y: NDArray) -> float:
    try:
        return kendall_tau(x, y)
    except UndefinedCorrelationError:
        return 0.0


def _data_pseudo_observations(
    data: MixedDataset, rng: np.random.Generator
) -> tuple[NDArray[np.float64], list[Margin]]:
    columns = []
    margins: list[Margin] = []
    for col in data.schema:
        values = data.values(col.name)
        columns.append(pseudo_observations(values, rng))
        if col.is_categorical:
            counts = np.bincount(values.astype(int), minlength=len(col.categories))
            margins.append(CategoricalMargin(tuple(float(c) for c in counts / counts.sum())))
        else:
            margins.append(EmpiricalMargin.from_sample(values))
    return np.column_stack(columns), margins


def fit_vine(
    data: MixedDataset,
    seed: int = 0,
    independence_level: float | None = None,
) -> VineCopulaModel:
    """
    Fit an R-vine copula with empirical margins.

    Args:
        data: Source dataset; categorical columns enter through randomly
            tie-broken ranks (continuous extension)
        seed: Seed of the tie-breaking jitter
        independence_level: Optional level of a Kendall independence pre-test per
            edge; by default every family competes on AIC alone

    Raises:
        ShapeError: fewer than 2 columns or fewer than MIN_VINE_OBSERVATIONS rows
    """
    d = len(data.schema)
    if d < 2:
        raise ShapeError("A vine needs at least 2 columns")
    if data.n < MIN_VINE_OBSERVATIONS:
        raise ShapeError(f"A vine needs at least {MIN_VINE_OBSERVATIONS} rows, got {data.n}")

    clamps: Counter[str] = Counter()
    rng = make_rng(seed)
    u, margins = _data_pseudo_observations(data, rng)
    cache: dict[CondKey, NDArray[np.float64]] = {(j, frozenset()): u[:, j] for j in range(d)}
    diagnostics: list[str] = []
    trees: list[list[VineEdge]] = []

    # Tree 1 nodes are the variables themselves
    node_unions: list[frozenset[int]] = [frozenset((j,)) for j in range(d)]
    node_children: list[tuple[int, ...]] = [(j,) for j in range(d)]

    for level in range(1, d):
        n_nodes = len(node_unions)
        candidates: list[tuple[float, int, int]] = []
        pair_info: dict[tuple[int, int], tuple[int, int, frozenset[int]]] = {}
        for i in range(n_nodes):
            for j in range(i + 1, n_nodes):
                if level > 1 and not set(node_children[i]) & set(node_children[j]):
                    continue
                sym = node_unions[i] ^ node_unions[j]
                if len(sym) != 2:
                    continue
                first, second = sorted(sym)
                conditioning = node_unions[i] & node_unions[j]
                tau = _safe_tau(cache[(first, conditioning)], cache[(second, conditioning)])
                candidates.append((tau, i, j))
                pair_info[(i, j)] = (first, second, conditioning)

        tree: list[VineEdge] = []
        taus = {(i, j): t for t, i, j in candidates}
        for i, j in _maximum_spanning_tree(n_nodes, candidates):
            first, second, conditioning = pair_info[(i, j)]
            u_first = cache[(first, conditioning)]
            u_second = cache[(second, conditioning)]
            fit = fit_pair_copula(u_first, u_second, independence_level=independence_level)
            label = f"T{level} ({first},{second}|{sorted(conditioning)})"
            diagnostics.extend(f"{label}: {msg}" for msg in fit.diagnostics)
            edge = VineEdge(
                first=first,
                second=second,
                conditioning=conditioning,
                nodes=(i, j),
                copula=fit.copula,
                tau=taus[(i, j)],
                aic=fit.aic,
            )
            f_first, f_second = _h_outputs(edge, u_first, u_second, clamps)
            cache[(first, edge.union - {first})] = f_first
            cache[(second, edge.union - {second})] = f_second
            tree.append(edge)
            logger.debug(f"{label}: {fit.copula.family} theta={fit.copula.theta:.4g}")

        trees.append(tree)
        node_unions = [edge.union for edge in tree]
        node_children = [edge.nodes for edge in tree]

    if clamps:
        diagnostics.append(f"h-function outputs clamped: {dict(clamps)}")
    model = VineCopulaModel(list(data.schema), trees, margins, tuple(diagnostics))
    logger.info(f"✅ Vine fitted: d={d}, {model.n_pair_copulas} pair copulas")
    return model


# =============================================================================
# Sampling
# =============================================================================


def sampling_order(model: VineCopulaModel) -> list[tuple[int, list[VineEdge]]]:
    """
    Peel variables off the vine; returns (variable, edges from T1 upward) in
    sampling order.

    At each step the variable taken is a conditioned variable of the unique
    top edge of the remaining sub-vine; it belongs to exactly one edge per tree.
    """
    remaining = set(range(model.dim))
    peeled: list[tuple[int, list[VineEdge]]] = []
    while len(remaining) > 1:
        m = len(remaining)
        top = [e for e in model.trees[m - 2] if e.union <= remaining]
        if len(top) != 1:
            raise DomainError("Vine structure is not a regular vine")
        var = top[0].first
        chain = []
        for level in range(1, m):
            matches = [
                e for e in model.trees[level - 1] if var in e.conditioned and e.union <= remaining
            ]
            if len(matches) != 1:
                raise DomainError(f"Variable {var} is not a leaf of tree {level}")
            chain.append(matches[0])
        peeled.append((var, chain))
        remaining.remove(var)
    peeled.append((remaining.pop(), []))
    return list(reversed(peeled))


def _to_copula_scale(
    model: VineCopulaModel, w: NDArray[np.float64], clamps: Counter[str]
) -> NDArray[np.float64]:
    """Inverse Rosenblatt transform of independent uniforms w (n x d)."""
    n, d = w.shape
    cache = _ConditionalCache(_index_edges(model.trees))
    cache.clamps = clamps
    for var, chain in sampling_order(model):
        value = w[:, var]
        for edge in reversed(chain):
            other = edge.partner(var)
            u_other = cache.get(other, edge.conditioning)
            copula = edge.copula if var == edge.first else _transposed(edge.copula)
            value = np.asarray(inverse_h(copula, value, u_other, clamps))
            if edge.conditioning:
                cache.values[(var, edge.conditioning)] = value
        cache.values[(var, frozenset())] = value
    return np.column_stack([cache.values[(j, frozenset())] for j in range(d)])


def _back_transform(margin: Margin, u: NDArray[np.float64]) -> NDArray[np.float64]:
    if margin is None:
        return u
    if isinstance(margin, CategoricalMargin):
        codes = np.searchsorted(margin.cumulative, u, side="left")
        return np.minimum(codes, len(margin.probabilities) - 1).astype(float)
    return np.asarray(pseudo_inverse(margin, u), dtype=float)


def sample_copula(
    model: VineCopulaModel,
    n: int,
    seed: int | np.random.Generator,
    clamps: Counter[str] | None = None,
) -> NDArray:
    """
    n x d sample on the copula (uniform) scale.

    h-function clamps met while sampling are added to ``clamps`` when given.
    """
    rng = make_rng(seed)
    w = rng.uniform(size=(int(n), model.dim))
    w = np.clip(w, 1e-12, 1.0 - 1e-12)
    if n == 0:
        return w
    counts: Counter[str] = clamps if clamps is not None else Counter()
    u = _to_copula_scale(model, w, counts)
    if counts:
        logger.debug(f"⚠️ h-function outputs clamped while sampling: {dict(counts)}")
    return u


def sample_vine(model: VineCopulaModel, n: int, seed: int | np.random.Generator) -> MixedDataset:
    """Draw n synthetic rows and map them to the original scales."""
    u = sample_copula(model, n, seed)
    columns = [_back_transform(m, u[:, j]) for j, m in enumerate(model.margins)]
    matrix = np.column_stack(columns) if columns else np.zeros((int(n), 0))
    return MixedDataset.from_numeric(model.schema, matrix)


# =============================================================================
# Hand-built vines
# =============================================================================


def build_vine(
    schema: list[ColumnSchema],
    tree_edges: list[list[tuple[int, int, PairCopula]]],
    margins: list[Margin] | None = None,
) -> VineCopulaModel:
    """
    Assemble a vine from per-tree lists of (node_i, node_j, copula).

    Node indices refer to variables in T1 and to edge positions of the previous
    tree afterwards, as in a fitted model.
    """
    trees: list[list[VineEdge]] = []
    node_unions: list[frozenset[int]] = [frozenset((j,)) for j in range(len(schema))]
    for level_edges in tree_edges:
        tree = []
        for i, j, copula in level_edges:
            sym = node_unions[i] ^ node_unions[j]
            if len(sym) != 2:
                raise DomainError(f"Nodes {i} and {j} cannot be joined")
            first, second = sorted(sym)
            tree.append(
                VineEdge(
                    first=first,
                    second=second,
                    conditioning=node_unions[i] & node_unions[j],
                    nodes=(i, j),
                    copula=copula,
                    tau=copula.kendall_tau(),
                )
            )
        trees.append(tree)
        node_unions = [edge.union for edge in tree]
    model = VineCopulaModel(list(schema), trees, margins or [None] * len(schema))
    problems = validate_structure(model)
    if problems:
        raise DomainError(f"Invalid vine: {problems}")
    return model


def vine_summary(model: VineCopulaModel) -> list[dict[str, Any]]:
    """Per-edge table (tree, pair, family, parameter, tau, AIC) for fit reports."""
    names = [col.name for col in model.schema]
    describe: Callable[[frozenset[int]], list[str]] = lambda s: [names[k] for k in sorted(s)]
    return [
        {
            "tree": level,
            "pair": [names[edge.first], names[edge.second]],
            "given": describe(edge.conditioning),
            "family": edge.copula.family,
            "rotation": edge.copula.rotation,
            "theta": edge.copula.theta,
            "tau": edge.tau,
            "aic": edge.aic,
        }
        for level, tree in enumerate(model.trees, start=1)
        for edge in tree
    ]
