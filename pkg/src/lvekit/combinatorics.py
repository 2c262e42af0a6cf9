"""Forests, spanning trees, Kruskal leading trees and interpolation matrices.

Everything here is exact where it can be: tree weights are integer counts of
edge orderings, and the integral form of the weight is evaluated cell by cell
in rational arithmetic.  Floating point only enters through the forest and
jungle matrices and the quadrature used by the formula checks.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import ConnectivityError, DomainError, NumericError, check_size
from .quadrature import integrate_unit_cube

MAX_VERTICES = 8
MAX_WEIGHT_EDGES = 10
PSD_SLACK = 1e-12


class _UnionFind:
    __slots__ = ("parent",)

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


@dataclass(frozen=True)
class LabeledGraph:
    """Multigraph on vertices ``0..n-1``; self-loops and parallel edges allowed.

    The position of an edge in ``edges`` is its identity.
    """

    vertex_count: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.vertex_count < 1:
            raise DomainError("vertex_count must be positive")
        edges = tuple((int(a), int(b)) for a, b in self.edges)
        for a, b in edges:
            if not (0 <= a < self.vertex_count and 0 <= b < self.vertex_count):
                raise DomainError(f"edge ({a}, {b}) has an endpoint outside [0, {self.vertex_count})")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def complete(cls, n: int) -> "LabeledGraph":
        return cls(n, tuple(itertools.combinations(range(n), 2)))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def is_connected(self) -> bool:
        uf = _UnionFind(self.vertex_count)
        parts = self.vertex_count
        for a, b in self.edges:
            if uf.union(a, b):
                parts -= 1
        return parts == 1

    def edge_index(self, a: int, b: int) -> int:
        """Index of the first edge joining ``a`` and ``b`` (either orientation)."""
        for k, (x, y) in enumerate(self.edges):
            if (x, y) == (a, b) or (x, y) == (b, a):
                return k
        raise DomainError(f"no edge between {a} and {b}")


@dataclass(frozen=True)
class Forest:
    """Acyclic subset of the edges of ``graph`` stored as a bitmask."""

    graph: LabeledGraph
    mask: int

    @classmethod
    def from_edges(cls, graph: LabeledGraph, edges: Iterable[int]) -> "Forest":
        mask = 0
        for e in edges:
            if not 0 <= e < graph.edge_count:
                raise DomainError(f"edge index {e} out of range")
            mask |= 1 << e
        forest = cls(graph, mask)
        if not forest._acyclic():
            raise DomainError("edge subset contains a cycle")
        return forest

    @property
    def edges(self) -> tuple[int, ...]:
        return tuple(k for k in range(self.graph.edge_count) if self.mask >> k & 1)

    @property
    def vertex_count(self) -> int:
        return self.graph.vertex_count

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def _acyclic(self) -> bool:
        uf = _UnionFind(self.graph.vertex_count)
        return all(uf.union(*self.graph.edges[e]) for e in self.edges)

    def components(self) -> tuple[tuple[int, ...], ...]:
        uf = _UnionFind(self.graph.vertex_count)
        for e in self.edges:
            uf.union(*self.graph.edges[e])
        groups: dict[int, list[int]] = {}
        for v in range(self.graph.vertex_count):
            groups.setdefault(uf.find(v), []).append(v)
        return tuple(sorted(tuple(g) for g in groups.values()))

    def is_spanning_tree(self) -> bool:
        return len(self) == self.graph.vertex_count - 1 and self._acyclic()

    def subset_of(self, other: "Forest") -> bool:
        return self.mask & ~other.mask == 0


@dataclass(frozen=True)
class EdgeOrdering:
    """Hepp sector: ``order[r]`` is the edge ranked ``r`` (rank 0 comes first)."""

    order: tuple[int, ...]

    def __post_init__(self):
        order = tuple(int(e) for e in self.order)
        if sorted(order) != list(range(len(order))):
            raise DomainError("an edge ordering must be a permutation of the edge indices")
        object.__setattr__(self, "order", order)

    def rank(self, edge: int) -> int:
        return self.order.index(edge)


@dataclass(frozen=True)
class Jungle:
    """Nested forests ``levels[0] <= levels[1] <= ...`` on a shared graph."""

    graph: LabeledGraph
    levels: tuple[Forest, ...]

    def __post_init__(self):
        if not self.levels:
            raise DomainError("a jungle needs at least one level")
        for lo, hi in zip(self.levels, self.levels[1:]):
            if not lo.subset_of(hi):
                raise DomainError("jungle levels must be nested")

    @property
    def m(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class WeightResult:
    """Unreduced ``numerator / denominator`` with ``denominator = |E|!``."""

    numerator: int
    denominator: int

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    def __float__(self) -> float:
        return self.numerator / self.denominator


# ----------------------------------------------------------------------------
# Enumeration


def _guard_n(n: int, limit: int, accept_exponential_cost: bool) -> None:
    if n < 1:
        raise DomainError("vertex count must be at least 1")
    check_size(n, limit, "n", accept_exponential_cost)


def iter_forest_masks(graph: LabeledGraph) -> Iterator[int]:
    """Yield the masks of all forests of ``graph`` (self-loops never included)."""
    edges = graph.edges
    m = len(edges)

    def rec(k: int, mask: int, comp: list[int]) -> Iterator[int]:
        if k == m:
            yield mask
            return
        yield from rec(k + 1, mask, comp)
        a, b = edges[k]
        ca, cb = comp[a], comp[b]
        if ca != cb:
            merged = [ca if c == cb else c for c in comp]
            yield from rec(k + 1, mask | (1 << k), merged)

    yield from rec(0, 0, list(range(graph.vertex_count)))


def enumerate_forests(n: int, *, accept_exponential_cost: bool = False) -> list[Forest]:
    """All forests of the complete graph ``K_n`` including the empty one.

    Ordered by the integer value of the edge bitmask.
    """
    _guard_n(n, MAX_VERTICES, accept_exponential_cost)
    graph = LabeledGraph.complete(n)
    return [Forest(graph, mask) for mask in sorted(iter_forest_masks(graph))]


def enumerate_spanning_trees(
    n_or_graph: int | LabeledGraph, *, accept_exponential_cost: bool = False
) -> list[Forest]:
    """Spanning trees of ``K_n`` (or of a given multigraph), bitmask order."""
    if isinstance(n_or_graph, LabeledGraph):
        graph = n_or_graph
        _guard_n(graph.vertex_count, MAX_VERTICES, accept_exponential_cost)
    else:
        _guard_n(n_or_graph, MAX_VERTICES, accept_exponential_cost)
        graph = LabeledGraph.complete(n_or_graph)
    size = graph.vertex_count - 1
    masks = (mask for mask in iter_forest_masks(graph) if bin(mask).count("1") == size)
    return [Forest(graph, mask) for mask in sorted(masks)]


def kirchhoff_tree_count(graph: LabeledGraph) -> int:
    """Number of spanning trees by the matrix-tree theorem (exact)."""
    n = graph.vertex_count
    if n == 1:
        return 1
    lap = [[Fraction(0)] * n for _ in range(n)]
    for a, b in graph.edges:
        if a == b:
            continue
        lap[a][a] += 1
        lap[b][b] += 1
        lap[a][b] -= 1
        lap[b][a] -= 1
    mat = [row[1:] for row in lap[1:]]
    det = Fraction(1)
    size = n - 1
    for col in range(size):
        pivot = next((r for r in range(col, size) if mat[r][col] != 0), None)
        if pivot is None:
            return 0
        if pivot != col:
            mat[col], mat[pivot] = mat[pivot], mat[col]
            det = -det
        det *= mat[col][col]
        for r in range(col + 1, size):
            factor = mat[r][col] / mat[col][col]
            if factor:
                for c in range(col, size):
                    mat[r][c] -= factor * mat[col][c]
    return int(det)


def enumerate_jungles(n: int, m: int, *, accept_exponential_cost: bool = False) -> list[Jungle]:
    """All ``m``-level jungles on ``K_n``.

    Each edge of the top forest enters at exactly one level, so the jungles
    over a top forest ``F`` are indexed by maps ``F -> {1..m}``.
    """
    _guard_n(n, 5, accept_exponential_cost)
    if m < 1:
        raise DomainError("jungle level count must be at least 1")
    check_size(m, 3, "m", accept_exponential_cost)
    graph = LabeledGraph.complete(n)
    out: list[Jungle] = []
    for top in sorted(iter_forest_masks(graph)):
        edges = [k for k in range(graph.edge_count) if top >> k & 1]
        for entry in itertools.product(range(m), repeat=len(edges)):
            masks = []
            for level in range(m):
                masks.append(sum(1 << e for e, lv in zip(edges, entry) if lv <= level))
            out.append(Jungle(graph, tuple(Forest(graph, mk) for mk in masks)))
    return out


# ----------------------------------------------------------------------------
# Kruskal and barycentric weights


def kruskal_leading_tree(graph: LabeledGraph, ordering: EdgeOrdering | Sequence[int]) -> Forest:
    """Leading spanning tree of ``graph`` for a Hepp sector.

    Walks edges in sector order, dropping any edge that would close a cycle
    (self-loops included) and keeping the rest.
    """
    if not isinstance(ordering, EdgeOrdering):
        ordering = EdgeOrdering(tuple(ordering))
    if len(ordering.order) != graph.edge_count:
        raise DomainError("ordering length does not match the edge count")
    if not graph.is_connected():
        raise ConnectivityError("Kruskal leading tree requires a connected graph")
    return Forest(graph, _kruskal_mask(graph.vertex_count, graph.edges, ordering.order))


def _kruskal_mask(n: int, edges: Sequence[tuple[int, int]], order: Sequence[int]) -> int:
    uf = _UnionFind(n)
    mask = 0
    need = n - 1
    for e in order:
        if need == 0:
            break
        if uf.union(*edges[e]):
            mask |= 1 << e
            need -= 1
    return mask


@lru_cache(maxsize=256)
def _sector_counts(graph: LabeledGraph) -> Counter:
    counts: Counter = Counter()
    n, edges = graph.vertex_count, graph.edges
    for order in itertools.permutations(range(len(edges))):
        counts[_kruskal_mask(n, edges, order)] += 1
    return counts


def _check_tree_args(graph: LabeledGraph, tree: Forest, accept_exponential_cost: bool) -> None:
    if tree.graph != graph:
        raise DomainError("tree belongs to a different graph")
    if not graph.is_connected():
        raise ConnectivityError("weights are defined for connected graphs only")
    if not tree.is_spanning_tree():
        raise DomainError("T is not a spanning tree of G")
    check_size(graph.edge_count, MAX_WEIGHT_EDGES, "|E|", accept_exponential_cost)


def tree_weight_exact(
    graph: LabeledGraph, tree: Forest, *, accept_exponential_cost: bool = False
) -> WeightResult:
    """``N(G, T) / |E|!`` by enumerating every ordering of the edges of ``G``."""
    _check_tree_args(graph, tree, accept_exponential_cost)
    return WeightResult(_sector_counts(graph)[tree.mask], math.factorial(graph.edge_count))


def all_tree_weights(graph: LabeledGraph, *, accept_exponential_cost: bool = False) -> dict[Forest, WeightResult]:
    if not graph.is_connected():
        raise ConnectivityError("weights are defined for connected graphs only")
    check_size(graph.edge_count, MAX_WEIGHT_EDGES, "|E|", accept_exponential_cost)
    denom = math.factorial(graph.edge_count)
    counts = _sector_counts(graph)
    return {
        tree: WeightResult(counts[tree.mask], denom)
        for tree in enumerate_spanning_trees(graph, accept_exponential_cost=True)
    }


def tree_path(graph: LabeledGraph, tree_edges: Sequence[int], i: int, j: int) -> list[int]:
    """Edge indices on the unique path from ``i`` to ``j`` in a forest; [] if i == j.

    Raises :class:`DomainError` when ``i`` and ``j`` lie in different trees.
    """
    if i == j:
        return []
    adj: dict[int, list[tuple[int, int]]] = {}
    for e in tree_edges:
        a, b = graph.edges[e]
        adj.setdefault(a, []).append((b, e))
        adj.setdefault(b, []).append((a, e))
    prev: dict[int, tuple[int, int] | None] = {i: None}
    stack = [i]
    while stack:
        v = stack.pop()
        if v == j:
            break
        for u, e in adj.get(v, ()):
            if u not in prev:
                prev[u] = (v, e)
                stack.append(u)
    if j not in prev:
        raise DomainError(f"{i} and {j} are not connected by the forest")
    path = []
    v = j
    while prev[v] is not None:
        v, e = prev[v]
        path.append(e)
    return path[::-1]


def _simplex_monomial(exponents: Sequence[int]) -> Fraction:
    """Integral of ``prod_r u_r^a_r`` over ``1 > u_1 > ... > u_k > 0``."""
    carry = 0
    value = Fraction(1)
    for a in reversed(exponents):
        carry += a + 1
        value /= carry
    return value


def tree_weight_integral(
    graph: LabeledGraph, tree: Forest, *, accept_exponential_cost: bool = False
) -> WeightResult:
    """The weight as ``int dw_T prod_{l in G - T} X^T_{i(l) j(l)}(w_T)``.

    The unit cube is cut into the ``|T|!`` cells of decreasing parameters; on
    each cell every matrix entry is the smallest parameter along its tree
    path, so the integrand is a monomial integrated exactly.
    """
    _check_tree_args(graph, tree, accept_exponential_cost)
    tedges = tree.edges
    paths = []
    for e in range(graph.edge_count):
        if tree.mask >> e & 1:
            continue
        a, b = graph.edges[e]
        if a != b:
            paths.append(tree_path(graph, tedges, a, b))
    total = Fraction(0)
    k = len(tedges)
    for cell in itertools.permutations(range(k)):
        rank = {tedges[pos]: r for r, pos in enumerate(cell)}
        exps = [0] * k
        for path in paths:
            exps[max(rank[e] for e in path)] += 1
        total += _simplex_monomial(exps)
    denom = math.factorial(graph.edge_count)
    scaled = total * denom
    if scaled.denominator != 1:
        raise NumericError("cell integration did not produce an integer sector count")
    return WeightResult(int(scaled), denom)


# ----------------------------------------------------------------------------
# Interpolated matrices


def _check_w(w: Sequence[float], size: int) -> np.ndarray:
    arr = np.asarray(w, dtype=float).reshape(-1)
    if arr.size != size:
        raise DomainError(f"expected {size} interpolation parameters, got {arr.size}")
    if np.any(arr < 0.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
        raise DomainError("interpolation parameters must lie in [0, 1]")
    return arr


def forest_paths(forest: Forest) -> dict[tuple[int, int], list[int]]:
    """Positions (into ``forest.edges``) of the path edges for every connected pair i < j."""
    tedges = forest.edges
    pos = {e: k for k, e in enumerate(tedges)}
    out = {}
    for comp in forest.components():
        for i, j in itertools.combinations(comp, 2):
            out[(i, j)] = [pos[e] for e in tree_path(forest.graph, tedges, i, j)]
    return out


def forest_matrix(forest: Forest, w: Sequence[float]) -> np.ndarray:
    """``X^F(w)``: unit diagonal, path minimum of ``w`` off the diagonal, 0 across trees."""
    warr = _check_w(w, len(forest))
    n = forest.vertex_count
    X = np.eye(n)
    for (i, j), path in forest_paths(forest).items():
        X[i, j] = X[j, i] = warr[path].min()
    return X


def forest_matrices_batch(forest: Forest, w: np.ndarray) -> np.ndarray:
    """Stack of ``X^F(w_s)`` for ``w`` of shape ``(S, |F|)``."""
    w = np.asarray(w, dtype=float)
    n = forest.vertex_count
    X = np.broadcast_to(np.eye(n), (w.shape[0], n, n)).copy()
    for (i, j), path in forest_paths(forest).items():
        col = w[:, path].min(axis=1)
        X[:, i, j] = col
        X[:, j, i] = col
    return X


def check_forest_matrix(X: np.ndarray, slack: float = PSD_SLACK) -> None:
    """Raise :class:`DomainError` unless ``X`` is symmetric, unit-diagonal, in [0,1] and PSD."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if X.shape != (n, n) or not np.allclose(X, X.T, atol=0.0):
        raise DomainError("matrix is not square symmetric")
    if not np.all(np.diag(X) == 1.0):
        raise DomainError("diagonal entries must equal 1")
    if np.any(X < 0.0) or np.any(X > 1.0):
        raise DomainError("entries must lie in [0, 1]")
    if np.linalg.eigvalsh(X)[0] < -slack * n:
        raise DomainError("matrix is not positive semidefinite")


def block_matrix(partition: Sequence[Sequence[int]], n: int) -> np.ndarray:
    X = np.zeros((n, n))
    for block in partition:
        idx = np.asarray(block)
        X[np.ix_(idx, idx)] = 1.0
    return X


def block_decomposition(forest: Forest, w: Sequence[float]) -> list[tuple[float, tuple[tuple[int, ...], ...]]]:
    """Barycentric decomposition of ``X^F(w)`` into partition block matrices.

    Edges are merged in decreasing ``w``; ties go to the smaller edge index.
    Terms with a zero coefficient are dropped.
    """
    warr = _check_w(w, len(forest))
    n = forest.vertex_count
    tedges = forest.edges
    order = sorted(range(len(tedges)), key=lambda k: (-warr[k], tedges[k]))
    uf = _UnionFind(n)

    def partition() -> tuple[tuple[int, ...], ...]:
        groups: dict[int, list[int]] = {}
        for v in range(n):
            groups.setdefault(uf.find(v), []).append(v)
        return tuple(sorted(tuple(g) for g in groups.values()))

    levels = [1.0] + [float(warr[k]) for k in order] + [0.0]
    terms = []
    parts = [partition()]
    for k in order:
        uf.union(*forest.graph.edges[tedges[k]])
        parts.append(partition())
    for r, part in enumerate(parts):
        coeff = levels[r] - levels[r + 1]
        if coeff > 0.0:
            terms.append((coeff, part))
    return terms


def jungle_matrices(jungle: Jungle, w: Sequence[float]) -> list[np.ndarray]:
    """Level matrices of the jungle formula; ``w`` is indexed by the top forest's edges."""
    top = jungle.levels[-1]
    warr = _check_w(w, len(top))
    wmap = dict(zip(top.edges, warr))
    n = jungle.graph.vertex_count
    mats = []
    empty = Forest(jungle.graph, 0)
    for k, level in enumerate(jungle.levels):
        below = jungle.levels[k - 1] if k else empty
        below_comp = {v: c for c, comp in enumerate(below.components()) for v in comp}
        X = np.eye(n)
        for (i, j), _ in forest_paths(level).items():
            if below_comp[i] == below_comp[j]:
                X[i, j] = X[j, i] = 1.0
                continue
            path = tree_path(jungle.graph, level.edges, i, j)
            fresh = [wmap[e] for e in path if not below.mask >> e & 1]
            X[i, j] = X[j, i] = min(fresh)
        mats.append(X)
    return mats


# ----------------------------------------------------------------------------
# Formula checks


@dataclass(frozen=True)
class FormulaCheck:
    lhs: float
    rhs: float
    residual: float
    quadrature_error: float
    terms: int


def _coupling_table(n: int, t) -> np.ndarray:
    T = np.zeros((n, n))
    if isinstance(t, Mapping):
        for (i, j), v in t.items():
            T[i, j] = T[j, i] = v
    else:
        arr = np.asarray(t, dtype=float)
        if arr.shape == (n, n):
            T = np.triu(arr, 1) + np.triu(arr, 1).T
        elif arr.size == n * (n - 1) // 2:
            for v, (i, j) in zip(arr.ravel(), itertools.combinations(range(n), 2)):
                T[i, j] = T[j, i] = v
        else:
            raise DomainError("coupling table must be n x n, a flat K_n edge list, or a mapping")
    return T


def forest_formula_verify(
    n: int, t, *, tol: float = 1e-10, accept_exponential_cost: bool = False
) -> FormulaCheck:
    """Check the forest formula on ``f(X) = exp(sum_{i<j} t_ij X_ij)``.

    For this family ``d_F f = (prod_{l in F} t_l) f`` so the right-hand side
    needs one ``|F|``-dimensional integral per forest.
    """
    _guard_n(n, 5, accept_exponential_cost)
    T = _coupling_table(n, t)
    iu = np.triu_indices(n, 1)
    lhs = math.exp(T[iu].sum())
    rhs = 0.0
    qerr = 0.0
    forests = enumerate_forests(n)
    for forest in forests:
        pairs = list(forest_paths(forest).items())
        pref = math.prod(T[forest.graph.edges[e]] for e in forest.edges)
        if pref == 0.0 and len(forest):
            continue

        def integrand(nodes: np.ndarray, pairs=pairs) -> np.ndarray:
            expo = np.zeros(nodes.shape[0])
            for (i, j), path in pairs:
                expo += T[i, j] * nodes[:, path].min(axis=1)
            return np.exp(expo)

        val, err = integrate_unit_cube(integrand, len(forest), tol=tol)
        rhs += pref * float(val)
        qerr += abs(pref) * err
    return FormulaCheck(lhs, float(rhs), float(abs(lhs - rhs)), float(qerr), len(forests))


def gaussian_replica_verify(
    n: int,
    covariance: float,
    polys: Sequence[Sequence[float]],
    *,
    tol: float = 1e-12,
) -> FormulaCheck:
    """Replica form of the forest formula for a scalar Gaussian.

    ``polys[i]`` holds the power-basis coefficients of ``f_i`` (degree <= 4).
    The left side is ``E[prod f_i(tau)]`` for ``tau ~ N(0, C)``; the right side
    sums over forests ``C^|F| int dw E_{C X^F(w)}[prod f_i^(deg_F i)(tau_i)]``.
    """
    if not np.isscalar(covariance) or covariance <= 0:
        raise DomainError("covariance must be a positive scalar")
    _guard_n(n, 5, False)
    if len(polys) != n:
        raise DomainError("need one polynomial per replica")
    P = [np.polynomial.Polynomial(np.asarray(c, dtype=float)) for c in polys]
    if any(p.degree() > 4 for p in P):
        raise DomainError("replica integrands are limited to degree 4")
    C = float(covariance)
    x1, w1 = np.polynomial.hermite_e.hermegauss(2 * n + 3)
    w1 = w1 / w1.sum()
    tau = math.sqrt(C) * x1
    lhs = float(np.dot(w1, np.prod([p(tau) for p in P], axis=0)))

    m = 2 * n + 1
    xg, wg = np.polynomial.hermite_e.hermegauss(m)
    wg = wg / wg.sum()
    grid = np.stack([g.ravel() for g in np.meshgrid(*([xg] * n), indexing="ij")], axis=1)
    gw = np.prod(np.stack([g.ravel() for g in np.meshgrid(*([wg] * n), indexing="ij")], axis=1), axis=1)

    rhs = 0.0
    qerr = 0.0
    for forest in enumerate_forests(n):
        deg = [0] * n
        for e in forest.edges:
            a, b = forest.graph.edges[e]
            deg[a] += 1
            deg[b] += 1
        derivs = [P[i].deriv(deg[i]) if deg[i] else P[i] for i in range(n)]
        if any(d.degree() == 0 and d.coef[0] == 0 for d in derivs):
            continue

        def integrand(nodes: np.ndarray, forest=forest, derivs=derivs) -> np.ndarray:
            Xs = forest_matrices_batch(forest, nodes)
            vals, vecs = np.linalg.eigh(Xs)
            roots = vecs * np.sqrt(np.clip(vals, 0.0, None))[:, None, :]
            taus = math.sqrt(C) * np.einsum("sij,pj->spi", roots, grid)
            prod = np.ones(taus.shape[:2])
            for i, d in enumerate(derivs):
                prod *= d(taus[:, :, i])
            return prod @ gw

        val, err = integrate_unit_cube(integrand, len(forest), tol=tol, start_order=2)
        rhs += C ** len(forest) * float(val)
        qerr += C ** len(forest) * err
    return FormulaCheck(lhs, float(rhs), float(abs(lhs - rhs)), float(qerr), 0)


def double_factorial(k: int) -> int:
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def count_labeled_phi4_graphs(n: int) -> int:
    """``(4n - 1)!!``, the number of labeled vacuum graphs with ``n`` quartic vertices."""
    if n < 0:
        raise DomainError("order must be non-negative")
    return double_factorial(4 * n - 1)
