"""Multiscale loop vertex expansion of a zero-dimensional toy vector model.

The partition function is

    Z(lam, N) = int dnu(sigma) exp(-sum_{p=1}^N log2(1 - i lam sigma / p)),

with ``dnu`` the standard Gaussian and ``log2(1 - x) = x + log(1 - x)``.  The
indices are cut into slices ``I_j = [M^{j-1}, M^j - 1]`` and each slice
contributes a vertex ``W_j = exp(-V_j) - 1``.  Expanding ``log Z`` in the
number of vertices gives a sum over two-level trees: bosonic edges
interpolate the Gaussian replicas, fermionic edges interpolate the
Grassmann fields that forbid a slice from appearing twice in one block.
"""

from __future__ import annotations

import cmath
import itertools
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate

from .combinatorics import Forest, LabeledGraph, enumerate_spanning_trees, forest_matrices_batch
from .errors import DomainError, NumericError, NumericWarning, SingularityError, check_size
from .quadrature import integrate_unit_cube

SERIES_CUTOFF = 1e-3
MAX_DERIVATIVE = 4
# Gauss-Hermite nodes per axis by block size; larger blocks pay k-th power
GH_BY_BLOCK_SIZE = {1: 80, 2: 40, 3: 14}


def log2_fn(x):
    """``x + log(1 - x)``; a Taylor branch below ``|x| < 1e-3`` avoids cancellation."""
    if np.ndim(x) == 0:
        x = complex(x)
        if x == 1:
            raise SingularityError("log2 has a pole at x = 1")
        if abs(x) < SERIES_CUTOFF:
            return -sum(x**k / k for k in range(2, 8))
        return x + cmath.log(1 - x)
    x = np.asarray(x, dtype=complex)
    if np.any(x == 1):
        raise SingularityError("log2 has a pole at x = 1")
    small = np.abs(x) < SERIES_CUTOFF
    out = np.empty_like(x)
    xs = x[small]
    out[small] = -sum(xs**k / k for k in range(2, 8))
    xl = x[~small]
    out[~small] = xl + np.log(1 - xl)
    return out


def harmonic_counterterm(N: int) -> float:
    """``L_N = sum_{p <= N} 1/p`` accumulated exactly."""
    if N < 1:
        raise DomainError("N must be at least 1")
    return float(sum(Fraction(1, p) for p in range(1, N + 1)))


@dataclass(frozen=True)
class SliceModel:
    M: int
    j_max: int
    lam: complex
    j_min: int = 1

    def __post_init__(self):
        if self.M < 2:
            raise DomainError("slice base M must be at least 2")
        if not 1 <= self.j_min <= self.j_max:
            raise DomainError("need 1 <= j_min <= j_max")
        object.__setattr__(self, "lam", complex(self.lam))

    @property
    def N(self) -> int:
        return self.M**self.j_max - 1

    @property
    def slices(self) -> tuple[int, ...]:
        return tuple(range(self.j_min, self.j_max + 1))

    def slice_range(self, j: int) -> range:
        if not self.j_min <= j <= self.j_max:
            raise DomainError(f"slice {j} outside [{self.j_min}, {self.j_max}]")
        return range(self.M ** (j - 1), self.M**j)

    @property
    def counterterm(self) -> float:
        return harmonic_counterterm(self.N)

    def vertex(self, j: int) -> "SliceVertex":
        return SliceVertex(self, j)


@dataclass(frozen=True)
class SliceVertex:
    model: SliceModel
    j: int

    def __post_init__(self):
        self.model.slice_range(self.j)

    @property
    def coefficients(self) -> np.ndarray:
        """``a_p = i lam / p`` for ``p`` in the slice."""
        return 1j * self.model.lam / np.arange(self.model.M ** (self.j - 1), self.model.M**self.j)

    def V(self, sigma) -> np.ndarray:
        s = np.asarray(sigma, dtype=float)
        return log2_fn(np.multiply.outer(s, self.coefficients)).sum(axis=-1)

    def W(self, sigma) -> np.ndarray:
        return np.expm1(-self.V(sigma))

    def derivatives(self, sigma, k: int) -> np.ndarray:
        return slice_vertex_derivatives(self, sigma, k)


def _v_derivatives(v: SliceVertex, sigma: np.ndarray, k: int) -> list[np.ndarray]:
    """``[V', V'', ..., V^(k)]`` in closed form."""
    a = v.coefficients
    x = np.multiply.outer(sigma, a)
    one_minus = 1 - x
    if np.any(one_minus == 0):
        raise SingularityError("slice vertex evaluated at a pole")
    out = [(-a * x / one_minus).sum(axis=-1)]
    for m in range(2, k + 1):
        out.append((-math.factorial(m - 1) * a**m / one_minus**m).sum(axis=-1))
    return out


def slice_vertex_derivatives(v: SliceVertex, sigma, k: int) -> np.ndarray:
    """``d^k W_j / d sigma^k`` via complete Bell polynomials of ``-V^(m)``."""
    if not 0 <= k <= MAX_DERIVATIVE:
        raise DomainError(f"derivative order must lie in [0, {MAX_DERIVATIVE}]")
    s = np.asarray(sigma, dtype=float)
    if k == 0:
        return v.W(s)
    xs = [-d for d in _v_derivatives(v, s, k)]
    bell = [np.ones_like(xs[0])]
    for m in range(k):
        bell.append(sum(math.comb(m, i) * bell[m - i] * xs[i] for i in range(m + 1)))
    return np.exp(-v.V(s)) * bell[k]


# ----------------------------------------------------------------------------
# Oracle


def _check_lambda(lam: complex) -> None:
    if lam == 0:
        return
    if lam.imag == 0 and -1 <= lam.real <= 1:
        return
    gamma = cmath.phase(lam)
    if not abs(lam) ** 2 < math.cos(2 * gamma):
        raise DomainError("need lam real in [-1, 1] or |lam|^2 < cos(2 arg lam)")


def _full_action(model: SliceModel, sigma: np.ndarray) -> np.ndarray:
    a = 1j * model.lam / np.arange(model.M ** (model.j_min - 1), model.N + 1)
    out = np.zeros(sigma.shape, dtype=complex)
    for chunk in np.array_split(a, max(1, len(a) // 512)):
        out += log2_fn(np.multiply.outer(sigma, chunk)).sum(axis=-1)
    return out


def oracle_logZ(model: SliceModel, splits: Sequence[float] = (0.0,), tol: float = 1e-12) -> complex:
    """``log Z`` by adaptive quadrature of the Gaussian-weighted sigma integral.

    ``splits`` are interior break points of the integration range; the
    value must not depend on them.
    """
    _check_lambda(model.lam)
    if model.lam == 0:
        return 0j
    L = 40.0
    pts = [-L] + sorted(s for s in splits if -L < s < L) + [L]
    norm = 1 / math.sqrt(2 * math.pi)

    def f(s: float, part: int) -> float:
        v = norm * cmath.exp(-s * s / 2 - complex(_full_action(model, np.array([s]))[0]))
        return v.real if part == 0 else v.imag

    re = im = err = 0.0
    for lo, hi in zip(pts, pts[1:]):
        r, e1 = integrate.quad(f, lo, hi, args=(0,), limit=400, epsabs=tol * 1e-2, epsrel=1e-13)
        i, e2 = integrate.quad(f, lo, hi, args=(1,), limit=400, epsabs=tol * 1e-2, epsrel=1e-13)
        re += r
        im += i
        err += e1 + e2
    if err > tol * max(1.0, abs(complex(re, im))):
        raise NumericError(f"sigma quadrature error {err:.3g} above tol {tol:g}", achieved=err)
    return cmath.log(complex(re, im))


def _gauss_hermite(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.hermite_e.hermegauss(order)
    return x, w / w.sum()


def vertex_series_coefficients(model: SliceModel, n_max: int, order: int = 120) -> list[complex]:
    """Order-by-order ``c_n`` of ``log Z`` in the vertex-counting parameter.

    Uses ``Z(eps) = sum_m eps^m E[e_m(W_j)]`` (elementary symmetric
    polynomials of the slice vertices at a common sigma) and takes the
    series logarithm; independent of any tree bookkeeping.
    """
    x, w = _gauss_hermite(order)
    Ws = [model.vertex(j).W(x) for j in model.slices]
    e = [np.ones_like(x, dtype=complex)] + [np.zeros_like(x, dtype=complex) for _ in range(n_max)]
    for Wj in Ws:
        for m in range(n_max, 0, -1):
            e[m] = e[m] + Wj * e[m - 1]
    z = [complex(np.dot(w, em)) for em in e]
    lc = [0j] * (n_max + 1)
    for m in range(1, n_max + 1):
        acc = m * z[m]
        for k in range(1, m):
            acc -= k * lc[k] * z[m - k]
        lc[m] = acc / m
    return lc[1:]


# ----------------------------------------------------------------------------
# Two-level jungles and fermionic factors


@dataclass(frozen=True)
class TwoLevelJungle:
    """Spanning tree on ``n`` vertices with each edge marked bosonic or fermionic."""

    n: int
    bosonic: tuple[tuple[int, int], ...]
    fermionic: tuple[tuple[int, int], ...]

    def __post_init__(self):
        edges = self.bosonic + self.fermionic
        graph = LabeledGraph(self.n, edges)
        Forest.from_edges(graph, range(len(edges)))
        blocks = self.blocks()
        label = {v: b for b, blk in enumerate(blocks) for v in blk}
        for a, b in self.fermionic:
            if label[a] == label[b]:
                raise DomainError("fermionic edges must join distinct bosonic blocks")

    def blocks(self) -> tuple[tuple[int, ...], ...]:
        graph = LabeledGraph(self.n, self.bosonic)
        return Forest(graph, (1 << len(self.bosonic)) - 1).components()

    def bosonic_degrees(self) -> list[int]:
        deg = [0] * self.n
        for a, b in self.bosonic:
            deg[a] += 1
            deg[b] += 1
        return deg


def enumerate_two_level_trees(n: int, *, accept_exponential_cost: bool = False) -> list[TwoLevelJungle]:
    """Spanning trees of ``K_n`` with each edge assigned to one level."""
    if n < 1:
        raise DomainError("n must be at least 1")
    check_size(n, 6, "n", accept_exponential_cost)
    out = []
    for tree in enumerate_spanning_trees(n, accept_exponential_cost=True):
        edges = [tree.graph.edges[e] for e in tree.edges]
        for marks in itertools.product((0, 1), repeat=len(edges)):
            bos = tuple(e for e, m in zip(edges, marks) if m == 0)
            fer = tuple(e for e, m in zip(edges, marks) if m == 1)
            out.append(TwoLevelJungle(n, bos, fer))
    return out


@dataclass(frozen=True)
class FermionicFactor:
    value: float
    prefactor: int
    determinants: tuple[float, ...]
    signs: tuple[int, ...]


def check_unit_gram(Y: np.ndarray, slack: float = 1e-12) -> None:
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    if Y.shape != (n, n) or not np.allclose(Y, Y.T, atol=1e-15):
        raise DomainError("Y must be square symmetric")
    if not np.allclose(np.diag(Y), 1.0, atol=1e-15):
        raise DomainError("Y must have unit diagonal")
    if np.any(Y < -1e-15) or np.any(Y > 1 + 1e-15):
        raise DomainError("Y entries must lie in [0, 1]")
    if n and np.linalg.eigvalsh(Y)[0] < -slack * n:
        raise DomainError("Y must be positive semidefinite")


def _perm_sign(seq: Sequence[int]) -> int:
    sign = 1
    seen = list(seq)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


def _grassmann_terms(n: int, fermionic: Sequence[tuple[int, int]]) -> list[tuple[int, list[int], list[int]]]:
    """Apply the symmetrised edge derivatives to ``prod_a chibar_a chi_a``.

    Generators are encoded ``2a`` for ``chibar_a`` and ``2a + 1`` for
    ``chi_a``.  Each edge ``(a, b)`` acts as ``d_chi_b d_chibar_a + d_chi_a
    d_chibar_b`` (the barred derivative acts first), so ``2^k`` monomials
    survive.  Returned as ``(sign, barred replicas, unbarred replicas)``
    after reordering to ``chibar chi chibar chi ...``.
    """
    start = [g for a in range(n) for g in (2 * a, 2 * a + 1)]
    states = [(1, start)]
    for a, b in fermionic:
        nxt = []
        for sign, mono in states:
            for bar, unbar in ((a, b), (b, a)):
                s, m = sign, list(mono)
                for g in (2 * bar, 2 * unbar + 1):
                    if g not in m:
                        s = 0
                        break
                    pos = m.index(g)
                    s *= -1 if pos % 2 else 1
                    m.pop(pos)
                if s:
                    nxt.append((s, m))
        states = nxt
    out = []
    for sign, mono in states:
        bars = [g for g in mono if g % 2 == 0]
        unbars = [g for g in mono if g % 2 == 1]
        if len(bars) != len(unbars):
            continue
        target = [g for pair in zip(bars, unbars) for g in pair]
        perm = [mono.index(g) for g in target]
        out.append((sign * _perm_sign(perm), [g // 2 for g in bars], [g // 2 for g in unbars]))
    return out


def fermionic_factor(jungle: TwoLevelJungle, Y: np.ndarray, slices: Sequence[int] | None = None) -> FermionicFactor:
    """Grassmann integral of the jungle's fermionic derivatives under covariance ``Y``.

    ``Y`` is indexed by vertices (unit entries inside a bosonic block).  With
    a slice assignment the hard-core and edge constraints are applied as
    explicit prefactors and the covariance is restricted to equal slices.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (jungle.n, jungle.n):
        raise DomainError("Y must be n x n")
    check_unit_gram(Y)
    prefactor = 1
    if slices is not None:
        if len(slices) != jungle.n:
            raise DomainError("need one slice per vertex")
        for blk in jungle.blocks():
            if len({slices[a] for a in blk}) < len(blk):
                prefactor = 0
        for a, b in jungle.fermionic:
            if slices[a] != slices[b]:
                prefactor = 0
        same = np.equal.outer(np.asarray(slices), np.asarray(slices))
        Y = Y * same
    dets, signs = [], []
    value = 0.0
    if prefactor:
        for sign, rows, cols in _grassmann_terms(jungle.n, jungle.fermionic):
            d = float(np.linalg.det(Y[np.ix_(rows, cols)])) if rows else 1.0
            dets.append(d)
            signs.append(sign)
            value += sign * d
    return FermionicFactor(prefactor * value, prefactor, tuple(dets), tuple(signs))


def fermionic_covariance(jungle: TwoLevelJungle, w_f: Sequence[float]) -> np.ndarray:
    """``Y``: 1 inside bosonic blocks, block-forest path minimum of ``w_f`` between them."""
    blocks = jungle.blocks()
    label = {v: b for b, blk in enumerate(blocks) for v in blk}
    if not jungle.fermionic:
        Yb = np.eye(len(blocks))
    else:
        bgraph = LabeledGraph(len(blocks), tuple((label[a], label[b]) for a, b in jungle.fermionic))
        forest = Forest(bgraph, (1 << len(jungle.fermionic)) - 1)
        Yb = forest_matrices_batch(forest, np.asarray(w_f, dtype=float)[None, :])[0]
    idx = np.array([label[v] for v in range(jungle.n)])
    return Yb[np.ix_(idx, idx)]


# ----------------------------------------------------------------------------
# Truncated MLVE sum


@dataclass(frozen=True)
class MLVEResult:
    value: complex
    per_order: tuple[complex, ...]
    oracle: complex | None
    residual: float | None


def _block_expectation(
    model: SliceModel,
    block: Sequence[int],
    edges: Sequence[tuple[int, int]],
    degrees: Sequence[int],
    slices: Sequence[int],
    gh_order: int | None,
    tol: float,
) -> complex:
    """``int dw E_{X(w)}[prod_a W_{j_a}^{(deg a)}(sigma_a)]`` over one bosonic block."""
    pos = {v: k for k, v in enumerate(block)}
    verts = [model.vertex(slices[a]) for a in block]
    if len(block) == 1:
        x, w = _gauss_hermite(GH_BY_BLOCK_SIZE[1])
        return complex(np.dot(w, slice_vertex_derivatives(verts[0], x, degrees[block[0]])))
    x, w = _gauss_hermite(gh_order or GH_BY_BLOCK_SIZE[len(block)])
    k = len(block)
    grid = np.stack([g.ravel() for g in np.meshgrid(*([x] * k), indexing="ij")], axis=1)
    gw = np.prod(np.stack([g.ravel() for g in np.meshgrid(*([w] * k), indexing="ij")], axis=1), axis=1)
    graph = LabeledGraph(k, tuple((pos[a], pos[b]) for a, b in edges))
    forest = Forest(graph, (1 << len(edges)) - 1)

    def integrand(nodes: np.ndarray) -> np.ndarray:
        X = forest_matrices_batch(forest, nodes)
        vals, vecs = np.linalg.eigh(X)
        roots = vecs * np.sqrt(np.clip(vals, 0.0, None))[:, None, :]
        sig = np.einsum("sij,pj->spi", roots, grid)
        prod = np.ones(sig.shape[:2], dtype=complex)
        for i, a in enumerate(block):
            prod *= slice_vertex_derivatives(verts[i], sig[:, :, i], degrees[a])
        return prod @ gw

    val, _ = integrate_unit_cube(integrand, len(edges), tol=tol, start_order=2, max_order=32)
    return complex(val)


def mlve_order_term(model: SliceModel, n: int, *, gh_order: int | None = None, tol: float = 1e-9) -> complex:
    """``(1/n!) sum_{two-level trees} sum_J int dw dnu d_J prod_B prod_a W chibar chi``.

    ``gh_order`` overrides the Gauss-Hermite nodes per axis for blocks of
    two or more vertices; single vertices always use the fine 1-D rule.
    """
    check_size(n, 3, "n_max")
    total = 0j
    cache: dict = {}
    for jungle in enumerate_two_level_trees(n):
        blocks = jungle.blocks()
        deg = jungle.bosonic_degrees()
        block_edges = [tuple(e for e in jungle.bosonic if e[0] in blk) for blk in blocks]
        k_f = len(jungle.fermionic)
        for slices in itertools.product(model.slices, repeat=n):
            if any(len({slices[a] for a in blk}) < len(blk) for blk in blocks):
                continue
            if any(slices[a] != slices[b] for a, b in jungle.fermionic):
                continue

            def ferm(nodes: np.ndarray) -> np.ndarray:
                return np.array([
                    fermionic_factor(jungle, fermionic_covariance(jungle, row), slices).value for row in nodes
                ])

            fkey = (jungle, slices)
            if fkey not in cache:
                cache[fkey] = integrate_unit_cube(ferm, k_f, tol=1e-12, start_order=2, max_order=16)[0] if k_f else ferm(np.zeros((1, 0)))[0]
            term = complex(cache[fkey])
            if term == 0:
                continue
            for blk, edges in zip(blocks, block_edges):
                key = (tuple(slices[a] for a in blk), tuple(deg[a] for a in blk), _shape_key(blk, edges))
                if key not in cache:
                    cache[key] = _block_expectation(model, blk, edges, deg, slices, gh_order, tol)
                term *= cache[key]
            total += term
    return total / math.factorial(n)


def _shape_key(block: Sequence[int], edges: Sequence[tuple[int, int]]) -> tuple:
    pos = {v: k for k, v in enumerate(block)}
    return tuple(sorted((pos[a], pos[b]) for a, b in edges))


def mlve_truncated_sum(
    model: SliceModel, n_max: int, *, with_oracle: bool = True, gh_order: int | None = None
) -> MLVEResult:
    """Partial sum of the two-level tree expansion of ``log Z`` through ``n_max`` vertices."""
    if not (model.lam.imag == 0 and abs(model.lam.real) <= 0.5):
        raise DomainError("truncated MLVE sum needs real lam in [-0.5, 0.5]")
    if not 1 <= n_max <= 3:
        raise DomainError("n_max must lie in [1, 3]")
    if model.lam == 0:
        return MLVEResult(0j, (0j,) * n_max, 0j if with_oracle else None, 0.0 if with_oracle else None)
    terms = tuple(mlve_order_term(model, n, gh_order=gh_order) for n in range(1, n_max + 1))
    value = sum(terms)
    oracle = oracle_logZ(model) if with_oracle else None
    residual = abs(value - oracle) if with_oracle else None
    return MLVEResult(value, terms, oracle, residual)
