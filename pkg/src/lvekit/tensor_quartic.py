"""Quartic tensor models.

Generalized-color trace invariants and their Gaussian moments, colored
intermediate-field maps with strand (face) tracing, propagators for the
field-theory variants, resolvents, and the iterated Cauchy-Schwarz
bookkeeping on resolvent-dressed trees.
"""

from __future__ import annotations

import cmath
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DomainError, SingularityError, SizeLimitError, StructureError, check_size
from .vector_lve import cardioid_contains, resolvent_bound

MAX_RANK = 8
CONTRACTION_BUDGET = 8**8
MAX_DENSE_DIM = 4096
MAX_TREE_ORDER = 6

Corner = tuple[int, int]


# ----------------------------------------------------------------------------
# Generalized colors and invariants


@dataclass(frozen=True)
class GeneralizedColor:
    """Nonempty proper subset of ``{1..d}``, stored as the canonical one of ``C`` and its complement."""

    d: int
    colors: frozenset

    def __post_init__(self):
        if not 2 <= self.d <= MAX_RANK:
            raise DomainError(f"rank must lie in [2, {MAX_RANK}]")
        full = frozenset(range(1, self.d + 1))
        cs = frozenset(int(c) for c in self.colors)
        if not cs or not cs < full:
            raise DomainError("a generalized color is a nonempty proper subset of {1..d}")
        comp = full - cs
        object.__setattr__(self, "colors", min(cs, comp, key=lambda s: (len(s), sorted(s))))

    @property
    def complement(self) -> frozenset:
        return frozenset(range(1, self.d + 1)) - self.colors

    @property
    def melonic(self) -> bool:
        return len(self.colors) in (1, self.d - 1)

    @property
    def label(self) -> str:
        return "{" + ",".join(map(str, sorted(self.colors))) + "}"

    def __contains__(self, c: int) -> bool:
        return c in self.colors


def enumerate_quartic_invariants(d: int) -> list[GeneralizedColor]:
    """The ``2^(d-1) - 1`` connected quartic invariants of rank ``d``."""
    if not 2 <= d <= MAX_RANK:
        raise DomainError(f"rank must lie in [2, {MAX_RANK}]")
    seen = {
        GeneralizedColor(d, frozenset(s))
        for k in range(1, d)
        for s in itertools.combinations(range(1, d + 1), k)
    }
    return sorted(seen, key=lambda c: (len(c.colors), sorted(c.colors)))


@dataclass(frozen=True)
class Tensor:
    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=complex)
        if arr.ndim < 1 or len(set(arr.shape)) != 1:
            raise DomainError("a tensor needs equal sides on every color")
        if not np.all(np.isfinite(arr)):
            raise DomainError("tensor entries must be finite")
        object.__setattr__(self, "entries", arr)

    @property
    def d(self) -> int:
        return self.entries.ndim

    @property
    def N(self) -> int:
        return self.entries.shape[0]


def _as_array(T) -> np.ndarray:
    return T.entries if isinstance(T, Tensor) else Tensor(T).entries


def _color_matrix(arr: np.ndarray, colors: Iterable[int], d: int | None = None) -> np.ndarray:
    """Reshape so rows run over ``colors`` and columns over the rest; leading axes beyond rank ``d`` are kept."""
    d = arr.ndim if d is None else d
    N = arr.shape[-1]
    rows = sorted(c - 1 for c in colors)
    rest = [a for a in range(d) if a not in rows]
    lead = arr.ndim - d
    perm = list(range(lead)) + [lead + a for a in rows + rest]
    return np.transpose(arr, perm).reshape(arr.shape[:lead] + (N ** len(rows), -1))


def quadratic_invariant(T) -> complex:
    arr = _as_array(T)
    return complex(np.vdot(arr, arr))


def evaluate_invariant(T, C, *, accept_exponential_cost: bool = False) -> complex:
    """``V_C = Tr_C[(T^v ._{D\\C} T)^2]``.

    ``C`` is a :class:`GeneralizedColor` or a raw color subset; a raw subset
    is contracted as given, so ``C`` and its complement take different paths.
    """
    arr = _as_array(T)
    d, N = arr.ndim, arr.shape[0]
    if isinstance(C, GeneralizedColor):
        if C.d != d:
            raise DomainError("color rank and tensor rank differ")
        colors = C.colors
    else:
        colors = frozenset(int(c) for c in C)
        GeneralizedColor(d, colors)
    check_size(N ** (2 * d), CONTRACTION_BUDGET, "N^(2d)", accept_exponential_cost)
    M = _color_matrix(arr, colors)
    A = M @ M.conj().T
    return complex(np.sum(A * A.T))


def apply_unitaries(T, unitaries: Sequence[np.ndarray]) -> np.ndarray:
    """``(U1 x ... x Ud) T``: each unitary acts on its own color."""
    arr = _as_array(T)
    if len(unitaries) != arr.ndim:
        raise DomainError("need one unitary per color")
    for c, U in enumerate(unitaries):
        arr = np.moveaxis(np.tensordot(U, arr, axes=(1, c)), 0, c)
    return arr


def random_unitary(N: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


# ----------------------------------------------------------------------------
# Wick pairings of connected invariants


@dataclass(frozen=True)
class Bubble:
    """Connected invariant of ``k`` tensors and ``k`` conjugates.

    ``perms[c][i] = j`` means the color-``c+1`` index of ``T_i`` is shared
    with the conjugate ``Tbar_j``.
    """

    d: int
    perms: tuple[tuple[int, ...], ...]

    @property
    def k(self) -> int:
        return len(self.perms[0])


def quadratic_bubble(d: int) -> Bubble:
    return Bubble(d, tuple((0,) for _ in range(d)))


def quartic_bubble(C: GeneralizedColor) -> Bubble:
    """The bubble of ``V_C``: colors in ``C`` cross between the two pairs."""
    return Bubble(C.d, tuple((1, 0) if c in C.colors else (0, 1) for c in range(1, C.d + 1)))


def _cycle_count(perm: Sequence[int]) -> int:
    seen = [False] * len(perm)
    cycles = 0
    for i in range(len(perm)):
        if not seen[i]:
            cycles += 1
            while not seen[i]:
                seen[i] = True
                i = perm[i]
    return cycles


def wick_pairing_exponents(b: Bubble) -> list[int]:
    """Power of ``N`` contributed by each pairing ``T_i <-> Tbar_pi(i)``."""
    out = []
    for pi in itertools.permutations(range(b.k)):
        total = 0
        for sigma in b.perms:
            inv = [0] * b.k
            for i, j in enumerate(sigma):
                inv[j] = i
            total += _cycle_count([inv[pi[i]] for i in range(b.k)])
        out.append(total)
    return out


def wick_expectation(b: Bubble, N: int) -> Fraction:
    """Exact free-measure moment with entry covariance ``N^(1-d)``."""
    s = Fraction(1, N ** (b.d - 1))
    return s**b.k * sum(Fraction(N) ** e for e in wick_pairing_exponents(b))


@dataclass(frozen=True)
class MomentEstimate:
    label: str
    mean: complex
    stderr: float
    exact: float

    @property
    def passed(self) -> bool:
        return abs(self.mean - self.exact) <= 3 * self.stderr + 1e-12 * abs(self.exact)


@dataclass(frozen=True)
class GaussianReport:
    d: int
    N: int
    samples: int
    quadratic: MomentEstimate
    invariants: tuple[MomentEstimate, ...]

    @property
    def passed(self) -> bool:
        return self.quadratic.passed and all(m.passed for m in self.invariants)


def sample_free_tensors(d: int, N: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Complex Gaussian tensors with ``E|T_n|^2 = N^(1-d)``."""
    s = float(N) ** (1 - d)
    shape = (size,) + (N,) * d
    return math.sqrt(s / 2) * (rng.normal(size=shape) + 1j * rng.normal(size=shape))


def gaussian_moment_check(
    d: int, N: int, samples: int = 4000, *, seed: int = 0, chunk: int = 500
) -> GaussianReport:
    """Monte Carlo moments of the free measure against exact Wick sums."""
    if not 2 <= d <= MAX_RANK or N < 1 or samples < 2:
        raise DomainError("need 2 <= d <= 8, N >= 1 and at least two samples")
    check_size(N**d, MAX_DENSE_DIM, "N^d")
    rng = np.random.default_rng(seed)
    colors = enumerate_quartic_invariants(d)
    quad, inv = [], {c: [] for c in colors}
    left = samples
    while left:
        m = min(chunk, left)
        left -= m
        T = sample_free_tensors(d, N, m, rng)
        quad.append(np.sum(np.abs(T.reshape(m, -1)) ** 2, axis=1))
        for c in colors:
            M = _color_matrix(T, c.colors, d)
            A = M @ np.conj(np.swapaxes(M, 1, 2))
            inv[c].append(np.einsum("bij,bji->b", A, A))

    def estimate(label: str, vals: list[np.ndarray], exact: Fraction) -> MomentEstimate:
        v = np.concatenate(vals)
        return MomentEstimate(label, complex(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v))), float(exact))

    q = estimate("quadratic", quad, wick_expectation(quadratic_bubble(d), N))
    ests = tuple(estimate(c.label, inv[c], wick_expectation(quartic_bubble(c), N)) for c in colors)
    return GaussianReport(d, N, samples, q, ests)


# ----------------------------------------------------------------------------
# Colored intermediate-field maps


def _as_color(d: int, c) -> GeneralizedColor:
    if isinstance(c, GeneralizedColor):
        if c.d != d:
            raise StructureError("edge color has the wrong rank")
        return c
    try:
        return GeneralizedColor(d, frozenset(c))
    except DomainError as exc:
        raise StructureError(f"edge color {sorted(c)} is not a connected quartic trace") from exc


@dataclass(frozen=True)
class ColoredMap:
    """Loop vertices joined by colored intermediate-field edges.

    ``rotation[v]`` lists the edges met going once around loop vertex ``v``.
    Corner ``(v, i)`` is the arc from insertion ``i`` to insertion ``i + 1``;
    a vertex without insertions has the single corner ``(v, 0)``.
    """

    d: int
    rotation: tuple[tuple[int, ...], ...]
    colors: tuple[GeneralizedColor, ...]

    def __post_init__(self):
        if not 2 <= self.d <= MAX_RANK:
            raise DomainError(f"rank must lie in [2, {MAX_RANK}]")
        rot = tuple(tuple(int(e) for e in r) for r in self.rotation)
        if not rot:
            raise StructureError("a map needs at least one loop vertex")
        cols = tuple(_as_color(self.d, c) for c in self.colors)
        counts = Counter(e for r in rot for e in r)
        if set(counts) != set(range(len(cols))) or any(v != 2 for v in counts.values()):
            raise StructureError("every edge must occur exactly twice among the insertions")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "colors", cols)

    @property
    def n_vertices(self) -> int:
        return len(self.rotation)

    @property
    def n_edges(self) -> int:
        return len(self.colors)

    def corners(self) -> list[Corner]:
        return [(v, i) for v, r in enumerate(self.rotation) for i in range(max(1, len(r)))]

    def half_edges(self) -> dict[int, list[Corner]]:
        out: dict[int, list[Corner]] = {e: [] for e in range(self.n_edges)}
        for v, r in enumerate(self.rotation):
            for i, e in enumerate(r):
                out[e].append((v, i))
        return out

    def _successor(self, c: int | None) -> dict[Corner, Corner]:
        """Strand successor of each corner; ``c=None`` crosses every edge."""
        halves = self.half_edges()
        nxt = {}
        for v, r in enumerate(self.rotation):
            k = len(r)
            if k == 0:
                nxt[(v, 0)] = (v, 0)
                continue
            for i in range(k):
                ins = (i + 1) % k
                e = r[ins]
                if c is None or c in self.colors[e].colors:
                    a, b = halves[e]
                    nxt[(v, i)] = b if a == (v, ins) else a
                else:
                    nxt[(v, i)] = (v, ins)
        return nxt

    def faces(self) -> dict[int, int]:
        """Closed strands per color."""
        out = {}
        for c in range(1, self.d + 1):
            nxt = self._successor(c)
            seen: set[Corner] = set()
            count = 0
            for start in nxt:
                if start in seen:
                    continue
                count += 1
                x = start
                while x not in seen:
                    seen.add(x)
                    x = nxt[x]
            out[c] = count
        return out

    def face_count(self) -> int:
        return sum(self.faces().values())

    def is_connected(self) -> bool:
        parent = list(range(self.n_vertices))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e, (a, b) in self.half_edges().items():
            parent[find(a[0])] = find(b[0])
        return len({find(v) for v in range(self.n_vertices)}) == 1

    @property
    def label(self) -> str:
        rot = ";".join(",".join(map(str, r)) for r in self.rotation)
        return f"d{self.d}[{rot}]" + "".join(c.label for c in self.colors)


class ColoredTree(ColoredMap):
    """A connected colored map with ``n + 1`` loop vertices and ``n`` edges."""

    def __post_init__(self):
        super().__post_init__()
        if self.n_edges != self.n_vertices - 1 or not self.is_connected():
            raise StructureError("a colored tree must be connected with one edge fewer than vertices")

    @property
    def order(self) -> int:
        return self.n_edges

    def tour(self, start: Corner | None = None) -> tuple[list[Corner], list[int]]:
        """Corners met walking around the whole tree, and the edge crossed after each."""
        nxt = self._successor(None)
        start = start if start is not None else (0, 0)
        if start not in nxt:
            raise DomainError(f"{start} is not a corner of the tree")
        corners, steps = [start], []
        x = start
        while True:
            v, i = x
            r = self.rotation[v]
            if r:
                steps.append(r[(i + 1) % len(r)])
            x = nxt[x]
            if x == start:
                break
            corners.append(x)
        return corners, steps

    @classmethod
    def from_tour(cls, d: int, partners: Sequence[int], step_colors: Sequence) -> tuple["ColoredTree", list[Corner]]:
        """Build the plane tree whose walk pairs step ``k`` with ``partners[k]``.

        Returns the tree and the corner sitting at each walk position.
        """
        m = len(partners)
        if m % 2 or len(step_colors) != m:
            raise StructureError("a tree walk has an even number of steps, each with a color")
        vertex_at = [0]
        stack_v, stack_e = [0], []
        leaving: dict[int, list[int]] = {0: []}
        edge_of_step, colors = [], []
        for k, p in enumerate(partners):
            if p == k or not 0 <= p < m or partners[p] != k:
                raise StructureError("partners must be a perfect matching of the walk steps")
            here = stack_v[-1]
            if p > k:
                e = len(colors)
                colors.append(step_colors[k])
                if step_colors[p] != step_colors[k]:
                    raise StructureError("both traversals of an edge must carry its color")
                stack_e.append((e, p))
                stack_v.append(len(leaving))
                leaving[len(leaving)] = []
            else:
                if not stack_e or stack_e[-1][1] != k:
                    raise StructureError("crossing walk: not a plane tree")
                e, _ = stack_e.pop()
                stack_v.pop()
            edge_of_step.append(e)
            leaving[here].append(k)
            vertex_at.append(stack_v[-1])
        rotation, corner_at = [], [None] * max(1, m)
        for v in range(len(leaving)):
            ks = leaving[v]
            deg = len(ks)
            rotation.append(tuple(edge_of_step[ks[(t - 1) % deg]] for t in range(deg)))
            for t, k in enumerate(ks):
                corner_at[k] = (v, t)
        if m == 0:
            corner_at = [(0, 0)]
        return cls(d, tuple(rotation), tuple(colors)), corner_at


def _noncrossing_matchings(m: int) -> Iterator[tuple[int, ...]]:
    if m == 0:
        yield ()
        return
    for k in range(1, m, 2):
        for inner in _noncrossing_matchings(k - 1):
            for outer in _noncrossing_matchings(m - k - 1):
                out = [0] * m
                out[0], out[k] = k, 0
                for i, j in enumerate(inner):
                    out[1 + i] = 1 + j
                for i, j in enumerate(outer):
                    out[k + 1 + i] = k + 1 + j
                yield tuple(out)


def enumerate_colored_trees(
    n: int, palette: Sequence[GeneralizedColor], *, accept_exponential_cost: bool = False
) -> list[ColoredTree]:
    """Plane trees of order ``n`` rooted at a corner, edges colored from ``palette``."""
    if n < 0 or not palette:
        raise DomainError("need n >= 0 and a nonempty palette")
    check_size(n, MAX_TREE_ORDER, "n", accept_exponential_cost)
    d = palette[0].d
    out = []
    for match in _noncrossing_matchings(2 * n):
        firsts = [k for k in range(2 * n) if match[k] > k]
        for cols in itertools.product(palette, repeat=n):
            step = [None] * (2 * n)
            for k, c in zip(firsts, cols):
                step[k] = step[match[k]] = c
            out.append(ColoredTree.from_tour(d, match, step)[0])
    return out


@dataclass(frozen=True)
class PerturbativeAmplitude:
    order: int
    faces: int
    exponent: int
    value: complex


def perturbative_amplitude(G: ColoredMap, N: int, lam: complex) -> PerturbativeAmplitude:
    """``lam^n N^(F - (d-1) n)`` with ``F`` from strand tracing."""
    if N < 1:
        raise DomainError("N must be at least 1")
    F = G.face_count()
    n = G.n_edges
    e = F - (G.d - 1) * n
    return PerturbativeAmplitude(n, F, e, complex(lam) ** n * float(N) ** e)


def network_amplitude(G: ColoredMap, N: int, corner_ops: Mapping[Corner, np.ndarray] | None = None) -> complex:
    """Contract the strand network of ``G`` built from explicit deltas.

    Every insertion of an edge colored ``C`` is the matrix unit ``E_ab``
    on the colors of ``C`` (identity elsewhere), with ``(a, b)`` swapped at
    the other end.  Plain corners are identities; ``corner_ops`` places
    ``N^d x N^d`` operators (rows outgoing) on chosen corners.
    """
    corner_ops = dict(corner_ops or {})
    d = G.d
    corners = G.corners()
    for c, op in corner_ops.items():
        if c not in corners:
            raise DomainError(f"{c} is not a corner")
        if np.shape(op) != (N**d, N**d):
            raise DomainError("corner operators must be N^d x N^d")
    parent: dict = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        parent[find(a)] = find(b)

    halves = G.half_edges()
    for v, r in enumerate(G.rotation):
        k = len(r)
        for i, e in enumerate(r):
            before, after = (v, (i - 1) % k), (v, i)
            side = halves[e].index((v, i))
            for c in range(1, d + 1):
                if c in G.colors[e].colors:
                    enter, leave = ("a", "b") if side == 0 else ("b", "a")
                    union(("out", before, c), (enter, e, c))
                    union((leave, e, c), ("in", after, c))
                else:
                    union(("out", before, c), ("in", after, c))
        if k == 0:
            for c in range(1, d + 1):
                union(("out", (v, 0), c), ("in", (v, 0), c))
    for corner in corners:
        if corner not in corner_ops:
            for c in range(1, d + 1):
                union(("out", corner, c), ("in", corner, c))
    classes = {find(("in", corner, c)) for corner in corners for c in range(1, d + 1)}
    ids: dict = {}
    operands = []
    for corner, op in corner_ops.items():
        legs = [find(("out", corner, c)) for c in range(1, d + 1)] + [find(("in", corner, c)) for c in range(1, d + 1)]
        for leg in legs:
            ids.setdefault(leg, len(ids))
        operands += [np.asarray(op, dtype=complex).reshape((N,) * (2 * d)), [ids[leg] for leg in legs]]
    if len(ids) > 52:
        raise SizeLimitError("too many open strands for a dense contraction")
    free = len(classes - set(ids))
    value = complex(np.einsum(*operands, [], optimize="greedy")) if operands else 1.0 + 0j
    return value * float(N) ** free


# ----------------------------------------------------------------------------
# Propagators and cutoff power counting


class PropagatorKind(str, Enum):
    PURE = "pure"
    TFT = "tft"
    BOULATOV = "tgft-boulatov"


@dataclass(frozen=True)
class Propagator:
    kind: PropagatorKind
    mass2: float = 1.0
    d: int = 3

    def __post_init__(self):
        object.__setattr__(self, "kind", PropagatorKind(self.kind))
        if not self.mass2 > 0:
            raise DomainError("mass squared must be positive")
        if not 1 <= self.d <= MAX_RANK:
            raise DomainError(f"rank must lie in [1, {MAX_RANK}]")

    def value(self, n: Sequence[int]) -> float:
        if len(n) != self.d:
            raise DomainError("momentum has the wrong rank")
        if self.kind is PropagatorKind.PURE:
            return 1.0 / self.mass2
        if self.kind is PropagatorKind.BOULATOV and sum(n) != 0:
            return 0.0
        return 1.0 / (sum(x * x for x in n) + self.mass2)


def build_propagator(spec: Propagator, cutoff: int) -> np.ndarray:
    """Diagonal kernel on ``|n_j| <= cutoff``; axis position ``n_j + cutoff``."""
    if cutoff < 1:
        raise DomainError("cutoff must be at least 1")
    check_size((2 * cutoff + 1) ** spec.d, 10**7, "(2 cutoff + 1)^d")
    axes = np.meshgrid(*([np.arange(-cutoff, cutoff + 1)] * spec.d), indexing="ij")
    if spec.kind is PropagatorKind.PURE:
        return np.full(axes[0].shape, 1.0 / spec.mass2)
    kernel = 1.0 / (sum(a * a for a in axes) + spec.mass2)
    if spec.kind is PropagatorKind.BOULATOV:
        kernel = np.where(sum(axes) == 0, kernel, 0.0)
    return kernel


T43_GRAPHS = ("divergent-tadpole", "convergent-tadpole", "vacuum-linear", "vacuum-log")


def t43_amplitude(graph: str, cutoff: int, mass2: float = 1.0) -> float:
    """Cutoff momentum sum of a single-vertex melonic rank-3 graph at zero external momentum.

    With the color-1 vertex ``Tbar_(x', z) T_(x, z) Tbar_(x, w) T_(x', w)``:
    contracting inside a pair leaves a two-color face sum, contracting
    across pairs a one-color sum; the vacuum graphs close both pairs.
    """
    if graph not in T43_GRAPHS:
        raise DomainError(f"unknown graph {graph!r}; choose from {T43_GRAPHS}")
    if cutoff < 1:
        raise DomainError("cutoff must be at least 1")
    n = np.arange(-cutoff, cutoff + 1, dtype=float)
    z2 = (n[:, None] ** 2 + n[None, :] ** 2).ravel()
    if graph == "divergent-tadpole":
        return float(np.sum(1.0 / (z2 + mass2)))
    if graph == "convergent-tadpole":
        return float(np.sum(1.0 / (n**2 + mass2)))
    if graph == "vacuum-linear":
        return float(sum(np.sum(1.0 / (x * x + z2 + mass2)) ** 2 for x in n))
    inner = np.sum(1.0 / (n[:, None] ** 2 + z2[None, :] + mass2), axis=0)
    return float(np.sum(inner**2))


@dataclass(frozen=True)
class PowerCounting:
    graph: str
    cutoffs: tuple[int, ...]
    values: tuple[float, ...]
    growth: str
    slope: float
    fit_residual: float


def power_counting_t43(graph: str, cutoffs: Sequence[int] = (8, 16, 32, 64)) -> PowerCounting:
    """Classify the cutoff growth from doubling cutoffs.

    The ratio of the last two increments is about 2 for linear growth,
    about 1 for logarithmic growth and about 1/2 for a convergent sum.
    """
    cutoffs = tuple(int(c) for c in cutoffs)
    if len(cutoffs) < 3 or any(b != 2 * a for a, b in zip(cutoffs, cutoffs[1:])):
        raise DomainError("need at least three successively doubled cutoffs")
    vals = np.array([t43_amplitude(graph, c) for c in cutoffs])
    diffs = np.diff(vals)
    ratio = diffs[-1] / diffs[-2]
    L = np.array(cutoffs, dtype=float)
    if ratio > 1.5:
        growth = "linear"
        slope = float(vals[-1] / L[-1])
        residual = abs(vals[-1] / L[-1] - vals[-2] / L[-2]) / slope
    elif ratio > 0.75:
        growth = "logarithmic"
        slope = float(np.polyfit(np.log(L), vals, 1)[0])
        residual = float(np.max(np.abs(diffs / (slope * math.log(2)) - 1)))
    else:
        growth = "bounded"
        slope = 0.0
        residual = float(abs(diffs[-1]) / abs(vals[-1]))
    return PowerCounting(graph, cutoffs, tuple(float(v) for v in vals), growth, slope, float(residual))


# ----------------------------------------------------------------------------
# Resolvents


def color_operator(sigma: np.ndarray, C: GeneralizedColor, N: int) -> np.ndarray:
    """``sigma_C x 1`` on ``V^(x d)`` with colors in natural order."""
    d = C.d
    k = len(C.colors)
    sigma = np.asarray(sigma, dtype=complex)
    if sigma.shape != (N**k, N**k):
        raise DomainError(f"sigma for {C.label} must be {N**k} x {N**k}")
    order = sorted(c - 1 for c in C.colors) + sorted(c - 1 for c in C.complement)
    full = np.kron(sigma, np.eye(N ** (d - k))).reshape((N,) * (2 * d))
    back = list(np.argsort(order))
    full = np.transpose(full, back + [d + a for a in back])
    return full.reshape(N**d, N**d)


@dataclass(frozen=True)
class Resolvent:
    matrix: np.ndarray
    norm: float
    bound: float


def _momentum_diagonal(spec: Propagator, N: int, d: int) -> np.ndarray:
    if spec.d != d:
        raise DomainError("propagator rank differs from the field rank")
    moms = np.arange(N) - N // 2
    return np.array([spec.value(n) for n in itertools.product(moms, repeat=d)])


def resolvent_build(
    sigmas: Mapping[GeneralizedColor, np.ndarray],
    lam: complex,
    N: int,
    d: int,
    propagator: Propagator | None = None,
) -> Resolvent:
    """``[1 - i sqrt(lam) C^(1/2) (sum_C sigma_C x 1) C^(1/2)]^(-1)`` as a dense matrix.

    Index ``a`` of each color carries momentum ``a - N // 2`` when a
    propagator is given; without one ``C = 1``.
    """
    dim = N**d
    check_size(dim, MAX_DENSE_DIM, "N^d")
    H = np.zeros((dim, dim), dtype=complex)
    for C, s in sigmas.items():
        if C.d != d:
            raise DomainError("sigma color rank differs from d")
        s = np.asarray(s, dtype=complex)
        if not np.allclose(s, s.conj().T, atol=1e-12):
            raise DomainError(f"sigma for {C.label} must be Hermitian")
        H += color_operator(s, C, N)
    if propagator is not None:
        root = np.sqrt(_momentum_diagonal(propagator, N, d))
        H = root[:, None] * H * root[None, :]
    lam = complex(lam)
    A = np.eye(dim) - 1j * cmath.sqrt(lam) * H
    if not cardioid_contains(lam):
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] <= 1e-13 * sv[0]:
            raise SingularityError("1 - i sqrt(lam) C^(1/2) sigma C^(1/2) is singular")
    R = np.linalg.inv(A)
    return Resolvent(R, float(np.linalg.norm(R, 2)), resolvent_bound(lam))


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    g = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) * scale / math.sqrt(2)
    return (g + g.conj().T) / 2


# ----------------------------------------------------------------------------
# Resolvent-dressed trees and iterated Cauchy-Schwarz


@dataclass(frozen=True)
class ResolventDressedTree:
    tree: ColoredTree
    A: frozenset = frozenset()
    A_dag: frozenset = frozenset()

    def __post_init__(self):
        A = frozenset(tuple(c) for c in self.A)
        Ad = frozenset(tuple(c) for c in self.A_dag)
        if A & Ad:
            raise DomainError("a corner cannot carry both R and its adjoint")
        corners = set(self.tree.corners())
        if not (A | Ad) <= corners:
            raise DomainError("resolvents must sit on corners of the tree")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "A_dag", Ad)

    @property
    def p(self) -> int:
        return len(self.A) + len(self.A_dag)

    @property
    def order(self) -> int:
        return self.tree.order

    def dressing(self, corner: Corner) -> int:
        """0 plain, 1 resolvent, 2 adjoint resolvent."""
        return 1 if corner in self.A else 2 if corner in self.A_dag else 0


@dataclass(frozen=True)
class ICSSplit:
    corner: Corner
    opposite: Corner
    clockwise: tuple[Corner, ...]
    counterclockwise: tuple[Corner, ...]
    cut_edges: tuple[int, ...]


def _default_corner(T: ResolventDressedTree) -> Corner:
    corners, _ = T.tree.tour()
    for c in corners:
        if T.dressing(c):
            return c
    return corners[0]


def ics_split(T: ResolventDressedTree, corner: Corner | None = None) -> ICSSplit:
    """Cut the tree between a resolvent corner and the corner opposite to it.

    The two walks between them each pass ``n - 1`` corners; edges crossed
    once on each walk pair the halves as a scalar product.
    """
    n = T.order
    if n < 1:
        raise DomainError("splitting needs a tree of order at least 1")
    corner = _default_corner(T) if corner is None else tuple(corner)
    if T.p > 0 and not T.dressing(corner):
        raise DomainError("with resolvents present the split corner must carry one")
    corners, steps = T.tree.tour(corner)
    first = Counter(steps[:n])
    cut = tuple(sorted(e for e, k in first.items() if k == 1))
    return ICSSplit(corner, corners[n], tuple(corners[1:n]), tuple(reversed(corners[n + 1:])), cut)


_Form = tuple[tuple[int, ...], tuple[GeneralizedColor, ...], tuple[int, ...]]


def _tour_form(T: ResolventDressedTree, start: Corner) -> _Form:
    corners, steps = T.tree.tour(start)
    m = len(steps)
    partners = [0] * m
    seen: dict[int, int] = {}
    for k, e in enumerate(steps):
        if e in seen:
            partners[k], partners[seen[e]] = seen[e], k
        else:
            seen[e] = k
    colors = tuple(T.tree.colors[e] for e in steps)
    return tuple(partners), colors, tuple(T.dressing(c) for c in corners)


def _from_form(d: int, form: _Form) -> ResolventDressedTree:
    partners, colors, dress = form
    tree, at = ColoredTree.from_tour(d, partners, colors)
    A = {at[k] for k, x in enumerate(dress) if x == 1}
    Ad = {at[k] for k, x in enumerate(dress) if x == 2}
    return ResolventDressedTree(tree, frozenset(A), frozenset(Ad))


def _rotate(form: _Form, s: int) -> _Form:
    partners, colors, dress = form
    m = len(partners)
    return (
        tuple((partners[(k + s) % m] - s) % m for k in range(m)),
        tuple(colors[(k + s) % m] for k in range(m)),
        tuple(dress[(k + s) % m] for k in range(m)),
    )


def _reverse(form: _Form) -> _Form:
    """Walk the tree the other way round from the same corner."""
    partners, colors, dress = form
    m = len(partners)
    return (
        tuple(m - 1 - partners[m - 1 - k] for k in range(m)),
        tuple(colors[m - 1 - k] for k in range(m)),
        tuple(dress[(-k) % m] for k in range(m)),
    )


def _mirror_half(form: _Form) -> _Form:
    """Glue walk positions ``0..n`` to their adjoint mirror image.

    The split corner at position 0 loses its resolvent; the opposite
    corner keeps its dressing; mirrored corners carry the adjoint.
    """
    partners, colors, dress = form
    m = len(partners)
    n = m // 2
    new_p = [0] * m
    new_c = [None] * m
    for k in range(n):
        p = partners[k]
        mk = m - 1 - k
        new_c[k] = new_c[mk] = colors[k]
        if p < n:
            new_p[k], new_p[mk] = p, m - 1 - p
        else:
            new_p[k], new_p[mk] = mk, k
    conj = (0, 2, 1)
    new_d = [0] * m
    for t in range(1, n + 1):
        new_d[t] = dress[t]
    for t in range(1, n):
        new_d[m - t] = conj[dress[t]]
    return tuple(new_p), tuple(new_c), tuple(new_d)


def _split_form(form: _Form) -> tuple[_Form, _Form]:
    s = next((k for k, x in enumerate(form[2]) if x), 0)
    base = _rotate(form, s)
    return _mirror_half(base), _mirror_half(_reverse(base))


def ics_halves(T: ResolventDressedTree, corner: Corner | None = None) -> tuple[ResolventDressedTree, ResolventDressedTree]:
    """The two trees ``<S1 S1^+>`` and ``<S2 S2^+>`` produced by one Cauchy-Schwarz step."""
    split = ics_split(T, corner)
    form = _tour_form(T, split.corner)
    d = T.tree.d
    return _from_form(d, _mirror_half(form)), _from_form(d, _mirror_half(_reverse(form)))


def ics_iterate(T: ResolventDressedTree, iterations: int) -> list[Fraction]:
    """``q_r = 2^(-r) p_r`` while repeatedly splitting every tree that still has resolvents."""
    if T.order < 1:
        return [Fraction(0)] * (iterations + 1)
    pool: Counter = Counter({_tour_form(T, _default_corner(T)): 1})
    q = []
    for r in range(iterations + 1):
        total = sum(mult * sum(1 for x in f[2] if x) for f, mult in pool.items())
        q.append(Fraction(total, 2**r))
        if r == iterations:
            break
        nxt: Counter = Counter()
        for f, mult in pool.items():
            if not any(f[2]):
                continue
            for half in _split_form(f):
                if any(half[2]):
                    nxt[half] += mult
        pool = nxt
    return q


@dataclass(frozen=True)
class RarefactionTrace:
    n: int
    p0: int
    q: tuple[Fraction, ...]
    ratio_bound_holds: bool


def rarefaction_trace(n: int, p0: int, iterations: int = 60) -> RarefactionTrace:
    """Worst case ``p_(r+1) = 2 p_r - 2 ceil(p_r / 2n)`` and the check ``q_(r+1) <= q_r (1 - 1/2n)``."""
    if n < 1 or not 0 <= p0 <= 2 * n or iterations < 0:
        raise DomainError("need n >= 1, 0 <= p0 <= 2n and iterations >= 0")
    p = p0
    q = [Fraction(p0)]
    ok = True
    factor = 1 - Fraction(1, 2 * n)
    for r in range(iterations):
        m = -(-p // (2 * n))
        p = 2 * p - 2 * m
        q.append(Fraction(p, 2 ** (r + 1)))
        ok = ok and q[-1] <= q[-2] * factor
    return RarefactionTrace(n, p0, tuple(q), ok)


def dressed_amplitude(T: ResolventDressedTree, R: np.ndarray, N: int) -> complex:
    """``N^(-(d-1) n)`` times the strand network with ``R`` on ``A`` and ``R^+`` on ``A^+``."""
    ops = {c: R for c in T.A}
    ops.update({c: R.conj().T for c in T.A_dag})
    return network_amplitude(T.tree, N, ops) * float(N) ** (-(T.tree.d - 1) * T.order)


@dataclass(frozen=True)
class ICSReport:
    tree_id: str
    n: int
    p: int
    samples: int
    violations: int
    K: float
    max_undressed: float
    max_dressed: float
    rarefaction: tuple[float, ...]


def ics_verify(
    T: ResolventDressedTree,
    N: int,
    lam: complex,
    samples: int = 200,
    *,
    seed: int = 0,
    palette: Sequence[GeneralizedColor] | None = None,
    iterations: int = 20,
) -> ICSReport:
    """Check ``|A_T^(A, A+)| <= K^(2n) max_T' A_T'`` over random Hermitian ``sigma``.

    ``T'`` runs over every tree of the same order colored from ``palette``
    (default: all invariants of the rank).  Each draw rescales ``sigma`` by
    a log-normal factor so both weak and strong fields are probed.
    """
    n, d = T.order, T.tree.d
    check_size(n, 4, "n")
    check_size(N, 6, "N")
    if not cardioid_contains(lam):
        raise DomainError("lam must lie in the standard cardioid")
    palette = list(palette) if palette is not None else enumerate_quartic_invariants(d)
    K = resolvent_bound(lam)
    undressed = max(
        float(N) ** (t.face_count() - (d - 1) * n) for t in enumerate_colored_trees(n, palette)
    )
    bound = K ** (2 * n) * undressed
    rng = np.random.default_rng(seed)
    violations = 0
    worst = 0.0
    for _ in range(samples):
        scale = math.exp(rng.normal())
        sig = {C: random_hermitian(N ** len(C.colors), rng, scale) for C in palette}
        R = resolvent_build(sig, lam, N, d).matrix
        a = abs(dressed_amplitude(T, R, N))
        worst = max(worst, a)
        if a > bound * (1 + 1e-12):
            violations += 1
    q = ics_iterate(T, iterations)
    return ICSReport(T.tree.label, n, T.p, samples, violations, K, undressed, worst, tuple(float(x) for x in q))
