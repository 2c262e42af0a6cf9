"""Loop vertex expansion of the quartic O(N)-invariant complex vector model.

The model is ``Z(z, N) = int exp(-phi.phi + (z / 2N) (phi.phi)^2)`` over
``C^N`` with the Gaussian normalised to one.  It is stable for ``z < 0``.  The
normalised two-point function ``G2 = <phi.phi> / N`` is written as a sum over
rooted plane trees, each tree carrying

    z^n  E[ exp((z / 2N) beta . X^T(w) . beta) ],

with ``beta_i ~ Gamma(d_i)`` independent and ``w`` uniform on ``[0, 1]^n``.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np
from scipy import integrate, special

from .combinatorics import Forest, LabeledGraph, forest_matrices_batch
from .errors import DomainError, NumericError, NumericWarning, check_size
from .quadrature import sector_rule

MAX_TREE_EDGES = 12
DEFAULT_SAMPLES = 20_000
N_INFINITY = math.inf


# ----------------------------------------------------------------------------
# Trees


@dataclass(frozen=True)
class RootedPlaneTree:
    """Plane tree in depth-first preorder; vertex 0 is the ciliated root.

    ``parents[i]`` is the parent of vertex ``i + 1``; children keep their
    left-to-right order because preorder visits them in that order.
    """

    parents: tuple[int, ...]

    def __post_init__(self):
        for i, p in enumerate(self.parents, start=1):
            if not 0 <= p < i:
                raise DomainError("parents must point to an earlier vertex in preorder")

    @property
    def n(self) -> int:
        return len(self.parents)

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple((p, i) for i, p in enumerate(self.parents, start=1))

    def children(self, v: int) -> list[int]:
        return [i for i, p in enumerate(self.parents, start=1) if p == v]

    @property
    def degrees(self) -> tuple[int, ...]:
        """Corner counts: tree degree, plus one at the root for the cilium."""
        deg = [0] * (self.n + 1)
        deg[0] = 1
        for p, c in self.edges:
            deg[p] += 1
            deg[c] += 1
        return tuple(deg)

    def dyck_word(self) -> str:
        out = []

        def walk(v: int) -> None:
            for c in self.children(v):
                out.append("(")
                walk(c)
                out.append(")")

        walk(0)
        return "".join(out)

    def forest(self) -> Forest:
        graph = LabeledGraph(self.n + 1, self.edges)
        return Forest(graph, (1 << self.n) - 1)


def _plane_trees(n: int) -> Iterator[tuple[int, ...]]:
    """Dyck words of semilength ``n`` turned into preorder parent arrays."""

    def rec(word: list[str], opened: int, closed: int) -> Iterator[str]:
        if opened == closed == n:
            yield "".join(word)
            return
        if opened < n:
            word.append("(")
            yield from rec(word, opened + 1, closed)
            word.pop()
        if closed < opened:
            word.append(")")
            yield from rec(word, opened, closed + 1)
            word.pop()

    for word in rec([], 0, 0):
        parents = []
        stack = [0]
        nxt = 1
        for ch in word:
            if ch == "(":
                parents.append(stack[-1])
                stack.append(nxt)
                nxt += 1
            else:
                stack.pop()
        yield tuple(parents)


def enumerate_rooted_plane_trees(n: int, *, accept_exponential_cost: bool = False) -> list[RootedPlaneTree]:
    """All plane trees with ``n`` edges, ordered by their Dyck word."""
    if n < 0:
        raise DomainError("edge count must be non-negative")
    check_size(n, MAX_TREE_EDGES, "n", accept_exponential_cost)
    return [RootedPlaneTree(p) for p in _plane_trees(n)]


def catalan_number(n: int) -> int:
    return math.comb(2 * n, n) // (n + 1)


# ----------------------------------------------------------------------------
# Closed forms and domains


def catalan_g2(z: complex) -> complex:
    """``(1 - sqrt(1 - 4z)) / (2z)``, the infinite-N two-point function.

    Principal square root, so the cut runs along ``[1/4, inf)``.  Near zero
    the Taylor series is used instead of the cancelling closed form.
    """
    z = complex(z)
    if abs(z) < 1e-4:
        return sum(catalan_number(k) * z**k for k in range(8))
    return (1 - cmath.sqrt(1 - 4 * z)) / (2 * z)


class CardioidSpec(str, Enum):
    STANDARD = "standard"
    EXTENDED = "extended"
    UNIFORM_HALF_DISK = "uniform-half-disk"


def cardioid_contains_polar(rho: float, phi: float, spec: CardioidSpec | str = CardioidSpec.STANDARD) -> bool:
    """Membership in explicit polar coordinates; ``phi`` may leave ``(-pi, pi]``.

    The positive real axis is the stable direction.  The extended region
    is the quarter disks ``|phi| < pi/2, 4 rho < 1`` glued to the arcs
    ``pi/2 <= |phi| < 3pi/2, 4 rho < cos(|phi|/2 - pi/4)^2``; at the seam
    ``|phi| = pi/2`` the two conditions coincide.
    """
    spec = CardioidSpec(spec)
    if rho == 0:
        return True
    a = abs(phi)
    if spec is CardioidSpec.STANDARD:
        return a <= math.pi and rho < math.cos(phi / 2) ** 2
    if spec is CardioidSpec.UNIFORM_HALF_DISK:
        return a <= math.pi / 2 and 16 * rho < 1
    if a < math.pi / 2:
        return 4 * rho < 1
    if a < 3 * math.pi / 2:
        return 4 * rho < math.cos(a / 2 - math.pi / 4) ** 2
    return False


def cardioid_contains(lam: complex, spec: CardioidSpec | str = CardioidSpec.STANDARD) -> bool:
    """Membership of ``lam = rho e^{i phi}`` with ``phi`` in ``(-pi, pi]``.

    For the vector model pass ``lam = -z``.  ``lam = 0`` counts as inside.
    """
    lam = complex(lam)
    return cardioid_contains_polar(abs(lam), cmath.phase(lam) if lam != 0 else 0.0, spec)


def coupling_phase(z: complex) -> float:
    """``phi`` in ``z = |z| e^{i pi + i phi}``."""
    return cmath.phase(-complex(z)) if z != 0 else 0.0


def resolvent_modulus(lam: complex, tau: float) -> float:
    """``|1 / (1 - i sqrt(lam) tau)|`` with the principal root."""
    return 1.0 / abs(1 - 1j * cmath.sqrt(complex(lam)) * tau)


def resolvent_bound(lam: complex) -> float:
    """``1 / cos(phi / 2)`` for ``lam = rho e^{i phi}``."""
    c = math.cos(cmath.phase(complex(lam)) / 2)
    return math.inf if c <= 0 else 1.0 / c


def catalan_tail_bound(z: complex, n_max: int) -> float:
    """``sum_{n > n_max} C_n (|z| kappa)^n`` with ``kappa = 4 / cos(phi/2)^2``."""
    if z == 0:
        return 0.0
    c = math.cos(coupling_phase(z) / 2)
    if c <= 0:
        return math.inf
    x = abs(z) * 4 / c**2
    if 4 * x >= 1:
        return math.inf
    total = 0.0
    n = n_max + 1
    term = catalan_number(n) * x**n
    while True:
        total += term
        nxt = term * x * 2 * (2 * n + 1) / (n + 2)
        n += 1
        if nxt < 1e-18 * total:
            # remaining ratios are all below 4x
            return total + nxt / (1 - 4 * x)
        term = nxt


# ----------------------------------------------------------------------------
# Model points and amplitudes


@dataclass(frozen=True)
class ModelPoint:
    z: complex
    N: float

    def __post_init__(self):
        if not (self.N >= 1):
            raise DomainError("N must be at least 1")
        if self.N != math.inf and self.N != int(self.N):
            raise DomainError("N must be an integer or infinity")
        object.__setattr__(self, "z", complex(self.z))

    @property
    def coupling(self) -> complex:
        """Quartic coefficient ``z / 2N`` (zero at infinite N)."""
        return 0j if self.N == math.inf else self.z / (2 * self.N)


@dataclass(frozen=True)
class TreeAmplitude:
    value: complex
    stderr: float
    method: str


def _require_half_disk(p: ModelPoint) -> None:
    if not cardioid_contains(-p.z, CardioidSpec.UNIFORM_HALF_DISK):
        raise DomainError("z must satisfy 16|z| < 1 with Re z <= 0")


def tree_rng(seed: int, tree: RootedPlaneTree, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, tree.n, index])


def _quadratic_forms(tree: RootedPlaneTree, beta: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``beta_s . X^T(w_s) . beta_s`` for batched samples."""
    if tree.n == 0:
        return beta[:, 0] ** 2
    X = forest_matrices_batch(tree.forest(), w)
    return np.einsum("si,sij,sj->s", beta, X, beta)


def lve_tree_term(
    tree: RootedPlaneTree,
    p: ModelPoint,
    budget: int = DEFAULT_SAMPLES,
    *,
    method: str = "auto",
    seed: int = 0,
    index: int = 0,
    target_stderr: float | None = None,
) -> TreeAmplitude:
    """Amplitude of one tree.

    ``method`` is ``"monte-carlo"``, ``"quadrature"`` (trees with at most 3
    edges) or ``"auto"``, which picks the closed form at infinite N,
    quadrature for trees with at most 2 edges and Monte Carlo otherwise.  A :class:`NumericWarning` is issued when
    ``target_stderr`` is not reached within ``budget`` samples.
    """
    _require_half_disk(p)
    if budget <= 0:
        raise DomainError("budget must be positive")
    zn = p.z**tree.n
    if p.N == math.inf:
        return TreeAmplitude(zn, 0.0, "closed-form-limit")
    if method == "quadrature" or (method == "auto" and tree.n <= 2):
        value, err = _tree_term_quadrature(tree, p)
        return TreeAmplitude(zn * value, abs(zn) * err, "quadrature")
    if method not in ("auto", "monte-carlo"):
        raise DomainError(f"unknown method {method!r}")
    rng = tree_rng(seed, tree, index)
    deg = np.array(tree.degrees, dtype=float)
    beta = rng.gamma(deg, size=(budget, tree.n + 1))
    w = rng.random((budget, tree.n))
    samples = np.exp(p.coupling * _quadratic_forms(tree, beta, w))
    mean = samples.mean()
    stderr = float(np.sqrt((np.abs(samples - mean) ** 2).sum() / (budget - 1) / budget)) if budget > 1 else math.inf
    if target_stderr is not None and abs(zn) * stderr > target_stderr:
        warnings.warn(
            NumericWarning(f"tree {tree.dyck_word()!r}: stderr {abs(zn) * stderr:.3g} above target {target_stderr:.3g}")
        )
    return TreeAmplitude(zn * mean, abs(zn) * stderr, "monte-carlo")


@lru_cache(maxsize=None)
def _gamma_rule(shape: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = special.roots_genlaguerre(order, shape - 1)
    return x, w / math.gamma(shape)


def _tree_term_quadrature(tree: RootedPlaneTree, p: ModelPoint, beta_order: int = 10, w_order: int = 8) -> tuple[complex, float]:
    check_size(tree.n, 3, "tree edges for quadrature")

    def run(bo: int, wo: int) -> complex:
        rules = [_gamma_rule(d, bo) for d in tree.degrees]
        grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
        beta = np.stack([g.ravel() for g in grids], axis=1)
        bw = np.prod(np.stack([g.ravel() for g in np.meshgrid(*[r[1] for r in rules], indexing="ij")], axis=1), axis=1)
        if tree.n == 0:
            return complex(np.dot(bw, np.exp(p.coupling * beta[:, 0] ** 2)))
        nodes, weights = sector_rule(tree.n, wo)
        X = forest_matrices_batch(tree.forest(), nodes)
        q = np.einsum("bi,sij,bj->sb", beta, X, beta)
        return complex(weights @ (np.exp(p.coupling * q) @ bw))

    hi = run(beta_order, w_order)
    lo = run(beta_order - 4, max(2, w_order // 2))
    return hi, abs(hi - lo)


@dataclass(frozen=True)
class PartialSum:
    value: complex
    stderr: float
    tail_bound: float
    per_order: tuple[complex, ...]
    terms: tuple[tuple[int, int, TreeAmplitude], ...]


def lve_partial_sum(
    p: ModelPoint,
    n_max: int,
    budget: int = DEFAULT_SAMPLES,
    *,
    seed: int = 0,
    method: str = "auto",
) -> PartialSum:
    """Sum of tree amplitudes over all plane trees with at most ``n_max`` edges.

    Trees are unlabeled, so no ``1/n!`` appears.  Accumulation runs in
    canonical tree order so results do not depend on scheduling.
    """
    _require_half_disk(p)
    if n_max < 0:
        raise DomainError("n_max must be non-negative")
    total = 0j
    var = 0.0
    per_order = []
    terms = []
    for n in range(n_max + 1):
        order_total = 0j
        for idx, tree in enumerate(enumerate_rooted_plane_trees(n)):
            amp = lve_tree_term(tree, p, budget, method=method, seed=seed, index=idx)
            order_total += amp.value
            var += amp.stderr**2
            terms.append((n, idx, amp))
        per_order.append(order_total)
        total += order_total
    return PartialSum(total, math.sqrt(var), catalan_tail_bound(p.z, n_max), tuple(per_order), tuple(terms))


# ----------------------------------------------------------------------------
# Oracles


def _check_stable(p: ModelPoint) -> float:
    z = p.z
    if z.imag != 0 or z.real > 0 or z.real <= -0.25:
        raise DomainError("oracle needs real z in (-1/4, 0]")
    if p.N == math.inf or p.N > 64:
        raise DomainError("oracle supports 1 <= N <= 64")
    return z.real


def _radial_moments(z: float, N: int, powers: Sequence[int]) -> list[float]:
    """``int rho^k rho^(N-1) e^{-rho + z rho^2 / 2N} / (N-1)!`` for each k."""
    mode = max(float(N - 1), 0.0)
    peak = (N - 1) * math.log(mode) - mode if mode > 0 else 0.0

    def density(r: float, k: int) -> float:
        if r <= 0:
            return 0.0 if N - 1 + k > 0 else math.exp(-peak)
        return math.exp((N - 1 + k) * math.log(r) - r + z * r * r / (2 * N) - peak)

    cut = mode + 40 * math.sqrt(N) + 60
    out = []
    for k in powers:
        a, e1 = integrate.quad(density, 0.0, cut, args=(k,), points=[mode] if mode > 0 else None, limit=400, epsabs=0, epsrel=1e-13)
        b, e2 = integrate.quad(density, cut, math.inf, args=(k,), limit=200, epsabs=0, epsrel=1e-12)
        if (e1 + e2) > 1e-11 * (a + b):
            raise NumericError("radial quadrature did not converge", achieved=(e1 + e2) / (a + b))
        out.append((a + b) * math.exp(peak - math.lgamma(N)))
    return out


def oracle_g2(p: ModelPoint) -> float:
    """``<phi.phi> / N`` from the radial integral of the partition function."""
    z = _check_stable(p)
    N = int(p.N)
    if z == 0:
        return 1.0
    z0, z1 = _radial_moments(z, N, [0, 1])
    return z1 / (N * z0)


def log_partition(z: float, N: int) -> float:
    """``log Z`` from the Gaussian intermediate-field integral over ``tau``."""
    if z == 0:
        return 0.0
    s = math.sqrt(-z)

    def f(t: float) -> float:
        return (math.sqrt(N / (2 * math.pi)) * math.exp(-N * t * t / 2) * (1 - 1j * s * t) ** (-N)).real

    width = 40 / math.sqrt(N)
    val, err = integrate.quad(f, -width, width, limit=400, epsabs=0, epsrel=1e-13)
    if err > 1e-12 * abs(val):
        raise NumericError("intermediate-field quadrature did not converge", achieved=err / abs(val))
    return math.log(val)


def g2_from_free_energy(p: ModelPoint) -> float:
    """``1 + 2z d/dz (1/N) log Z``; central differences plus one Richardson step."""
    z = _check_stable(p)
    N = int(p.N)
    if z == 0:
        return 1.0
    h = 1e-4 * abs(z)

    def d(step: float) -> float:
        return (log_partition(z + step, N) - log_partition(z - step, N)) / (2 * step)

    deriv = (4 * d(h) - d(2 * h)) / 3
    return 1 + 2 * z * deriv / N


def schwinger_dyson_residual(p: ModelPoint) -> float:
    return abs(oracle_g2(p) - g2_from_free_energy(p))


@lru_cache(maxsize=None)
def perturbative_coefficients(N: int, order: int) -> tuple[Fraction, ...]:
    """Exact Taylor coefficients of ``G2(z, N)`` up to ``z^order``.

    From ``Z = sum_k z^k E[rho^{2k}] / ((2N)^k k!)`` with
    ``E[rho^m] = (N)_m``, then ``G2 = 1 + (2z/N) d/dz log Z``.
    """
    K = order + 1
    zc = []
    for k in range(K + 1):
        moment = math.prod(range(N, N + 2 * k))
        zc.append(Fraction(moment, (2 * N) ** k * math.factorial(k)))
    # log Z coefficients by the power-series log recursion (zc[0] = 1)
    lc = [Fraction(0)] * (K + 1)
    for m in range(1, K + 1):
        acc = m * zc[m]
        for k in range(1, m):
            acc -= k * lc[k] * zc[m - k]
        lc[m] = acc / m
    g = [Fraction(1)] + [Fraction(2 * k, N) * lc[k] for k in range(1, order + 1)]
    return tuple(g)


def taylor_remainder(p: ModelPoint, order: int) -> float:
    """``G2(z) - sum_{k < order} g_k z^k`` with exact coefficients ``g_k``."""
    if not 0 <= order <= 12:
        raise DomainError("order must lie in [0, 12]")
    z = _check_stable(p)
    if z == 0:
        return 0.0
    coeffs = perturbative_coefficients(int(p.N), max(order, 1))
    partial = sum(float(c) * z**k for k, c in enumerate(coeffs[:order]))
    return oracle_g2(p) - partial


# ----------------------------------------------------------------------------
# Boundary values on the unstable side


@dataclass(frozen=True)
class MeanCut:
    mean: float
    cut: float
    mean_stderr: float
    cut_stderr: float


def _rotated_tree_value(tree: RootedPlaneTree, z: float, N: float, budget: int, rng: np.random.Generator) -> tuple[complex, float]:
    """``(sqrt 2)^(2n+1) E[e^{i theta}]`` for the contour-rotated tree integral.

    ``b_i ~ Gamma(d_i, scale sqrt 2)`` and
    ``theta = -(2n+1) pi/4 + sum b / sqrt 2 - (z/2N) b.X.b``.  The part
    without the quartic phase has exact value 1 and serves as a control
    variate, so only the correction is sampled.
    """
    if N == math.inf:
        return 1.0 + 0j, 0.0
    r2 = math.sqrt(2.0)
    deg = np.array(tree.degrees, dtype=float)
    b = rng.gamma(deg, r2, size=(budget, tree.n + 1))
    w = rng.random((budget, tree.n))
    theta0 = -(2 * tree.n + 1) * math.pi / 4 + b.sum(axis=1) / r2
    q = _quadratic_forms(tree, b, w)
    samples = r2 ** (2 * tree.n + 1) * np.exp(1j * theta0) * np.expm1(-1j * (z / (2 * N)) * q)
    mean = samples.mean()
    re = float(np.std(samples.real, ddof=1) / math.sqrt(budget))
    im = float(np.std(samples.imag, ddof=1) / math.sqrt(budget))
    return 1.0 + mean, math.hypot(re, im)


def _rotated_tree_quadrature(tree: RootedPlaneTree, z: float, N: float, b_order: int = 100, w_order: int = 16) -> complex:
    """Same quantity as the sampler, by Gauss-Laguerre in ``u = b / sqrt 2`` (trees with <= 1 edge)."""
    check_size(tree.n, 1, "tree edges for rotated quadrature")
    a = 2 * z / (2 * N)
    rules = [_gamma_rule(d, b_order) for d in tree.degrees]
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    u = np.stack([g.ravel() for g in grids], axis=1)
    uw = np.prod(np.stack([g.ravel() for g in np.meshgrid(*[r[1] for r in rules], indexing="ij")], axis=1), axis=1)
    phase = -(2 * tree.n + 1) * math.pi / 4 + u.sum(axis=1)
    pref = math.sqrt(2.0) ** (2 * tree.n + 1)
    if tree.n == 0:
        return complex(pref * np.dot(uw, np.exp(1j * (phase - a * u[:, 0] ** 2))))
    nodes, weights = sector_rule(tree.n, w_order)
    X = forest_matrices_batch(tree.forest(), nodes)
    q = np.einsum("bi,sij,bj->sb", u, X, u)
    return complex(pref * (weights @ (np.exp(1j * (phase[None, :] - a * q)) @ uw)))


def mean_cut_functions(z: float, N: float, n_max: int, budget: int = DEFAULT_SAMPLES, *, seed: int = 0) -> MeanCut:
    """Real and imaginary parts of the rotated tree sum at ``0 < z < 1/8``.

    Trees with at most one edge are integrated by quadrature, larger ones
    by Monte Carlo with the infinite-N integrand as control variate.
    """
    if not 0 < z < 0.125:
        raise DomainError("mean/cut functions need 0 < z < 1/8")
    if not 0 <= n_max <= 6:
        raise DomainError("n_max must lie in [0, 6]")
    ModelPoint(z, N)
    total = 0j
    var_re = var_im = 0.0
    for n in range(n_max + 1):
        for idx, tree in enumerate(enumerate_rooted_plane_trees(n)):
            if n <= 1 and N != math.inf:
                val, err = _rotated_tree_quadrature(tree, z, N), 0.0
            else:
                val, err = _rotated_tree_value(tree, z, N, budget, tree_rng(seed, tree, idx))
            total += z**n * val
            var_re += (z**n * err) ** 2
    s = math.sqrt(var_re)
    return MeanCut(total.real, total.imag, s, s)


def rotated_root_term(z: float, N: float) -> complex:
    """The bare-root term of the rotated sum by one-dimensional quadrature."""
    r2 = math.sqrt(2.0)
    a = z / (2 * N)

    def f(t: float, part: int) -> float:
        v = r2 * cmath.exp(1j * (-math.pi / 4 + t / r2 - a * t * t)) * math.exp(-t / r2) / r2
        return v.real if part == 0 else v.imag

    # e^{-t / sqrt 2} is below 1e-17 past t = 60
    re, _ = integrate.quad(f, 0, 60, args=(0,), limit=2000, epsabs=1e-15)
    im, _ = integrate.quad(f, 0, 60, args=(1,), limit=2000, epsabs=1e-15)
    return complex(re, im)
