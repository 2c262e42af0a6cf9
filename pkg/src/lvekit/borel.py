"""Borel summability checks: disk membership, Borel transforms, Laplace
resummation and Taylor-remainder growth fits."""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate

from .combinatorics import double_factorial
from .errors import DomainError, NumericError, SingularityError

MAX_D0_ORDERS = 30
HORIZON_EPS = 1e-14


@dataclass(frozen=True)
class PowerSeries:
    """Truncated series ``sum_k f_k lam^k``; ``exact`` keeps rational coefficients when known."""

    coefficients: tuple[complex, ...]
    exact: tuple[Fraction, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.coefficients)
        if not coeffs:
            raise DomainError("a power series needs at least one coefficient")
        if not all(cmath.isfinite(c) for c in coeffs):
            raise DomainError("series coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def __len__(self) -> int:
        return len(self.coefficients)

    def __call__(self, lam: complex, terms: int | None = None) -> complex:
        terms = len(self) if terms is None else terms
        return sum(c * lam**k for k, c in enumerate(self.coefficients[:terms]))


@dataclass(frozen=True)
class NevanlinnaDisk:
    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise DomainError("disk radius parameter must be positive")

    def __contains__(self, lam: complex) -> bool:
        return disk_contains(self.R, lam)


@dataclass(frozen=True)
class RemainderFit:
    K: float
    sigma: float
    residual: float
    n_range: tuple[int, int]


@dataclass(frozen=True)
class LaplaceResult:
    value: complex
    error: float
    horizon: float


def disk_contains(R: float, lam: complex) -> bool:
    """``Re(1/lam) > 1/R``: the open disk of diameter ``[0, R]`` on the real axis."""
    if not R > 0:
        raise DomainError("disk radius parameter must be positive")
    if lam == 0:
        return False
    return (1.0 / complex(lam)).real > 1.0 / R


def borel_transform(series: PowerSeries, t: complex, terms: int | None = None) -> complex:
    """Partial sum ``sum_{k < terms} f_k t^k / k!``."""
    terms = len(series) if terms is None else terms
    if terms > len(series) or terms < 1:
        raise DomainError(f"terms must lie in [1, {len(series)}]")
    total = 0j
    power = 1.0 + 0j
    for k in range(terms):
        total += series.coefficients[k] * power
        power *= t / (k + 1)
    return total


def borel_transform_exact(series: PowerSeries, t: Fraction, terms: int | None = None) -> Fraction:
    """Rational-arithmetic partial sum for series that carry exact coefficients."""
    if series.exact is None:
        raise DomainError("series has no exact coefficients")
    terms = len(series) if terms is None else terms
    return sum(c * t**k / math.factorial(k) for k, c in enumerate(series.exact[:terms]))


def estimate_borel_constant(
    B: Callable[[float], complex], R: float | None, t_max: float = 40.0, samples: int = 400
) -> float:
    """Empirical ``sup_t |B(t)| e^{-t/R}`` on a grid (``R=None`` means no growth)."""
    ts = np.linspace(0.0, t_max, samples)
    rate = 0.0 if R is None else 1.0 / R
    return float(max(abs(complex(B(float(t)))) * math.exp(-rate * t) for t in ts))


def laplace_resum(
    B: Callable[[float], complex],
    lam: complex,
    *,
    R: float | None = None,
    bound: float | None = None,
    tol: float = 1e-10,
) -> LaplaceResult:
    """``(1/lam) int_0^inf B(t) exp(-t/lam) dt`` along the positive axis.

    The integral is cut at the horizon where the envelope
    ``bound * exp(t/R - t Re(1/lam))`` has dropped below ``1e-14`` of the
    accumulated value; the neglected tail is added to the reported error.
    """
    lam = complex(lam)
    if lam == 0:
        raise SingularityError("lam = 0 has no Laplace transform")
    inv = 1.0 / lam
    rate = inv.real - (0.0 if R is None else 1.0 / R)
    if rate <= 0:
        raise DomainError("Re(1/lam) must exceed the growth rate 1/R of the Borel transform")
    if bound is None:
        bound = estimate_borel_constant(B, R, t_max=40.0 / rate)
    scale = max(bound, 1e-300)

    def piece(a: float, b: float) -> tuple[complex, float]:
        # the returned error estimate is what we act on, not quad's warning
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            return _quad_complex(a, b)

    def _quad_complex(a: float, b: float) -> tuple[complex, float]:
        re, e1 = integrate.quad(lambda t: (complex(B(t)) * cmath.exp(-t * inv)).real, a, b, limit=400, epsabs=tol * 1e-2, epsrel=1e-13)
        im, e2 = integrate.quad(lambda t: (complex(B(t)) * cmath.exp(-t * inv)).imag, a, b, limit=400, epsabs=tol * 1e-2, epsrel=1e-13)
        return complex(re, im), e1 + e2

    horizon = math.log(1.0 / HORIZON_EPS) / rate
    total, err = piece(0.0, horizon)
    for _ in range(60):
        tail = scale * math.exp(-rate * horizon) / rate
        if tail <= HORIZON_EPS * max(abs(total), 1e-300) or tail < 1e-300:
            break
        extra, e = piece(horizon, 2 * horizon)
        total += extra
        err += e
        horizon *= 2
    tail = scale * math.exp(-rate * horizon) / rate
    value = total * inv
    error = (err + tail) * abs(inv)
    if not error <= tol * max(1.0, abs(value)):
        raise NumericError(f"Laplace quadrature error {error:.3g} exceeds tol {tol:g}", achieved=error)
    return LaplaceResult(value, error, horizon)


def remainder_fit(samples: Iterable[tuple[int, complex, complex]], min_order: int = 2) -> RemainderFit:
    """Fit ``log|R_n| - log n! - n log|lam| = a + n b`` by least squares.

    Orders below ``min_order`` are dropped.  Returns ``K = e^a``,
    ``sigma = e^b`` and the RMS residual of the fit.
    """
    samples = list(samples)
    orders = {int(n) for n, _, _ in samples}
    if len(orders) < 3:
        raise NumericError("remainder fit needs at least three distinct orders")
    rows = []
    for n, lam, rem in samples:
        n = int(n)
        if n < min_order:
            continue
        if abs(rem) == 0 or lam == 0:
            raise DomainError("remainders and couplings must be nonzero")
        rows.append((n, math.log(abs(rem)) - math.lgamma(n + 1) - n * math.log(abs(lam))))
    if len({n for n, _ in rows}) < 2:
        raise NumericError("fewer than two distinct orders survive the order cut")
    ns = np.array([r[0] for r in rows], dtype=float)
    ys = np.array([r[1] for r in rows])
    A = np.stack([np.ones_like(ns), ns], axis=1)
    (a, b), *_ = np.linalg.lstsq(A, ys, rcond=None)
    resid = float(np.sqrt(np.mean((A @ np.array([a, b]) - ys) ** 2)))
    return RemainderFit(math.exp(a), math.exp(b), resid, (int(ns.min()), int(ns.max())))


def d0_coefficient(n: int) -> Fraction:
    """``(-1)^n (4n-1)!! / n!`` exactly."""
    return Fraction((-1) ** n * double_factorial(4 * n - 1), math.factorial(n))


def d0_phi4_series(orders: int) -> PowerSeries:
    """The zero-dimensional quartic series with ``orders`` coefficients (``n = 0..orders-1``)."""
    if not 1 <= orders <= MAX_D0_ORDERS + 1:
        raise DomainError(f"orders must lie in [1, {MAX_D0_ORDERS + 1}]")
    exact = tuple(d0_coefficient(n) for n in range(orders))
    return PowerSeries(tuple(float(c) for c in exact), exact)


def coefficient_ratios(series: PowerSeries) -> list[float]:
    """``|a_{n+1} / a_n| / n`` for ``n >= 1``; uses exact coefficients when present."""
    c: Sequence = series.exact if series.exact is not None else series.coefficients
    return [float(abs(Fraction(c[n + 1]) / Fraction(c[n])) / n) if series.exact is not None
            else abs(c[n + 1] / c[n]) / n for n in range(1, len(c) - 1)]
