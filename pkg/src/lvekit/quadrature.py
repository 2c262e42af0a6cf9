"""Quadrature rules on the unit cube split into ordering sectors.

Integrands built from forest matrices are piecewise smooth: an entry
``min(w_a, w_b, ...)`` has a kink wherever two parameters coincide.  Splitting
``[0, 1]^k`` into the ``k!`` cells ``w_{pi(1)} > ... > w_{pi(k)}`` and mapping
each cell from the unit cube restores smoothness, so a tensor Gauss-Legendre
rule converges spectrally inside every cell.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import NumericError


@lru_cache(maxsize=None)
def _gauss_legendre01(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def sector_rule(k: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``(P, k)`` and weights ``(P,)`` integrating over ``[0, 1]^k``.

    Within a cell the parameters are ``w_{pi(1)} = s_1``,
    ``w_{pi(2)} = s_1 s_2``, ..., with Jacobian ``prod_r s_r^(k - r)``.
    """
    if k == 0:
        return np.zeros((1, 0)), np.ones(1)
    x, w = _gauss_legendre01(order)
    grids = np.meshgrid(*([x] * k), indexing="ij")
    s = np.stack([g.ravel() for g in grids], axis=1)
    wgrids = np.meshgrid(*([w] * k), indexing="ij")
    ws = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    cum = np.cumprod(s, axis=1)
    jac = np.prod(s ** np.arange(k - 1, -1, -1), axis=1)
    base_w = ws * jac
    nodes, weights = [], []
    for perm in itertools.permutations(range(k)):
        cell = np.empty_like(cum)
        cell[:, list(perm)] = cum
        nodes.append(cell)
        weights.append(base_w)
    return np.concatenate(nodes), np.concatenate(weights)


def integrate_unit_cube(
    f: Callable[[np.ndarray], np.ndarray],
    k: int,
    tol: float = 1e-10,
    start_order: int = 4,
    max_order: int = 64,
) -> tuple[complex | float, float]:
    """Integrate a vectorised ``f`` over ``[0, 1]^k`` by order doubling.

    Returns ``(value, achieved)`` where ``achieved`` is the difference between
    the last two refinements.  Raises :class:`NumericError` if ``tol`` is not
    met by ``max_order``.
    """
    if k == 0:
        return f(np.zeros((1, 0)))[0], 0.0
    order = start_order
    nodes, weights = sector_rule(k, order)
    prev = np.dot(weights, f(nodes))
    err = math.inf
    while order * 2 <= max_order and math.factorial(k) * (order * 2) ** k <= 5_000_000:
        order *= 2
        nodes, weights = sector_rule(k, order)
        cur = np.dot(weights, f(nodes))
        err = abs(cur - prev)
        if err <= tol * max(1.0, abs(cur)):
            return cur, float(err)
        prev = cur
    raise NumericError(
        f"sector quadrature in dimension {k} stopped at order {order} "
        f"with difference {err:.3g} > tol {tol:g}",
        achieved=float(err),
    )
