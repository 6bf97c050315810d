"""Density evolution for the peeling decoder and closed-form calculators.

With M = c*K bins and left degree ell, a random edge of the defective-only
graph sees a singleton bin with probability rho1 = exp(-lambda) and a
doubleton with rho2 = lambda*exp(-lambda), lambda = ell/c, in the large-
system limit.  The per-iteration fraction of unresolved edge messages then
follows

    p_{j+1} = (1 - (rho1 + rho2*(1 - p_j)))**(ell - 1)

starting from p_0 = 1.  Zero is not a fixed point, so the recursion settles
at a positive floor; the optimizer searches (ell, c) for the cheapest c
whose floor is at or below a target.

Logarithm conventions: parameter formulas (degree choices) use natural log,
test counts use log2 of the slot range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .ecc import CodeSpec
from .graph import round_up_bins

DEFAULT_MAX_ITER = 10_000
DEFAULT_TOL = 1e-12


@dataclass(frozen=True)
class DEParams:
    left_degree: int
    bins_per_defective: float  # c, with M = c*K

    def __post_init__(self):
        if self.left_degree < 2:
            raise ValueError("left degree must be >= 2")
        if self.bins_per_defective <= 0:
            raise ValueError("bins per defective must be positive")

    @property
    def lam(self) -> float:
        return self.left_degree / self.bins_per_defective


@dataclass
class DEResult:
    fixed_point: float
    n_iterations: int
    converged: bool


def edge_dd_limit(left_degree: int, bins_per_defective: float) -> tuple[float, float]:
    """Limiting (rho1, rho2) edge degree-distribution coefficients."""
    lam = left_degree / bins_per_defective
    e = math.exp(-lam)
    return e, lam * e


def de_iterate(
    params: DEParams,
    p0: float = 1.0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> DEResult:
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    rho1, rho2 = edge_dd_limit(params.left_degree, params.bins_per_defective)
    expo = params.left_degree - 1
    p = p0
    for j in range(max_iter):
        p_next = (1.0 - (rho1 + rho2 * (1.0 - p))) ** expo
        if abs(p_next - p) < tol:
            return DEResult(p_next, j + 1, True)
        p = p_next
    return DEResult(p, max_iter, False)


def minimal_c(
    left_degree: int,
    epsilon: float,
    resolution: float = 0.01,
    c_max: float = 4096.0,
) -> float | None:
    """Smallest c on the resolution grid with a DE floor <= epsilon."""
    def floor_at(c: float) -> float:
        if c <= 0.0:
            return 1.0
        return de_iterate(DEParams(left_degree, c)).fixed_point

    hi = 1.0
    while floor_at(hi) > epsilon:
        hi *= 2.0
        if hi > c_max:
            return None
    lo = 0.0
    while hi - lo > resolution / 4.0:
        mid = 0.5 * (lo + hi)
        if floor_at(mid) <= epsilon:
            hi = mid
        else:
            lo = mid
    c = math.ceil(hi / resolution - 1e-9) * resolution
    while floor_at(c) > epsilon:
        c += resolution
    return round(c, 10)


def optimize_constants(
    epsilon: float,
    ell_range=range(2, 41),
    c_resolution: float = 0.01,
) -> tuple[int, float]:
    """(ell, c) minimizing c subject to DE floor <= epsilon; integer ell
    only, ties broken toward the smaller degree."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("target floor must be in (0, 1)")
    best: tuple[float, int] | None = None
    for ell in ell_range:
        c = minimal_c(ell, epsilon, c_resolution)
        if c is None:
            continue
        if best is None or (c, ell) < best:
            best = (c, ell)
    if best is None:
        raise ValueError("no degree in range reaches the target floor")
    return best[1], best[0]


def singleton_only_params(n_items: int, n_defective: float, alpha: float) -> tuple[int, int, int]:
    """Degree and bin choices for whole-set recovery via singletons only:
    c_a = e*(1+alpha), ell = ceil(c_a * ln K), r = ceil(N/K), bins rounded up
    to divisibility.  Degenerate K (ln K <= 0) clamps to ell = 1, M >= 1."""
    if n_defective < 1 or n_defective >= n_items:
        raise ValueError("need 1 <= K < N")
    c_alpha = math.e * (1.0 + alpha)
    ell = max(1, math.ceil(c_alpha * math.log(n_defective)))
    r = math.ceil(n_items / n_defective)
    m_target = max(1, math.ceil(n_items * ell / r))
    m_bins, r = round_up_bins(n_items, ell, m_target)
    return ell, r, m_bins


def test_count(
    kind: str,
    n_items: int,
    n_defective: int,
    left_degree: int | None = None,
    c: float | None = None,
    sections: int | None = None,
    code: CodeSpec | None = None,
    alpha: float | None = None,
) -> int:
    """Total tests for a scheme variant.

    approximate     2*s*M*ceil(log2 r), M = ceil(c*K) rounded to divisibility
    singleton-only  2*M*ceil(log2 r) with the singleton-only parameter rule
    robust          2*s*M*n_seg for the chosen code at ceil(log2 r) index bits
    """
    if kind == "approximate":
        if None in (left_degree, c, sections):
            raise ValueError("approximate needs left_degree, c, sections")
        m_bins, r = round_up_bins(n_items, left_degree, math.ceil(c * n_defective))
        return 2 * sections * m_bins * max(1, (r - 1).bit_length())
    if kind == "singleton-only":
        if alpha is None:
            raise ValueError("singleton-only needs alpha")
        _, r, m_bins = singleton_only_params(n_items, n_defective, alpha)
        return 2 * m_bins * max(1, (r - 1).bit_length())
    if kind == "robust":
        if None in (left_degree, c, sections, code):
            raise ValueError("robust needs left_degree, c, sections, code")
        m_bins, r = round_up_bins(n_items, left_degree, math.ceil(c * n_defective))
        n_msg = max(1, (r - 1).bit_length())
        return 2 * sections * m_bins * code.build(n_msg).n_seg
    raise ValueError(f"unknown scheme kind {kind!r}")
