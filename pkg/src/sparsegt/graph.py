"""Bipartite pooling graphs with bidirectional item <-> (bin, slot) queries.

Two ensembles: the left-and-right-regular one, where the N*ell item edge
stubs are matched to the M*r bin slots by a permutation, and a left-regular
baseline where each item draws ell bins uniformly with replacement.  Regular
graphs come in two backends: an explicit materialized permutation (fast for
moderate sizes) and a Feistel-based pseudorandom permutation whose build and
point queries are O(1), usable at item counts like 2**32.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .prp import FeistelPermutation, mix64

# Above this many edges the "auto" backend switches to the lazy permutation.
EXPLICIT_EDGE_LIMIT = 1 << 22


@dataclass(frozen=True)
class GraphParams:
    n_items: int
    n_bins: int
    left_degree: int
    right_degree: int
    seed: int = 0

    def __post_init__(self):
        if self.n_items < 1 or self.n_bins < 1:
            raise ValueError("need at least one item and one bin")
        if self.left_degree < 1:
            raise ValueError("left degree must be >= 1")
        if self.right_degree < 2:
            raise ValueError("right degree must be >= 2")
        if self.n_items * self.left_degree != self.n_bins * self.right_degree:
            raise ValueError(
                f"edge counts disagree: {self.n_items}*{self.left_degree} != "
                f"{self.n_bins}*{self.right_degree}"
            )

    @property
    def n_edges(self) -> int:
        return self.n_items * self.left_degree


class _ExplicitPermutation:
    backend = "explicit-permutation"

    def __init__(self, perm: np.ndarray):
        self.perm = perm
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm), dtype=perm.dtype)
        self.inv = inv

    def forward(self, x: int) -> int:
        return int(self.perm[x])

    def inverse(self, y: int) -> int:
        return int(self.inv[y])

    def forward_array(self, xs) -> np.ndarray:
        return self.perm[np.asarray(xs, dtype=np.int64)]

    def inverse_array(self, ys) -> np.ndarray:
        return self.inv[np.asarray(ys, dtype=np.int64)]


class RegularGraph:
    """Left-and-right-regular graph; every item has exactly left_degree edges
    and every bin exactly right_degree slots.  Edge (item v, copy j) lands on
    global slot perm(v*ell + j); bin = slot // r, slot-in-bin = slot % r.
    Immutable and shareable; parallel edges (one item twice in a bin) are
    allowed by the ensemble and preserved."""

    def __init__(self, params: GraphParams, permutation):
        self.params = params
        self._perm = permutation

    @property
    def backend(self) -> str:
        return self._perm.backend

    @property
    def n_items(self) -> int:
        return self.params.n_items

    @property
    def n_bins(self) -> int:
        return self.params.n_bins

    @property
    def left_degree(self) -> int:
        return self.params.left_degree

    @property
    def right_degree(self) -> int:
        return self.params.right_degree

    def item_to_edges(self, item: int) -> list[tuple[int, int]]:
        if not 0 <= item < self.n_items:
            raise ValueError(f"item {item} outside [0, {self.n_items})")
        ell, r = self.left_degree, self.right_degree
        base = item * ell
        out = []
        for j in range(ell):
            slot = self._perm.forward(base + j)
            out.append((slot // r, slot % r))
        return out

    def edge_to_item(self, bin_index: int, slot: int) -> int:
        if not 0 <= bin_index < self.n_bins:
            raise ValueError(f"bin {bin_index} outside [0, {self.n_bins})")
        if not 0 <= slot < self.right_degree:
            raise ValueError(f"slot {slot} outside [0, {self.right_degree})")
        edge = self._perm.inverse(bin_index * self.right_degree + slot)
        return edge // self.left_degree

    def edges_of_items(self, items) -> tuple[np.ndarray, np.ndarray]:
        """(bins, slots) for all edges of `items`, item-major then copy order."""
        items = np.asarray(items, dtype=np.int64)
        ell, r = self.left_degree, self.right_degree
        stubs = (items[:, None] * ell + np.arange(ell, dtype=np.int64)).reshape(-1)
        slots = self._perm.forward_array(stubs)
        return slots // r, slots % r

    def items_of_edges(self, bins, slots) -> np.ndarray:
        g = np.asarray(bins, dtype=np.int64) * self.right_degree + np.asarray(slots, dtype=np.int64)
        return self._perm.inverse_array(g) // self.left_degree


class LeftRegularGraph:
    """Baseline ensemble: each item draws left_degree bins uniformly with
    replacement; a bin's slots are ordered by edge arrival (flat edge index)."""

    backend = "left-regular-baseline"

    def __init__(self, n_items: int, n_bins: int, left_degree: int, seed: int = 0):
        if n_items < 1 or n_bins < 1 or left_degree < 1:
            raise ValueError("need positive item count, bin count and degree")
        if left_degree > n_bins:
            raise ValueError("left degree cannot exceed the number of bins")
        n_edges = n_items * left_degree
        if n_edges > EXPLICIT_EDGE_LIMIT:
            raise ValueError("baseline graph too large to materialize")
        self.n_items = n_items
        self.n_bins = n_bins
        self.left_degree = left_degree
        self.seed = seed
        rng = np.random.default_rng(seed)
        bins = rng.integers(0, n_bins, size=n_edges, dtype=np.int64)
        order = np.argsort(bins, kind="stable")
        counts = np.bincount(bins, minlength=n_bins)
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        slots = np.empty(n_edges, dtype=np.int64)
        slots[order] = np.arange(n_edges, dtype=np.int64) - np.repeat(starts, counts)
        self._bins = bins
        self._slots = slots
        self._order = order
        self._starts = starts
        self.bin_degrees = counts

    @property
    def right_degree(self) -> None:
        return None  # irregular

    @property
    def max_bin_degree(self) -> int:
        return int(self.bin_degrees.max())

    def item_to_edges(self, item: int) -> list[tuple[int, int]]:
        if not 0 <= item < self.n_items:
            raise ValueError(f"item {item} outside [0, {self.n_items})")
        ell = self.left_degree
        base = item * ell
        return [
            (int(self._bins[base + j]), int(self._slots[base + j])) for j in range(ell)
        ]

    def edge_to_item(self, bin_index: int, slot: int) -> int:
        if not 0 <= bin_index < self.n_bins:
            raise ValueError(f"bin {bin_index} outside [0, {self.n_bins})")
        if not 0 <= slot < self.bin_degrees[bin_index]:
            raise ValueError(f"bin {bin_index} has no slot {slot}")
        edge = self._order[self._starts[bin_index] + slot]
        return int(edge) // self.left_degree

    def edges_of_items(self, items) -> tuple[np.ndarray, np.ndarray]:
        items = np.asarray(items, dtype=np.int64)
        ell = self.left_degree
        stubs = (items[:, None] * ell + np.arange(ell, dtype=np.int64)).reshape(-1)
        return self._bins[stubs], self._slots[stubs]


def sample_regular(params: GraphParams, backend: str = "auto") -> RegularGraph:
    """Draw a regular graph: a seeded uniform permutation pairs edge stubs
    with bin slots.  backend "explicit" materializes it, "feistel" evaluates
    it lazily, "auto" picks by size."""
    if backend == "auto":
        backend = "explicit" if params.n_edges <= EXPLICIT_EDGE_LIMIT else "feistel"
    if backend == "explicit":
        if params.n_edges > EXPLICIT_EDGE_LIMIT:
            raise ValueError(
                f"{params.n_edges} edges is too large for the explicit backend; "
                "use backend='feistel'"
            )
        rng = np.random.default_rng(params.seed)
        perm = rng.permutation(params.n_edges).astype(np.int64)
        return RegularGraph(params, _ExplicitPermutation(perm))
    if backend == "feistel":
        prp = FeistelPermutation(params.n_edges, mix64(params.seed, 0xF15))
        return RegularGraph(params, prp)
    raise ValueError(f"unknown backend {backend!r}")


def graph_from_permutation(params: GraphParams, perm) -> RegularGraph:
    """Regular graph with an explicitly supplied stub->slot permutation."""
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (params.n_edges,):
        raise ValueError(f"permutation must have {params.n_edges} entries")
    check = np.zeros(params.n_edges, dtype=bool)
    check[perm] = True
    if not check.all():
        raise ValueError("not a permutation of the edge set")
    return RegularGraph(params, _ExplicitPermutation(perm))


def sample_left_regular(
    n_items: int, n_bins: int, left_degree: int, seed: int = 0
) -> LeftRegularGraph:
    return LeftRegularGraph(n_items, n_bins, left_degree, seed)


@dataclass
class PrunedGraph:
    """The parent graph restricted to the defective items: every slot they
    occupy, grouped by bin.  Bins they do not touch are implicit zerotons.
    Costs O(K * ell) regardless of the item count."""

    graph: object
    defectives: np.ndarray
    bins: np.ndarray
    slots: np.ndarray
    items: np.ndarray

    @property
    def total_edges(self) -> int:
        return len(self.bins)

    def occupancy(self) -> dict[int, list[tuple[int, int]]]:
        out: dict[int, list[tuple[int, int]]] = {}
        for b, s, v in zip(self.bins, self.slots, self.items):
            out.setdefault(int(b), []).append((int(s), int(v)))
        return out

    def touched_bins(self) -> np.ndarray:
        return np.unique(self.bins)


def prune(graph, defectives) -> PrunedGraph:
    defectives = np.asarray(sorted(int(v) for v in defectives), dtype=np.int64)
    if len(defectives):
        if defectives[0] < 0 or defectives[-1] >= graph.n_items:
            raise ValueError("defective item out of range")
        if len(np.unique(defectives)) != len(defectives):
            raise ValueError("duplicate defective items")
    if len(defectives) == 0:
        empty = np.empty(0, dtype=np.int64)
        return PrunedGraph(graph, defectives, empty, empty.copy(), empty.copy())
    bins, slots = graph.edges_of_items(defectives)
    items = np.repeat(defectives, graph.left_degree)
    return PrunedGraph(graph, defectives, bins, slots, items)


def empirical_right_dd(pruned: PrunedGraph, n_bins: int | None = None) -> np.ndarray:
    """Normalized histogram of bin degrees 0..r in the pruned graph, with
    untouched bins counted at degree 0.  Parallel edges count separately."""
    r = pruned.graph.right_degree
    if r is None:
        raise ValueError("degree histogram needs a regular parent graph")
    if n_bins is None:
        n_bins = pruned.graph.n_bins
    degrees = np.bincount(pruned.bins, minlength=0)
    degrees = degrees[degrees > 0] if len(degrees) else degrees
    hist = np.bincount(degrees, minlength=r + 1).astype(np.float64)
    hist[0] += n_bins - len(degrees)
    return hist / n_bins


def round_up_bins(n_items: int, left_degree: int, m_target: int) -> tuple[int, int]:
    """Smallest bin count M >= m_target with M | n_items*left_degree and
    resulting right degree r >= 2; returns (M, r)."""
    n_edges = n_items * left_degree
    m = max(1, int(m_target))
    while m <= n_edges // 2:
        if n_edges % m == 0:
            return m, n_edges // m
        m += 1
    raise ValueError(
        f"no bin count in [{m_target}, {n_edges // 2}] divides {n_edges} edges"
    )
