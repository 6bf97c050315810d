"""Bin decoding and the iterative peeling decoder.

Bin classification looks at one h-bit observation.  With the identity code
(noiseless operation) a singleton must have exactly complementary segments
in every section, every first segment must decode to an in-range slot, and
the permutation-corrected slots must agree across sections.  With a real
code (robust operation) the complement precheck is skipped and each first
segment goes through the code's decoder instead; cross-section consistency
is the only acceptance rule, exactly as in the noiseless case.

Peeling: classify all bins, seed a FIFO work queue with the items behind
singleton verdicts, then repeatedly take an identified item and try to
resolve each of its bins as a doubleton with that item's slot known.  Items
are deduplicated, so every item is processed at most once and termination
needs no extra bookkeeping; an optional pop cap guards pathological runs.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .encoder import Measurements, TestingScheme
from .signature import SignatureMatrix


class BinKind(Enum):
    ZEROTON = 0
    SINGLETON = 1
    UNRESOLVED = 2


@dataclass(frozen=True)
class BinVerdict:
    kind: BinKind
    slot: int | None = None
    item: int | None = None


ZEROTON = BinVerdict(BinKind.ZEROTON)
UNRESOLVED = BinVerdict(BinKind.UNRESOLVED)


@dataclass
class DecodeResult:
    recovered: set[int] = field(default_factory=set)
    n_bin_decodes: int = 0
    n_iterations: int = 0
    initial_singletons: int = 0
    peeled: int = 0
    n_pops: int = 0
    pop_cap_hit: bool = False


def decode_singleton(sig: SignatureMatrix, obs) -> BinVerdict:
    obs = np.asarray(obs, dtype=np.uint8)
    if obs.shape != (sig.h,):
        raise ValueError(f"observation must be {sig.h} bits")
    if not obs.any():
        return ZEROTON
    view = obs.reshape(sig.sections, 2, sig.n_seg)
    if sig.code_is_identity:
        if np.any((view[:, 0, :] ^ view[:, 1, :]) != 1):
            return UNRESOLVED
    slot = None
    for i in range(sig.sections):
        value = sig.decode_index(i, view[i, 0, :])
        if value is None:
            return UNRESOLVED
        j = sig.perm_inv(i, value)
        if slot is None:
            slot = j
        elif j != slot:
            return UNRESOLVED
    return BinVerdict(BinKind.SINGLETON, slot=slot)


def strip_known(sig: SignatureMatrix, obs, known_slot: int) -> np.ndarray:
    """Candidate first segments (sections x n_seg) of the remaining column
    once `known_slot`'s contribution is peeled out of an OR observation.

    Where the known column's first segment has a 0, the observation's first
    segment carries the other column's bit; where it has a 1, the known
    column's second segment has a 0 there, so the complement of the
    observation's second-segment bit carries it instead.  Under test noise
    the output is the other column's segment XOR a per-bit selection of the
    noise, still Bernoulli(q) per bit.
    """
    obs = np.asarray(obs, dtype=np.uint8)
    if obs.shape != (sig.h,):
        raise ValueError(f"observation must be {sig.h} bits")
    view = obs.reshape(sig.sections, 2, sig.n_seg)
    known = sig.column(known_slot).reshape(sig.sections, 2, sig.n_seg)
    return np.where(known[:, 0, :] == 0, view[:, 0, :], 1 - view[:, 1, :]).astype(np.uint8)


def decode_resolvable_doubleton(
    sig: SignatureMatrix, obs, known_slot: int, verify_reencode: bool = True
) -> int | None:
    """Slot of the second column in a two-column OR when one slot is known,
    or None.  Returns known_slot itself when the bin holds only that column.

    verify_reencode (identity code only) additionally requires that the two
    columns OR back to the observation exactly; this is strictly stronger
    than cross-section consistency and suppresses false accepts on bins that
    actually hold three or more columns.  Disable it to measure the bare
    consistency-rule behavior.
    """
    obs = np.asarray(obs, dtype=np.uint8)
    segments = strip_known(sig, obs, known_slot)
    slot = None
    for i in range(sig.sections):
        value = sig.decode_index(i, segments[i])
        if value is None:
            return None
        j = sig.perm_inv(i, value)
        if slot is None:
            slot = j
        elif j != slot:
            return None
    if verify_reencode and sig.code_is_identity:
        rebuilt = sig.column(known_slot) | sig.column(slot)
        if not np.array_equal(rebuilt, obs):
            return None
    return slot


# kind codes used by the batched classifier
_KIND_ZEROTON, _KIND_SINGLETON, _KIND_UNRESOLVED = 0, 1, 2


def classify_bins(sig: SignatureMatrix, data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vector of (kind code, slot) for every bin row in `data`; semantics
    identical to decode_singleton row by row."""
    data = np.asarray(data, dtype=np.uint8)
    n_bins = data.shape[0]
    if data.shape[1] != sig.h:
        raise ValueError(f"observations must be {sig.h} bits wide")
    if not sig.code_is_identity:
        kinds = np.empty(n_bins, dtype=np.int8)
        slots = np.full(n_bins, -1, dtype=np.int64)
        for b in range(n_bins):
            verdict = decode_singleton(sig, data[b])
            kinds[b] = verdict.kind.value
            if verdict.kind is BinKind.SINGLETON:
                slots[b] = verdict.slot
        return kinds, slots
    view = data.reshape(n_bins, sig.sections, 2, sig.n_seg)
    nonzero = data.any(axis=1)
    complement_ok = ((view[:, :, 0, :] ^ view[:, :, 1, :]) == 1).all(axis=(1, 2))
    values = view[:, :, 0, :] @ sig._pow2  # (n_bins, sections)
    candidate = nonzero & complement_ok & (values < sig.n_columns).all(axis=1)
    slots = np.full(n_bins, -1, dtype=np.int64)
    rows = np.flatnonzero(candidate)
    if rows.size:
        js = np.empty((len(rows), sig.sections), dtype=np.int64)
        for i in range(sig.sections):
            js[:, i] = sig.perm_inv_array(i, values[rows, i])
        agree = (js == js[:, :1]).all(axis=1)
        ok_rows = rows[agree]
        slots[ok_rows] = js[agree, 0]
    kinds = np.where(
        ~nonzero, _KIND_ZEROTON, np.where(slots >= 0, _KIND_SINGLETON, _KIND_UNRESOLVED)
    ).astype(np.int8)
    return kinds, slots


def peel(
    scheme: TestingScheme,
    measurements: Measurements,
    verify_reencode: bool = True,
    max_pops: int | None = None,
) -> DecodeResult:
    """Full iterative decode: singletons first, then doubleton resolution
    radiating from every identified item.  Deterministic given its inputs;
    doubleton attempts are memoized per (bin, known slot)."""
    graph, sig = scheme.graph, scheme.sig
    data = measurements.data
    if data.shape != (graph.n_bins, sig.h):
        raise ValueError("measurements do not match the scheme")
    result = DecodeResult()
    found: set[int] = set()
    queue: deque[int] = deque()

    kinds, slots = classify_bins(sig, data)
    result.n_bin_decodes += data.shape[0]
    for b in np.flatnonzero(kinds == _KIND_SINGLETON):
        item = graph.edge_to_item(int(b), int(slots[b]))
        if item not in found:
            found.add(item)
            queue.append(item)
    result.initial_singletons = len(found)

    attempted: dict[tuple[int, int], int | None] = {}
    while queue:
        if max_pops is not None and result.n_pops >= max_pops:
            result.pop_cap_hit = True
            break
        item = queue.popleft()
        result.n_pops += 1
        for b, slot in graph.item_to_edges(item):
            key = (b, slot)
            if key in attempted:
                continue
            result.n_bin_decodes += 1
            other = decode_resolvable_doubleton(sig, data[b], slot, verify_reencode)
            attempted[key] = other
            if other is None or other == slot:
                continue
            new_item = graph.edge_to_item(b, other)
            if new_item not in found:
                found.add(new_item)
                queue.append(new_item)
                result.peeled += 1
    result.n_iterations = result.n_pops
    result.recovered = found
    return result


def singleton_only_decode(scheme: TestingScheme, measurements: Measurements) -> DecodeResult:
    """Non-iterative variant: only items behind singleton bins are recovered."""
    graph, sig = scheme.graph, scheme.sig
    data = measurements.data
    if data.shape != (graph.n_bins, sig.h):
        raise ValueError("measurements do not match the scheme")
    result = DecodeResult()
    kinds, slots = classify_bins(sig, data)
    result.n_bin_decodes = data.shape[0]
    for b in np.flatnonzero(kinds == _KIND_SINGLETON):
        result.recovered.add(graph.edge_to_item(int(b), int(slots[b])))
    result.initial_singletons = len(result.recovered)
    return result
