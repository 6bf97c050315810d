"""Testing schemes and boolean-OR measurement generation.

A scheme pairs a pooling graph with a signature matrix.  Measuring a
defective set ORs the signature columns of every slot the defectives occupy,
bin by bin, in time O(K*ell*h + M*h) with no dependence on the item count
beyond index arithmetic.  Optional test noise flips each measurement bit
independently with probability q.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .signature import SignatureMatrix

# Dense matrices are a debugging/verification aid only.
DENSE_GUARD_BITS = 1 << 26

GTSF_MAGIC = b"GTSF"
GTSF_VERSION = 1
_HEADER = struct.Struct("<4sHQIIQ")  # magic, version, N, M, h, seed


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "none"  # "none" | "bsc"
    q: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "bsc"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "bsc" and not 0.0 < self.q < 0.5:
            raise ValueError("flip probability must be in (0, 1/2)")


NOISELESS = NoiseModel()


@dataclass
class Measurements:
    """One h-bit observation per bin, rows in bin order, bits unpacked."""

    data: np.ndarray  # (n_bins, h) uint8
    n_items: int
    seed: int = 0

    @property
    def n_bins(self) -> int:
        return self.data.shape[0]

    @property
    def h(self) -> int:
        return self.data.shape[1]


@dataclass
class TestingScheme:
    graph: object
    sig: SignatureMatrix

    def __post_init__(self):
        r = self.graph.right_degree
        if r is not None:
            if self.sig.n_columns != r:
                raise ValueError(
                    f"signature has {self.sig.n_columns} columns but bins hold {r} slots"
                )
        elif self.sig.n_columns < self.graph.max_bin_degree:
            raise ValueError("signature too narrow for the largest realized bin")

    @property
    def n_tests(self) -> int:
        return self.graph.n_bins * self.sig.h


def measure(scheme: TestingScheme, defectives, noise: NoiseModel = NOISELESS) -> Measurements:
    graph, sig = scheme.graph, scheme.sig
    defectives = np.asarray(list(defectives), dtype=np.int64)
    if defectives.size and (defectives.min() < 0 or defectives.max() >= graph.n_items):
        raise ValueError("defective item out of range")
    obs = np.zeros((graph.n_bins, sig.h), dtype=np.uint8)
    if defectives.size:
        bins, slots = graph.edges_of_items(defectives)
        cols = sig.columns(slots)
        np.bitwise_or.at(obs, bins, cols)
    if noise.kind == "bsc":
        rng = np.random.default_rng(noise.seed)
        obs ^= (rng.random(obs.shape) < noise.q).astype(np.uint8)
    return Measurements(obs, n_items=graph.n_items, seed=noise.seed)


def assemble_dense(scheme: TestingScheme) -> np.ndarray:
    """The full m x N test matrix: bin b contributes rows [b*h, (b+1)*h) with
    the signature column of each slot placed at the column of the item
    holding that slot.  Guarded; only sensible for small schemes."""
    graph, sig = scheme.graph, scheme.sig
    m = scheme.n_tests
    if m * graph.n_items > DENSE_GUARD_BITS:
        raise ValueError("dense matrix would exceed the size guard")
    a = np.zeros((m, graph.n_items), dtype=np.uint8)
    h = sig.h
    for b in range(graph.n_bins):
        degree = graph.right_degree
        if degree is None:
            degree = int(scheme.graph.bin_degrees[b])
        for slot in range(degree):
            item = graph.edge_to_item(b, slot)
            a[b * h : (b + 1) * h, item] |= sig.column(slot)
    return a


def measure_dense(dense: np.ndarray, support) -> np.ndarray:
    """Reference boolean measurement y = A (.) x on a dense matrix."""
    x = np.zeros(dense.shape[1], dtype=np.uint8)
    x[list(support)] = 1
    return (dense @ x > 0).astype(np.uint8)


def write_measurements(meas: Measurements, path_or_file) -> None:
    """Binary container: little-endian header, then one row per bin packed
    most-significant bit first into ceil(h/8) bytes."""
    header = _HEADER.pack(
        GTSF_MAGIC, GTSF_VERSION, meas.n_items, meas.n_bins, meas.h, meas.seed
    )
    packed = np.packbits(meas.data, axis=1)
    if hasattr(path_or_file, "write"):
        path_or_file.write(header)
        path_or_file.write(packed.tobytes())
    else:
        with open(path_or_file, "wb") as fh:
            fh.write(header)
            fh.write(packed.tobytes())


def read_measurements(path_or_file) -> Measurements:
    if hasattr(path_or_file, "read"):
        raw = path_or_file.read()
    else:
        with open(path_or_file, "rb") as fh:
            raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError("truncated measurements file")
    magic, version, n_items, n_bins, h, seed = _HEADER.unpack_from(raw)
    if magic != GTSF_MAGIC:
        raise ValueError("not a measurements file (bad magic)")
    if version != GTSF_VERSION:
        raise ValueError(f"unsupported container version {version}")
    row_bytes = (h + 7) // 8
    body = raw[_HEADER.size :]
    if len(body) != n_bins * row_bytes:
        raise ValueError("measurements body has the wrong length")
    packed = np.frombuffer(body, dtype=np.uint8).reshape(n_bins, row_bytes)
    data = np.unpackbits(packed, axis=1)[:, :h]
    return Measurements(np.ascontiguousarray(data), n_items=n_items, seed=seed)


def to_bytes(meas: Measurements) -> bytes:
    buf = io.BytesIO()
    write_measurements(meas, buf)
    return buf.getvalue()
