"""Per-bin test patterns: binary index expansions, their complements, and
seeded permuted repeats, optionally passed through an error-correcting code.

A signature matrix has one column per bin slot.  Column j consists of
`sections` blocks; block i holds encode(bits of perm_i(j)) followed by its
bitwise complement, where perm_0 is the identity and the others are seeded
random permutations of the slot range.  Bit layout of a column (and of any
bin observation) is section-major, segment-major, most-significant bit
first; this order is the contract used by measurements and decoders.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ecc import IDENTITY, CodeSpec
from .prp import FeistelPermutation, mix64

# Permutations at or below this size are drawn by Fisher-Yates shuffle;
# larger ones switch to a seeded Feistel permutation so that building a
# signature stays O(1) even for slot ranges in the tens of millions.
FISHER_YATES_LIMIT = 1 << 20


@dataclass(frozen=True)
class SignatureParams:
    n_columns: int  # slots per bin the matrix can address
    sections: int = 1
    code: CodeSpec = field(default_factory=lambda: IDENTITY)
    seed: int = 0

    def __post_init__(self):
        if self.n_columns < 2:
            raise ValueError("need at least two columns")
        if self.sections < 1:
            raise ValueError("need at least one section")


class _IdentitySectionPerm:
    def forward(self, j):
        return j

    def inverse(self, j):
        return j

    def forward_array(self, js):
        return np.asarray(js, dtype=np.int64)

    inverse_array = forward_array


class _TableSectionPerm:
    def __init__(self, rng: np.random.Generator, size: int):
        self.table = rng.permutation(size).astype(np.int64)
        self.inv = np.empty_like(self.table)
        self.inv[self.table] = np.arange(size, dtype=np.int64)

    def forward(self, j):
        return int(self.table[j])

    def inverse(self, j):
        return int(self.inv[j])

    def forward_array(self, js):
        return self.table[np.asarray(js, dtype=np.int64)]

    def inverse_array(self, js):
        return self.inv[np.asarray(js, dtype=np.int64)]


class SignatureMatrix:
    """Immutable after construction; all queries are reentrant."""

    def __init__(self, params: SignatureParams):
        self.params = params
        r = params.n_columns
        self.n_columns = r
        self.sections = params.sections
        self.n_msg = max(1, (r - 1).bit_length())  # ceil(log2 r)
        self.code = params.code.build(self.n_msg)
        self.code_is_identity = params.code.is_identity
        self.n_seg = self.code.n_seg
        self.h = 2 * self.sections * self.n_seg
        self._pow2 = (1 << np.arange(self.n_msg - 1, -1, -1)).astype(np.int64)
        self._perms: list[object] = [_IdentitySectionPerm()]
        for i in range(1, self.sections):
            seed_i = mix64(params.seed, 0x51C, i)
            if r <= FISHER_YATES_LIMIT:
                self._perms.append(_TableSectionPerm(np.random.default_rng(seed_i), r))
            else:
                self._perms.append(FeistelPermutation(r, seed_i))

    # --- permutations ---------------------------------------------------------

    def perm(self, section: int, j: int) -> int:
        return self._perms[section].forward(j)

    def perm_inv(self, section: int, value: int) -> int:
        return self._perms[section].inverse(value)

    def perm_array(self, section: int, js) -> np.ndarray:
        return self._perms[section].forward_array(js)

    def perm_inv_array(self, section: int, values) -> np.ndarray:
        return self._perms[section].inverse_array(values)

    # --- columns --------------------------------------------------------------

    def index_bits(self, value: int) -> np.ndarray:
        """Big-endian binary expansion on n_msg bits (0-based indices)."""
        return ((value >> np.arange(self.n_msg - 1, -1, -1)) & 1).astype(np.uint8)

    def index_bits_array(self, values) -> np.ndarray:
        vals = np.asarray(values, dtype=np.int64)
        shifts = np.arange(self.n_msg - 1, -1, -1, dtype=np.int64)
        return ((vals[:, None] >> shifts) & 1).astype(np.uint8)

    def column(self, j: int) -> np.ndarray:
        if not 0 <= j < self.n_columns:
            raise ValueError(f"column {j} outside [0, {self.n_columns})")
        out = np.empty(self.h, dtype=np.uint8)
        n = self.n_seg
        for i in range(self.sections):
            seg = self.code.encode(self.index_bits(self.perm(i, j)))
            off = 2 * i * n
            out[off : off + n] = seg
            out[off + n : off + 2 * n] = 1 - seg
        return out

    def columns(self, js) -> np.ndarray:
        """Stack of columns for an array of slot indices, shape (len, h)."""
        js = np.asarray(js, dtype=np.int64)
        if js.size and (js.min() < 0 or js.max() >= self.n_columns):
            raise ValueError("column index out of range")
        out = np.empty((len(js), self.h), dtype=np.uint8)
        n = self.n_seg
        for i in range(self.sections):
            pj = self.perm_array(i, js)
            bits = self.index_bits_array(pj)
            if not self.code_is_identity:
                enc = np.empty((len(js), n), dtype=np.uint8)
                for k in range(len(js)):
                    enc[k] = self.code.encode(bits[k])
                bits = enc
            off = 2 * i * n
            out[:, off : off + n] = bits
            out[:, off + n : off + 2 * n] = 1 - bits
        return out

    # --- decoding -------------------------------------------------------------

    def decode_index(self, section: int, segment_bits) -> int | None:
        """Slot index (in section-permuted coordinates) encoded by a first
        segment, or None when the code rejects the word or the value is
        outside the column range.  Callers apply perm_inv themselves."""
        bits = np.asarray(segment_bits, dtype=np.uint8)
        if bits.shape != (self.n_seg,):
            raise ValueError(f"segment must be {self.n_seg} bits")
        msg = self.code.decode(bits)
        if msg is None:
            return None
        value = int(msg @ self._pow2)
        if value >= self.n_columns:
            return None
        return value

    def first_segment(self, obs: np.ndarray, section: int) -> np.ndarray:
        off = 2 * section * self.n_seg
        return obs[off : off + self.n_seg]

    def second_segment(self, obs: np.ndarray, section: int) -> np.ndarray:
        off = (2 * section + 1) * self.n_seg
        return obs[off : off + self.n_seg]


def build(params: SignatureParams) -> SignatureMatrix:
    return SignatureMatrix(params)
