"""Binary error-correcting codes pluggable into signature construction.

Every code maps `n_msg` message bits to `n_seg` codeword bits (encode) and
back (decode), where decode returns None on detected failure.  Bit vectors
are numpy uint8 arrays.  Reed-Solomon works over GF(2^m) with bounded-
distance decoding; messages shorter than the code's natural capacity are
left-padded with zero bits, and the decoder rejects nonzero pad bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

# Standard primitive polynomials with x primitive; degree 7 is x^7 + x^3 + 1.
PRIMITIVE_POLY = {
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10001001,
    8: 0b100011101,
    9: 0b1000010001,
    10: 0b10000001001,
    11: 0b100000000101,
    12: 0b1000001010011,
}


def _as_bits(bits, length: int, what: str) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1 or arr.shape[0] != length:
        raise ValueError(f"{what} must be {length} bits, got shape {arr.shape}")
    return arr


class GF2m:
    """GF(2^m) arithmetic through exp/log tables, generator alpha = x."""

    def __init__(self, m: int):
        if m not in PRIMITIVE_POLY:
            raise ValueError(f"unsupported field GF(2^{m})")
        self.m = m
        self.order = 1 << m
        self.charac = self.order - 1
        exp = np.zeros(2 * self.charac, dtype=np.int64)
        log = np.zeros(self.order, dtype=np.int64)
        x = 1
        for i in range(self.charac):
            exp[i] = x
            log[x] = i
            x <<= 1
            if x & self.order:
                x ^= PRIMITIVE_POLY[m]
        exp[self.charac:] = exp[: self.charac]
        self.exp = exp
        self.log = log

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return int(self.exp[self.log[a] + self.log[b]])

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("inverse of 0 in GF(2^m)")
        return int(self.exp[self.charac - self.log[a]])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow_alpha(self, e: int) -> int:
        return int(self.exp[e % self.charac])

    def poly_eval(self, coeffs, x: int) -> int:
        """Horner evaluation; coeffs[0] is the highest-degree coefficient."""
        y = 0
        for c in coeffs:
            y = self.mul(y, x) ^ c
        return y


class IdentityCode:
    """Pass-through code: codeword equals the message, decode never fails."""

    kind = "identity"

    def __init__(self, n_msg: int):
        if n_msg < 1:
            raise ValueError("message length must be positive")
        self.n_msg = n_msg
        self.n_seg = n_msg

    @property
    def rate(self) -> Fraction:
        return Fraction(1, 1)

    def encode(self, bits) -> np.ndarray:
        return _as_bits(bits, self.n_msg, "message").copy()

    def decode(self, word):
        return _as_bits(word, self.n_seg, "codeword").copy()


class RepetitionCode:
    """Message repeated whole `repeats` times (101010-style layout for msg 10).

    Decoding is per-bit majority across the copies; a tied vote (possible
    only for even `repeats`) decodes as failure.
    """

    kind = "repetition"

    def __init__(self, n_msg: int, repeats: int):
        if n_msg < 1 or repeats < 1:
            raise ValueError("message length and repeat count must be positive")
        self.n_msg = n_msg
        self.repeats = repeats
        self.n_seg = repeats * n_msg

    @property
    def rate(self) -> Fraction:
        return Fraction(1, self.repeats)

    def encode(self, bits) -> np.ndarray:
        return np.tile(_as_bits(bits, self.n_msg, "message"), self.repeats)

    def decode(self, word):
        arr = _as_bits(word, self.n_seg, "codeword")
        votes = arr.reshape(self.repeats, self.n_msg).sum(axis=0, dtype=np.int64)
        if np.any(2 * votes == self.repeats):
            return None
        return (2 * votes > self.repeats).astype(np.uint8)


class ReedSolomonCode:
    """Systematic Reed-Solomon over GF(2^field_bits), bounded-distance decode.

    Codewords are n_sym symbols (message symbols first, then parity), each
    serialized as field_bits bits, most-significant bit first.  Decoding
    corrects up to floor((n_sym-k_sym)/2) symbol errors via syndromes,
    Berlekamp-Massey, Chien search and Forney; any inconsistency reports
    failure (None).  When n_msg < k_sym*field_bits the message occupies the
    low-order bits and the leading pad must decode to zero.
    """

    kind = "reed_solomon"

    def __init__(self, n_sym: int, k_sym: int, field_bits: int, n_msg: int | None = None):
        if not 1 <= k_sym <= n_sym:
            raise ValueError(f"need 1 <= k_sym <= n_sym, got ({n_sym}, {k_sym})")
        if n_sym > (1 << field_bits) - 1:
            raise ValueError(
                f"n_sym={n_sym} exceeds GF(2^{field_bits}) codeword bound {(1 << field_bits) - 1}"
            )
        self.n_sym = n_sym
        self.k_sym = k_sym
        self.field_bits = field_bits
        capacity = k_sym * field_bits
        if n_msg is None:
            n_msg = capacity
        if not 1 <= n_msg <= capacity:
            raise ValueError(f"n_msg={n_msg} does not fit in {capacity} message bits")
        self.n_msg = n_msg
        self.pad = capacity - n_msg
        self.n_seg = n_sym * field_bits
        self.n_parity = n_sym - k_sym
        self.t = self.n_parity // 2
        self.gf = GF2m(field_bits)
        # generator polynomial with roots alpha^1 .. alpha^n_parity
        gen = [1]
        for i in range(1, self.n_parity + 1):
            root = self.gf.pow_alpha(i)
            nxt = [0] * (len(gen) + 1)
            for d, c in enumerate(gen):
                nxt[d] ^= self.gf.mul(c, root)
                nxt[d + 1] ^= c
            gen = nxt
        self._gen = gen[::-1]  # highest degree first, monic
        self._shifts = np.arange(field_bits - 1, -1, -1, dtype=np.int64)
        self._bitpow = (1 << self._shifts).astype(np.int64)

    @property
    def rate(self) -> Fraction:
        return Fraction(self.k_sym, self.n_sym)

    def _bits_to_syms(self, bits: np.ndarray) -> list[int]:
        return [int(v) for v in bits.reshape(-1, self.field_bits) @ self._bitpow]

    def _syms_to_bits(self, syms) -> np.ndarray:
        arr = np.asarray(syms, dtype=np.int64)
        return ((arr[:, None] >> self._shifts) & 1).astype(np.uint8).reshape(-1)

    def encode(self, bits) -> np.ndarray:
        msg_bits = _as_bits(bits, self.n_msg, "message")
        full = np.concatenate([np.zeros(self.pad, dtype=np.uint8), msg_bits])
        msg = self._bits_to_syms(full)
        # synthetic division of msg(x) * x^n_parity by the generator
        rem = list(msg) + [0] * self.n_parity
        for i in range(self.k_sym):
            coef = rem[i]
            if coef:
                for j in range(1, len(self._gen)):
                    rem[i + j] ^= self.gf.mul(self._gen[j], coef)
        codeword = msg + rem[self.k_sym:]
        return self._syms_to_bits(codeword)

    def _syndromes(self, cw: list[int]) -> list[int]:
        return [self.gf.poly_eval(cw, self.gf.pow_alpha(j)) for j in range(1, self.n_parity + 1)]

    def _berlekamp_massey(self, synd: list[int]) -> list[int]:
        gf = self.gf
        npar = self.n_parity
        C = [1] + [0] * npar
        B = [1] + [0] * npar
        L, m, b = 0, 1, 1
        for n in range(npar):
            d = synd[n]
            for i in range(1, L + 1):
                d ^= gf.mul(C[i], synd[n - i])
            if d == 0:
                m += 1
                continue
            coef = gf.div(d, b)
            if 2 * L <= n:
                T = C[:]
                for i in range(npar + 1 - m):
                    C[i + m] ^= gf.mul(coef, B[i])
                L, B, b, m = n + 1 - L, T, d, 1
            else:
                for i in range(npar + 1 - m):
                    C[i + m] ^= gf.mul(coef, B[i])
                m += 1
        return C[: L + 1]  # ascending powers, C[0] == 1

    def _decode_syms(self, cw: list[int]):
        gf = self.gf
        if self.n_parity == 0:
            return cw
        synd = self._syndromes(cw)
        if not any(synd):
            return cw
        sigma = self._berlekamp_massey(synd)
        n_err = len(sigma) - 1
        if n_err > self.t:
            return None
        # Chien search: error at symbol index i iff sigma(alpha^-(n-1-i)) == 0
        positions = []
        for degree in range(self.n_sym):
            x = gf.pow_alpha(-degree)
            acc = 0
            for i, c in enumerate(sigma):
                acc ^= gf.mul(c, gf.pow_alpha((-degree) * i))
            if acc == 0:
                positions.append(self.n_sym - 1 - degree)
        if len(positions) != n_err:
            return None
        # Forney magnitudes: omega(x) = S(x) sigma(x) mod x^npar
        omega = [0] * self.n_parity
        for i, s in enumerate(synd):
            for j, c in enumerate(sigma):
                if i + j < self.n_parity:
                    omega[i + j] ^= gf.mul(s, c)
        out = cw[:]
        for pos in positions:
            degree = self.n_sym - 1 - pos
            x_inv = gf.pow_alpha(-degree)
            # omega and sigma' evaluated at x_inv (ascending coefficients)
            num = 0
            xp = 1
            for c in omega:
                num ^= gf.mul(c, xp)
                xp = gf.mul(xp, x_inv)
            den = 0
            xp = 1
            for i in range(1, len(sigma), 2):
                den ^= gf.mul(sigma[i], xp)
                xp = gf.mul(xp, gf.mul(x_inv, x_inv))
            if den == 0:
                return None
            out[pos] ^= gf.div(num, den)
        if any(self._syndromes(out)):
            return None
        return out

    def decode(self, word):
        bits = _as_bits(word, self.n_seg, "codeword")
        cw = self._decode_syms(self._bits_to_syms(bits))
        if cw is None:
            return None
        msg_bits = self._syms_to_bits(cw[: self.k_sym])
        if self.pad and msg_bits[: self.pad].any():
            return None
        return msg_bits[self.pad:]


@dataclass(frozen=True)
class CodeSpec:
    """Declarative code selection; build() instantiates for a message size."""

    kind: str = "identity"
    repeats: int = 3
    n_sym: int = 0
    k_sym: int = 0
    field_bits: int = 0

    def build(self, n_msg: int):
        if self.kind == "identity":
            return IdentityCode(n_msg)
        if self.kind == "repetition":
            return RepetitionCode(n_msg, self.repeats)
        if self.kind == "reed_solomon":
            return ReedSolomonCode(self.n_sym, self.k_sym, self.field_bits, n_msg=n_msg)
        raise ValueError(f"unknown code kind {self.kind!r}")

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity"

    def label(self) -> str:
        if self.kind == "identity":
            return "identity"
        if self.kind == "repetition":
            return f"rep({self.repeats})"
        return f"rs({self.n_sym},{self.k_sym})/gf2^{self.field_bits}"

    def to_dict(self) -> dict:
        if self.kind == "identity":
            return {"kind": "identity"}
        if self.kind == "repetition":
            return {"kind": "repetition", "repeats": self.repeats}
        return {
            "kind": "reed_solomon",
            "n_sym": self.n_sym,
            "k_sym": self.k_sym,
            "field_bits": self.field_bits,
        }

    @staticmethod
    def from_dict(d: dict) -> "CodeSpec":
        kind = d.get("kind", "identity")
        if kind == "identity":
            return IDENTITY
        if kind == "repetition":
            return CodeSpec(kind="repetition", repeats=int(d["repeats"]))
        if kind == "reed_solomon":
            return CodeSpec(
                kind="reed_solomon",
                n_sym=int(d["n_sym"]),
                k_sym=int(d["k_sym"]),
                field_bits=int(d["field_bits"]),
            )
        raise ValueError(f"unknown code kind {kind!r}")


IDENTITY = CodeSpec(kind="identity")
