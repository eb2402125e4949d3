"""Code words, code books and the Boolean-sum channel primitives.

A code word of length ``n`` is stored packed in a Python integer: bit ``i``
of the integer is slot ``i`` of the word. Covering and OR then become single
wide bitwise operations on the integer's internal limbs.

String form puts slot 0 first, so ``Codeword.from_str("100")`` has a 1 in
slot 0 only.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

_HEADER = struct.Struct("<II")


@dataclass(frozen=True)
class Codeword:
    bits: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"code word length must be >= 1, got {self.n}")
        if self.bits < 0 or self.bits >> self.n:
            raise ValueError(f"bits do not fit in {self.n} slots")

    @classmethod
    def from_str(cls, s: str) -> Codeword:
        if not s or set(s) - {"0", "1"}:
            raise ValueError(f"not a non-empty bitstring: {s!r}")
        return cls(int(s[::-1], 2), len(s))

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> Codeword:
        return cls.from_str("".join("1" if b else "0" for b in bits))

    @classmethod
    def zeros(cls, n: int) -> Codeword:
        return cls(0, n)

    @classmethod
    def ones(cls, n: int) -> Codeword:
        return cls((1 << n) - 1, n)

    def __str__(self) -> str:
        return format(self.bits, f"0{self.n}b")[::-1]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> int:
        if not -self.n <= i < self.n:
            raise IndexError(i)
        return (self.bits >> (i % self.n)) & 1

    @property
    def weight(self) -> int:
        return self.bits.bit_count()

    def to_array(self) -> np.ndarray:
        return np.fromiter((c == "1" for c in str(self)), dtype=bool, count=self.n)

    def __or__(self, other: Codeword) -> Codeword:
        return boolean_sum([self, other])


def boolean_sum(words: Iterable[Codeword]) -> Codeword:
    """Positionwise OR of a non-empty collection of equal-length words."""
    words = list(words)
    if not words:
        raise ValueError("boolean_sum needs at least one word")
    n = words[0].n
    acc = 0
    for w in words:
        if w.n != n:
            raise ValueError(f"length mismatch: {w.n} != {n}")
        acc |= w.bits
    return Codeword(acc, n)


def covers(y: Codeword, z: Codeword) -> bool:
    """True iff ``y[i] >= z[i]`` in every slot."""
    if y.n != z.n:
        raise ValueError(f"length mismatch: {y.n} != {z.n}")
    return z.bits & ~y.bits == 0


@dataclass(frozen=True)
class Code:
    """The T-user signature book; user ``i`` owns ``words[i]``."""

    words: tuple[Codeword, ...]

    def __post_init__(self):
        words = tuple(self.words)
        object.__setattr__(self, "words", words)
        if not words:
            raise ValueError("a code needs at least one word")
        n = words[0].n
        if any(w.n != n for w in words):
            raise ValueError("all code words must have the same length")

    @classmethod
    def from_strs(cls, rows: Sequence[str]) -> Code:
        return cls(tuple(Codeword.from_str(r) for r in rows))

    @classmethod
    def from_matrix(cls, matrix) -> Code:
        m = np.asarray(matrix).astype(bool)
        if m.ndim != 2:
            raise ValueError("expected a T x n matrix")
        return cls(tuple(Codeword.from_bits(row) for row in m))

    @property
    def T(self) -> int:
        return len(self.words)

    @property
    def n(self) -> int:
        return self.words[0].n

    def __len__(self) -> int:
        return len(self.words)

    def __getitem__(self, i: int) -> Codeword:
        return self.words[i]

    def __iter__(self):
        return iter(self.words)

    @cached_property
    def ints(self) -> tuple[int, ...]:
        return tuple(w.bits for w in self.words)

    @cached_property
    def matrix(self) -> np.ndarray:
        """Read-only ``T x n`` boolean view, row ``i`` = user ``i``."""
        m = np.array([w.to_array() for w in self.words], dtype=bool).reshape(self.T, self.n)
        m.setflags(write=False)
        return m

    # -- serialization -------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({"T": self.T, "n": self.n, "words": [str(w) for w in self.words]})

    @classmethod
    def from_json(cls, text: str) -> Code:
        obj = json.loads(text)
        code = cls.from_strs(obj["words"])
        if code.T != obj["T"] or code.n != obj["n"]:
            raise ValueError("header T/n disagrees with words")
        return code

    def to_bytes(self) -> bytes:
        """Little-endian uint32 T, n, then rows packed MSB-first, each padded to a byte."""
        packed = np.packbits(self.matrix, axis=1, bitorder="big")
        return _HEADER.pack(self.T, self.n) + packed.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> Code:
        if len(data) < _HEADER.size:
            raise ValueError("truncated header")
        T, n = _HEADER.unpack_from(data)
        row_bytes = (n + 7) // 8
        body = data[_HEADER.size:]
        if T < 1 or n < 1 or len(body) != T * row_bytes:
            raise ValueError(f"body size {len(body)} does not match T={T}, n={n}")
        rows = np.frombuffer(body, dtype=np.uint8).reshape(T, row_bytes)
        return cls.from_matrix(np.unpackbits(rows, axis=1, count=n, bitorder="big"))

    def save(self, path) -> None:
        path = Path(path)
        if path.suffix == ".bin":
            path.write_bytes(self.to_bytes())
        else:
            path.write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> Code:
        path = Path(path)
        if path.suffix == ".bin":
            return cls.from_bytes(path.read_bytes())
        return cls.from_json(path.read_text())


@dataclass(frozen=True)
class CodeGenParams:
    T: int
    n: int
    p: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if self.T < 1 or self.n < 1:
            raise ValueError(f"need T >= 1 and n >= 1, got T={self.T}, n={self.n}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def user_rng(seed: int, user: int) -> np.random.Generator:
    """Generator for one user's bits; depends only on (seed, user)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(user,))))


def derive_seed(seed: int, *key: int) -> int:
    """Deterministic 64-bit child seed of ``seed`` under an integer path ``key``."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def generate_code(params: CodeGenParams) -> Code:
    """Random code with i.i.d. Bernoulli(p) bits.

    User ``i``'s row is drawn from its own stream, so growing ``T`` keeps the
    first rows unchanged.
    """
    rows = [user_rng(params.seed, i).random(params.n) < params.p for i in range(params.T)]
    return Code.from_matrix(np.vstack(rows))
