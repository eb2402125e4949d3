"""Zero-False-Drop verification and the synchronous cover decoder.

User indices are 0-based throughout.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Optional

from .core import Code, Codeword, covers

DEFAULT_MAX_SUBSETS = 2_000_000


class ZfdBudgetExceeded(RuntimeError):
    """The subset enumeration would exceed the configured work limit."""


@dataclass(frozen=True)
class ZfdReport:
    is_zfd: bool
    witness: Optional[tuple[tuple[int, ...], int]] = None

    def __post_init__(self):
        if self.is_zfd != (self.witness is None):
            raise ValueError("witness must be present exactly when the code is not ZFD")
        if self.witness is not None and self.witness[1] in self.witness[0]:
            raise ValueError("violated user may not belong to the witness subset")

    def to_dict(self) -> dict:
        w = None
        if self.witness is not None:
            w = {"subset": list(self.witness[0]), "violated": self.witness[1]}
        return {"is_zfd": self.is_zfd, "witness": w}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> ZfdReport:
        obj = json.loads(text)
        w = obj["witness"]
        if w is None:
            return cls(obj["is_zfd"])
        return cls(obj["is_zfd"], (tuple(w["subset"]), w["violated"]))


def _check_order(code: Code, M: int) -> None:
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    if M >= code.T:
        raise ValueError(f"M={M} >= T={code.T}: no user is left outside a size-M sum")


def check_zfd(code: Code, M: int, max_subsets: int = DEFAULT_MAX_SUBSETS) -> ZfdReport:
    """Decide whether ``code`` is ZFD of order ``M``.

    Only sums of exactly ``M`` words are examined. A smaller sum covering an
    outside word can be padded with further words (never the victim, since
    ``M < T``) and still covers it, so this loses nothing. The witness is
    the first violation with subsets in lexicographic order and the
    violated user ascending.
    """
    _check_order(code, M)
    work = comb(code.T, M)
    if work > max_subsets:
        raise ZfdBudgetExceeded(f"C({code.T},{M}) = {work} subsets exceeds budget {max_subsets}")
    ints = code.ints
    users = range(code.T)
    for subset in combinations(users, M):
        y = 0
        for i in subset:
            y |= ints[i]
        inside = set(subset)
        for u in users:
            if u not in inside and ints[u] & ~y == 0:
                return ZfdReport(False, (subset, u))
    return ZfdReport(True)


def check_zfd_exhaustive(code: Code, M: int) -> ZfdReport:
    """Literal reading: every sum of 1..M words, smallest subsets first.

    Slow reference used to validate :func:`check_zfd`; witnesses may differ
    from it, ``is_zfd`` may not.
    """
    _check_order(code, M)
    users = range(code.T)
    for m in range(1, M + 1):
        for subset in combinations(users, m):
            y = Codeword(0, code.n)
            for i in subset:
                y = y | code[i]
            for u in users:
                if u not in subset and covers(y, code[u]):
                    return ZfdReport(False, (subset, u))
    return ZfdReport(True)


def sync_decode(y: Codeword, code: Code) -> set[int]:
    """Users whose code word is covered by the channel output ``y``."""
    if y.n != code.n:
        raise ValueError(f"output length {y.n} != code length {code.n}")
    return {i for i, c in enumerate(code.ints) if c & ~y.bits == 0}
