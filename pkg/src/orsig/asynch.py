"""Slotted asynchronous OR channel and sliding-window decoders.

Users start their code word at arbitrary integer slots; the channel output
in each slot is the OR of every bit currently on the air. A decoder slides
an ``n``-slot window over the output and declares ``(user, start)``
whenever the window covers the user's code word.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import Code, derive_seed

AT_MOST = "at-most"
EXACTLY = "exactly"
MODES = (AT_MOST, EXACTLY)


class ScheduleError(ValueError):
    """A schedule is malformed or cannot be generated as requested."""


class Activation(NamedTuple):
    user: int
    start: int


@dataclass(frozen=True)
class ActivitySchedule:
    """Ground-truth transmissions; each occupies slots ``[start, start+n)``.

    ``M`` is optional: when given, per-slot occupancy is validated against
    ``mode`` (``exactly`` only on the interior slots ``[n-1, L-n]``).
    """

    activations: tuple[Activation, ...]
    horizon: int
    n: int
    mode: str = AT_MOST
    M: int | None = None

    def __post_init__(self):
        acts = [Activation(int(u), int(s)) for u, s in self.activations]
        object.__setattr__(self, "activations", tuple(sorted(acts, key=lambda a: (a.start, a.user))))
        if self.mode not in MODES:
            raise ScheduleError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n < 1 or self.horizon < 0:
            raise ScheduleError("need n >= 1 and horizon >= 0")
        for a in self.activations:
            if a.user < 0 or a.start < 0 or a.start + self.n > self.horizon:
                raise ScheduleError(f"activation {a} does not fit in horizon {self.horizon}")
        last_end: dict[int, int] = {}
        for a in sorted(acts):
            if a.start < last_end.get(a.user, 0):
                raise ScheduleError(f"user {a.user} overlaps itself at slot {a.start}")
            last_end[a.user] = a.start + self.n
        if self.M is not None:
            occ = self.occupancy()
            if occ.size and occ.max() > self.M:
                raise ScheduleError(f"more than M={self.M} users active in some slot")
            if self.mode == EXACTLY:
                inner = occ[self.n - 1 : self.horizon - self.n + 1]
                if inner.size and (inner != self.M).any():
                    raise ScheduleError(f"interior occupancy differs from M={self.M}")

    def occupancy(self) -> np.ndarray:
        """Number of active users in every slot."""
        delta = np.zeros(self.horizon + 1, dtype=np.int64)
        for a in self.activations:
            delta[a.start] += 1
            delta[a.start + self.n] -= 1
        return np.cumsum(delta[:-1])

    def users(self) -> set[int]:
        return {a.user for a in self.activations}

    def union(self, other: ActivitySchedule) -> ActivitySchedule:
        if (self.horizon, self.n) != (other.horizon, other.n):
            raise ScheduleError("schedules differ in horizon or n")
        return ActivitySchedule(self.activations + other.activations, self.horizon, self.n, AT_MOST)

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "n": self.n,
            "mode": self.mode,
            "activations": [{"user": a.user, "start": a.start} for a in self.activations],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> ActivitySchedule:
        obj = json.loads(text)
        acts = tuple(Activation(a["user"], a["start"]) for a in obj["activations"])
        return cls(acts, obj["horizon"], obj["n"], obj.get("mode", AT_MOST))


@dataclass(frozen=True, eq=False)
class ChannelStream:
    slots: np.ndarray

    def __post_init__(self):
        arr = np.array(self.slots, dtype=bool).ravel()
        arr.setflags(write=False)
        object.__setattr__(self, "slots", arr)

    def __len__(self) -> int:
        return self.slots.size

    def __eq__(self, other) -> bool:
        return isinstance(other, ChannelStream) and np.array_equal(self.slots, other.slots)

    def __or__(self, other: ChannelStream) -> ChannelStream:
        if len(self) != len(other):
            raise ValueError("stream length mismatch")
        return ChannelStream(self.slots | other.slots)

    def __str__(self) -> str:
        return "".join("1" if b else "0" for b in self.slots)

    @classmethod
    def from_str(cls, s: str) -> ChannelStream:
        if set(s) - {"0", "1"}:
            raise ValueError(f"not a bitstring: {s!r}")
        return cls(np.array([c == "1" for c in s], dtype=bool))

    def window(self, t: int, n: int) -> np.ndarray:
        return self.slots[t : t + n]


class Kind(str, Enum):
    TRUE_POSITIVE = "true-positive"
    FALSE_IDENTIFICATION = "false-identification"
    FALSE_SYNCHRONIZATION = "false-synchronization"


class Detection(NamedTuple):
    user: int
    start: int
    kind: Kind


def render_stream(schedule: ActivitySchedule, code: Code) -> ChannelStream:
    """OR superposition of every scheduled transmission; idle slots are 0."""
    if schedule.n != code.n:
        raise ScheduleError(f"schedule uses n={schedule.n}, code has n={code.n}")
    out = np.zeros(schedule.horizon, dtype=bool)
    rows = code.matrix
    n = code.n
    for u, s in schedule.activations:
        if u >= code.T:
            raise ScheduleError(f"user {u} not in a code of {code.T} users")
        out[s : s + n] |= rows[u]
    return ChannelStream(out)


def coverage_matrix(stream: ChannelStream, code: Code) -> np.ndarray:
    """Boolean ``(L-n+1) x T`` table: window at ``t`` covers user ``u``.

    Computed as a count of the user's 1s landing on silent slots; zero means
    covered.
    """
    L, n = len(stream), code.n
    if L < n:
        raise ValueError(f"stream of {L} slots is shorter than n={n}")
    silent = sliding_window_view(~stream.slots, n).astype(np.float64)
    uncovered = silent @ code.matrix.T.astype(np.float64)
    return uncovered == 0


def decode_stateless(stream: ChannelStream, code: Code) -> list[tuple[int, int]]:
    """Every ``(user, start)`` whose window covers the code word, ordered by (start, user)."""
    ts, us = np.nonzero(coverage_matrix(stream, code))
    return [(int(u), int(t)) for t, u in zip(ts, us)]


def decode_stateful(stream: ChannelStream, code: Code) -> list[tuple[int, int]]:
    """Like :func:`decode_stateless`, but a user detected at ``t`` is not re-checked before ``t+n``.

    Suppression is unconditional: it also follows detections that later
    turn out to be wrong.
    """
    n = code.n
    resume = [0] * code.T
    out = []
    for u, t in decode_stateless(stream, code):
        if t >= resume[u]:
            out.append((u, t))
            resume[u] = t + n
    return out


def classify_detections(dets: Iterable[tuple[int, int]], schedule: ActivitySchedule) -> list[Detection]:
    """Label detections against ground truth.

    Priority: an exact match is a true positive; a detection of a user whose
    real transmission overlaps the detected window (``0 < |t - t'| < n``) is
    a synchronization error; anything else is an identification error.
    """
    n = schedule.n
    truth = set(schedule.activations)
    starts: dict[int, list[int]] = {}
    for a in schedule.activations:
        starts.setdefault(a.user, []).append(a.start)
    out = []
    for u, t in dets:
        if (u, t) in truth:
            kind = Kind.TRUE_POSITIVE
        elif any(abs(t - s) < n for s in starts.get(u, ())):
            kind = Kind.FALSE_SYNCHRONIZATION
        else:
            kind = Kind.FALSE_IDENTIFICATION
        out.append(Detection(u, t, kind))
    return out


def detections_to_csv(dets: Sequence[Detection]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["user", "start", "kind"])
    for d in dets:
        w.writerow([d.user, d.start, d.kind.value])
    return buf.getvalue()


def detections_from_csv(text: str) -> list[Detection]:
    rows = csv.DictReader(io.StringIO(text))
    return [Detection(int(r["user"]), int(r["start"]), Kind(r["kind"])) for r in rows]


def random_schedule(T: int, M: int, n: int, L: int, mode: str = AT_MOST, seed: int = 0) -> ActivitySchedule:
    """Random asynchronous traffic with ``M`` transmission lanes.

    Each lane is a chain of non-overlapping transmissions starting somewhere
    in ``[0, n-1]``. In ``exactly`` mode the chain is back-to-back, which
    keeps exactly ``M`` users on the air over ``[n-1, L-n]``; in ``at-most``
    mode a gap uniform on ``[0, n-1]`` follows every transmission. Each
    transmission goes to a user drawn uniformly among those not on the air
    at that moment, so nobody overlaps themself.
    """
    if mode not in MODES:
        raise ScheduleError(f"mode must be one of {MODES}, got {mode!r}")
    if n < 1 or L < n:
        raise ScheduleError(f"need 1 <= n <= L, got n={n}, L={L}")
    if M < 0:
        raise ScheduleError("M must be >= 0")
    if M >= T:
        raise ScheduleError(f"M={M} lanes need more than T={T} users to avoid self-overlap")
    rng = np.random.default_rng(derive_seed(seed, 0))
    slots = []
    for lane in range(M):
        t = int(rng.integers(0, n))
        while t + n <= L:
            slots.append((t, lane))
            t += n if mode == EXACTLY else n + int(rng.integers(0, n))
    slots.sort()
    busy_until = [0] * T
    acts = []
    for t, _ in slots:
        free = [u for u in range(T) if busy_until[u] <= t]
        u = free[int(rng.integers(0, len(free)))]
        busy_until[u] = t + n
        acts.append(Activation(u, t))
    return ActivitySchedule(tuple(acts), L, n, mode, M)
