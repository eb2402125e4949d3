"""Closed-form covering probabilities and random-coding error bounds.

Notation follows the usual random-coding setup: ``T`` users, at most ``M``
active, code length ``n``, i.i.d. Bernoulli(``p``) bits and
``q = p (1-p)^M``, the chance that a given slot holds an uncovered 1 of the
tagged word.

Logarithm convention: every length formula uses ``log2(T)``. The factor
``e * ln 2`` in the code-length rule comes from rewriting ``ln T`` as
``ln 2 * log2(T)``.

For a tagged word overlapped by its own copy shifted by ``d`` slots the
positions split into ``d`` residue classes; covering events are independent
across classes and the chance that a class of size ``k`` has no uncovered 1
is ``f(k)``. :func:`f_class_recursive` is the reference evaluation of
``f(k)``; the closed forms exist to check the algebra and for fast
evaluation at large ``k``.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import derive_seed
from .stats import wilson_interval, z_value

EPS_EIG = 1e-6
M1_LIMIT_EPS = 1e-8
_M1_SUM_BRANCH = 0.05
EVENT_CHUNK = 1 << 16

LN2 = math.log(2.0)


class DegenerateSpectrumError(ArithmeticError):
    """The transfer matrix has (nearly) coincident eigenvalues."""


@dataclass(frozen=True)
class BoundParams:
    T: int
    M: int
    n: int
    p: float
    delta: float

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must lie in (0, 1), got {self.p}")
        if not 1 <= self.M < self.T:
            raise ValueError(f"need 1 <= M < T, got M={self.M}, T={self.T}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not self.delta > 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")

    @classmethod
    def sized(cls, T: int, M: int, delta: float, n: int | None = None, p: float | None = None) -> BoundParams:
        """Defaults ``p = 1/(M+1)`` and ``n = asymptotic_length(T, M, delta)``."""
        if p is None:
            p = 1.0 / (M + 1)
        if n is None:
            n = asymptotic_length(T, M, delta)
        return cls(T, M, n, p, delta)

    @property
    def q(self) -> float:
        return q_of(self.p, self.M)


@dataclass(frozen=True)
class ShiftClassSpec:
    d: int
    j: int
    k: int

    def positions(self) -> list[int]:
        """1-based slot positions ``j, j+d, ..., j+(k-1)d``."""
        return [self.j + ell * self.d for ell in range(self.k)]


@dataclass(frozen=True)
class CoverState:
    a1: float
    a0: float


@dataclass(frozen=True)
class Eigenpair:
    lam1: float
    lam2: float
    q: float


def q_of(p: float, M: int) -> float:
    return p * (1.0 - p) ** M


# -- covering probability of one position class -------------------------


def cover_states(k: int, p: float, M: int) -> list[CoverState]:
    """The conditional pairs (a_i^1, a_i^0) for i = 1..k.

    ``a_i^phi`` is the probability that positions 1..i of the class hold no
    uncovered 1 given that the tagged bit at position i equals ``phi``.
    Position 1 sees ``M`` other users; later positions see ``M-1`` others
    plus the shifted copy of the tagged word.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    r = 1.0 - p
    lead = r * (1.0 - r ** (M - 1))
    a1, a0 = 1.0 - r**M, 1.0
    out = [CoverState(a1, a0)]
    for _ in range(k - 1):
        a1, a0 = p * a1 + lead * a0, p * a1 + r * a0
        out.append(CoverState(a1, a0))
    return out


def f_class_series(kmax: int, p: float, M: int) -> np.ndarray:
    """``f(1), ..., f(kmax)`` in one pass of the recursion."""
    r = 1.0 - p
    lead = r * (1.0 - r ** (M - 1))
    a1, a0 = 1.0 - r**M, 1.0
    out = np.empty(kmax)
    out[0] = p * a1 + r * a0
    for i in range(1, kmax):
        a1, a0 = p * a1 + lead * a0, p * a1 + r * a0
        out[i] = p * a1 + r * a0
    return out


def f_class_recursive(k: int, p: float, M: int) -> float:
    """Probability that every 1 of the tagged word in a size-``k`` class is covered."""
    if k < 1:
        raise ValueError("k must be >= 1")
    last = cover_states(k, p, M)[-1]
    return p * last.a1 + (1.0 - p) * last.a0


def transfer_matrix(p: float, M: int) -> np.ndarray:
    r = 1.0 - p
    return np.array([[p, r * (1.0 - r ** (M - 1))], [p, r]])


def eigenpair(p: float, M: int) -> Eigenpair:
    """Spectrum of the transfer matrix: trace 1, determinant q."""
    q = q_of(p, M)
    disc = 1.0 - 4.0 * q
    if disc < 0:
        raise DegenerateSpectrumError(f"complex eigenvalues for q={q}")
    s = math.sqrt(disc)
    return Eigenpair(0.5 + 0.5 * s, 0.5 - 0.5 * s, q)


def f_class_matrix(k: int, p: float, M: int) -> float:
    """``[p, 1-p] A^(k-1) [a_1^1, a_1^0]^T`` via an explicit matrix power."""
    r = 1.0 - p
    start = np.array([1.0 - r**M, 1.0])
    v = np.linalg.matrix_power(transfer_matrix(p, M), k - 1) @ start
    return float(np.array([p, r]) @ v)


def f_class_closed(k: int, p: float, M: int, eps: float = EPS_EIG) -> float:
    """Eigen-decomposition closed form of ``f(k)``; needs ``k >= 2``.

    Raises :class:`DegenerateSpectrumError` when ``|1 - 4q| < eps``, where
    the form divides by a vanishing square root; use the recursion there.
    """
    if k < 2:
        raise ValueError("closed form needs k >= 2")
    q = q_of(p, M)
    disc = 1.0 - 4.0 * q
    if abs(disc) < eps:
        raise DegenerateSpectrumError(f"|1-4q| = {abs(disc):.3g} < {eps}")
    s = math.sqrt(disc)
    base = (0.5 - 2.0 * q + q * q) / s
    lam1, lam2 = 0.5 + 0.5 * s, 0.5 - 0.5 * s
    return lam1 ** (k - 2) * (base + 0.5 - q) - lam2 ** (k - 2) * (base - 0.5 + q)


def f_class_m1(k: int, p: float) -> float:
    """``f(k)`` for a single interferer, ``((1-p)^(k+2) - p^(k+2)) / (1-2p)``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    gap = 1.0 - 2.0 * p
    m = k + 2
    if abs(gap) < M1_LIMIT_EPS:
        return m * 2.0 ** -(m - 1)
    r = 1.0 - p
    if abs(gap) < _M1_SUM_BRANCH:
        # (r^m - p^m)/(r - p) expanded as a sum; the quotient cancels badly here
        i = np.arange(m)
        return float(np.sum(r ** (m - 1 - i) * p**i))
    return (r**m - p**m) / gap


def f_class_bound(k: int, p: float, M: int) -> float:
    return (1.0 - q_of(p, M)) ** k


def covered_prob_bound(n: int, p: float, M: int) -> float:
    """Upper bound ``(1-q)^n`` on the tagged word being covered under any shift."""
    return (1.0 - q_of(p, M)) ** n


def shift_classes(n: int, d: int) -> list[ShiftClassSpec]:
    if not 1 <= d <= n:
        raise ValueError(f"need 1 <= d <= n, got d={d}, n={n}")
    return [ShiftClassSpec(d, j, (n - j) // d + 1) for j in range(1, d + 1)]


def covered_prob_exact(n: int, d: int, p: float, M: int) -> float:
    """Exact chance the tagged word is covered by its ``d``-shift plus ``M-1`` others."""
    sizes = [c.k for c in shift_classes(n, d)]
    table = _f_table(max(sizes), p, M)
    return float(np.prod([table[k - 1] for k in sizes]))


def worst_shift_cover_prob(n: int, p: float, M: int) -> float:
    """Largest :func:`covered_prob_exact` over self-overlapping shifts ``1 <= d < n``."""
    if n < 2:
        return 1.0 - q_of(p, M)
    table = _f_table(n, p, M)
    best = 0.0
    for d in range(1, n):
        small, extra = divmod(n, d)
        val = table[small] ** extra * table[small - 1] ** (d - extra) if extra else table[small - 1] ** d
        best = max(best, float(val))
    return best


def _f_table(kmax: int, p: float, M: int) -> np.ndarray:
    # a single interferer goes through its own closed form (and the p = 1/2 limit)
    if M == 1:
        return np.array([f_class_m1(k, p) for k in range(1, kmax + 1)])
    return f_class_series(kmax, p, M)


# -- bad-code and error bounds ---------------------------------------------


class BoundForms(NamedTuple):
    """A bound before (``pre``) and after (``exp``) the exponential relaxation."""

    pre: float
    exp: float
    log_pre: float
    log_exp: float


def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _log_tail(n: int, q: float) -> float:
    return n * math.log1p(-q)


def log_sync_bad_bound(params: BoundParams) -> float:
    T, M = params.T, params.M
    return math.log(math.comb(T, M)) + math.log(T - M) + _log_tail(params.n, params.q)


def sync_bad_bound(params: BoundParams) -> float:
    """``C(T,M) (T-M) (1 - p(1-p)^M)^n``; may exceed 1."""
    T, M = params.T, params.M
    try:
        return math.comb(T, M) * (T - M) * (1.0 - params.q) ** params.n
    except OverflowError:
        return _safe_exp(log_sync_bad_bound(params))


def sync_exponent(T: int, M: int, n: float) -> float:
    """Exponent of the relaxed synchronous bound, ``(M+1) ln2 log2T - n/((M+1)e)``."""
    return (M + 1) * LN2 * math.log2(T) - _relaxed_decay(n, M)


def ident_exponent(T: int, M: int, n: float) -> float:
    """``(M+1) ln T + M ln n - n/((M+1)e)``; ``n`` may be fractional."""
    return (M + 1) * math.log(T) + M * math.log(n) - _relaxed_decay(n, M)


def sync_error_exponent(T: int, M: int, n: float) -> float:
    """``M ln T + M ln n - n/((M+1)e)``; ``n`` may be fractional."""
    return M * math.log(T) + M * math.log(n) - _relaxed_decay(n, M)


def _relaxed_decay(n: float, M: int) -> float:
    return n / ((M + 1) * math.e)


def ident_error_bound(params: BoundParams) -> BoundForms:
    """False identification: ``C(T,M)(T-M) n^M (1-q)^n`` and its relaxation :func:`ident_exponent`.

    The relaxed form is only an upper bound on the first when ``p = 1/(M+1)``.
    """
    T, M, n = params.T, params.M, params.n
    log_pre = math.log(math.comb(T, M)) + math.log(T - M) + M * math.log(n) + _log_tail(n, params.q)
    log_exp = ident_exponent(T, M, n)
    return BoundForms(_safe_exp(log_pre), _safe_exp(log_exp), log_pre, log_exp)


def sync_error_bound(params: BoundParams) -> BoundForms:
    """False synchronization: ``C(T,M-1)(T-M+1) n^M (1-q)^n`` and its relaxation :func:`sync_error_exponent`."""
    T, M, n = params.T, params.M, params.n
    log_pre = math.log(math.comb(T, M - 1)) + math.log(T - M + 1) + M * math.log(n) + _log_tail(n, params.q)
    log_exp = sync_error_exponent(T, M, n)
    return BoundForms(_safe_exp(log_pre), _safe_exp(log_exp), log_pre, log_exp)


def clamp_probability(x: float) -> float:
    """Display helper; the raw bounds are deliberately left unclamped."""
    return min(1.0, max(0.0, x))


def asymptotic_length_real(T: int, M: int, delta: float) -> float:
    """``(1+delta) e ln2 (M+1)^2 log2(T)`` before rounding."""
    if T < 2:
        raise ValueError("T must be >= 2")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    return (1.0 + delta) * math.e * LN2 * (M + 1) ** 2 * math.log2(T)


def asymptotic_length(T: int, M: int, delta: float) -> int:
    return math.ceil(asymptotic_length_real(T, M, delta))


def theorem2_exponent(T: int, M: int, delta: float, gamma: int, form: str = "exact") -> float:
    """Error exponent at ``n = asymptotic_length_real(T, M, delta)``.

    ``gamma = 0`` is the false-identification exponent, ``gamma = 1`` the
    false-synchronization one. ``form="exact"`` equals the logarithm of the
    relaxed bounds evaluated at that ``n``; ``form="display"`` weights the
    slack term by ``delta * (1 - gamma/(M+1))``, which coincides with the
    exact form for ``gamma = 0`` and is larger (weaker) by ``(1+delta) ln T``
    for ``gamma = 1``. Both tend to minus infinity as ``T`` grows.
    """
    if gamma not in (0, 1):
        raise ValueError("gamma must be 0 or 1")
    if not delta > 0:
        raise ValueError("delta must be > 0")
    L = math.log2(T)
    if form == "exact":
        slack = (delta + gamma / (M + 1)) * LN2
    elif form == "display":
        slack = delta * (1.0 - gamma / (M + 1)) * LN2
    else:
        raise ValueError(f"unknown form {form!r}")
    growth = (1.0 - 1.0 / (M + 1)) * math.log(asymptotic_length_real(T, M, delta)) / L
    return -(M + 1) * L * (slack - growth)


# -- Monte Carlo twin of the class covering event ----------------------------


@dataclass(frozen=True)
class EventEstimate:
    hits: int
    trials: int

    @property
    def estimate(self) -> float:
        return self.hits / self.trials

    @property
    def stderr(self) -> float:
        f = self.estimate
        return math.sqrt(f * (1.0 - f) / self.trials)

    def interval(self, confidence: float = 0.95) -> tuple[float, float]:
        return wilson_interval(self.hits, self.trials, z_value(confidence))


def _event_chunk(args: tuple[int, int, float, int, int]) -> int:
    k, M, p, size, seed = args
    rng = np.random.default_rng(seed)
    tagged = rng.random((size, k)) < p
    others = rng.random((size, k, M)) < p
    # from the second position on, one of the M active slots is the shifted tagged copy
    others[:, 1:, M - 1] = False
    covered = others.any(axis=2)
    covered[:, 1:] |= tagged[:, :-1]
    ok = ~(tagged & ~covered)
    return int(ok.all(axis=1).sum())


def event_chunks(k: int, p: float, M: int, trials: int, seed: int) -> list[tuple[int, int, float, int, int]]:
    n_chunks = -(-trials // EVENT_CHUNK)
    return [
        (k, M, p, min(EVENT_CHUNK, trials - i * EVENT_CHUNK), derive_seed(seed, i))
        for i in range(n_chunks)
    ]


def event_simulator_f(k: int, p: float, M: int, trials: int, seed: int, workers: int = 1) -> EventEstimate:
    """Simulate the bits of one position class directly and count fully covered draws.

    Trials are cut into fixed chunks with their own derived seeds, so the
    estimate does not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if k < 1 or M < 1:
        raise ValueError("need k >= 1 and M >= 1")
    jobs = event_chunks(k, p, M, trials, seed)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(_event_chunk, jobs))
    else:
        hits = sum(map(_event_chunk, jobs))
    return EventEstimate(hits, trials)


# -- tabulation ---------------------------------------------------------------

BOUND_COLUMNS = ("T", "M", "n", "p", "delta", "eq1", "eq3_pre", "eq3_exp", "eq4_pre", "eq4_exp", "f_exact", "f_bound")


def bound_row(params: BoundParams, shift: int | None = None) -> dict:
    """All bound columns for one parameter point.

    ``f_exact`` is the exact covered probability under ``shift``, or under
    the worst self-overlapping shift when ``shift`` is None; ``f_bound`` is
    ``(1-q)^n``.
    """
    ident = ident_error_bound(params)
    synch = sync_error_bound(params)
    if shift is None:
        f_exact = worst_shift_cover_prob(params.n, params.p, params.M)
    else:
        f_exact = covered_prob_exact(params.n, shift, params.p, params.M)
    return {
        "T": params.T,
        "M": params.M,
        "n": params.n,
        "p": params.p,
        "delta": params.delta,
        "eq1": sync_bad_bound(params),
        "eq3_pre": ident.pre,
        "eq3_exp": ident.exp,
        "eq4_pre": synch.pre,
        "eq4_exp": synch.exp,
        "f_exact": f_exact,
        "f_bound": covered_prob_bound(params.n, params.p, params.M),
    }
