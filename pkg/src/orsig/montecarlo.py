"""Seeded experiments that compare empirical error rates with the analytic bounds.

Every trial draws its own seed from ``(spec.seed, stream tag, trial index)``,
so adding trials never changes earlier ones and results do not depend on
how many worker processes share the work.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

from . import analysis
from .analysis import BoundParams
from .asynch import AT_MOST, MODES, Kind, classify_detections, decode_stateful, decode_stateless, random_schedule, render_stream
from .core import CodeGenParams, derive_seed, generate_code
from .stats import wilson_interval, wilson_one_sided, z_value
from .zfd import DEFAULT_MAX_SUBSETS, check_zfd

SYNC_ZFD = "sync-zfd"
ASYNC_IDENT = "async-ident"
ASYNC_SYNC = "async-sync"
ASYNC = "async"
EVENT_F = "event-f"
EXPERIMENT_MODES = (SYNC_ZFD, ASYNC, ASYNC_IDENT, ASYNC_SYNC, EVENT_F)

BOUND_CONFIDENCE = 0.99
_TAG_SYNC, _TAG_ASYNC, _TAG_EVENT = 1, 2, 3


@dataclass(frozen=True)
class ExperimentSpec:
    params: BoundParams
    trials: int
    mode: str = SYNC_ZFD
    seed: int = 0
    horizon: int | None = None
    schedule_mode: str = AT_MOST
    decoder: str = "stateless"
    k: int | None = None
    max_subsets: int = DEFAULT_MAX_SUBSETS

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.mode not in EXPERIMENT_MODES:
            raise ValueError(f"mode must be one of {EXPERIMENT_MODES}")
        if self.mode in (ASYNC, ASYNC_IDENT, ASYNC_SYNC):
            if self.horizon is None:
                object.__setattr__(self, "horizon", 200 * self.params.n)
            if self.horizon < self.params.n:
                raise ValueError("horizon must be >= n for asynchronous experiments")
        if self.schedule_mode not in MODES:
            raise ValueError(f"schedule_mode must be one of {MODES}")
        if self.decoder not in ("stateless", "stateful"):
            raise ValueError("decoder must be 'stateless' or 'stateful'")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(d.pop("params"))
        return d


@dataclass(frozen=True)
class ExperimentResult:
    label: str
    count: int
    total: int
    bound: float
    bound_kind: str
    verdict: str
    normalization: str
    spec: dict = field(repr=False)

    @property
    def rate(self) -> float:
        return self.count / self.total

    @property
    def ci95(self) -> tuple[float, float]:
        return wilson_interval(self.count, self.total, z_value(0.95))

    @property
    def one_sided99(self) -> tuple[float, float]:
        return wilson_one_sided(self.count, self.total, BOUND_CONFIDENCE)

    @property
    def bound_satisfied(self) -> bool:
        return self.verdict != "violated"

    def to_row(self) -> dict:
        lo, hi = self.ci95
        lo99, hi99 = self.one_sided99
        row = {
            "label": self.label,
            "count": self.count,
            "total": self.total,
            "rate": self.rate,
            "ci95_low": lo,
            "ci95_high": hi,
            "lower99": lo99,
            "upper99": hi99,
            "bound": self.bound,
            "bound_kind": self.bound_kind,
            "verdict": self.verdict,
            "bound_satisfied": self.bound_satisfied,
            "normalization": self.normalization,
        }
        row.update(self.spec)
        return row


def upper_bound_verdict(count: int, total: int, bound: float) -> str:
    """``violated`` only if the one-sided 99% lower Wilson limit exceeds ``bound``."""
    lo, _ = wilson_one_sided(count, total, BOUND_CONFIDENCE)
    if lo > bound:
        return "violated"
    return "satisfied" if count / total <= bound else "inconclusive"


def _run(fn: Callable, jobs: Sequence, workers: int) -> list:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [fn(j) for j in jobs]


# -- synchronous ZFD --------------------------------------------------------


def _sync_trial(job: tuple[ExperimentSpec, int]) -> bool:
    spec, t = job
    P = spec.params
    code = generate_code(CodeGenParams(P.T, P.n, P.p, derive_seed(spec.seed, _TAG_SYNC, t)))
    return not check_zfd(code, P.M, spec.max_subsets).is_zfd


def run_sync_zfd(spec: ExperimentSpec, workers: int = 1) -> ExperimentResult:
    """Fraction of random codes that are not ZFD, against the bad-code bound."""
    bad = sum(_run(_sync_trial, [(spec, t) for t in range(spec.trials)], workers))
    bound = analysis.sync_bad_bound(spec.params)
    return ExperimentResult(
        SYNC_ZFD, bad, spec.trials, bound, "eq1", upper_bound_verdict(bad, spec.trials, bound), "per code", spec.to_dict()
    )


# -- asynchronous channel ----------------------------------------------------


@dataclass
class AsyncCounts:
    windows: int = 0
    ident_windows: dict = field(default_factory=lambda: {"stateless": 0, "stateful": 0})
    sync_windows: dict = field(default_factory=lambda: {"stateless": 0, "stateful": 0})
    ident_dets: dict = field(default_factory=lambda: {"stateless": 0, "stateful": 0})
    sync_dets: dict = field(default_factory=lambda: {"stateless": 0, "stateful": 0})

    def __add__(self, other: AsyncCounts) -> AsyncCounts:
        def merge(a, b):
            return {key: a[key] + b[key] for key in a}

        return AsyncCounts(
            self.windows + other.windows,
            merge(self.ident_windows, other.ident_windows),
            merge(self.sync_windows, other.sync_windows),
            merge(self.ident_dets, other.ident_dets),
            merge(self.sync_dets, other.sync_dets),
        )


def _async_trial(job: tuple[ExperimentSpec, int]) -> AsyncCounts:
    spec, t = job
    P = spec.params
    code = generate_code(CodeGenParams(P.T, P.n, P.p, derive_seed(spec.seed, _TAG_ASYNC, t, 0)))
    schedule = random_schedule(P.T, P.M, P.n, spec.horizon, spec.schedule_mode, derive_seed(spec.seed, _TAG_ASYNC, t, 1))
    stream = render_stream(schedule, code)
    out = AsyncCounts(windows=spec.horizon - P.n + 1)
    for name, decode in (("stateless", decode_stateless), ("stateful", decode_stateful)):
        labelled = classify_detections(decode(stream, code), schedule)
        ident = {d.start for d in labelled if d.kind is Kind.FALSE_IDENTIFICATION}
        synch = {d.start for d in labelled if d.kind is Kind.FALSE_SYNCHRONIZATION}
        out.ident_windows[name] = len(ident)
        out.sync_windows[name] = len(synch)
        out.ident_dets[name] = sum(d.kind is Kind.FALSE_IDENTIFICATION for d in labelled)
        out.sync_dets[name] = sum(d.kind is Kind.FALSE_SYNCHRONIZATION for d in labelled)
    return out


@dataclass(frozen=True)
class AsyncResult:
    ident: ExperimentResult
    sync: ExperimentResult
    counts: AsyncCounts

    @property
    def results(self) -> tuple[ExperimentResult, ExperimentResult]:
        return self.ident, self.sync


def run_async(spec: ExperimentSpec, workers: int = 1) -> AsyncResult:
    """Per-window false identification / synchronization rates against the two bounds.

    A window (start slot) fails if the chosen decoder emits at least one
    detection of that kind there. Both decoders run on every stream so the
    paired counts are always available.
    """
    counts = sum(_run(_async_trial, [(spec, t) for t in range(spec.trials)], workers), AsyncCounts())
    ident_bound = analysis.ident_error_bound(spec.params).pre
    sync_bound = analysis.sync_error_bound(spec.params).pre
    dec = spec.decoder
    norm = f"per evaluated window ({dec} decoder)"
    base = spec.to_dict()

    def result(label, count, bound, kind):
        return ExperimentResult(
            label, count, counts.windows, bound, kind, upper_bound_verdict(count, counts.windows, bound), norm, base
        )

    return AsyncResult(
        result(ASYNC_IDENT, counts.ident_windows[dec], ident_bound, "eq3_pre"),
        result(ASYNC_SYNC, counts.sync_windows[dec], sync_bound, "eq4_pre"),
        counts,
    )


# -- class covering event ------------------------------------------------------


def run_event_f(spec: ExperimentSpec, k: int | None = None, workers: int = 1) -> ExperimentResult:
    """Monte Carlo class-covering frequency against the exact recursion (3 sigma)."""
    k = k if k is not None else spec.k
    if k is None:
        raise ValueError("event-f needs a class size k")
    P = spec.params
    est = analysis.event_simulator_f(k, P.p, P.M, spec.trials, derive_seed(spec.seed, _TAG_EVENT), workers)
    exact = analysis.f_class_recursive(k, P.p, P.M)
    sigma = (exact * (1 - exact) / spec.trials) ** 0.5
    verdict = "satisfied" if abs(est.estimate - exact) <= 3 * sigma else "violated"
    meta = spec.to_dict()
    meta["k"] = k
    return ExperimentResult(EVENT_F, est.hits, spec.trials, exact, "f_recursive", verdict, "per simulated class", meta)


def run(spec: ExperimentSpec, workers: int = 1) -> list[ExperimentResult]:
    if spec.mode == SYNC_ZFD:
        return [run_sync_zfd(spec, workers)]
    if spec.mode == EVENT_F:
        return [run_event_f(spec, workers=workers)]
    return list(run_async(spec, workers).results)


# -- output ------------------------------------------------------------------


def results_to_csv(results: Sequence[ExperimentResult], header: bool = True) -> str:
    rows = [r.to_row() for r in results]
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    if header:
        w.writeheader()
    for row in rows:
        w.writerow({key: repr(v) if isinstance(v, float) else v for key, v in row.items()})
    return buf.getvalue()


def results_to_json(results: Sequence[ExperimentResult]) -> str:
    return json.dumps([r.to_row() for r in results], indent=2)
