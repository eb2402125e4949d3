"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import itertools
import math
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np

from oracles import EnumerationOracle
from orsig import analysis
from orsig.analysis import BoundParams
from orsig.core import CodeGenParams, Codeword, generate_code
from orsig.montecarlo import ASYNC, SYNC_ZFD, ExperimentSpec, run_async, run_sync_zfd
from orsig.zfd import check_zfd, sync_decode

P_GRID = [i / 10 for i in range(1, 10)]
P_GRID_05 = [round(0.05 * i, 2) for i in range(1, 20)]
# rounding of (1-q)^k against an exactly equal f (k = 1, tiny q) needs a last-ulp allowance
TIE_RTOL = 1e-12


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def test_01_oracle_equivalence(report):
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(1, 11):
        oracle = EnumerationOracle(k)
        for p, M in itertools.product(P_GRID, (1, 2, 3)):
            worst = max(worst, abs(analysis.f_class_recursive(k, p, M) - oracle.f(p, M)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 60
    report(1, ok, f"max |recursion - enumeration| = {worst:.2e} (tol 1e-12), {elapsed:.1f}s")
    assert ok


def test_02_closed_forms(report):
    t0 = time.perf_counter()
    worst_closed, checked, skipped = 0.0, 0, 0
    for M in range(1, 7):
        for p in P_GRID_05:
            if abs(1 - 4 * analysis.q_of(p, M)) < analysis.EPS_EIG:
                skipped += 1
                continue
            series = analysis.f_class_series(200, p, M)
            for k in range(2, 201):
                worst_closed = max(worst_closed, _rel(analysis.f_class_closed(k, p, M), series[k - 1]))
                checked += 1
    # M = 1 on a fine grid through p = 1/2 and right next to it
    p_m1 = [i / 200 for i in range(1, 200)] + [0.5 + s * 10.0**-e for e in (3, 6, 9, 12) for s in (-1, 1)]
    worst_m1_abs = worst_m1_rel = 0.0
    for p in p_m1:
        series = analysis.f_class_series(100, p, 1)
        for k in range(1, 101):
            got, ref = analysis.f_class_m1(k, p), series[k - 1]
            worst_m1_abs = max(worst_m1_abs, abs(got - ref))
            worst_m1_rel = max(worst_m1_rel, _rel(got, ref))
    elapsed = time.perf_counter() - t0
    ok = worst_closed <= 1e-9 and worst_m1_rel <= 1e-9 and worst_m1_abs <= 1e-10 and elapsed < 10
    report(
        2,
        ok,
        f"closed form max rel {worst_closed:.1e} over {checked} points ({skipped} degenerate skipped); "
        f"M=1 form max rel {worst_m1_rel:.1e}, abs {worst_m1_abs:.1e}; {elapsed:.1f}s",
    )
    assert ok


def _exact_f(kmax, p, M):
    # independent exact route: trace 1 / determinant q recurrence in rationals
    q = p * (1 - p) ** M
    f = [Fraction(1), 1 - q]
    while len(f) <= kmax:
        f.append(f[-1] - q * f[-2])
    return f[1:]


def test_03_bound_validity(report):
    violations, checked = [], 0
    ks = np.arange(1, 301)
    for M in range(1, 7):
        for i in range(1, 1000):
            p = i / 1000
            q = analysis.q_of(p, M)
            if M > 1 and q > 0.228:
                continue
            f = analysis.f_class_series(300, p, M)
            bound = (1 - q) ** ks
            bad = np.nonzero(f > bound * (1 + TIE_RTOL))[0]
            checked += len(ks)
            violations += [(int(ks[j]), p, M) for j in bad]
    # exact rational confirmation, no slack at all
    exact_bad = 0
    for M in (1, 2, 3):
        for i in range(1, 20):
            p = Fraction(i, 20)
            q = p * (1 - p) ** M
            if M > 1 and q > Fraction(228, 1000):
                continue
            for k, fk in enumerate(_exact_f(40, p, M), start=1):
                exact_bad += fk > (1 - q) ** k
    ok = not violations and exact_bad == 0
    report(3, ok, f"{len(violations)} float violations in {checked} points, {exact_bad} exact-rational violations")
    assert ok


def test_04_optimal_p(report):
    grid = [i / 1000 for i in range(1, 1000)]
    offsets = []
    for M in range(1, 7):
        for T, delta in ((64, 0.5), (1024, 0.1), (2**20, 1.0)):
            n = analysis.asymptotic_length(T, M, delta)
            vals = [analysis.log_sync_bad_bound(BoundParams(T, M, n, p, delta)) for p in grid]
            best = grid[int(np.argmin(vals))]
            offsets.append(abs(best - 1 / (M + 1)))
    ok = max(offsets) <= 1e-3 + 1e-12
    report(4, ok, f"max |argmin p - 1/(M+1)| = {max(offsets):.2e} over M=1..6, 3 sizes each")
    assert ok


def test_05_sync_monte_carlo(report):
    t0 = time.perf_counter()
    P = BoundParams.sized(8, 2, 0.5, p=1 / 3)
    res = run_sync_zfd(ExperimentSpec(P, 500, SYNC_ZFD, seed=1))
    elapsed = time.perf_counter() - t0
    ok = res.bound_satisfied and elapsed < 300
    lo, _ = res.one_sided99
    report(
        5,
        ok,
        f"n={P.n}: {res.count}/{res.total} bad codes, 99% lower limit {lo:.2e} vs bound {res.bound:.2e} "
        f"({res.verdict}), {elapsed:.1f}s",
    )
    assert ok


def test_06_async_monte_carlo(report):
    t0 = time.perf_counter()
    P = BoundParams.sized(10, 2, 0.5)
    lines, ok = [], True
    for mode in ("at-most", "exactly"):
        res = run_async(ExperimentSpec(P, 100, ASYNC, seed=6, horizon=200 * P.n, schedule_mode=mode))
        c = res.counts
        paired = c.sync_dets["stateful"] <= c.sync_dets["stateless"]
        ok &= res.ident.bound_satisfied and res.sync.bound_satisfied and paired and res.ident.total >= 100_000
        lines.append(
            f"{mode}: {res.ident.total} windows, ident {res.ident.count} vs {res.ident.bound:.3g}, "
            f"sync {res.sync.count} vs {res.sync.bound:.3g}, "
            f"sync dets stateful {c.sync_dets['stateful']} <= stateless {c.sync_dets['stateless']}"
        )
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600
    report(6, ok, "; ".join(lines) + f"; {elapsed:.1f}s")
    assert ok


def test_07_decoder_exactness(report):
    codes = failures = subsets = 0
    for T in range(2, 11):
        for M in range(1, min(3, T - 1) + 1):
            n = analysis.asymptotic_length(T, M, 0.5)
            for seed in range(4):
                code = generate_code(CodeGenParams(T, n, 1 / (M + 1), seed))
                if not check_zfd(code, M).is_zfd:
                    continue
                codes += 1
                for size in range(M + 1):
                    for S in itertools.combinations(range(T), size):
                        y = Codeword.zeros(n)
                        for u in S:
                            y = y | code[u]
                        subsets += 1
                        failures += sync_decode(y, code) != set(S)
    ok = failures == 0 and codes > 0
    report(7, ok, f"{failures} failures over {subsets} subsets of {codes} ZFD-verified codes")
    assert ok


def test_08_exponent_consistency(report):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(50):
        T = int(2 ** rng.uniform(2, 30))
        M = int(rng.integers(1, 7))
        while M >= T:
            M = int(rng.integers(1, 7))
        delta = float(rng.uniform(0.05, 2.0))
        n = analysis.asymptotic_length_real(T, M, delta)
        for gamma, relaxed in ((0, analysis.ident_exponent), (1, analysis.sync_error_exponent)):
            # relative error of exp(a) vs exp(b) is |expm1(a - b)|; the values themselves may underflow
            worst = max(worst, abs(math.expm1(analysis.theorem2_exponent(T, M, delta, gamma) - relaxed(T, M, n))))
    tails_ok = True
    for M, delta in itertools.product(range(1, 7), (0.1, 0.5, 2.0)):
        turn = M / (delta * (M + 1) * analysis.LN2)
        L = [L for L in range(4, 31) if L > turn + 1]
        for gamma in (0, 1):
            e = [analysis.theorem2_exponent(2**x, M, delta, gamma) for x in L]
            tails_ok &= len(e) >= 2 and all(b < a for a, b in zip(e, e[1:]))
    ok = worst <= 1e-9 and tails_ok
    report(8, ok, f"max relative mismatch {worst:.1e} over 50 samples x 2; strictly decreasing tails: {tails_ok}")
    assert ok


def test_09_async_vs_sync_exponents(report):
    rng = np.random.default_rng(9)
    worst = 0.0
    trend_ok = True
    for _ in range(50):
        T = int(2 ** rng.uniform(4, 30))
        M = int(rng.integers(1, 7))
        delta = float(rng.uniform(0.05, 2.0))
        n = analysis.asymptotic_length_real(T, M, delta)
        base = analysis.sync_exponent(T, M, n)
        ident, sync = analysis.ident_exponent(T, M, n), analysis.sync_error_exponent(T, M, n)
        worst = max(
            worst,
            _rel(ident - base, M * math.log(n)),
            _rel(sync - base, M * math.log(n) - math.log(T)),
            _rel((M + 1) * math.log(T), (M + 1) * analysis.LN2 * math.log2(T)),
        )
    for M, delta in itertools.product(range(1, 7), (0.1, 0.5, 2.0)):
        ratios = []
        for x in range(4, 31):
            T = 2**x
            n = analysis.asymptotic_length_real(T, M, delta)
            ratios.append(M * math.log(n) / abs(analysis.sync_exponent(T, M, n)))
        trend_ok &= all(b < a for a, b in zip(ratios, ratios[1:]))
    ok = worst <= 1e-9 and trend_ok
    report(9, ok, f"term identities max rel {worst:.1e}; n^M share of the exponent shrinks with T: {trend_ok}")
    assert ok


def _cli(tmp_path, name, *args):
    out = tmp_path / name
    subprocess.run([sys.executable, "-m", "orsig", *map(str, args), "-o", str(out)], check=True)
    return out.read_bytes()


def test_10_determinism(report, tmp_path):
    gen = ["gen", "--T", 12, "--M", 2, "--seed", 42]
    sync = ["simulate", "--T", 8, "--M", 2, "--trials", 60, "--seed", 3]
    event = ["simulate", "--T", 8, "--M", 2, "--mode", "event-f", "--k", 6, "--trials", 300000, "--seed", 5]
    asyn = ["simulate", "--T", 6, "--M", 2, "--mode", "async", "--trials", 4, "--seed", 2]
    checks = {
        "gen json": _cli(tmp_path, "a.json", *gen) == _cli(tmp_path, "b.json", *gen),
        "gen bin": _cli(tmp_path, "a.bin", *gen) == _cli(tmp_path, "b.bin", *gen),
        "sync-zfd threads 1/2": _cli(tmp_path, "s1.csv", *sync, "--threads", 1)
        == _cli(tmp_path, "s2.csv", *sync, "--threads", 2)
        == _cli(tmp_path, "s3.csv", *sync, "--threads", 2),
        "event-f threads 1/3": _cli(tmp_path, "e1.csv", *event, "--threads", 1)
        == _cli(tmp_path, "e3.csv", *event, "--threads", 3),
        "async threads 1/2": _cli(tmp_path, "x1.json", *asyn, "--threads", 1, "--format", "json")
        == _cli(tmp_path, "x2.json", *asyn, "--threads", 2, "--format", "json"),
    }
    ok = all(checks.values())
    report(10, ok, ", ".join(f"{k}: {'identical' if v else 'DIFFERENT'}" for k, v in checks.items()))
    assert ok
