"""``orsig`` command line: gen, check, simulate, bounds.

Exit codes: 0 success (or code is ZFD), 1 code is not ZFD, 2 usage error,
3 ZFD budget exceeded, 4 I/O error. ``ORSIG_SEED`` supplies the seed when
``--seed`` is absent; otherwise the seed defaults to 0.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, montecarlo
from .analysis import BOUND_COLUMNS, BoundParams
from .core import Code, CodeGenParams, generate_code
from .zfd import DEFAULT_MAX_SUBSETS, ZfdBudgetExceeded, check_zfd

EXIT_OK, EXIT_NOT_ZFD, EXIT_USAGE, EXIT_BUDGET, EXIT_IO = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("ORSIG_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"ORSIG_SEED is not an integer: {env!r}") from None


def _params(args, T=None) -> BoundParams:
    T = args.T if T is None else T
    try:
        return BoundParams.sized(T, args.M, args.delta, n=args.n, p=args.p)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _table(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    cells = [[_fmt(r[c]) if not isinstance(r[c], float) else f"{r[c]:.6g}" for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def _csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(v) for k, v in r.items()})
    return buf.getvalue()


# -- subcommands ---------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.n is None or args.p is None:
        if args.M is None:
            raise UsageError("gen needs --M (or both --n and --p)")
        sized = _params(args)
        n, p = sized.n, sized.p
    else:
        n, p = args.n, args.p
    try:
        code = generate_code(CodeGenParams(args.T, n, p, _seed(args)))
    except ValueError as e:
        raise UsageError(str(e)) from None
    out = Path(args.out)
    binary = args.format == "bin" or (args.format is None and out.suffix == ".bin")
    if binary:
        out.write_bytes(code.to_bytes())
    else:
        out.write_text(code.to_json() + "\n")
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        code = Code.load(args.code)
    except (OSError, ValueError, KeyError) as e:
        print(f"orsig: cannot read code file: {e}", file=sys.stderr)
        return EXIT_IO
    try:
        report = check_zfd(code, args.M, args.budget)
    except ZfdBudgetExceeded as e:
        print(json.dumps({"error": "budget exceeded", "detail": str(e)}))
        return EXIT_BUDGET
    except ValueError as e:
        raise UsageError(str(e)) from None
    print(report.to_json())
    return EXIT_OK if report.is_zfd else EXIT_NOT_ZFD


def cmd_simulate(args) -> int:
    spec = montecarlo.ExperimentSpec(
        _params(args),
        trials=args.trials,
        mode=args.mode,
        seed=_seed(args),
        horizon=args.horizon,
        schedule_mode=args.schedule,
        decoder=args.decoder,
        k=args.k,
        max_subsets=args.budget,
    )
    if spec.mode == montecarlo.EVENT_F and spec.k is None:
        raise UsageError("--mode event-f needs --k")
    try:
        results = montecarlo.run(spec, workers=args.threads)
    except ZfdBudgetExceeded as e:
        print(json.dumps({"error": "budget exceeded", "detail": str(e)}), file=sys.stderr)
        return EXIT_BUDGET
    if args.format == "json":
        text = montecarlo.results_to_json(results) + "\n"
    elif args.format == "table":
        text = _table([r.to_row() for r in results])
    else:
        text = montecarlo.results_to_csv(results)
    _emit(text, args.out)
    return EXIT_OK


def _sweep_values(expr: str) -> tuple[str, list]:
    try:
        var, rng = expr.split("=", 1)
        a, b, step = rng.split(":")
    except ValueError:
        raise UsageError(f"--sweep expects var=a:b:step, got {expr!r}") from None
    if var not in ("T", "M", "n", "p", "delta"):
        raise UsageError(f"cannot sweep {var!r}")
    cast = int if var in ("T", "M", "n") else float
    a, b, step = cast(a), cast(b), cast(step)
    if step <= 0:
        raise UsageError("sweep step must be positive")
    if cast is int:
        return var, list(range(a, b + 1, step))
    count = int(np.floor((b - a) / step + 1e-9)) + 1
    return var, [a + i * step for i in range(count)]


def cmd_bounds(args) -> int:
    points = [{}]
    if args.sweep:
        var, values = _sweep_values(args.sweep)
        points = [{var: v} for v in values]
    rows = []
    for point in points:
        ns = argparse.Namespace(**{**vars(args), **point})
        rows.append(analysis.bound_row(_params(ns), shift=args.shift))
    if args.format == "json":
        text = json.dumps(rows, indent=2) + "\n"
    elif args.format == "table":
        text = _table(rows)
    else:
        text = _csv(rows, BOUND_COLUMNS)
    _emit(text, args.out)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="orsig", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def sizing(p, need_T=True):
        p.add_argument("--T", type=int, required=need_T, help="number of users")
        p.add_argument("--M", type=int, help="activity bound")
        p.add_argument("--delta", type=float, default=0.5, help="length slack (default 0.5)")
        p.add_argument("--n", type=int, help="code length (default: sized from T, M, delta)")
        p.add_argument("--p", type=float, help="bit probability (default 1/(M+1))")

    g = sub.add_parser("gen", help="generate a random code")
    sizing(g)
    g.add_argument("--seed", type=int)
    g.add_argument("-o", "--out", required=True)
    g.add_argument("--format", choices=["json", "bin"], help="default: by file suffix")
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("check", help="check a code for ZFD of order M")
    c.add_argument("code")
    c.add_argument("--M", type=int, required=True)
    c.add_argument("--budget", type=int, default=DEFAULT_MAX_SUBSETS, help="max subsets to enumerate")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("simulate", help="run a seeded Monte Carlo experiment")
    sizing(s)
    s.add_argument("--mode", choices=["sync-zfd", "async", "event-f"], default="sync-zfd")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--seed", type=int)
    s.add_argument("--horizon", type=int, help="async stream length (default 200*n)")
    s.add_argument("--schedule", choices=["at-most", "exactly"], default="at-most")
    s.add_argument("--decoder", choices=["stateless", "stateful"], default="stateless")
    s.add_argument("--k", type=int, help="class size for event-f")
    s.add_argument("--budget", type=int, default=DEFAULT_MAX_SUBSETS)
    s.add_argument("--threads", type=int, default=1, help="worker processes; results do not depend on it")
    s.add_argument("--format", choices=["csv", "json", "table"], default="csv")
    s.add_argument("-o", "--out")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bounds", help="tabulate the analytic bounds")
    sizing(b)
    b.add_argument("--shift", type=int, help="shift d for f_exact (default: worst shift)")
    b.add_argument("--sweep", help="var=a:b:step, inclusive")
    b.add_argument("--format", choices=["csv", "json", "table"], default="csv")
    b.add_argument("-o", "--out")
    b.set_defaults(func=cmd_bounds)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    if args.command in ("simulate", "bounds") and args.M is None:
        print("orsig: error: --M is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as e:
        print(f"orsig: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError, KeyError) as e:
        print(f"orsig: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"orsig: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
