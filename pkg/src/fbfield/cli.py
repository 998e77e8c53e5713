"""Command-line front end.

Exit codes: 0 success, 1 a verification check failed (or a numerical
failure), 2 usage error.  Floats are written with 17 significant digits.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from . import __version__
from .errors import DomainError, FieldError
from .gaussfield import FieldPoint, build_cov, kernel_block, sample
from .kernels import KernelId, Tag
from .martingales import (
    MartingaleSpec,
    build_martingale,
    dyadic_grid,
    l2_gap,
    martingale_audit,
    parity_gram,
)
from .mbm import HurstProfile, cohen_discrepancy, mbm_cov_x, mbm_cov_y, mbm_sample, parse_profile_table
from .mcoracle import MAScheme, default_scheme, ma_sample, verify_against
from .rng import check_seed

__all__ = ["main", "parse_grid", "run"]

class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # one-line diagnostic, exit 2
        raise UsageError(message)


def fmt(x: float) -> str:
    return format(float(x) + 0.0, ".17g")  # + 0.0 turns -0 into 0


def parse_grid(text: str) -> list[float]:
    """``a:b:n`` gives n equispaced points on [a, b]; otherwise a comma-separated list."""
    text = text.strip()
    try:
        if ":" in text:
            a, b, n = text.split(":")
            n = int(n)
            if n < 1:
                raise ValueError
            return [float(x) for x in np.linspace(float(a), float(b), n)]
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad grid {text!r}; use a:b:n or a comma-separated list") from None
    if not values:
        raise UsageError("empty grid")
    return values


def _floats(text: str, what: str) -> list[float]:
    try:
        out = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad {what} list {text!r}") from None
    if not out:
        raise UsageError(f"empty {what} list")
    return out


def parse_pairs(text: str) -> list[tuple[float, float]]:
    """``"2,1;4,2"`` -> [(2, 1), (4, 2)]."""
    pairs = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        vals = _floats(chunk, "pair")
        if len(vals) != 2:
            raise UsageError(f"pair {chunk!r} must have exactly two numbers")
        pairs.append((vals[0], vals[1]))
    if not pairs:
        raise UsageError("no (t, s) pairs given")
    return pairs


def parse_profile(text: str) -> HurstProfile:
    """``const:H``, ``ramp:H0,H1[,T]``, or ``file:PATH`` (two-column table)."""
    kind, _, rest = text.partition(":")
    if kind == "const":
        return HurstProfile.constant(_floats(rest, "profile")[0])
    if kind == "ramp":
        vals = _floats(rest, "profile")
        if len(vals) not in (2, 3):
            raise UsageError("ramp profile is ramp:H0,H1[,T]")
        return HurstProfile.ramp(*vals)
    if kind == "file":
        try:
            with open(rest, encoding="utf-8") as fh:
                return parse_profile_table(fh.read())
        except OSError as exc:
            raise UsageError(f"cannot read profile table: {exc.strerror}") from None
    raise UsageError(f"bad profile {text!r}; use const:H, ramp:H0,H1[,T] or file:PATH")


def _kernel(text: str) -> KernelId:
    try:
        return KernelId.parse(text)
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def _points(args) -> list[FieldPoint]:
    hs = _floats(args.H, "H")
    if args.H2 is not None:
        hs += [h for h in _floats(args.H2, "H2") if h not in hs]
    grid = parse_grid(args.grid)
    return [FieldPoint(t, h) for h in hs for t in grid]


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


@dataclass
class Result:
    columns: list[str]
    rows: list[list[Any]]
    summary: dict
    code: int = 0
    failed: str = ""


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def render(result: Result, args, config: dict) -> str:
    if args.format == "json":
        payload = {
            "config": config,
            "columns": result.columns,
            "rows": _jsonable(result.rows),
            "summary": _jsonable(result.summary),
            "exit_code": result.code,
        }
        return json.dumps(payload, indent=1, sort_keys=True) + "\n"
    if args.command == "kernel":
        return fmt(result.rows[0][0]) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if result.columns:
        w.writerow(result.columns)
        for row in result.rows:
            w.writerow([_cell(v) for v in row])
    for key, value in result.summary.items():
        buf.write(f"# {key}: {_cell(value)}\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_kernel(args) -> Result:
    kid = _kernel(args.id)
    h2 = args.H if args.H2 is None else float(args.H2)
    pi, pj = (kid.parity or (None, None))
    if kid.needs_nonnegative_time and (args.t < 0 or args.s < 0):
        raise DomainError(f"kernel {kid} needs nonnegative times")
    value = float(kernel_block(kid, float(args.H), h2, args.t, args.s, pi, pj))
    return Result(["value"], [[value]], {})


def _ensemble_rows(e) -> list[list]:
    rows = []
    for p in range(e.n_paths):
        for k, pt in enumerate(e.grid):
            rows.append([p, k, pt.t, pt.h, e.values[p, k]])
    return rows


def cmd_covmat(args) -> Result:
    m = build_cov(_points(args), _kernel(args.kernel))
    parity = m.kernel.tag is Tag.FIELD_PARITY
    cols = ["i", "j", "t_i", "H_i", "t_j", "H_j", "value"]
    if parity:
        cols += ["parity_i", "parity_j"]
    rows = []
    for i, p in enumerate(m.points):
        for j, q in enumerate(m.points):
            row = [i, j, p.t, p.h, q.t, q.h, m.entries[i, j]]
            if parity:
                row += [p.parity, q.parity]
            rows.append(row)
    return Result(cols, rows, {"n_points": m.n})


def _scheme(args, times, kind: str) -> MAScheme:
    if args.L is None and args.mesh is None:
        return default_scheme(times, kind)
    base = default_scheme(times, kind)
    return MAScheme(args.L or base.L, args.mesh or base.h, kind)


def cmd_sample(args) -> Result:
    kid = _kernel(args.kernel)
    points = _points(args)
    if args.method == "cholesky":
        e = sample(build_cov(points, kid), args.n, args.seed)
    else:
        kinds = {Tag.DFBF: "nonanticipating", Tag.WELL_BALANCED: "well_balanced"}
        if kid.tag not in kinds:
            raise UsageError("moving_average sampling supports the dfbf and wb kernels only")
        e = ma_sample(points, None, _scheme(args, [p.t for p in points], kinds[kid.tag]), args.n, args.seed)
    return Result(["path_id", "point_index", "t", "H", "value"], _ensemble_rows(e), {"n_paths": e.n_paths, "method": e.method})


def cmd_mc_verify(args) -> Result:
    kid = _kernel(args.kernel)
    points = _points(args)
    scheme = _scheme(args, [p.t for p in points], args.kind)
    e = ma_sample(points, None, scheme, args.n, args.seed)
    report = verify_against(kid, e, args.sigmas)
    rows = [
        [c.i, c.j, c.point_i.t, c.point_i.h, c.point_j.t, c.point_j.h, c.estimate, c.std_error, c.closed_form, c.budget, c.passed]
        for c in report.checks
    ]
    cols = ["i", "j", "t_i", "H_i", "t_j", "H_j", "estimate", "std_error", "closed_form", "budget", "passed"]
    summary = {"L": scheme.L, "mesh": scheme.h, "n_checks": len(rows), "n_failed": report.n_failed, "passed": report.passed}
    code = 0 if report.passed else 1
    return Result(cols, rows, summary, code, "" if report.passed else "mc-verify: covariance outside the tolerance band")


def cmd_martingale(args) -> Result:
    grid = dyadic_grid(64) if args.grid is None else tuple(parse_grid(args.grid))
    spec = MartingaleSpec(args.H, args.parity, grid, args.method)
    audit = martingale_audit(MartingaleSpec(args.H, args.parity, grid, "projection"))
    summary = {
        "martingale_error": audit.martingale_error,
        "slope": audit.slope,
        "slope_expected": audit.slope_expected,
        "orthogonality_error": audit.orthogonality_error,
        "adaptedness_error": audit.adaptedness_error,
    }
    ok = audit.passed(args.rel_tol, args.slope_tol)
    if spec.method == "stieltjes":
        summary["terminal_l2_gap"] = l2_gap(spec)
    rows = [[k, t, v] for k, (t, v) in enumerate(zip(grid, audit.variances))]
    if args.n:
        if args.seed is None:
            raise UsageError("--seed is required when --n is given")
        paths = sample(parity_gram(spec), args.n, args.seed)
        m = build_martingale(spec, paths, [len(grid) - 1])
        summary["terminal_variance_empirical"] = float(np.mean(m.values[:, 0] ** 2))
    summary["passed"] = ok
    return Result(["index", "t", "var_M"], rows, summary, 0 if ok else 1, "" if ok else "martingale audit")


def cmd_mbm(args) -> Result:
    p = parse_profile(args.profile)
    grid = parse_grid(args.grid)
    which = args.which.upper()
    if args.mode == "cov":
        fn = mbm_cov_x if which == "X" else mbm_cov_y
        rows = [
            [i, j, t, p(t), s, p(s), fn(p, t, s)] for i, t in enumerate(grid) for j, s in enumerate(grid)
        ]
        return Result(["i", "j", "t_i", "H_i", "t_j", "H_j", "value"], rows, {"process": which})
    if args.seed is None:
        raise UsageError("--seed is required for sampling")
    e = mbm_sample(p, grid, which, args.n, args.seed)
    return Result(["path_id", "point_index", "t", "H", "value"], _ensemble_rows(e), {"process": which, "n_paths": e.n_paths})


def cmd_cohen(args) -> Result:
    report = cohen_discrepancy(args.H, parse_pairs(args.pairs), args.tol)
    rows = [[r.t, r.s, r.r_x, r.r_y] for r in report.pairs]
    summary = {
        "spread_r_X": report.spread_x,
        "spread_r_Y": report.spread_y,
        "r_Y_coefficient": report.r_y_coefficient,
        "r_Y_constant": report.r_y_constant,
        "r_X_varies": report.r_x_varies,
        "witnessed": report.witnessed,
    }
    if report.note:
        summary["note"] = report.note
        return Result(["t", "s", "r_X", "r_Y"], rows, summary, 0)
    failed = ""
    if not report.r_y_constant:
        failed = "cohen-check: r_Y not constant"
    elif not report.r_x_varies:
        failed = f"cohen-check: r_X spread {report.spread_x:.3g} <= {report.witness_tol:g} across the given pairs"
    return Result(["t", "s", "r_X", "r_Y"], rows, summary, 1 if failed else 0, failed)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="output file (default: standard output)")


def _seed(text: str) -> int:
    try:
        return check_seed(int(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fbfield", description="Fractional Brownian field covariances, samplers and checks.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("kernel", help="evaluate one covariance")
    p.add_argument("--id", required=True, help="fbm, fbm_odd, fbm_even, dfbf, field_parity:i,j, fbf, wb")
    p.add_argument("--H", type=float, required=True)
    p.add_argument("--H2", type=float)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--s", type=float, required=True)
    _common(p)

    for name, helptext in (("covmat", "emit a Gram matrix"), ("sample", "emit sampled paths"), ("mc-verify", "moving-average Monte Carlo vs closed form")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--kernel", required=True)
        p.add_argument("--grid", required=True, help="a:b:n or comma list of times")
        p.add_argument("--H", required=True, help="Hurst index or comma list")
        p.add_argument("--H2", help="additional Hurst indices")
        if name != "covmat":
            p.add_argument("--n", type=int, required=True, help="number of paths")
            p.add_argument("--seed", type=_seed)
            p.add_argument("--L", type=float, help="moving-average cutoff")
            p.add_argument("--mesh", type=float, help="moving-average cell width")
        if name == "sample":
            p.add_argument("--method", choices=("cholesky", "moving_average"), default="cholesky")
        if name == "mc-verify":
            p.add_argument("--kind", choices=("nonanticipating", "well_balanced"), default="nonanticipating")
            p.add_argument("--sigmas", type=float, default=4.0)
        _common(p)

    p = sub.add_parser("martingale", help="fundamental martingale audit")
    p.add_argument("--H", type=float, required=True)
    p.add_argument("--parity", choices=("odd", "even"), required=True)
    p.add_argument("--grid", help="increasing positive times (default: 64-point geometric grid on (0, 1])")
    p.add_argument("--method", choices=("projection", "stieltjes"), default="projection")
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--rel-tol", type=float, default=1e-10)
    p.add_argument("--slope-tol", type=float, default=0.05)
    _common(p)

    p = sub.add_parser("mbm", help="multifractional Brownian motion along a profile")
    p.add_argument("--profile", required=True, help="const:H, ramp:H0,H1[,T] or file:PATH")
    p.add_argument("--grid", required=True)
    p.add_argument("--which", choices=("X", "Y", "x", "y"), default="X")
    p.add_argument("--mode", choices=("cov", "sample"), default="cov")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=_seed)
    _common(p)

    p = sub.add_parser("cohen-check", help="nonanticipating vs well-balanced dual-pair covariances")
    p.add_argument("--H", type=float, required=True)
    p.add_argument("--pairs", required=True, help='"t,s;t,s;..."')
    p.add_argument("--tol", type=float, default=1e-3, help="minimal spread of r_X that counts as varying")
    _common(p)
    return parser


COMMANDS = {
    "kernel": cmd_kernel,
    "covmat": cmd_covmat,
    "sample": cmd_sample,
    "mc-verify": cmd_mc_verify,
    "martingale": cmd_martingale,
    "mbm": cmd_mbm,
    "cohen-check": cmd_cohen,
}


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.command in ("sample", "mc-verify") and args.seed is None:
            raise UsageError("--seed is required for sampling")
        if getattr(args, "n", 0) is not None and getattr(args, "n", 0) < 0:
            raise UsageError("--n must be nonnegative")
        config = {k: v for k, v in sorted(vars(args).items()) if k not in ("out",)}
        result = COMMANDS[args.command](args)
    except UsageError as exc:
        stderr.write(f"fbfield: error: {exc}\n")
        return 2
    except DomainError as exc:
        stderr.write(f"fbfield: error: {exc}\n")
        return 2
    except FieldError as exc:
        stderr.write(f"fbfield: numerical failure: {type(exc).__name__}: {exc}\n")
        return 1
    text = render(result, args, config)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    if result.code:
        stderr.write(f"fbfield: check failed: {result.failed}\n")
    return result.code


def main(argv: Sequence[str] | None = None) -> None:
    sys.exit(run(argv))
