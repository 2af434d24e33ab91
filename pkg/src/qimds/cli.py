"""Command-line entry point: ``qimds <command> [flags]``.

Every command writes long-format CSV (UTF-8, LF) preceded by ``#`` manifest
lines and optionally followed by ``#`` footer lines. Exit codes: 0 ok,
2 invalid input, 3 size cap exceeded, 4 output I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from datetime import datetime, timezone
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .amplitude import EXACT_TIER_MAX_N, probability_oracle
from .analysis import (
    LossModel,
    fringe_contrast,
    hypergeometric_loss_matrix,
    loss_scan,
    loss_sweep,
    surviving_dips,
    map_ordered,
)
from .baselines import DEFAULT_GRID, emergence_run, ssb_scan
from .model import (
    DEFAULT_THETA,
    CapExceededError,
    InterferometerConfig,
    InvalidOutcomeError,
    OutcomeRecord,
)
from .quadrature import (
    eval_R,
    f_surface,
    marginal_p12_collapsed,
    marginal_p12_direct,
    peak_location,
    probability_integral,
    reduced_R,
)

EXIT_OK, EXIT_INPUT, EXIT_CAP, EXIT_IO = 0, 2, 3, 4
THREADS_ENV = "QIMDS_THREADS"


class OutputError(OSError):
    pass


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (
        datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    )
    return when.isoformat(timespec="seconds")


def render(
    command: str,
    params: dict,
    columns: Sequence[str],
    rows: Iterable[Sequence],
    footer: Optional[dict] = None,
    seed: Optional[int] = None,
) -> str:
    """Assemble manifest, CSV body and footer into one document."""
    body = io.StringIO()
    writer = csv.writer(body, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    data = body.getvalue()
    lines = [
        f"# command: {command}",
        f"# parameters: {json.dumps(params, sort_keys=True)}",
        f"# seed: {'' if seed is None else seed}",
        f"# version: {__version__}",
        f"# timestamp: {timestamp()}",
        f"# data_sha256: {hashlib.sha256(data.encode()).hexdigest()}",
    ]
    tail = [f"# {k}: {fmt(v)}" for k, v in (footer or {}).items()]
    return "\n".join(lines) + "\n" + data + ("\n".join(tail) + "\n" if tail else "")


def data_section(text: str) -> str:
    """Non-comment lines; what the determinism contract covers."""
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


def emit(text: str, out_path: Optional[str]) -> None:
    if out_path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {out_path}: {exc}") from exc


# -- commands ---------------------------------------------------------------


def _cfg(args) -> InterferometerConfig:
    return InterferometerConfig.of(args.n_alpha, args.n_beta, args.theta)


def _params(args) -> dict:
    skip = {"func", "out", "threads"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def cmd_prob(args) -> str:
    cfg = _cfg(args)
    out = OutcomeRecord(args.m1, args.m2, args.m_alpha, args.m_beta)
    out.check_against(cfg.source)
    methods = ["oracle", "integral"] if args.method == "both" else [args.method]
    if "oracle" in methods and cfg.total > EXACT_TIER_MAX_N:
        raise CapExceededError(f"oracle method limited to N <= {EXACT_TIER_MAX_N}, got N={cfg.total}")
    values = {}
    for m in methods:
        values[m] = probability_oracle(cfg, out) if m == "oracle" else probability_integral(cfg, out)
    footer = {}
    if len(values) == 2:
        a, b = values["oracle"], values["integral"]
        footer["relative_deviation"] = abs(a - b) / abs(a) if a != 0 else "n/a"
        footer["absolute_deviation"] = abs(a - b)
    return render("prob", _params(args), ["method", "probability"], values.items(), footer)


def cmd_scan(args) -> str:
    cfg = _cfg(args)
    m1, m2 = args.m1, args.m2
    if m1 < 0 or m2 < 0 or m1 + m2 > cfg.total:
        raise InvalidOutcomeError(f"need 0 <= m1 + m2 <= N, got m1={m1}, m2={m2}")
    model = LossModel(args.loss)
    scan = loss_scan(cfg, m1, m2, model, normalized=args.normalized, window=args.window)
    kept = cfg.total - m1 - m2 - args.loss
    columns = ["m_alpha", "m_beta", "probability"]
    footer = {
        "central_feature": scan.central_feature,
        "contrast": scan.contrast,
        "total": scan.total,
        "lost": args.loss,
    }
    cols = [scan.probabilities]
    if args.ssb:
        base = hypergeometric_loss_matrix(kept + args.loss, args.loss) @ ssb_scan(cfg, m1, m2)
        if args.normalized and base.sum() > 0:
            base = base / base.sum()
        cols.append(base)
        columns.append("ssb_probability")
        footer["ssb_contrast"] = fringe_contrast(base, args.window) if len(base) >= args.window else 0.0
    rows = ([a, kept - a, *(c[a] for c in cols)] for a in range(kept + 1))
    return render("scan", _params(args), columns, rows, footer)


def cmd_surface(args) -> str:
    lq, lc, F = f_surface(args.m1, args.m2, args.grid_size)
    rows = ((lq[i], lc[j], F[i, j]) for i in range(len(lq)) for j in range(len(lc)))
    return render("surface", _params(args), ["lambda_q", "lambda_c", "F"], rows)


def cmd_rphi(args) -> str:
    phis = np.linspace(-math.pi, math.pi, args.points)
    R = eval_R(args.m1, args.m2, args.theta, phis)
    red = reduced_R(args.m1, args.m2, phis)
    i = int(np.argmax(np.abs(red) * (phis > 0))) if args.m1 + args.m2 else 0
    footer = {
        "phi0_analytic": peak_location(args.m1, args.m2).phi0 if args.m1 + args.m2 else 0.0,
        "phi0_grid": phis[i],
    }
    rows = ((p, r.real, r.imag, x) for p, r, x in zip(phis, R, red))
    return render("rphi", _params(args), ["phi", "R_real", "R_imag", "reduced"], rows, footer)


def cmd_marginal(args) -> str:
    cfg = _cfg(args)
    N = cfg.total
    Ms = range(N + 1) if args.M is None else [args.M]
    if args.M is not None and not 0 <= args.M <= N:
        raise InvalidOutcomeError(f"need 0 <= M <= N, got M={args.M}")
    pairs = [(m1, M - m1) for M in Ms for m1 in range(M + 1)]

    def row(pair):
        m1, m2 = pair
        values = []
        if args.method in ("collapsed", "both"):
            values.append(marginal_p12_collapsed(cfg, m1, m2))
        if args.method in ("direct", "both"):
            values.append(marginal_p12_direct(cfg, m1, m2))
        return (m1, m2, *values)

    columns = ["m1", "m2"] + (
        ["probability", "probability_direct"] if args.method == "both" else ["probability"]
    )
    rows = map_ordered(row, pairs, args.threads)
    footer = {"total": math.fsum(r[2] for r in rows)}
    return render("marginal", _params(args), columns, rows, footer)


def cmd_emergence(args) -> str:
    state, positions, widths = emergence_run(args.M, args.grid, args.seed)
    rows = [(0, None, widths[0])]
    rows += [(k + 1, x, w) for k, (x, w) in enumerate(zip(positions, widths[1:]))]
    footer = {"posterior_mean": state.circular_mean() if args.M else None}
    return render(
        "emergence", _params(args), ["step", "position", "width"], rows, footer, seed=args.seed
    )


def cmd_loss_sweep(args) -> str:
    cfg = _cfg(args)
    if not 0 <= args.M <= cfg.total or args.loss > cfg.total - args.M:
        raise InvalidOutcomeError("need 0 <= M <= N and loss <= N - M")
    rows = loss_sweep(cfg, args.M, args.loss, threads=args.threads)
    pairs = surviving_dips(rows)
    footer = {"surviving_dips": " ".join(f"{a}/{b}" for a, b in pairs) or "none"}
    return render(
        "loss-sweep",
        _params(args),
        ["m1", "m2", "central_feature", "contrast"],
        ((r.m1, r.m2, r.central_feature, r.contrast) for r in rows),
        footer,
    )


# -- parser -----------------------------------------------------------------


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qimds",
        description="Detection statistics of two Fock-state condensates in a four-detector interferometer.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--out", "-o", default=None, help="output path (default stdout)")
        p.add_argument("--threads", type=int, default=_default_threads(),
                       help=f"worker threads (default ${THREADS_ENV} or 1)")
        p.set_defaults(func=func)
        return p

    def sources(p):
        p.add_argument("--n-alpha", type=int, required=True)
        p.add_argument("--n-beta", type=int, required=True)
        p.add_argument("--theta", type=float, default=DEFAULT_THETA)

    p = add("prob", cmd_prob, "joint probability of one outcome")
    sources(p)
    for name in ("m1", "m2", "m-alpha", "m-beta"):
        p.add_argument(f"--{name}", type=int, required=True)
    p.add_argument("--method", choices=("oracle", "integral", "both"), default="both")

    p = add("scan", cmd_scan, "population scan over m_alpha at fixed (m1, m2)")
    sources(p)
    p.add_argument("--m1", type=int, required=True)
    p.add_argument("--m2", type=int, required=True)
    p.add_argument("--loss", type=int, default=0, help="side particles lost before detection")
    p.add_argument("--ssb", action="store_true", help="add the phase-averaged SSB column")
    p.add_argument("--normalized", action="store_true")
    p.add_argument("--window", type=int, default=5)

    p = add("surface", cmd_surface, "F(Lambda, lambda) on a square grid")
    p.add_argument("--m1", type=int, required=True)
    p.add_argument("--m2", type=int, required=True)
    p.add_argument("--grid-size", type=int, default=201)

    p = add("rphi", cmd_rphi, "R(phi) and its reduced form")
    p.add_argument("--m1", type=int, required=True)
    p.add_argument("--m2", type=int, required=True)
    p.add_argument("--points", type=int, default=2001)
    p.add_argument("--theta", type=float, default=DEFAULT_THETA)

    p = add("marginal", cmd_marginal, "two-detector marginal P(m1, m2)")
    sources(p)
    p.add_argument("--M", type=int, default=None, help="restrict to m1 + m2 = M")
    p.add_argument("--method", choices=("collapsed", "direct", "both"), default="collapsed")

    p = add("emergence", cmd_emergence, "sequential phase-emergence run")
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=DEFAULT_GRID)

    p = add("loss-sweep", cmd_loss_sweep, "find (m1, m2) whose central dip survives particle loss")
    sources(p)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--loss", type=int, required=True)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = args.func(args)
        emit(text, args.out)
    except OutputError as exc:
        print(f"qimds: {exc}", file=sys.stderr)
        return EXIT_IO
    except CapExceededError as exc:
        print(f"qimds: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (InvalidOutcomeError, ValueError) as exc:
        print(f"qimds: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
