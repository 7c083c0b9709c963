"""Command-line front end: deterministic experiment runs with file output.

Commands
--------
regimes       critical-order table over n, or a classification row for (n, s)
constant-a    flux constant by quadrature plus the seeded MC oracle
extend        extension values of a named trace on a (rho, y) sample set
solve-branch  minimal-branch continuation with fold detection
verify        acceptance checks (fast or full tier), machine-readable report

A JSON config file mirroring the flags may be passed with --config; flags
override file values. Outputs are byte-identical for identical config and
seed: floats are printed with 17 significant digits in JSON and 10 in CSV,
and nothing time- or host-dependent is emitted. FRACSTAB_THREADS caps the
worker count for parallelizable table sweeps (ordering in output files is
always input order).

Exit codes: 0 success, 1 unreadable config, 2 domain error, 3 accuracy
error or failed verification.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from .core import Params, normalizations
from .errors import AccuracyError, DomainError, NewtonFailure
from .extension import ExtensionField, RadialFunction, getoor_trace, smooth_bump
from .flux import FluxConstantQuery, magic_constant, magic_constant_mc
from .regimes import classify, critical_s_gelfand, critical_s_radial
from .solver import (
    ContinuationControls,
    assemble,
    continue_branch,
    graded_grid,
    make_nonlinearity,
)
from .verify import run_checks

_COMMANDS = ("regimes", "constant-a", "extend", "solve-branch", "verify")


@dataclass
class RunConfig:
    command: str = ""
    n: int | None = None
    n_max: int | None = None
    s: float | None = None
    beta: float | None = None
    nonlinearity: str = "exp"
    power: float | None = None
    grid_m: int = 160
    max_lambda: float | None = None
    trace: str = "getoor"
    rho: list | None = None
    y: list | None = None
    seed: int = 0
    mc_samples: int = 10_000_000
    out: str | None = None
    format: str = "csv"
    states: bool = False
    tier: str = "fast"
    report: str | None = None

    def validated(self) -> "RunConfig":
        if self.command not in _COMMANDS:
            raise DomainError(f"unknown command {self.command!r}")
        if self.format not in ("csv", "json"):
            raise DomainError(f"format must be csv or json, got {self.format!r}")
        if self.tier not in ("fast", "full"):
            raise DomainError(f"tier must be fast or full, got {self.tier!r}")
        return self


def worker_count() -> int:
    raw = os.environ.get("FRACSTAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise DomainError(f"FRACSTAB_THREADS must be an integer, got {raw!r}")


def _fmt_json(x):
    if isinstance(x, float):
        return float(f"{x:.17g}")
    return x


def _write_rows(path: str | None, columns: list, rows: list, fmt: str) -> None:
    if fmt == "csv":
        lines = [",".join(columns)]
        for row in rows:
            cells = []
            for c in columns:
                v = row[c]
                cells.append(f"{v:.10g}" if isinstance(v, float) else str(v))
            lines.append(",".join(cells))
        text = "\n".join(lines) + "\n"
    else:
        doc = [{c: _fmt_json(row[c]) for c in columns} for row in rows]
        text = json.dumps(doc, indent=1) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _ordered_map(fn, items):
    nw = worker_count()
    if nw <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=nw) as ex:
        return list(ex.map(fn, items))


def cmd_regimes(cfg: RunConfig) -> int:
    if cfg.n is None:
        raise DomainError("regimes requires --n")
    if cfg.s is not None:
        rep = classify(Params(cfg.n, cfg.s))
        columns = [
            "n", "s", "radial_holds", "mu_floor", "gelfand_holds",
            "exp10s_holds", "convex4s_holds",
        ]
        rows = [{
            "n": rep.params.n,
            "s": rep.params.s,
            "radial_holds": int(rep.radial_condition_holds),
            "mu_floor": rep.mu_floor,
            "gelfand_holds": int(rep.gelfand_condition_holds),
            "exp10s_holds": int(rep.exp_10s_holds),
            "convex4s_holds": int(rep.convex_4s_holds),
        }]
        _write_rows(cfg.out, columns, rows, cfg.format)
        print(f"regimes: classified (n={cfg.n}, s={cfg.s})")
        return 0
    n_hi = cfg.n_max if cfg.n_max is not None else cfg.n

    def one(n: int) -> dict:
        rad = critical_s_radial(n)
        gel = critical_s_gelfand(n)
        return {
            "n": n,
            "radial_kind": rad.kind,
            "radial_s_star": rad.value if rad.value is not None else float("nan"),
            "gelfand_kind": gel.kind,
            "gelfand_s_star": gel.value if gel.value is not None else float("nan"),
        }

    rows = _ordered_map(one, list(range(cfg.n, n_hi + 1)))
    columns = ["n", "radial_kind", "radial_s_star", "gelfand_kind", "gelfand_s_star"]
    _write_rows(cfg.out, columns, rows, cfg.format)
    print(f"regimes: critical orders for n in [{cfg.n}, {n_hi}]")
    return 0


def cmd_constant_a(cfg: RunConfig) -> int:
    if cfg.n is None or cfg.s is None or cfg.beta is None:
        raise DomainError("constant-a requires --n, --s and --beta")
    q = FluxConstantQuery(Params(cfg.n, cfg.s), cfg.beta)
    a_quad = magic_constant(q)
    a_mc, se = magic_constant_mc(q, n_samples=cfg.mc_samples, seed=cfg.seed)
    row = {
        "n": cfg.n, "s": cfg.s, "beta": cfg.beta, "seed": cfg.seed,
        "mc_samples": cfg.mc_samples, "quad": a_quad, "mc": a_mc, "mc_se": se,
        "abs_diff": abs(a_quad - a_mc),
    }
    _write_rows(cfg.out, list(row.keys()), [row], cfg.format)
    print(
        f"constant-a: quad={a_quad:.8f} mc={a_mc:.8f} (se {se:.2e}) "
        f"at (n={cfg.n}, s={cfg.s}, beta={cfg.beta})"
    )
    return 0


def cmd_extend(cfg: RunConfig) -> int:
    if cfg.n is None or cfg.s is None:
        raise DomainError("extend requires --n and --s")
    p = Params(cfg.n, cfg.s)
    nodes = graded_grid(cfg.grid_m).nodes
    if cfg.trace == "getoor":
        trace = getoor_trace(p, nodes)
    elif cfg.trace == "bump":
        trace = RadialFunction.from_callable(smooth_bump, nodes)
    else:
        raise DomainError(f"unknown trace {cfg.trace!r} (choose getoor or bump)")
    field = ExtensionField(trace, p)
    rhos = cfg.rho if cfg.rho else [0.0, 0.25, 0.5]
    ys = cfg.y if cfg.y else [0.1, 0.5, 1.0]
    rows = [
        {"rho": float(r), "y": float(yy), "v": field.value(float(r), float(yy))}
        for r in rhos
        for yy in ys
    ]
    _write_rows(cfg.out, ["rho", "y", "v"], rows, cfg.format)
    print(f"extend: {len(rows)} evaluations of the {cfg.trace} trace")
    return 0


def cmd_solve_branch(cfg: RunConfig) -> int:
    if cfg.n is None or cfg.s is None:
        raise DomainError("solve-branch requires --n and --s")
    f = make_nonlinearity(cfg.nonlinearity, cfg.power)
    op = assemble(Params(cfg.n, cfg.s), graded_grid(cfg.grid_m))
    controls = ContinuationControls(
        lam_max=cfg.max_lambda if cfg.max_lambda is not None else float("inf")
    )
    branch = continue_branch(op, f, controls)
    if cfg.out:
        if cfg.format == "csv":
            branch.write_csv(cfg.out)
        else:
            branch.write_json(cfg.out, include_states=cfg.states)
    lam_star = branch.lambda_star
    print(
        f"solve-branch: {len(branch.points)} points, fold_found={branch.fold_found}"
        + (f", lambda*={lam_star:.8f}" if lam_star is not None else "")
    )
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    results = run_checks(cfg.tier)
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"[{status}] {res.name} ({res.seconds:.1f}s)")
    all_passed = all(r.passed for r in results)
    if cfg.report:
        doc = {
            "tier": cfg.tier,
            "all_passed": all_passed,
            "checks": [r.to_dict() for r in results],
        }
        with open(cfg.report, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, default=_fmt_json)
            fh.write("\n")
    if not all_passed:
        failed = ", ".join(r.name for r in results if not r.passed)
        print(f"verify: FAILED checks: {failed}")
        return 3
    print(f"verify: all {len(results)} checks passed ({cfg.tier} tier)")
    return 0


def _parse_float_list(text: str) -> list:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracstab", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file mirroring the flags")
    common.add_argument("--out", help="output file path (stdout if omitted)")
    common.add_argument("--format", choices=("csv", "json"), help="output format")

    pr = sub.add_parser("regimes", parents=[common])
    pr.add_argument("--n", type=int)
    pr.add_argument("--n-max", type=int, dest="n_max")
    pr.add_argument("--s", type=float)

    pc = sub.add_parser("constant-a", parents=[common])
    pc.add_argument("--n", type=int)
    pc.add_argument("--s", type=float)
    pc.add_argument("--beta", type=float)
    pc.add_argument("--seed", type=int)
    pc.add_argument("--mc-samples", type=int, dest="mc_samples")

    pe = sub.add_parser("extend", parents=[common])
    pe.add_argument("--n", type=int)
    pe.add_argument("--s", type=float)
    pe.add_argument("--trace", choices=("getoor", "bump"))
    pe.add_argument("--grid-m", type=int, dest="grid_m")
    pe.add_argument("--rho", type=_parse_float_list)
    pe.add_argument("--y", type=_parse_float_list)

    pb = sub.add_parser("solve-branch", parents=[common])
    pb.add_argument("--n", type=int)
    pb.add_argument("--s", type=float)
    pb.add_argument("--f", choices=("exp", "power", "linear"), dest="nonlinearity")
    pb.add_argument("--power", type=float)
    pb.add_argument("--grid-m", type=int, dest="grid_m")
    pb.add_argument("--max-lambda", type=float, dest="max_lambda")
    pb.add_argument("--states", action="store_true", default=None)

    pv = sub.add_parser("verify", parents=[common])
    pv.add_argument("--tier", choices=("fast", "full"))
    pv.add_argument("--report")
    return ap


_CONFIG_FIELDS = {f.name for f in fields(RunConfig)}


def load_config(args: argparse.Namespace) -> RunConfig:
    base = RunConfig(command=args.command or "")
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValueError(f"config file unreadable: {exc}") from exc
        if not isinstance(doc, dict):
            raise ValueError("config: top level must be a JSON object")
        for key, val in doc.items():
            if key not in _CONFIG_FIELDS:
                raise ValueError(f"config: unknown field {key!r}")
            setattr(base, key, val)
        if base.command and args.command and base.command != args.command:
            raise ValueError("config: field 'command' conflicts with the subcommand")
        base.command = args.command or base.command
    for key, val in vars(args).items():
        if key in ("config",) or val is None:
            continue
        if key in _CONFIG_FIELDS:
            setattr(base, key, val)
    return base.validated()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if not args.command:
        build_parser().print_help()
        return 1
    try:
        cfg = load_config(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    dispatch = {
        "regimes": cmd_regimes,
        "constant-a": cmd_constant_a,
        "extend": cmd_extend,
        "solve-branch": cmd_solve_branch,
        "verify": cmd_verify,
    }
    try:
        return dispatch[cfg.command](cfg)
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 2
    except (AccuracyError, NewtonFailure) as exc:
        print(f"accuracy error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
