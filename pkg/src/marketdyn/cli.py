"""Command-line interface: scenario resolution, analysis dispatch and
tabular output.

Tables go to stdout (or --out) as CSV or JSON-lines with floats rendered
at 17 significant digits, so a run is reproducible bit for bit from its
output.  Diagnostics go to stderr only.  Exit codes: 0 success, 2
configuration or validation error, 3 numerical failure in unbounded
mode.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from . import scenarios as scenariolib
from .analysis import (
    OrbitDomainError,
    OrbitEscapeError,
    PERFECTLY_ELASTIC,
    detect_collapse,
    generate_orbit,
    ped,
)
from .model import CostPricing, DomainError, MapForm, MarketParams, SupplierBehavior
from .scans import ScanConfig, bifurcation_scan, lyapunov_scan
from .scenarios import (
    BifurcationSpec,
    ConfigError,
    LyapunovSpec,
    OrbitSpec,
    PedSpec,
    Scenario,
    builtin_scenarios,
    get_scenario,
    load_scenario,
)

_FORMS = {"canonical": MapForm.CANONICAL, "paper-literal": MapForm.PAPER_LITERAL}


@dataclass
class OutputTable:
    """A fixed-width table of results; every row has one value per column."""

    columns: list[str]
    rows: list[tuple]

    def write(self, stream, fmt: str) -> None:
        if fmt == "csv":
            self._write_csv(stream)
        elif fmt == "jsonl":
            self._write_jsonl(stream)
        else:
            raise ConfigError(f"format must be csv or jsonl, got {fmt!r}")

    def _write_csv(self, stream) -> None:
        stream.write(",".join(self.columns) + "\n")
        for row in self.rows:
            if len(row) != len(self.columns):
                raise AssertionError("row width does not match header")
            stream.write(",".join(_csv_value(v) for v in row) + "\n")

    def _write_jsonl(self, stream) -> None:
        for row in self.rows:
            if len(row) != len(self.columns):
                raise AssertionError("row width does not match header")
            fields = ", ".join(
                f"{json.dumps(c)}: {_json_value(v)}"
                for c, v in zip(self.columns, row)
            )
            stream.write("{" + fields + "}\n")


def _float_repr(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _csv_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _float_repr(v)
    if isinstance(v, int):
        return str(v)
    text = str(v)
    if any(ch in text for ch in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def _json_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "null" if not math.isfinite(v) else _float_repr(v)
    if isinstance(v, int):
        return str(v)
    return json.dumps(str(v))


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", help="builtin scenario name or path to a config file")
    p.add_argument("--form", choices=sorted(_FORMS), help="map form override")
    p.add_argument("--out", help="write the table to this path instead of stdout")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--threads", type=int, default=1)
    for flag in ("--a", "--b", "--v", "--fc", "--margin", "--m", "--seed-d", "--seed-s"):
        p.add_argument(flag, type=float, default=None)


def _scan_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--param", choices=("b", "M", "a"))
    p.add_argument("--min", type=float, default=None)
    p.add_argument("--max", type=float, default=None)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--transient", type=int, default=None)
    p.add_argument("--keep", type=int, default=None)
    p.add_argument("--iters", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marketdyn",
        description="Simulate and analyze the demand-driven supply market model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="iterate a scenario and emit its time series")
    _common_flags(p)
    p.add_argument("--steps", type=int, default=None)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--bounded", dest="bounded", action="store_true", default=None)
    mode.add_argument("--unbounded", dest="bounded", action="store_false")

    p = sub.add_parser("bifurcate", help="bifurcation diagram over a parameter grid")
    _common_flags(p)
    _scan_flags(p)

    p = sub.add_parser("lyapunov", help="Lyapunov exponent spectrum over a grid")
    _common_flags(p)
    _scan_flags(p)
    p.add_argument("--method", choices=("analytic", "finite-difference"), default="analytic")

    p = sub.add_parser("collapse", help="run bounded dynamics and report the collapse")
    _common_flags(p)
    p.add_argument("--steps", type=int, default=None)

    p = sub.add_parser("ped", help="arc price elasticity of demand between two prices")
    _common_flags(p)
    p.add_argument("--p1", type=float, default=None)
    p.add_argument("--p2", type=float, default=None)

    p = sub.add_parser("scenarios", help="list the builtin scenarios")
    _common_flags(p)

    return parser


_DEFAULT = Scenario(
    name="custom",
    supplier=SupplierBehavior(m=1.0),
    market=MarketParams(a=10.0, b=0.09),
    cost=CostPricing(fc=10.0, v=4.0, margin=0.5),
    analysis=OrbitSpec(steps=100, bounded=True),
)


def _resolve_scenario(args) -> Scenario:
    if args.scenario:
        name = args.scenario
        path = Path(name)
        if os.sep in name or path.suffix or path.is_file():
            if not path.is_file():
                raise ConfigError(f"scenario config file not found: {name}")
            sc = load_scenario(path.read_text())
        else:
            sc = get_scenario(name)
    else:
        sc = _DEFAULT

    market = sc.market
    if args.a is not None or args.b is not None:
        market = MarketParams(
            a=market.a if args.a is None else args.a,
            b=market.b if args.b is None else args.b,
        )
    cost = sc.cost
    if args.v is not None or args.fc is not None or args.margin is not None:
        cost = CostPricing(
            fc=cost.fc if args.fc is None else args.fc,
            v=cost.v if args.v is None else args.v,
            margin=cost.margin if args.margin is None else args.margin,
        )
    supplier = sc.supplier if args.m is None else SupplierBehavior(m=args.m)
    form = sc.form if args.form is None else _FORMS[args.form]
    return replace(
        sc,
        market=market,
        cost=cost,
        supplier=supplier,
        form=form,
        seed_demand=sc.seed_demand if args.seed_d is None else args.seed_d,
        seed_supply=sc.seed_supply if args.seed_s is None else args.seed_s,
    )


def _resolve_scan_config(args, sc: Scenario) -> ScanConfig:
    base = None
    if isinstance(sc.analysis, (BifurcationSpec, LyapunovSpec)):
        base = sc.analysis.config
    if base is None and (args.param is None or args.min is None or args.max is None):
        raise ConfigError(
            "scenario has no scan configuration; pass --param, --min and --max"
        )
    parameter = args.param if args.param is not None else base.parameter
    lo = args.min if args.min is not None else base.lo
    hi = args.max if args.max is not None else base.hi
    points = args.points if args.points is not None else (base.grid_points if base else 1000)
    transient = args.transient if args.transient is not None else (base.transient if base else 2500)
    keep = args.keep if args.keep is not None else (base.keep if base else 500)
    if args.iters is not None:
        iters = args.iters
    elif args.transient is not None or args.keep is not None or base is None:
        iters = transient + keep
    else:
        iters = base.iterations_total
    return ScanConfig(parameter, lo, hi, points, transient, keep, iters)


def _orbit_defaults(sc: Scenario, steps, bounded, fallback_steps=100, fallback_bounded=True):
    if isinstance(sc.analysis, OrbitSpec):
        fallback_steps = sc.analysis.steps
        fallback_bounded = sc.analysis.bounded
    return (
        fallback_steps if steps is None else steps,
        fallback_bounded if bounded is None else bounded,
    )


def _cmd_simulate(args) -> OutputTable:
    sc = _resolve_scenario(args)
    steps, bounded = _orbit_defaults(sc, args.steps, args.bounded)
    orbit = generate_orbit(
        sc.initial_state(), sc.market, sc.cost, sc.supplier,
        steps, bounded=bounded, form=sc.form, scenario=sc.name,
    )
    rows = []
    for n, s in enumerate(orbit.states):
        signal = s.demand / s.supply if s.supply > 0 else math.nan
        rows.append((n, s.demand, s.supply, s.price, signal, s.collapsed))
    return OutputTable(["step", "demand", "supply", "price", "signal", "collapsed"], rows)


def _cmd_bifurcate(args) -> OutputTable:
    sc = _resolve_scenario(args)
    cfg = _resolve_scan_config(args, sc)
    rows = []
    for r in bifurcation_scan(cfg, sc, threads=args.threads):
        for j, d in enumerate(r.attractor_samples):
            rows.append((r.param_value, j, float(d), r.classification))
    return OutputTable(["param_value", "sample_index", "demand", "classification"], rows)


def _cmd_lyapunov(args) -> OutputTable:
    sc = _resolve_scenario(args)
    cfg = _resolve_scan_config(args, sc)
    rows = [
        (r.param_value, r.lam, r.method, r.defined)
        for r in lyapunov_scan(cfg, sc, method=args.method, threads=args.threads)
    ]
    return OutputTable(["param_value", "lambda", "method", "defined"], rows)


def _cmd_collapse(args) -> OutputTable:
    sc = _resolve_scenario(args)
    steps, _ = _orbit_defaults(sc, args.steps, None, fallback_steps=3000)
    orbit = generate_orbit(
        sc.initial_state(), sc.market, sc.cost, sc.supplier,
        steps, bounded=True, form=sc.form, scenario=sc.name,
    )
    report = detect_collapse(orbit)
    if report is None:
        rows = [(False, -1, "")]
    else:
        rows = [(True, report.step, report.trigger)]
    return OutputTable(["collapsed", "step", "trigger"], rows)


def _cmd_ped(args) -> OutputTable:
    sc = _resolve_scenario(args)
    p1, p2 = args.p1, args.p2
    if isinstance(sc.analysis, PedSpec):
        p1 = sc.analysis.p1 if p1 is None else p1
        p2 = sc.analysis.p2 if p2 is None else p2
    if p1 is None or p2 is None:
        raise ConfigError("ped needs --p1 and --p2 (or a scenario with a ped analysis)")
    from .model import demand

    value = ped(p1, p2, sc.market)
    q1, q2 = demand(p1, sc.market), demand(p2, sc.market)
    out = value if isinstance(value, float) else PERFECTLY_ELASTIC
    return OutputTable(["p1", "p2", "q1", "q2", "ped"], [(p1, p2, q1, q2, out)])


def _cmd_scenarios(args) -> OutputTable:
    del args
    kinds = {OrbitSpec: "orbit", BifurcationSpec: "bifurcation",
             LyapunovSpec: "lyapunov", PedSpec: "ped"}
    rows = []
    for sc in builtin_scenarios():
        rows.append((
            sc.name, sc.form.value, sc.supplier.m, sc.market.a, sc.market.b,
            sc.cost.v, sc.cost.fc, sc.cost.margin, sc.seed_demand, sc.seed_supply,
            kinds[type(sc.analysis)], sc.figure or "",
        ))
    return OutputTable(
        ["name", "form", "m", "a", "b", "v", "fc", "margin",
         "seed_d", "seed_s", "analysis", "figure"],
        rows,
    )


_COMMANDS = {
    "simulate": _cmd_simulate,
    "bifurcate": _cmd_bifurcate,
    "lyapunov": _cmd_lyapunov,
    "collapse": _cmd_collapse,
    "ped": _cmd_ped,
    "scenarios": _cmd_scenarios,
}


def run_cli(argv: list[str]) -> int:
    """Parse arguments, run the requested analysis and emit its table."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        table = _COMMANDS[args.command](args)
    except (OrbitDomainError, OrbitEscapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.out:
        with open(args.out, "w", newline="") as fh:
            table.write(fh, args.format)
    else:
        table.write(sys.stdout, args.format)
    return 0


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
