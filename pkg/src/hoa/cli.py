"""Command-line front end: ``hoa derive | hoa | verify | sweep | parse-check``.

Exit codes: 0 success, 1 usage or configuration error, 2 verification
failure, 3 resource ceiling (term count, Fock dimension, coherent tail).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

from .dsl import BUILTIN_NAMES, SystemDef, builtin, parse_system, render_system
from .errors import DslError, HoaError, IntegratorError, ResourceCeilingError, TailLossError
from .moments import moment_report
from .oracle import DEFAULT_DIMENSION_CEILING, run_oracle
from .solver import TIME, taylor_solve

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_RESOURCE = 0, 1, 2, 3

SWEEP_COLUMNS = ["system", "l", "g", "t", "alpha_re", "alpha_im", "d_l", "A_l", "R_l1"]
VERIFY_COLUMNS = SWEEP_COLUMNS + [
    "symbolic_d_l",
    "rel_dev",
    "pass",
    "cutoff_A",
    "cutoff_B",
    "cutoff_C",
    "tail_loss",
    "norm_drift",
]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    systems: list[str] = field(default_factory=lambda: ["six_wave"])
    order: int = 2
    l_max: int = 2
    g: list[float] = field(default_factory=list)
    t: list[float] = field(default_factory=list)
    alpha_re: list[float] = field(default_factory=list)
    alpha_im: list[float] = field(default_factory=lambda: [0.0])
    cutoffs: list[int] | None = None
    format: str = "pretty"
    out: str | None = None
    tolerance: float = 1e-4
    workers: int = 1
    latex: bool = False
    operator: str | None = None

    def validate(self, need_grid: bool):
        if self.order < 1:
            raise UsageError("--order must be at least 1")
        if self.l_max < 1:
            raise UsageError("--l must be at least 1")
        if need_grid and not (self.g and self.t and self.alpha_re and self.alpha_im):
            raise UsageError("the parameter grid is empty: give --g, --t and --alpha-re (or --grid-file)")
        if self.workers < 1:
            raise UsageError("--workers must be at least 1")

    def grid(self):
        return [
            (g, t, complex(ar, ai))
            for g, t, ar, ai in product(self.g, self.t, self.alpha_re, self.alpha_im)
        ]


def load_system(spec: str) -> SystemDef:
    """Builtin name, ``@path`` to a source file, or a path ending in ``.hdsl``."""
    if spec in BUILTIN_NAMES:
        return builtin(spec)
    path = spec[1:] if spec.startswith("@") else spec
    p = Path(path)
    if spec.startswith("@") or p.suffix == ".hdsl" or p.exists():
        try:
            text = p.read_bytes()
        except OSError as exc:
            raise UsageError(f"cannot read system file {path!r}: {exc.strerror}") from None
        return parse_system(text)
    raise UsageError(f"unknown system {spec!r}; use one of {', '.join(BUILTIN_NAMES)} or @file.hdsl")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hoa", description="Short-time Heisenberg solutions and higher-order antibunching.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, grid=True):
        p.add_argument("--system", action="append", help="builtin name or @file.hdsl (repeatable)")
        p.add_argument("--config", help="JSON file with RunConfig fields")
        p.add_argument("--order", type=int)
        p.add_argument("--format", choices=["json", "csv", "pretty"])
        p.add_argument("--out")
        if grid:
            p.add_argument("--l", dest="l_max", type=int)
            p.add_argument("--g", type=float, nargs="+")
            p.add_argument("--t", type=float, nargs="+")
            p.add_argument("--alpha-re", "--alpha", dest="alpha_re", type=float, nargs="+")
            p.add_argument("--alpha-im", dest="alpha_im", type=float, nargs="+")
            p.add_argument("--grid-file")
            p.add_argument("--workers", type=int)

    p = sub.add_parser("derive", help="print the Taylor solution of a ladder operator")
    common(p, grid=False)
    p.add_argument("--operator", help="mode label, or label + 'd' for the creator (default: pump)")
    p.add_argument("--latex", action="store_true", default=None)

    p = sub.add_parser("hoa", help="symbolic d(l), A_l, R(l,1) and an optional numeric table")
    common(p)

    p = sub.add_parser("verify", help="compare symbolic d(l) against the Fock-space oracle")
    common(p)
    p.add_argument("--cutoffs", help="comma-separated per-mode cutoffs")
    p.add_argument("--tolerance", type=float)

    p = sub.add_parser("sweep", help="numeric d(l) table over a parameter grid")
    common(p)

    p = sub.add_parser("parse-check", help="parse a Hamiltonian file and print its canonical form")
    p.add_argument("source", help="path to a .hdsl file, or '-' for stdin")
    p.add_argument("--format", choices=["json", "pretty"], default="pretty")
    return parser


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot load config {args.config!r}: {exc}") from None
        if "system" in data:
            data["systems"] = data.pop("system")
        if isinstance(data.get("systems"), str):
            data["systems"] = [data["systems"]]
        for key, value in data.items():
            if not hasattr(cfg, key):
                raise UsageError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
    grid_file = getattr(args, "grid_file", None)
    if grid_file:
        try:
            grid = json.loads(Path(grid_file).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot load grid file {grid_file!r}: {exc}") from None
        for key in ("g", "t", "alpha_re", "alpha_im"):
            if key in grid:
                setattr(cfg, key, [float(x) for x in grid[key]])
    if args.system:
        cfg.systems = args.system
    for key in ("order", "format", "out", "l_max", "g", "t", "alpha_re", "alpha_im", "workers", "tolerance", "latex", "operator"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    cutoffs = getattr(args, "cutoffs", None)
    if cutoffs:
        try:
            cfg.cutoffs = [int(x) for x in cutoffs.split(",")]
        except ValueError:
            raise UsageError("--cutoffs must be comma-separated integers") from None
    return cfg


def _emit(text: str, cfg: RunConfig, stdout):
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)


def _csv_text(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({k: _csv_value(row.get(k, "")) for k in columns})
    return buf.getvalue()


def _csv_value(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return v


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- commands -----------------------------------------------------------------


def _latex_layout(series, labels) -> str:
    groups: dict = {}
    for (mono, syms), v in series.sorted_items():
        groups.setdefault(syms, {})[(mono, ())] = v
    from .algebra import OperatorPoly
    from .scalars import GaussianRational

    parts = []
    for syms in sorted(groups, key=lambda s: (dict(s).get(TIME, 0), s)):
        body = OperatorPoly(groups[syms]).to_latex(labels)
        sym = "".join(f"{k}^{{{e}}}" if e != 1 else k for k, e in syms)
        if len(groups[syms]) > 1 and sym:
            parts.append(f"+{sym}\\left[{body}\\right]")
        elif sym:
            (_, v), = groups[syms].items()
            # fold the symbol monomial in after the numeric coefficient
            mono_only = OperatorPoly({k: GaussianRational(1) for k in groups[syms]}).to_latex(labels)
            coeff = OperatorPoly.scalar(v).to_latex(labels)
            coeff = "" if coeff == "1" else ("-" if coeff == "-1" else coeff)
            text = f"{coeff}{sym}{mono_only}"
            parts.append(text if text.startswith("-") else f"+{text}")
        else:
            parts.append(body if body.startswith("-") else f"+{body}")
    return "".join(parts).lstrip("+")


def cmd_derive(cfg: RunConfig, stdout) -> int:
    if len(cfg.systems) != 1:
        raise UsageError("derive takes exactly one --system")
    system = load_system(cfg.systems[0])
    cfg.validate(need_grid=False)
    op = cfg.operator or system.labels[system.pump_mode]
    sol = taylor_solve(system, op, cfg.order)
    if cfg.latex:
        text = f"{op}(t) = {_latex_layout(sol.series, system.labels)}\n"
    elif cfg.format == "json":
        text = json.dumps(sol.to_json(), indent=2, sort_keys=True) + "\n"
    else:
        text = f"{op}(t) = {sol.series.format(system.labels)}\n"
    _emit(text, cfg, stdout)
    return EXIT_OK


def _symbolic(system: SystemDef, cfg: RunConfig):
    sol = taylor_solve(system, system.labels[system.pump_mode], cfg.order)
    return moment_report(system, sol, cfg.l_max)


def cmd_hoa(cfg: RunConfig, stdout) -> int:
    cfg.validate(need_grid=False)
    blocks, all_rows, reports = [], [], []
    for spec in cfg.systems:
        system = load_system(spec)
        report = _symbolic(system, cfg)
        rows = []
        for g, t, a in cfg.grid():
            rows.extend(report.evaluate(g, t, a))
        report.numeric = rows
        reports.append(report)
        all_rows.extend(rows)
        lines = [f"system {system.name} (order {cfg.order})"]
        for l in range(1, cfg.l_max + 1):
            lines.append(f"  d({l}) = {report.d(l).format_grouped()}")
        for l in range(1, cfg.l_max + 1):
            ratio = report.criterion_A(l)
            lines.append(
                f"  A_{l} = R({l},1) = [{ratio.numerator.format_grouped()}] / [{ratio.denominator.format_grouped()}] - 1"
            )
        if rows:
            lines.append("  l  g  t  alpha  d_l  A_l")
            for r in rows:
                lines.append(
                    f"  {r['l']}  {r['g']!r}  {r['t']!r}  {complex(r['alpha_re'], r['alpha_im'])}  {r['d_l']!r}  {r['A_l']!r}"
                )
        blocks.append("\n".join(lines))
    if cfg.format == "json":
        text = json.dumps([r.to_json() for r in reports], indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    elif cfg.format == "csv":
        text = _csv_text(all_rows, SWEEP_COLUMNS)
    else:
        text = "\n".join(blocks) + "\n"
        if all_rows:
            neg = [r for r in all_rows if r["d_l"] < 0]
            text += f"summary: d(l) < 0 at {len(neg)} of {len(all_rows)} grid rows\n"
    _emit(text, cfg, stdout)
    return EXIT_OK


def _slope(xs, ys):
    lx = [math.log(x) for x in xs]
    ly = [math.log(y) for y in ys]
    mx, my = sum(lx) / len(lx), sum(ly) / len(ly)
    den = sum((x - mx) ** 2 for x in lx)
    return sum((x - mx) * (y - my) for x, y in zip(lx, ly)) / den


def cmd_verify(cfg: RunConfig, stdout) -> int:
    cfg.validate(need_grid=True)
    rows, slopes = [], []
    for spec in cfg.systems:
        system = load_system(spec)
        report = _symbolic(system, cfg)

        def one(point, system=system):
            g, t, a = point
            return run_oracle(system, g, t, a, cfg.l_max, cfg.cutoffs, ceiling=DEFAULT_DIMENSION_CEILING)

        grid = cfg.grid()
        results = _map(one, grid, cfg.workers)
        for (g, t, a), res in zip(grid, results):
            values = {"g": g, "t": t}
            for l in range(1, cfg.l_max + 1):
                sym = report.d(l).evaluate_real(a, values)
                orc = res.d(l)
                if sym == 0:
                    # d(l) is a difference of terms of size <N>^(l+1); measure
                    # cancellation noise against that scale
                    scale = abs(res.moments[0]) ** (l + 1)
                    rel = abs(orc) / scale if scale else (0.0 if orc == 0 else math.inf)
                else:
                    rel = abs(orc - sym) / abs(sym)
                try:
                    a_l = res.moments[l] / (res.moments[l - 1] * res.moments[0]) - 1
                except ZeroDivisionError:
                    a_l = math.nan
                cut = list(res.cutoffs) + [""] * (3 - len(res.cutoffs))
                rows.append(
                    {
                        "system": system.name,
                        "l": l,
                        "g": g,
                        "t": t,
                        "alpha_re": a.real,
                        "alpha_im": a.imag,
                        "d_l": orc,
                        "A_l": a_l,
                        "R_l1": a_l,
                        "symbolic_d_l": sym,
                        "rel_dev": rel,
                        "pass": rel <= cfg.tolerance,
                        "cutoff_A": cut[0],
                        "cutoff_B": cut[1],
                        "cutoff_C": cut[2],
                        "tail_loss": res.tail_loss,
                        "norm_drift": res.norm_drift,
                    }
                )
        # convergence slope per (l, alpha) over distinct g*t values
        for l in range(1, cfg.l_max + 1):
            for a in sorted({complex(ar, ai) for ar in cfg.alpha_re for ai in cfg.alpha_im}, key=lambda z: (z.real, z.imag)):
                pts = {}
                for r in rows:
                    if r["system"] == system.name and r["l"] == l and complex(r["alpha_re"], r["alpha_im"]) == a:
                        gt = r["g"] * r["t"]
                        if gt > 0 and r["rel_dev"] > 0 and math.isfinite(r["rel_dev"]):
                            pts[gt] = r["rel_dev"]
                if len(pts) >= 3:
                    xs = sorted(pts)
                    s = _slope(xs, [pts[x] for x in xs])
                    slopes.append({"system": system.name, "l": l, "alpha": a, "slope": s, "pass": s >= 1.8})
    ok = all(r["pass"] for r in rows) and all(s["pass"] for s in slopes)
    if cfg.format == "csv":
        text = _csv_text(rows, VERIFY_COLUMNS)
    elif cfg.format == "json":
        payload = {
            "rows": rows,
            "slopes": [{**s, "alpha": [s["alpha"].real, s["alpha"].imag]} for s in slopes],
            "passed": ok,
        }
        text = json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n"
    else:
        lines = []
        for r in rows:
            lines.append(
                f"{r['system']} l={r['l']} g={r['g']!r} t={r['t']!r} alpha={complex(r['alpha_re'], r['alpha_im'])}: "
                f"symbolic {r['symbolic_d_l']:.9e} oracle {r['d_l']:.9e} rel.dev {r['rel_dev']:.3e} "
                f"{'PASS' if r['pass'] else 'FAIL'}"
            )
        for s in slopes:
            lines.append(
                f"{s['system']} l={s['l']} alpha={s['alpha']}: convergence slope {s['slope']:.3f} "
                f"{'PASS' if s['pass'] else 'FAIL'}"
            )
        lines.append(f"overall: {'PASS' if ok else 'FAIL'}")
        text = "\n".join(lines) + "\n"
    _emit(text, cfg, stdout)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_sweep(cfg: RunConfig, stdout) -> int:
    cfg.validate(need_grid=True)
    rows = []
    for spec in cfg.systems:
        system = load_system(spec)
        report = _symbolic(system, cfg)
        per_point = _map(lambda p: report.evaluate(*p), cfg.grid(), cfg.workers)
        by_l: dict[int, list] = {}
        for pr in per_point:
            for r in pr:
                by_l.setdefault(r["l"], []).append(r)
        for l in sorted(by_l):
            rows.extend(by_l[l])
    if cfg.format == "json":
        text = json.dumps(rows, indent=2, sort_keys=True) + "\n"
    else:
        text = _csv_text(rows, SWEEP_COLUMNS)
    _emit(text, cfg, stdout)
    return EXIT_OK


def cmd_parse_check(args, stdout) -> int:
    if args.source == "-":
        data = sys.stdin.buffer.read()
    else:
        try:
            data = Path(args.source).read_bytes()
        except OSError as exc:
            raise UsageError(f"cannot read {args.source!r}: {exc.strerror}") from None
    system = parse_system(data)
    if args.format == "json":
        stdout.write(system.dumps() + "\n")
    else:
        stdout.write(render_system(system))
    return EXIT_OK


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "parse-check":
            return cmd_parse_check(args, stdout)
        cfg = _config_from_args(args)
        if cfg.format is None:
            cfg.format = "pretty"
        if args.command == "derive":
            return cmd_derive(cfg, stdout)
        if args.command == "hoa":
            return cmd_hoa(cfg, stdout)
        if args.command == "verify":
            return cmd_verify(cfg, stdout)
        if args.command == "sweep":
            if cfg.format == "pretty":
                cfg.format = "csv"
            return cmd_sweep(cfg, stdout)
    except UsageError as exc:
        stderr.write(f"hoa: error: {exc}\n")
        return EXIT_USAGE
    except (ResourceCeilingError, TailLossError) as exc:
        stderr.write(f"hoa: resource limit: {exc}\n")
        return EXIT_RESOURCE
    except IntegratorError as exc:
        stderr.write(f"hoa: integrator failure: {exc}\n")
        return EXIT_VERIFY
    except DslError as exc:
        stderr.write(f"hoa: parse error: {exc}\n")
        return EXIT_USAGE
    except HoaError as exc:
        stderr.write(f"hoa: error: {exc}\n")
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
