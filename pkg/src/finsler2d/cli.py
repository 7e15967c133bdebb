"""Command-line interface.

Exit codes: 0 success, 1 a check failed or an expectation was not met,
2 bad input (syntax, unknown names, points outside the domain), 3 numeric
failure (degree budget exhausted, degenerate metric, formula mismatch).
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional

from . import __version__, config
from .classify import DEFAULT_THRESHOLD, SUITES, run_suite
from .conformal import PointConformal
from .errors import DegreeExhausted, Finsler2DError, InputError, NegativeRho, NumericError
from .geometry import DEFAULT_DEGREE, frame_at, spray_at

EXAMPLES = ("funk", "berwald-rund")
EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


@dataclass
class RunConfig:
    """Run parameters; everything structural lives in the metric file."""

    command: str
    metric: Optional[str] = None
    suite: list = field(default_factory=lambda: ["full"])
    count: Optional[int] = None
    seed: Optional[int] = None
    box: Optional[list] = None
    degree: int = DEFAULT_DEGREE
    threshold: float = DEFAULT_THRESHOLD
    points: list = field(default_factory=list)
    quantities: list = field(default_factory=list)
    expect: dict = field(default_factory=dict)
    format: str = "text"
    output: Optional[str] = None
    workers: Optional[int] = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise InputError(f"unknown run-config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# -- argument parsing ----------------------------------------------------------


def _point(text: str):
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"point must be four comma-separated numbers: {text!r}")
    if len(vals) != 4:
        raise argparse.ArgumentTypeError(f"point needs x1,x2,y1,y2, got {len(vals)} values")
    return vals


def _expectation(text: str):
    key, sep, val = text.partition("=")
    if not sep or val.lower() not in ("true", "false"):
        raise argparse.ArgumentTypeError(f"expectation must look like CHECK=true|false: {text!r}")
    return key.strip(), val.lower() == "true"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _common(p, metric_required=True):
    if metric_required:
        p.add_argument("--metric", required=True,
                       help="metric file or bundled name (" + ", ".join(config.bundled_names()) + ")")
    p.add_argument("--degree", type=int, default=None, help=f"jet degree budget (default {DEFAULT_DEGREE})")
    p.add_argument("--count", type=int, help="number of sample points")
    p.add_argument("--seed", type=int, help="sampling seed")
    p.add_argument("--box", type=float, nargs=8, metavar="LO/HI",
                   help="sampling box: x1lo x1hi x2lo x2hi y1lo y1hi y2lo y2hi")
    p.add_argument("--format", choices=("text", "json"), default=None)
    p.add_argument("--output", "-o", help="write the report here instead of stdout")
    p.add_argument("--run-config", help="JSON file with run parameters; flags override it")
    p.add_argument("--dump-run-config", action="store_true",
                   help="print the effective run parameters as JSON and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="finsler2d", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", help="print frame, spray and conformal scalars at points")
    _common(p)
    p.add_argument("--point", type=_point, action="append", default=[],
                   help="x1,x2,y1,y2 (repeatable); default: sample from the metric file")
    p.add_argument("--quantity", "-q", action="append", default=[],
                   help="scalar with derivative chain, e.g. 'Q;2;2;2;2' or 'I,1;2' (repeatable)")

    for name, helptext in (("classify", "run checks and report verdicts"),
                           ("verify", "run the identity suite")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        if name == "classify":
            p.add_argument("--suite", action="append",
                           help="suite or check id (repeatable): " + ", ".join(SUITES))
        p.add_argument("--threshold", type=float)
        p.add_argument("--expect", type=_expectation, action="append", default=[],
                       help="CHECK=true|false, added to the file's [expect] table")
        p.add_argument("--workers", type=int, help="worker processes (env FINSLER2D_WORKERS)")

    p = sub.add_parser("example", help="classify a bundled example: " + ", ".join(EXAMPLES))
    p.add_argument("name")
    _common(p, metric_required=False)
    p.add_argument("--workers", type=int)
    return parser


def run_config_from_args(args) -> RunConfig:
    base = {}
    if getattr(args, "run_config", None):
        try:
            with open(args.run_config, encoding="utf-8") as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read run config {args.run_config}: {exc}") from None
    rc = RunConfig.from_dict({"command": args.command, **{k: v for k, v in base.items()
                                                         if k != "command"}})
    if args.command == "example":
        rc.metric = args.name
        rc.suite = ["full"]
    elif args.metric:
        rc.metric = args.metric
    if args.command == "verify":
        rc.suite = ["identities"]
    for key in ("count", "seed", "degree", "format", "output", "threshold", "workers"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(rc, key, val)
    if args.box is not None:
        rc.box = [[args.box[2 * i], args.box[2 * i + 1]] for i in range(4)]
    if getattr(args, "suite", None):
        rc.suite = list(args.suite)
    if getattr(args, "point", None):
        rc.points = [list(p) for p in args.point]
    if getattr(args, "quantity", None):
        rc.quantities = list(args.quantity)
    for k, v in getattr(args, "expect", None) or []:
        rc.expect[k] = v
    return rc


# -- eval ----------------------------------------------------------------------

_QUANTITY = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)((?:[;,][12ab])*)$")


def _base_quantity(name, geo, pc):
    table = {
        "F": lambda: geo.F,
        "L": lambda: geo.L,
        "I": lambda: geo.I,
        "J": lambda: geo.J,
        "I_2": lambda: geo.I_2,
        "phi": lambda: pc.phi,
        "sigma": lambda: pc.sigma,
        "rho": lambda: pc.rho,
        "P": lambda: pc.P,
        "Q": lambda: pc.Q,
        "psi": lambda: pc.psi,
        "chi": lambda: pc.chi,
        "Ibar": lambda: pc.I_bar,
        "Jbar": lambda: pc.J,
        "Ibar_d": lambda: pc.I_bar_d,
    }
    if name not in table:
        raise InputError(f"unknown quantity {name!r}; known: {', '.join(table)}")
    if pc is None and name not in ("F", "L", "I", "J", "I_2"):
        raise InputError(f"quantity {name!r} needs a conformal factor phi in the metric file")
    return table[name]()


def eval_quantity(expr: str, geo, pc: Optional[PointConformal]):
    """Value of ``expr`` such as ``Q;2;2;2;2``: a base scalar then derivative operators."""
    m = _QUANTITY.match(expr.replace(" ", ""))
    if not m:
        raise InputError(f"cannot parse quantity {expr!r}; expected NAME followed by ;1 ;2 ,1 ,2 "
                         "(or ;a ;b ,a ,b for derivatives with respect to exp(phi) F)")
    name, chain = m.groups()
    ops = re.findall(r"[;,][12ab]", chain)
    try:
        value = _base_quantity(name, geo, pc)
        for op in ops:
            if op[1] in "ab" and pc is None:
                raise InputError(f"operator {op} needs a conformal factor phi")
            fn = {";1": geo.vd1, ";2": geo.vd2, ",1": geo.hd1, ",2": geo.hd2}.get(op)
            if fn is None:
                fn = {";a": pc.vda, ";b": pc.vdb, ",a": pc.hda, ",b": pc.hdb}[op]
            value = fn(value)
    except DegreeExhausted as exc:
        raise DegreeExhausted(
            f"degree budget {geo.F.degree} exhausted while evaluating {expr} "
            f"(operator chain {name}{''.join(ops)}): {exc}") from None
    return value.value


def _safe(fn):
    """``fn()``, or ``None`` when the value is unavailable at this point or degree."""
    try:
        return fn()
    except (NegativeRho, DegreeExhausted):
        return None


def barred_values(pc: PointConformal) -> dict:
    from .geometry import _vals

    getters = {
        "sigma": lambda: pc.sigma,
        "rho": lambda: pc.rho,
        "P": lambda: pc.P,
        "Q": lambda: pc.Q,
        "psi": lambda: pc.psi,
        "chi": lambda: pc.chi,
        "G": lambda: pc.G,
        "barthel": lambda: pc.Gj,
        "berwald": lambda: pc.Gjk,
        "berwald_curvature": lambda: pc.B,
        "D": lambda: pc.D,
        "ell_lo": lambda: pc.ell_lo,
        "ell_hi": lambda: pc.ell_hi,
        "m_lo": lambda: pc.m_lo,
        "m_hi": lambda: pc.m_hi,
        "I": lambda: pc.I_bar,
        "J": lambda: pc.J,
        "T": lambda: pc.T,
        "I_d": lambda: pc.I_bar_d,
    }
    return {k: _safe(lambda fn=fn: _vals(fn())) for k, fn in getters.items()}


def _section(fn):
    try:
        return fn().values()
    except DegreeExhausted as exc:
        return {"unavailable": f"degree budget too small: {exc}"}


def cmd_eval(rc: RunConfig, cfg: config.MetricConfig) -> tuple[dict, int]:
    surface = cfg.surface(rc.degree)
    spec = cfg.conformal(rc.degree) if cfg.phi is not None else None
    points = [tuple(p) for p in rc.points] or _plan(rc, cfg).points()
    rows = []
    for p in points:
        if not surface.contains(p):
            raise InputError(f"point {p} is outside the domain of {cfg.name}: "
                             + " and ".join(cfg.domain.sources))
        row = {"point": list(p)}
        row["frame"] = _section(lambda: frame_at(surface, p))
        row["spray"] = _section(lambda: spray_at(surface, p))
        geo = surface.at(p)
        pc = None
        if spec is not None:
            pc = spec.at(p)
            row["barred"] = barred_values(pc)
        if rc.quantities:
            row["quantities"] = {q: eval_quantity(q, geo, pc) for q in rc.quantities}
        rows.append(row)
    meta = {"metric": cfg.name, "degree": rc.degree, "version": __version__}
    return {"schema": "finsler2d.eval/1", "metadata": meta, "points": rows}, EXIT_OK


def _fmt(v):
    if v is None:
        return "n/a"
    if isinstance(v, float):
        return f"{v + 0.0:.12g}"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def render_eval_text(doc: dict) -> str:
    lines = [f"metric {doc['metadata']['metric']}  degree {doc['metadata']['degree']}"]
    for row in doc["points"]:
        lines.append("")
        lines.append("point (" + ", ".join(f"{v:g}" for v in row["point"]) + ")")
        for section in ("frame", "spray", "barred", "quantities"):
            if section not in row:
                continue
            lines.append(f"  [{section}]")
            for k, v in row[section].items():
                lines.append(f"    {k:18s} {_fmt(v)}")
    return "\n".join(lines)


# -- classify ------------------------------------------------------------------


def _plan(rc: RunConfig, cfg: config.MetricConfig):
    box = tuple(tuple(b) for b in rc.box) if rc.box else None
    return cfg.plan.with_(count=rc.count, seed=rc.seed, box=box)


def cmd_classify(rc: RunConfig, cfg: config.MetricConfig):
    report = run_suite(cfg.surface(rc.degree), cfg.conformal(rc.degree), _plan(rc, cfg),
                       rc.suite, rc.threshold, rc.workers)
    expected = {**cfg.expect, **rc.expect}
    suite_ids = {c.id for c in report.checks}
    report.expect({k: v for k, v in expected.items() if k in suite_ids})
    return report, (EXIT_OK if report.ok else EXIT_FAIL)


def _g(v):
    return "-" if v is None else f"{v:.3e}"


def render_report_text(report) -> str:
    md = report.metadata
    lines = [
        f"metric {md['metric']}   phi {md['phi']}   eps {md['epsilon']:+d}   degree {md['degree']}   "
        f"points {md['count']}   seed {md['seed']}   threshold {md['threshold']:g}",
        "",
        f"{'check':34s} {'status':7s} {'max(norm)':>10s} {'max(raw)':>10s} {'n':>4s}  anchor",
    ]
    for c in report.checks:
        lines.append(f"{c.id:34s} {c.status:7s} {_g(c.max):>10s} {_g(c.max_raw):>10s} "
                     f"{c.applicable:>4d}  {c.anchor}")
        if c.errors:
            e = c.errors[0]
            lines.append(f"{'':34s} error at point {e['index']}: {e['type']}: {e['message']}")
    if report.point_errors:
        lines.append("")
        lines.append(f"{len(report.point_errors)} point(s) skipped:")
        for e in report.point_errors[:5]:
            lines.append(f"  #{e['index']} {e['type']}: {e['message']}")
    if report.expectations:
        lines.append("")
        lines.append("expectations:")
        for e in report.expectations:
            mark = "ok  " if e["ok"] else "FAIL"
            lines.append(f"  {mark} {e['id']} expected {e['expected']} got {e['actual']}")
    lines.append("")
    lines.append("OK" if report.ok else "FAILED")
    return "\n".join(lines)


# -- entry point -----------------------------------------------------------------


def _emit(text: str, rc: RunConfig):
    if rc.output:
        with open(rc.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = run_config_from_args(args)
        if args.dump_run_config:
            print(rc.to_json())
            return EXIT_OK
        if rc.command == "example" and rc.metric not in EXAMPLES:
            raise InputError(f"unknown example {rc.metric!r}; choose from {', '.join(EXAMPLES)}")
        cfg = config.load(rc.metric)
        if rc.command == "eval":
            doc, code = cmd_eval(rc, cfg)
            text = json.dumps(doc, indent=2) if rc.format == "json" else render_eval_text(doc)
        else:
            report, code = cmd_classify(rc, cfg)
            text = report.to_json() if rc.format == "json" else render_report_text(report)
        _emit(text, rc)
        return code
    except InputError as exc:
        print(f"finsler2d: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"finsler2d: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except Finsler2DError as exc:
        print(f"finsler2d: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
