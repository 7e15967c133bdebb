"""Metric definition files.

A metric file is TOML::

    name = "funk"

    [params]            # numeric constants usable in every expression
    a1 = 0.1

    [let]               # helper bindings, evaluated in file order
    ay = "a1*y1 + a2*y2"

    [metric]
    F = "ay*sqrt(z1^2 + z2^2)/ax^2"
    phi = "sqrt(z1^2 + z2^2)"          # optional, defaults to 0
    domain = ["ay > 0", "1 - x1^2 - x2^2 > 0"]

    [sample]            # optional default sampling plan
    box = [[-0.3, 0.3], [-0.3, 0.3], [0.5, 1.5], [0.5, 1.5]]
    count = 50
    seed = 0

    [expect]            # optional expected verdicts, keyed by check id
    "class.metrizable" = true

Bundled files live in :mod:`finsler2d.metrics` and can be referred to by
name (``funk``, ``berwald-rund``, ``euclid``).
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .classify import SamplePlan
from .conformal import ConformalSpec
from .errors import DomainError, InputError
from .fields import ZERO
from .geometry import DEFAULT_DEGREE, Surface
from .metricdsl import Condition, FieldDef, check_condition, parse_condition

DEFAULT_BOX = ((-0.5, 0.5), (-0.5, 0.5), (0.5, 1.5), (0.5, 1.5))


class ConfigError(InputError):
    pass


@dataclass(frozen=True)
class Domain:
    """Conjunction of parsed inequalities; points where one is undefined are outside."""

    conditions: tuple = ()
    params: dict = field(default_factory=dict, hash=False)
    lets: tuple = ()

    def __call__(self, point) -> bool:
        try:
            return all(check_condition(c, point, self.params, self.lets) for c in self.conditions)
        except (DomainError, ZeroDivisionError, OverflowError, ValueError):
            return False

    @property
    def sources(self):
        return [str(c) for c in self.conditions]


@dataclass
class MetricConfig:
    name: str
    F: FieldDef
    phi: Optional[FieldDef]
    domain: Domain
    plan: SamplePlan
    expect: dict = field(default_factory=dict)
    path: Optional[str] = None

    def surface(self, degree: int = DEFAULT_DEGREE) -> Surface:
        return Surface(self.F, self.domain, self.name, degree)

    def conformal(self, degree: int = DEFAULT_DEGREE) -> ConformalSpec:
        phi = self.phi if self.phi is not None else ZERO
        return ConformalSpec(self.surface(degree), phi, phi.name)


def bundled_names():
    root = resources.files("finsler2d.metrics")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def resolve(ref: str) -> tuple[str, str]:
    """``(text, label)`` for a path or a bundled metric name."""
    path = Path(ref)
    if path.is_file():
        return path.read_text(encoding="utf-8"), str(path)
    stem = path.name[:-5] if path.name.endswith(".toml") else path.name
    if stem in bundled_names():
        res = resources.files("finsler2d.metrics").joinpath(stem + ".toml")
        return res.read_text(encoding="utf-8"), f"<bundled:{stem}>"
    raise ConfigError(f"no metric file {ref!r} and no bundled metric named {stem!r} "
                      f"(bundled: {', '.join(bundled_names())})")


def load(ref: str) -> MetricConfig:
    text, label = resolve(ref)
    return loads(text, label)


def _require_table(doc, key):
    val = doc.get(key, {})
    if not isinstance(val, dict):
        raise ConfigError(f"[{key}] must be a table")
    return val


def _plan(sample: dict, domain: Domain) -> SamplePlan:
    box = sample.get("box", DEFAULT_BOX)
    try:
        box = tuple((float(lo), float(hi)) for lo, hi in box)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[sample] box must be four [lo, hi] pairs: {exc}") from None
    if len(box) != 4:
        raise ConfigError("[sample] box needs one interval per coordinate x1, x2, y1, y2")
    return SamplePlan(box, int(sample.get("count", 50)), int(sample.get("seed", 0)), domain)


def loads(text: str, label: str = "<string>") -> MetricConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{label}: {exc}") from None
    params = {}
    for k, v in _require_table(doc, "params").items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{label}: parameter {k!r} must be a number")
        params[k] = float(v)
    lets = {}
    for k, v in _require_table(doc, "let").items():
        if not isinstance(v, str):
            raise ConfigError(f"{label}: let binding {k!r} must be an expression string")
        lets[k] = v
    metric = _require_table(doc, "metric")
    if "F" not in metric:
        raise ConfigError(f"{label}: [metric] needs an F expression")
    F = FieldDef.from_source("F", metric["F"], params, lets)
    phi = None
    if metric.get("phi") is not None:
        phi = FieldDef.from_source("phi", metric["phi"], params, lets)
    known = set(params) | set(lets)
    conds = tuple(parse_condition(c, known) for c in metric.get("domain", []))
    domain = Domain(conds, params, F.lets)
    expect = {}
    for k, v in _require_table(doc, "expect").items():
        if not isinstance(v, bool):
            raise ConfigError(f"{label}: expectation {k!r} must be true or false")
        expect[k] = v
    name = doc.get("name", Path(label).stem if not label.startswith("<") else "metric")
    return MetricConfig(str(name), F, phi, domain, _plan(_require_table(doc, "sample"), domain),
                        expect, label)


def _toml_str(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def dumps(cfg: MetricConfig) -> str:
    """Serialize back to TOML; ``loads(dumps(c))`` rebuilds an equal config."""
    from .metricdsl import to_source

    out = [f"name = {_toml_str(cfg.name)}", "", "[params]"]
    out += [f"{k} = {v!r}" for k, v in cfg.F.params.items()]
    out += ["", "[let]"]
    out += [f"{k} = {_toml_str(to_source(e))}" for k, e in cfg.F.lets]
    out += ["", "[metric]", f"F = {_toml_str(cfg.F.source)}"]
    if cfg.phi is not None:
        out.append(f"phi = {_toml_str(cfg.phi.source)}")
    out.append("domain = [" + ", ".join(_toml_str(s) for s in cfg.domain.sources) + "]")
    p = cfg.plan
    out += ["", "[sample]", "box = [" + ", ".join(f"[{lo!r}, {hi!r}]" for lo, hi in p.box) + "]",
            f"count = {p.count}", f"seed = {p.seed}"]
    if cfg.expect:
        out += ["", "[expect]"]
        out += [f"{_toml_str(k)} = {'true' if v else 'false'}" for k, v in cfg.expect.items()]
    return "\n".join(out) + "\n"


__all__ = ["ConfigError", "Condition", "Domain", "MetricConfig", "bundled_names", "dumps",
           "load", "loads", "resolve"]
