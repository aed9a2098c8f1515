"""Experiment manifests: INI files describing one scenario plus its sweep.

Sections mirror the config types (``contention``, ``pu``, ``sic``,
``sensing``, ``access``) and add ``scenario``, ``sweep``, ``optimizer``,
``simulation`` and ``output``.  Powers take a ``_db`` suffix to be given
in dB (``p_max_db = 15``); without it they are linear.  Durations are in
seconds.  Example::

    [scenario]
    name = demo

    [access]
    mode = FDTx
    t_frame = 0.015
    p_sen_db = 4.6552
    p_max_db = 15

    [sweep]
    variable = access.p_sen_db
    start = -5
    stop = 15
    num = 41
    objective = eval
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .core import (
    AccessConfig, ContentionParams, Mode, PuModel, Scenario, SensingConfig, SicModel,
    db_to_linear,
)
from .exceptions import ConfigError, DomainError

__all__ = ["Axis", "Manifest", "parse_manifest", "load_manifest", "bundled_manifests", "apply_value"]

_TYPES = {
    "contention": ContentionParams,
    "pu": PuModel,
    "sic": SicModel,
    "sensing": SensingConfig,
    "access": AccessConfig,
}
_POWER_FIELDS = {("pu", "p_pu"), ("access", "p_sen"), ("access", "p_max"), ("access", "p_dat")}
_OBJECTIVES = ("eval", "optimize", "compare", "simulate")
_EXTRA = {
    "scenario": {"name", "description"},
    "sweep": {"variable", "values", "start", "stop", "num", "step", "spacing", "objective",
              "series_variable", "series_values"},
    "optimizer": {"step_db", "min_db", "refine", "rel_tol"},
    "simulation": {"enabled", "cycles", "seed", "policy", "chunk_size"},
    "output": {"dir", "format"},
}


@dataclass(frozen=True)
class Axis:
    """A sweep axis: ``section.field`` (``_db`` allowed for powers) and its values."""

    variable: str
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise ConfigError("sweep axis has no values", field=self.variable)


@dataclass(frozen=True)
class Manifest:
    name: str
    scenario: Scenario
    description: str = ""
    axis: Axis | None = None
    series: Axis | None = None
    objective: str = "eval"
    optimizer: dict = field(default_factory=dict)
    simulation: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    source: str = field(default="", compare=False, repr=False)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.source.encode()).hexdigest()

    @property
    def seed(self) -> int:
        return int(self.simulation.get("seed", 0))

    def to_text(self) -> str:
        """Serialise back to INI.  Powers are written linear, sweep values listed."""
        cp = configparser.ConfigParser(interpolation=None)
        cp["scenario"] = {"name": self.name}
        if self.description:
            cp["scenario"]["description"] = self.description
        for section, part in _section_items(self.scenario):
            cp[section] = {k: _fmt(v) for k, v in part.items()}
        if self.axis is not None:
            sw = {"variable": self.axis.variable, "values": ", ".join(_fmt(v) for v in self.axis.values),
                  "objective": self.objective}
            if self.series is not None:
                sw["series_variable"] = self.series.variable
                sw["series_values"] = ", ".join(_fmt(v) for v in self.series.values)
            cp["sweep"] = sw
        for name in ("optimizer", "simulation", "output"):
            d = getattr(self, name)
            if d:
                cp[name] = {k: _fmt(v) for k, v in d.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, Mode):
        return v.value
    return str(v)


def _section_items(scenario: Scenario):
    for section, _ in _TYPES.items():
        part = getattr(scenario, section)
        d = dataclasses.asdict(part)
        if section == "access":
            d.pop("p_dat")   # tied to p_max
        if section == "sensing" and d.get("epsilon") is None:
            d.pop("epsilon")
        yield section, d


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _line_index(text: str):
    """(section, key) -> 1-based line number, for diagnostics."""
    idx, section = {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            idx[(section, None)] = i
            continue
        m = re.match(r"([^=:]+)[=:]", line)
        if m and section is not None:
            idx[(section, m.group(1).strip().lower())] = i
    return idx


def _float(value, where, line):
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {value!r}", field=where, line=line) from None
    if not math.isfinite(x):
        raise ConfigError(f"expected a finite number, got {value!r}", field=where, line=line)
    return x


def _bool(value, where, line):
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected true/false, got {value!r}", field=where, line=line)


def _field_value(section, key, raw, where, line):
    """Convert one config entry to (field_name, python value)."""
    cls = _TYPES[section]
    names = {f.name: f for f in dataclasses.fields(cls)}
    if key.endswith("_db") and (section, key[:-3]) in _POWER_FIELDS:
        return key[:-3], db_to_linear(_float(raw, where, line))
    if key not in names:
        raise ConfigError(f"unknown field (known: {', '.join(sorted(names))})", field=where, line=line)
    if key == "mode":
        try:
            return key, Mode.parse(raw)
        except DomainError as exc:
            raise ConfigError(str(exc), field=where, line=line) from None
    if key == "n0":
        x = _float(raw, where, line)
        if x != int(x):
            raise ConfigError(f"expected an integer, got {raw!r}", field=where, line=line)
        return key, int(x)
    return key, _float(raw, where, line)


def _values(sec, prefix, variable, idx, sect_name="sweep"):
    where = f"{sect_name}.{prefix}values"
    line = idx.get((sect_name, f"{prefix}values"))
    if f"{prefix}values" in sec:
        raw = sec[f"{prefix}values"].strip()
        items = [s for s in re.split(r"[,\s]+", raw) if s]
        if not items:
            raise ConfigError("empty sweep axis", field=where, line=line)
        return tuple(_float(s, where, line) for s in items)
    if prefix:
        raise ConfigError("series_variable needs series_values", field=where, line=idx.get((sect_name, None)))
    missing = [k for k in ("start", "stop") if k not in sec]
    if missing:
        raise ConfigError(f"give either values or start/stop with num or step (missing {missing[0]})",
                          field=f"{sect_name}.{variable}", line=idx.get((sect_name, None)))
    start = _float(sec["start"], "sweep.start", idx.get((sect_name, "start")))
    stop = _float(sec["stop"], "sweep.stop", idx.get((sect_name, "stop")))
    spacing = sec.get("spacing", "linear").strip().lower()
    if spacing not in ("linear", "log"):
        raise ConfigError("spacing must be linear or log", field="sweep.spacing", line=idx.get((sect_name, "spacing")))
    if "num" in sec:
        num = _float(sec["num"], "sweep.num", idx.get((sect_name, "num")))
        if num != int(num) or num < 1:
            raise ConfigError("num must be a positive integer", field="sweep.num", line=idx.get((sect_name, "num")))
        num = int(num)
    elif "step" in sec:
        step = _float(sec["step"], "sweep.step", idx.get((sect_name, "step")))
        if step <= 0 or stop < start:
            raise ConfigError("step must be > 0 with stop >= start", field="sweep.step",
                              line=idx.get((sect_name, "step")))
        num = int(math.floor((stop - start) / step + 1e-9)) + 1
        stop = start + (num - 1) * step
    else:
        raise ConfigError("give num or step", field="sweep", line=idx.get((sect_name, None)))
    if spacing == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError("log spacing needs positive start and stop", field="sweep.spacing",
                              line=idx.get((sect_name, "spacing")))
        vals = np.geomspace(start, stop, num)
    else:
        vals = np.linspace(start, stop, num)
    return tuple(float(v) for v in vals)


def _check_variable(variable, where, line):
    try:
        section, name = variable.split(".")
    except ValueError:
        raise ConfigError(f"expected section.field, got {variable!r}", field=where, line=line) from None
    if section not in _TYPES:
        raise ConfigError(f"unknown section {section!r}", field=where, line=line)
    base = name[:-3] if name.endswith("_db") and (section, name[:-3]) in _POWER_FIELDS else name
    if base not in {f.name for f in dataclasses.fields(_TYPES[section])} or base in ("mode", "p_dat"):
        raise ConfigError(f"{section} has no sweepable field {name!r}", field=where, line=line)
    return variable


def apply_value(scenario: Scenario, variable: str, value) -> Scenario:
    """Copy of ``scenario`` with one swept field set (``_db`` converted).

    Lowering ``p_max`` below the current ``p_sen`` pulls ``p_sen`` down too.
    """
    section, name = variable.split(".")
    if name.endswith("_db") and (section, name[:-3]) in _POWER_FIELDS:
        name, value = name[:-3], db_to_linear(value)
    if name == "n0":
        value = int(round(value))
    part = getattr(scenario, section)
    if section == "access":
        changes = {name: value}
        if name == "p_max" and part.p_sen > value:
            changes["p_sen"] = value
        new = part.with_(**changes)
    else:
        new = dataclasses.replace(part, **{name: value})
    return dataclasses.replace(scenario, **{section: new})


def parse_manifest(text: str, name: str = "manifest") -> Manifest:
    """Parse and validate a manifest; every problem is a :class:`ConfigError`."""
    idx = _line_index(text)
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"malformed manifest: {exc.message if hasattr(exc, 'message') else exc}",
                          line=line) from None

    known = set(_TYPES) | set(_EXTRA)
    for section in cp.sections():
        if section not in known:
            raise ConfigError(f"unknown section (known: {', '.join(sorted(known))})",
                              field=section, line=idx.get((section, None)))
        if section in _EXTRA:
            for key in cp[section]:
                if key not in _EXTRA[section]:
                    raise ConfigError("unknown key", field=f"{section}.{key}", line=idx.get((section, key)))

    parts = {}
    for section, cls in _TYPES.items():
        kwargs = {}
        if cp.has_section(section):
            for key, raw in cp[section].items():
                fname, val = _field_value(section, key, raw, f"{section}.{key}", idx.get((section, key)))
                if fname in kwargs:
                    raise ConfigError("given twice (linear and dB)", field=f"{section}.{fname}",
                                      line=idx.get((section, key)))
                kwargs[fname] = val
        try:
            parts[section] = cls(**kwargs)
        except DomainError as exc:
            # validation messages lead with the field name; point at its line
            name = str(exc).split(" ", 1)[0]
            line = idx.get((section, name), idx.get((section, name + "_db")))
            if line is None:
                raise ConfigError(str(exc), field=section, line=idx.get((section, None))) from None
            raise ConfigError(str(exc), field=f"{section}.{name}", line=line) from None
    try:
        scenario = Scenario(**parts)
    except DomainError as exc:
        raise ConfigError(str(exc), field="access.t_frame", line=idx.get(("access", "t_frame"))) from None

    sc = cp["scenario"] if cp.has_section("scenario") else {}
    axis = series = None
    objective = "eval"
    if cp.has_section("sweep"):
        sw = cp["sweep"]
        if "variable" not in sw:
            raise ConfigError("missing variable", field="sweep.variable", line=idx.get(("sweep", None)))
        var = _check_variable(sw["variable"].strip(), "sweep.variable", idx.get(("sweep", "variable")))
        axis = Axis(var, _values(sw, "", var, idx))
        if "series_variable" in sw:
            svar = _check_variable(sw["series_variable"].strip(), "sweep.series_variable",
                                   idx.get(("sweep", "series_variable")))
            series = Axis(svar, _values(sw, "series_", svar, idx))
        objective = sw.get("objective", "eval").strip().lower()
        if objective not in _OBJECTIVES:
            raise ConfigError(f"objective must be one of {', '.join(_OBJECTIVES)}",
                              field="sweep.objective", line=idx.get(("sweep", "objective")))
        # every sweep point must give a valid scenario
        for a in (axis, series):
            if a is None:
                continue
            for v in a.values:
                try:
                    apply_value(scenario, a.variable, v)
                except (DomainError, TypeError) as exc:
                    raise ConfigError(f"value {v!r} is invalid: {exc}", field=f"sweep ({a.variable})",
                                      line=idx.get(("sweep", "variable"))) from None

    opt = {}
    if cp.has_section("optimizer"):
        for k, v in cp["optimizer"].items():
            w, ln = f"optimizer.{k}", idx.get(("optimizer", k))
            opt[k] = _bool(v, w, ln) if k == "refine" else _float(v, w, ln)
    sim = {}
    if cp.has_section("simulation"):
        for k, v in cp["simulation"].items():
            w, ln = f"simulation.{k}", idx.get(("simulation", k))
            if k == "enabled":
                sim[k] = _bool(v, w, ln)
            elif k == "policy":
                sim[k] = v.strip()
            else:
                x = _float(v, w, ln)
                if x != int(x) or x < (0 if k == "seed" else 1):
                    raise ConfigError("expected a non-negative integer", field=w, line=ln)
                sim[k] = int(x)
    out = dict(cp["output"]) if cp.has_section("output") else {}
    if out.get("format", "csv") not in ("csv", "json"):
        raise ConfigError("format must be csv or json", field="output.format", line=idx.get(("output", "format")))

    return Manifest(
        name=sc.get("name", name).strip(), description=sc.get("description", "").strip(),
        scenario=scenario, axis=axis, series=series, objective=objective,
        optimizer=opt, simulation=sim, output=out, source=text,
    )


def bundled_manifests() -> list[str]:
    files = resources.files("fdcmac") / "scenarios"
    return sorted(p.name[: -len(".manifest")] for p in files.iterdir() if p.name.endswith(".manifest"))


def load_manifest(path_or_name: str) -> Manifest:
    """Read a manifest from a path, or a bundled one by name (``fig5``)."""
    p = Path(path_or_name)
    if p.is_file():
        text = p.read_text()
        return parse_manifest(text, name=p.stem)
    res = resources.files("fdcmac") / "scenarios" / f"{path_or_name}.manifest"
    if res.is_file():
        return parse_manifest(res.read_text(), name=path_or_name)
    raise ConfigError(f"no such manifest file or bundled scenario (bundled: {', '.join(bundled_manifests())})",
                      field=str(path_or_name))
