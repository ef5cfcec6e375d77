"""Flat ``dotted.key = value`` experiment configuration.

One file describes one experiment. Blank lines and lines starting with
``#`` are ignored; everything else must be ``key = value``. Keys are
checked against a per-experiment schema, so typos and leftovers fail
loudly instead of being ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError

EXPERIMENTS = ("scan-cost", "solve-gpe", "fit-fidelity", "mps-compile", "sampling-analysis", "burgers-evolve")

REQUIRED = object()


def _int(s):
    return int(s, 0)


def _float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _seed(s):
    v = int(s, 0)
    if not 0 <= v < 2**64:
        raise ValueError("must be an unsigned 64-bit integer")
    return v


def _list(conv):
    def parse(s):
        items = [t.strip() for t in s.split(",")]
        if not items or any(t == "" for t in items):
            raise ValueError("expected a comma-separated list")
        return [conv(t) for t in items]
    parse.__name__ = f"list of {conv.__name__.lstrip('_')}"
    return parse


def _choice(*opts):
    def parse(s):
        if s not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}")
        return s
    parse.__name__ = "choice"
    return parse


def _bool(s):
    low = s.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError("expected true or false")


GRID = {"grid.n": (_int, REQUIRED), "grid.a": (_float, 0.0), "grid.b": (_float, 1.0)}

# keys allowed for each potential kind; "potential.kind" itself is always allowed
POTENTIAL_KINDS = {
    "harmonic": {"potential.center": (_float, 0.5), "potential.strength": (_float, REQUIRED)},
    "bichromatic": {
        "potential.s1": (_float, REQUIRED),
        "potential.s2": (_float, None),
        "potential.ratio": (_float, None),
        "potential.kappa1": (_float, REQUIRED),
        "potential.kappa2": (_float, None),
    },
    # bichromatic lattice with kappa1 = 2 pi m and s1 = 5e3 (m / 16)**2 unless given
    "disordered": {
        "potential.m": (_list(_int), REQUIRED),
        "potential.ratio": (_float, 2.0),
        "potential.s1": (_float, None),
    },
    "zero": {},
}
POTENTIAL_KEYS = {k for d in POTENTIAL_KINDS.values() for k in d} | {"potential.kind"}

SCHEMAS = {
    "scan-cost": {
        **GRID,
        "g": (_float, REQUIRED),
        "scan.step": (_float, 0.1),
        "scan.mode": (_choice("exact", "sampled", "circuit"), "exact"),
        "scan.shots": (_int, 10000),
    },
    "solve-gpe": {
        **GRID,
        "g": (_float, REQUIRED),
        "solver.scheme": (_choice("implicit", "explicit"), "implicit"),
        "solver.dt": (_float, None),
        "solver.tol": (_float, 1e-12),
        "solver.max_iters": (_int, 200000),
    },
    "fit-fidelity": {
        **GRID,
        "g": (_float, REQUIRED),
        "fit.family": (_choice("brickwall", "mps"), "brickwall"),
        "fit.depths": (_list(_int), None),
        "fit.chis": (_list(_int), None),
        "fit.sweeps": (_int, 200),
        "fit.tol": (_float, 1e-10),
    },
    "mps-compile": {
        "mps.n": (_list(_int), REQUIRED),
        "mps.chi": (_list(_int), REQUIRED),
        "mps.count": (_int, 10),
        "mps.real": (_bool, False),
    },
    "sampling-analysis": {
        **GRID,
        "g": (_float, REQUIRED),
        "sampling.shots": (_int, 10000),
        "sampling.repeats": (_int, 500),
    },
    "burgers-evolve": {
        "grid.n": (_int, REQUIRED),
        "grid.a": (_float, 0.0),
        "grid.b": (_float, 1.0),
        "burgers.nu": (_float, REQUIRED),
        "burgers.tau": (_float, None),
        "burgers.steps": (_int, REQUIRED),
        "burgers.init": (_choice("sine", "values"), "sine"),
        "burgers.mode": (_int, 1),
        "burgers.amplitude": (_float, 1.0),
        "burgers.offset": (_float, 0.0),
        "burgers.values": (_list(_float), None),
        "burgers.budget": (_int, 20000),
    },
}

# experiments that take a potential block
WITH_POTENTIAL = {"scan-cost", "solve-gpe", "fit-fidelity", "sampling-analysis"}
COMMON = {"experiment": (_choice(*EXPERIMENTS), None), "seed": (_seed, 0)}


@dataclass
class ExperimentConfig:
    experiment: str
    values: dict
    raw: dict = field(default_factory=dict)  # key -> text as written, for the manifest

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v


def parse_lines(text: str) -> list:
    """``[(key, value, line, value_column)]`` in file order; syntax errors carry line/column."""
    out = []
    seen = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in line:
            col = len(line) - len(line.lstrip()) + 1
            raise ConfigError(f"expected 'key = value', got {stripped!r}", lineno, col)
        key_part, _, val_part = line.partition("=")
        key = key_part.strip()
        key_col = len(key_part) - len(key_part.lstrip()) + 1
        if not key or any(c.isspace() for c in key):
            raise ConfigError(f"invalid key {key!r}", lineno, key_col)
        value = val_part.strip()
        val_col = len(key_part) + 2 + (len(val_part) - len(val_part.lstrip()))
        if value == "":
            raise ConfigError(f"key {key!r} has an empty value", lineno, val_col)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first set on line {seen[key]})", lineno, key_col)
        seen[key] = lineno
        out.append((key, value, lineno, key_col, val_col))
    return out


def parse_config(text: str, experiment: str) -> ExperimentConfig:
    """Parse and validate ``text`` for ``experiment``.

    Missing required keys are reported at the line after the last one,
    naming the key.
    """
    if experiment not in SCHEMAS:
        raise ConfigError(f"unknown experiment {experiment!r}; expected one of {', '.join(EXPERIMENTS)}")
    entries = parse_lines(text)
    end_line = len(text.splitlines()) + 1
    schema = {**COMMON, **SCHEMAS[experiment]}
    if experiment in WITH_POTENTIAL:
        kind_entry = next((e for e in entries if e[0] == "potential.kind"), None)
        if kind_entry is None:
            raise ConfigError("missing required key 'potential.kind'", end_line, 1)
        kind = kind_entry[1]
        if kind not in POTENTIAL_KINDS:
            raise ConfigError(f"potential.kind: expected one of {', '.join(POTENTIAL_KINDS)}, got {kind!r}",
                              kind_entry[2], kind_entry[4])
        schema["potential.kind"] = (str, REQUIRED)
        schema.update(POTENTIAL_KINDS[kind])
    values = {}
    raw = {}
    for key, value, line, key_col, val_col in entries:
        if key not in schema:
            hint = ""
            if key in POTENTIAL_KEYS and experiment in WITH_POTENTIAL:
                hint = f" for potential.kind = {values.get('potential.kind') or kind}"
            raise ConfigError(f"unknown key {key!r}{hint}", line, key_col)
        conv = schema[key][0]
        try:
            values[key] = conv(value)
        except ValueError as exc:
            what = getattr(conv, "__name__", "value").lstrip("_")
            raise ConfigError(f"{key}: cannot parse {value!r} as {what} ({exc})", line, val_col) from None
        raw[key] = value
    for key, (_, default) in schema.items():
        if key not in values:
            if default is REQUIRED:
                raise ConfigError(f"missing required key {key!r}", end_line, 1)
            values[key] = default
    if values["experiment"] is not None and values["experiment"] != experiment:
        line = next(e[2] for e in entries if e[0] == "experiment")
        raise ConfigError(f"config is for {values['experiment']!r}, command line asked for {experiment!r}", line, 1)
    values["experiment"] = experiment
    _cross_checks(values, entries, end_line)
    return ExperimentConfig(experiment, values, raw)


def _where(entries, key, end_line):
    for k, _, line, key_col, _ in entries:
        if k == key:
            return line, key_col
    return end_line, 1


def _cross_checks(values: dict, entries, end_line):
    exp = values["experiment"]
    if values.get("potential.kind") == "bichromatic":
        if (values["potential.s2"] is None) == (values["potential.ratio"] is None):
            raise ConfigError("bichromatic potential needs exactly one of 'potential.s2' and 'potential.ratio'",
                              *_where(entries, "potential.s2" if values["potential.s2"] is not None
                                      else "potential.ratio", end_line))
    if values.get("potential.kind") == "disordered" and exp != "fit-fidelity" and len(values["potential.m"]) != 1:
        raise ConfigError("potential.m takes a single value for this experiment",
                          *_where(entries, "potential.m", end_line))
    if exp == "fit-fidelity":
        key = "fit.depths" if values["fit.family"] == "brickwall" else "fit.chis"
        if values[key] is None:
            raise ConfigError(f"missing required key {key!r} for fit.family = {values['fit.family']}", end_line, 1)
    if exp == "burgers-evolve" and values["burgers.init"] == "values":
        if values["burgers.values"] is None:
            raise ConfigError("missing required key 'burgers.values' for burgers.init = values", end_line, 1)
        if len(values["burgers.values"]) != 1 << values["grid.n"]:
            raise ConfigError(f"burgers.values needs {1 << values['grid.n']} entries",
                              *_where(entries, "burgers.values", end_line))
    if exp == "scan-cost" and values["grid.n"] != 2:
        raise ConfigError("scan-cost uses the two-qubit single-parameter ansatz; grid.n must be 2",
                          *_where(entries, "grid.n", end_line))
