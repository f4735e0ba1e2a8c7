"""Experiment configuration: a flat ``key = value`` format.

Lines are ``key = value``; ``#`` starts a comment; ``[name]`` headers group
keys visually but do not namespace them, so a key may appear only once in
the whole file.  Values are JSON (numbers, strings, lists, true/false) or a
bare word, which is read as a string.  A list given for a sweepable scalar
key expands into one child run per combination.

Parsing collects every problem before failing, and reports them together in
a ``ConfigError``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace

import numpy as np

from mfl.errors import ConfigError, MflError
from mfl.kernels import REGISTRY
from mfl.models import FAMILIES, DiffusionSpec, ParamBox, make_model
from mfl.rng import child_seed
from mfl.simulate import InitialLaw, TimeGrid
from mfl.stats import LOSSES

KINDS = ("simulate", "estimate", "fisher", "lan", "normality", "risk",
         "chaos-rate", "kl-proxy", "nondegeneracy", "identifiability")

# key -> (type, default); ``REQUIRED`` marks keys with no default
REQUIRED = object()
KEYS = {
    "kind": (str, None),
    "model": (str, REQUIRED),
    "f": (str, "identity"),
    "g": (str, "gaussian"),
    "link": (str, "tanh"),
    "d": (int, 1),
    "sigma": (object, 1.0),
    "box_lower": (list, None),
    "box_upper": (list, None),
    "theta": (list, None),
    "theta2": (list, None),
    "u": (list, None),
    "loss": (str, "squared_norm"),
    "loss_c": (float, 1.0),
    "method": (str, None),
    "n_starts": (int, 8),
    "N": (int, 100),
    "N_levels": (list, [100, 1000, 10000]),
    "N_ref": (int, None),
    "T": (float, 1.0),
    "m": (int, 100),
    "R": (int, 1),
    "seed": (int, 0),
    "init": (str, "point"),
    "init_mean": (float, 0.0),
    "init_var": (float, 0.0),
    "init_low": (float, 0.0),
    "init_high": (float, 1.0),
    "band": (list, None),
    "scan_points": (int, 0),
    "xi_max": (float, 10.0),
    "n_xi": (int, 201),
    "n_pairs": (int, 32),
    "n_directions": (int, 64),
    "out": (str, None),
}
SWEEPABLE = ("N", "T", "m", "R", "seed", "loss_c", "N_ref", "init_mean", "init_var")
NEEDS_THETA = {k for k in KINDS if k != "nondegeneracy"}

DEFAULT_BOXES = {
    "mckean_ou": ([-3.0, -5.0, -0.1], [-0.2, 5.0, 3.0]),
    "gen_linear": ([-5.0, -5.0], [5.0, 5.0]),
    "double_layer": ([0.1, 0.1, 0.1, 1.5], [5.0, 1.0, 5.0, 5.0]),
    "nonlinear_f": ([0.01], [10.0]),
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    values: dict
    sweep: tuple = ()  # names of keys whose lists expand into child runs
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        value = self.values.get(key)
        return default if value is None else value

    def canonical(self):
        """Key-sorted dict of every resolved value, the input to the config hash."""
        out = {k: v for k, v in self.values.items() if k != "out"}
        out["kind"] = self.kind
        return dict(sorted(out.items()))

    def with_values(self, **changes):
        return replace(self, values={**self.values, **changes})

    # -- objects the experiment code consumes --------------------------------
    def model(self):
        fam = self.values["model"]
        lower, upper = self.values["box_lower"], self.values["box_upper"]
        options = {}
        if fam == "gen_linear":
            options = {"f": self.values["f"], "g": self.values["g"]}
        elif fam == "nonlinear_f":
            options = {"link": self.values["link"], "g": self.values["g"]}
        elif fam == "double_layer":
            options = {"d": self.values["d"]}
        options["diffusion"] = DiffusionSpec.from_value(self.values["sigma"], self.values["d"])
        return make_model(fam, ParamBox(lower, upper), **options)

    def grid(self):
        return TimeGrid(self.values["T"], self.values["m"])

    def init(self):
        v = self.values
        return InitialLaw(v["init"], mean=v["init_mean"], var=v["init_var"],
                          low=v["init_low"], high=v["init_high"])

    def theta(self):
        return np.array(self.values["theta"], dtype=float)

    def children(self):
        """One config per combination of swept values, each with a derived seed."""
        if not self.sweep:
            return [self]
        lists = [self.values[k] for k in self.sweep]
        out = []
        for idx, combo in enumerate(itertools.product(*lists)):
            vals = dict(self.values)
            vals.update(zip(self.sweep, combo))
            if "seed" not in self.sweep:
                vals["seed"] = child_seed(self.values["seed"], "sweep", idx)
            out.append(ExperimentConfig(self.kind, vals))
        return out


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _coerce(key, value, kind, errors, line):
    where = f"line {line}: " if line else ""
    if value is None:
        return None
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append(f"{where}{key} must be a number, got {value!r}")
            return None
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            errors.append(f"{where}{key} must be an integer, got {value!r}")
            return None
        return int(value)
    if kind is str:
        if not isinstance(value, str):
            errors.append(f"{where}{key} must be a string, got {value!r}")
            return None
        return value
    if kind is list:
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            errors.append(f"{where}{key} must be a list of numbers, got {value!r}")
            return None
        return [float(v) for v in value] if key != "N_levels" else [int(v) for v in value]
    return value


def _tokenize(text, errors):
    raw, lines = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            continue
        key, sep, value = stripped.partition("=")
        key = key.strip()
        if not sep or not key:
            errors.append(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
            continue
        if key in raw:
            errors.append(f"line {lineno}: duplicate key {key!r} (first set on line {lines[key]})")
            continue
        raw[key] = _parse_value(value.strip())
        lines[key] = lineno
    return raw, lines


def parse_config(text, kind=None, overrides=None):
    """Parse and validate; ``kind`` and ``overrides`` (e.g. a CLI seed) take precedence over the file."""
    errors = []
    raw, lines = _tokenize(text, errors)
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    for key in raw:
        if key not in KEYS:
            errors.append(f"line {lines.get(key, '?')}: unknown key {key!r}")

    file_kind = raw.get("kind")
    if kind is not None and file_kind is not None and file_kind != kind:
        errors.append(f"line {lines['kind']}: config is for kind {file_kind!r}, invoked as {kind!r}")
    kind = kind or file_kind
    if kind is None:
        errors.append("missing experiment kind")
    elif kind not in KINDS:
        errors.append(f"unknown experiment kind {kind!r}; known: {', '.join(KINDS)}")

    values, sweep = {}, []
    for key, (typ, default) in KEYS.items():
        if key == "kind":
            continue
        if key not in raw:
            if default is REQUIRED:
                errors.append(f"missing required key {key!r}")
                default = None
            values[key] = list(default) if isinstance(default, list) else default
            continue
        value = raw[key]
        if key in SWEEPABLE and isinstance(value, list):
            if not value:
                errors.append(f"line {lines.get(key, '?')}: empty sweep list for {key!r}")
                values[key] = None
                continue
            values[key] = [_coerce(key, v, typ, errors, lines.get(key)) for v in value]
            sweep.append(key)
        else:
            values[key] = _coerce(key, value, typ, errors, lines.get(key))

    if not errors:
        _check_semantics(kind, values, sweep, lines, errors)
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(kind, values, tuple(sweep), lines)


def _check_semantics(kind, v, sweep, lines, errors):
    fam = v["model"]
    if fam not in FAMILIES:
        errors.append(f"unknown model {fam!r}; known: {', '.join(sorted(FAMILIES))}")
        return
    for key in ("f", "g", "link"):
        if v[key] not in REGISTRY:
            errors.append(f"unknown kernel {v[key]!r} for {key}; known: {', '.join(sorted(REGISTRY))}")
    if v["loss"] not in LOSSES:
        errors.append(f"unknown loss {v['loss']!r}; known: {', '.join(sorted(LOSSES))}")
    if v["init"] not in ("point", "gaussian", "uniform"):
        errors.append(f"unknown initial law {v['init']!r}")
    if v["method"] not in (None, "linear", "numeric"):
        errors.append(f"unknown method {v['method']!r}; use linear or numeric")
    if v["box_lower"] is None and v["box_upper"] is None:
        v["box_lower"], v["box_upper"] = (list(b) for b in DEFAULT_BOXES[fam])
    elif v["box_lower"] is None or v["box_upper"] is None:
        errors.append("box_lower and box_upper must be given together")
        return
    if v["method"] is None:
        v["method"] = "linear" if fam in ("mckean_ou", "gen_linear") else "numeric"
    if v["method"] == "linear" and fam not in ("mckean_ou", "gen_linear"):
        errors.append(f"method 'linear' needs a linear family, {fam} is not")
    for key in ("N", "m", "R", "n_starts", "n_xi", "n_pairs", "n_directions", "d"):
        vals = v[key] if key in sweep else [v[key]]
        if any(x is not None and x < 1 for x in vals):
            errors.append(f"{key} must be positive")
    if kind in ("chaos-rate", "kl-proxy") and len(set(v["N_levels"])) < (3 if kind == "chaos-rate" else 2):
        errors.append("N_levels needs at least three distinct values" if kind == "chaos-rate"
                      else "N_levels needs at least two values")
    if kind in NEEDS_THETA and v["theta"] is None:
        errors.append(f"kind {kind!r} requires theta")
    if kind == "identifiability" and v["theta2"] is None:
        errors.append("kind 'identifiability' requires theta2")
    if kind in ("lan", "normality", "risk") and "R" not in sweep and v["R"] < 2:
        errors.append(f"kind {kind!r} needs R >= 2")
    if v["band"] is not None and len(v["band"]) != 2:
        errors.append("band must be [low, high]")
    if errors:
        return
    try:
        model = ExperimentConfig(kind, v).model()
    except (MflError, ValueError, KeyError) as exc:
        errors.append(f"invalid model: {exc}")
        return
    for key in ("theta", "theta2"):
        if v[key] is None:
            continue
        report = model.validate(v[key])
        where = f"line {lines[key]}: " if key in lines else ""
        errors.extend(f"{where}{key}: {msg}" for msg in report.violations)
    if v["u"] is not None and len(v["u"]) != model.p:
        errors.append(f"u must have length {model.p}")
