"""Experiment configuration: INI-style file, typed parameters, line-referenced errors.

A config has an ``[experiment]`` section (``name``, ``seed``, ``replicates``,
``out``) and a ``[params]`` section. Every key has a command-line flag of the
same name, e.g. ``--kappa 2.0`` or ``--eps_schedule 0.0625,0.03125``.
"""

import configparser
from dataclasses import dataclass, field
import math
import re

from .natural import DEFAULT_SCHEDULE

EXPERIMENTS = ("sle-trace", "gff-probes", "gmc", "minkowski", "natural-param", "zipper",
               "markov-check")

_SCHED = tuple(float(e) for e in DEFAULT_SCHEDULE)

# name -> (type, default, help)
PARAMS = {
    "kappa": (float, 2.0, "SLE parameter in [0, 4)"),
    "gamma": (float, None, "LQG parameter; must satisfy gamma**2 == kappa when given"),
    "gamma_tilde": (float, 0.5, "chaos parameter"),
    "T": (float, 0.5, "capacity horizon"),
    "t": (float, 0.5, "capacity time"),
    "s": (float, 0.25, "earlier capacity time (markov-check)"),
    "dt": (float, 1e-5, "driving-path time step"),
    "eps_lift": (float, 1e-4, "tip lift of the trace computation"),
    "eps": (float, 4e-3, "probe radius"),
    "eps_schedule": (tuple, _SCHED, "comma-separated decreasing scales"),
    "eps_curve": (float, 0.02, "zipper curve probe radius"),
    "eps_boundary": (float, 0.01, "zipper boundary probe radius"),
    "variant": (str, "dirichlet", "field variant"),
    "regime": (str, "boundary", "chaos regime: bulk or boundary"),
    "n_probes": (int, 16, "probes per field sample (gff-probes)"),
    "field_replicates": (int, 10_000, "field Monte Carlo replicates per trace"),
    "segments": (int, 8, "capacity segments"),
    "n_checkpoints": (int, 8, "zipper quantum-time checkpoints"),
    "window_radius": (float, 1.0, "window half-disk radius ('none' for all of H)"),
    "window_exclude": (float, 0.0, "radius of the excluded ball at 0"),
}

# experiment -> keys it uses, with experiment-specific defaults
EXPERIMENT_PARAMS = {
    "sle-trace": {"kappa": 0.0, "T": 1.0, "dt": 1e-3, "eps_lift": 1e-4},
    "gff-probes": {"variant": "dirichlet", "eps": 0.01, "n_probes": 16},
    "gmc": {"gamma_tilde": 0.5, "regime": "boundary", "variant": "neumann",
            "eps_schedule": (0.1, 0.05, 0.02)},
    "minkowski": {"kappa": 2.0, "T": 0.5, "dt": 1e-6, "eps_schedule": _SCHED,
                  "window_radius": 1.0, "window_exclude": 0.1},
    "natural-param": {"kappa": 2.0, "gamma": None, "t": 0.5, "dt": 1e-6, "eps": 4e-3,
                      "field_replicates": 10_000, "segments": 8, "window_radius": None,
                      "window_exclude": 0.1},
    "zipper": {"kappa": 2.0, "T": 0.3, "dt": 1e-5, "eps_curve": 0.02, "eps_boundary": 0.01,
               "n_checkpoints": 8, "window_radius": 1.0},
    "markov-check": {"kappa": 2.0, "s": 0.25, "t": 0.5, "dt": 1e-5, "eps": 4e-3,
                     "field_replicates": 10_000, "segments": 4},
}


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is the 1-based line in the file, if known."""

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = "" if line is None else f"{source or 'config'}:{line}: "
        super().__init__(where + message)


@dataclass
class ExperimentConfig:
    """Experiment name, seeding, replicate count, output directory and parameters."""

    experiment: str
    seed: int = 0
    replicates: int = 1
    out: str = "out"
    params: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict, compare=False, repr=False)
    source: str = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.experiment in EXPERIMENT_PARAMS:
            merged = dict(EXPERIMENT_PARAMS[self.experiment])
            merged.update(self.params)
            self.params = merged

    def __getitem__(self, key):
        return self.params[key]

    def to_dict(self):
        return {"experiment": self.experiment, "seed": self.seed,
                "replicates": self.replicates, "out": self.out,
                "params": {k: (list(v) if isinstance(v, tuple) else v)
                           for k, v in sorted(self.params.items())}}

    def _err(self, msg, key):
        raise ConfigError(msg, self.lines.get(key), self.source)

    def validate(self):
        """Raise :class:`ConfigError` on the first violated rule; return ``self``."""
        if self.experiment not in EXPERIMENTS:
            self._err(f"unknown experiment {self.experiment!r}; choose from "
                      f"{', '.join(EXPERIMENTS)}", "name")
        if not isinstance(self.replicates, int) or self.replicates < 1:
            self._err("replicates must be an integer >= 1", "replicates")
        if not isinstance(self.seed, int) or self.seed < 0:
            self._err("seed must be a non-negative integer", "seed")
        allowed = EXPERIMENT_PARAMS[self.experiment]
        for key in self.params:
            if key not in allowed:
                self._err(f"parameter {key!r} is not used by {self.experiment}", key)
        p = self.params
        if "kappa" in p and not (0.0 <= p["kappa"] < 4.0):
            self._err(f"kappa must lie in [0, 4), got {p['kappa']}", "kappa")
        if p.get("gamma") is not None and "kappa" in p:
            if not math.isclose(p["gamma"] ** 2, p["kappa"], rel_tol=1e-9, abs_tol=1e-12):
                self._err("gamma**2 must equal kappa", "gamma")
        if "eps_schedule" in p:
            sch = p["eps_schedule"]
            if len(sch) < 1 or any(e <= 0 for e in sch) or any(
                    b >= a for a, b in zip(sch, sch[1:])):
                self._err("eps_schedule must be positive and strictly decreasing",
                          "eps_schedule")
        for key in ("T", "t", "dt", "eps", "eps_lift", "eps_curve", "eps_boundary",
                    "window_radius"):
            if key in p and p[key] is not None and not p[key] > 0:
                self._err(f"{key} must be positive", key)
        if "s" in p and "t" in p and not 0.0 <= p["s"] <= p["t"]:
            self._err("need 0 <= s <= t", "s")
        for key in ("n_probes", "field_replicates", "segments", "n_checkpoints"):
            if key in p and p[key] < 1:
                self._err(f"{key} must be >= 1", key)
        if "regime" in p and p["regime"] not in ("bulk", "boundary"):
            self._err("regime must be bulk or boundary", "regime")
        if "variant" in p and p["variant"] not in ("dirichlet", "free", "neumann", "wedge"):
            self._err(f"unknown variant {p['variant']!r}", "variant")
        return self


def convert(key, text):
    """Parse the string form of parameter ``key``."""
    typ = PARAMS[key][0]
    text = str(text).strip()
    if typ is tuple:
        return tuple(float(v) for v in text.split(",") if v.strip())
    if text.lower() in ("none", ""):
        return None
    if typ is int:
        try:
            return int(text)
        except ValueError:
            f = float(text)
            if not f.is_integer():
                raise
            return int(f)
    return typ(text)


def _format(v):
    if isinstance(v, tuple):
        return ",".join(repr(float(e)) for e in v)
    if isinstance(v, float):
        return repr(v)
    return "none" if v is None else str(v)


def serialize(config):
    """INI text that :func:`parse` maps back to an equal config."""
    lines = ["[experiment]", f"name = {config.experiment}", f"seed = {config.seed}",
             f"replicates = {config.replicates}", f"out = {config.out}", "", "[params]"]
    lines += [f"{k} = {_format(v)}" for k, v in sorted(config.params.items())]
    return "\n".join(lines) + "\n"


def _key_lines(text):
    out = {}
    for i, ln in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*[=:]", ln)
        if m:
            out[m.group(1)] = i
    return out


def parse(text, source=None):
    """Parse INI text into a validated :class:`ExperimentConfig`."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None), source) from exc
    lines = _key_lines(text)
    if not cp.has_section("experiment") or "name" not in cp["experiment"]:
        raise ConfigError("missing [experiment] section with a name", 1, source)
    exp = cp["experiment"]
    cfg_lines = dict(lines)

    def num(key, default):
        if key not in exp:
            return default
        try:
            return int(exp[key])
        except ValueError:
            raise ConfigError(f"{key} must be an integer", lines.get(key), source) from None

    params = {}
    if cp.has_section("params"):
        for key, raw in cp["params"].items():
            if key not in PARAMS:
                raise ConfigError(f"unknown parameter {key!r}", lines.get(key), source)
            try:
                params[key] = convert(key, raw)
            except ValueError:
                raise ConfigError(f"cannot parse {key} = {raw!r}", lines.get(key),
                                  source) from None
    for sec in cp.sections():
        if sec not in ("experiment", "params"):
            raise ConfigError(f"unknown section [{sec}]", None, source)
    cfg = ExperimentConfig(exp["name"].strip(), num("seed", 0), num("replicates", 1),
                           exp.get("out", "out").strip(), params, cfg_lines, source)
    return cfg.validate()


def load(path):
    with open(path) as fh:
        return parse(fh.read(), source=str(path))
