"""Experiment configuration: typed options, per-experiment defaults, key=value files."""
from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass
from typing import Any, Callable, Optional


class ConfigError(ValueError):
    """Invalid or unknown configuration value."""


# -- value parsers (shared by argparse and the config file reader) -------------

def _int(text: str) -> int:
    try:
        return int(str(text).strip())
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}") from None


def _float(text: str) -> float:
    try:
        v = float(str(text).strip())
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"expected a finite number, got {text!r}")
    return v


def _list(item: Callable[[str], Any]) -> Callable[[str], tuple]:
    def parse(text: str) -> tuple:
        parts = [p for p in str(text).split(",") if p.strip()]
        if not parts:
            raise ConfigError(f"expected a comma-separated list, got {text!r}")
        return tuple(item(p) for p in parts)
    return parse


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _str(text: str) -> str:
    t = str(text).strip()
    if not t:
        raise ConfigError("empty value")
    return t


@dataclass(frozen=True)
class Option:
    parse: Callable[[str], Any]
    help: str
    metavar: Optional[str] = None
    flag: bool = False  # boolean switch on the command line


OPTIONS: dict[str, Option] = {
    "body": Option(_str, "body descriptor, e.g. 'lp(p=0.5,n=10)'", "DESC"),
    "outer": Option(_str, "body to be covered", "DESC"),
    "inner": Option(_str, "covering body (or B in M(K,B))", "DESC"),
    "functional": Option(_str, "one of M, Mstar, Mtilde, MKB, A, ctheta, quasi", "NAME"),
    "n": Option(_list(_int), "dimension(s), comma-separated", "N[,N...]"),
    "k": Option(_list(_int), "projection rank(s), comma-separated", "K[,K...]"),
    "lambda": Option(_list(_float), "subspace proportion(s) in (0,1)", "L[,L...]"),
    "epsilon": Option(_list(_float), "JL distortion(s)", "E[,E...]"),
    "t": Option(_list(_float), "covering radius (radii)", "T[,T...]"),
    "points": Option(_int, "number of JL test points", "N"),
    "theta": Option(_float, "exponent theta for c_theta", "X"),
    "samples": Option(_int, "Monte Carlo samples", "S"),
    "trials": Option(_int, "independent trials", "T"),
    "cloud": Option(_int, "uniform cloud size", "C"),
    "directions": Option(_int, "sampled directions", "D"),
    "delta": Option(_float, "cone half-width in radians", "RAD"),
    "budget": Option(_int, "random pairs for sup estimates", "B"),
    "seed": Option(_int, "root seed (64-bit unsigned)", "SEED"),
    "output": Option(_str, "CSV output path (default: stdout)", "PATH"),
    "refine": Option(_bool, "shrink the greedy center set (small dimensions)", flag=True),
    "centers_out": Option(_str, "write the centers of the (single) radius to this file", "PATH"),
    "method": Option(_str, "JL trial method: frame or direct", "NAME"),
    "fact_c": Option(_float, "constant c in gamma = c sqrt(alpha)", "C"),
    "tol": Option(_float, "bisection tolerance for entropy numbers", "TOL"),
    "transpose": Option(_bool, "use the transposed rotation (symmetry check)", flag=True),
}

COMMON = ("seed", "output")

# subcommand -> (experiment name, allowed keys, defaults)
SUBCOMMANDS: dict[str, tuple[str, tuple, dict]] = {
    "estimate": ("estimate",
                 ("body", "inner", "functional", "samples", "theta", "budget", "n", "k", "cloud"),
                 {"samples": 100_000, "theta": 2.0, "budget": 100_000, "cloud": 100_000}),
    "cover": ("cover",
              ("outer", "inner", "t", "cloud", "refine", "centers_out", "samples"),
              {"cloud": 100_000, "refine": False, "samples": 200_000}),
    "jl": ("jl",
           ("n", "k", "epsilon", "points", "trials", "method"),
           {"points": 10, "trials": 1000, "method": "frame", "epsilon": (0.3, 0.5, 0.8)}),
    "section": ("section_diameter",
                ("body", "lambda", "trials", "directions", "samples"),
                {"trials": 10, "directions": 10_000, "samples": 200_000}),
    "project": ("projection_containment",
                ("body", "lambda", "trials", "cloud", "directions", "delta", "samples"),
                {"trials": 1, "cloud": 1_000_000, "directions": 2000, "delta": 0.05, "samples": 200_000}),
    "global": ("global_form",
               ("body", "trials", "cloud", "directions", "samples", "transpose"),
               {"trials": 1, "cloud": 2000, "directions": 400, "samples": 200_000, "transpose": False}),
    "l1": ("l1_compare", ("n", "samples"), {"n": (16, 64, 256, 1024), "samples": 1_000_000}),
    "fact": ("fact_check",
             ("body", "lambda", "k", "trials", "cloud", "directions", "fact_c", "tol"),
             {"trials": 1, "cloud": 200_000, "directions": 500, "fact_c": 1.0, "tol": 1e-4}),
}

REQUIRED = {
    "estimate": ("functional",),
    "cover": ("outer", "inner", "t"),
    "jl": ("n", "k"),
    "section": ("body", "lambda"),
    "project": ("body", "lambda"),
    "global": ("body",),
    "l1": (),
    "fact": ("body",),
}

FUNCTIONALS = ("M", "Mstar", "Mtilde", "MKB", "A", "ctheta", "quasi")


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative run description; build with :meth:`build`."""

    experiment: str
    command: str
    seed: int = 0
    output: Optional[str] = None
    body: Optional[str] = None
    outer: Optional[str] = None
    inner: Optional[str] = None
    functional: Optional[str] = None
    n: Optional[tuple] = None
    k: Optional[tuple] = None
    lam: Optional[tuple] = None
    epsilon: Optional[tuple] = None
    t: Optional[tuple] = None
    points: Optional[int] = None
    theta: Optional[float] = None
    samples: Optional[int] = None
    trials: Optional[int] = None
    cloud: Optional[int] = None
    directions: Optional[int] = None
    delta: Optional[float] = None
    budget: Optional[int] = None
    refine: bool = False
    centers_out: Optional[str] = None
    method: Optional[str] = None
    fact_c: Optional[float] = None
    tol: Optional[float] = None
    transpose: bool = False
    base_dir: Optional[str] = None

    @classmethod
    def build(cls, command: str, values: dict, base_dir: Optional[str] = None) -> "ExperimentConfig":
        """Validate ``values`` (already parsed) for ``command`` and fill defaults."""
        if command not in SUBCOMMANDS:
            raise ConfigError(f"unknown experiment {command!r}")
        name, allowed, defaults = SUBCOMMANDS[command]
        allowed = set(allowed) | set(COMMON)
        unknown = sorted(set(values) - allowed)
        if unknown:
            raise ConfigError(f"unknown key(s) for {command}: {', '.join(unknown)}")
        merged = dict(defaults)
        merged.update(values)
        missing = [k for k in REQUIRED[command] if merged.get(k) is None]
        if missing:
            raise ConfigError(f"{command} needs: {', '.join(missing)}")
        kwargs = {("lam" if k == "lambda" else k): v for k, v in merged.items()}
        cfg = cls(experiment=name, command=command, base_dir=base_dir, **kwargs)
        cfg._check()
        return cfg

    def _check(self) -> None:
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        for name in ("samples", "trials", "cloud", "directions", "budget", "points"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"{name} must be positive, got {v}")
        if self.samples is not None and self.samples < 2:
            raise ConfigError(f"samples must be >= 2, got {self.samples}")
        for name in ("n", "k"):
            v = getattr(self, name)
            if v is not None and any(x < 1 for x in v):
                raise ConfigError(f"{name} values must be positive, got {v}")
        if self.lam is not None and not all(0.0 < x < 1.0 for x in self.lam):
            raise ConfigError(f"lambda values must lie in (0, 1), got {self.lam}")
        if self.epsilon is not None and not all(x > 0 for x in self.epsilon):
            raise ConfigError(f"epsilon values must be positive, got {self.epsilon}")
        if self.t is not None and not all(x > 0 for x in self.t):
            raise ConfigError(f"t values must be positive, got {self.t}")
        for name in ("theta", "delta", "fact_c", "tol"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive, got {v}")
        if self.theta is not None and self.theta > 2.0:
            raise ConfigError(f"theta must lie in (0, 2], got {self.theta}")
        if self.delta is not None and self.delta >= math.pi / 2:
            raise ConfigError(f"delta must be below pi/2, got {self.delta}")
        if self.functional is not None and self.functional not in FUNCTIONALS:
            raise ConfigError(f"functional must be one of {', '.join(FUNCTIONALS)}, got {self.functional!r}")
        if self.method is not None and self.method not in ("frame", "direct"):
            raise ConfigError(f"method must be frame or direct, got {self.method!r}")
        cmd = self.command
        if cmd == "estimate":
            if self.functional == "A":
                if not (self.n and self.k) or len(self.n) != 1 or len(self.k) != 1:
                    raise ConfigError("functional A needs single --n and --k")
            elif self.body is None:
                raise ConfigError(f"functional {self.functional} needs --body")
            if self.functional == "MKB" and self.inner is None:
                raise ConfigError("functional MKB needs --inner")
        if cmd == "cover" and self.centers_out is not None and len(self.t) != 1:
            raise ConfigError("--centers-out needs a single radius --t")
        if cmd == "jl" and len(self.n) != 1:
            raise ConfigError("jl takes a single --n")
        if cmd == "fact":
            if (self.lam is None) == (self.k is None):
                raise ConfigError("fact needs exactly one of --lambda or --k")
            if self.k is not None and len(self.k) != 1:
                raise ConfigError("fact takes a single --k")
            if self.lam is not None and len(self.lam) != 1:
                raise ConfigError("fact takes a single --lambda")

    def path(self, p: str) -> str:
        """Resolve a path relative to the config file's directory."""
        if self.base_dir and not os.path.isabs(p):
            return os.path.join(self.base_dir, p)
        return p

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


def canonical_key(key: str) -> str:
    return key.strip().replace("-", "_")


def read_config_file(path: str) -> dict:
    """Parse a flat ``key=value`` file; ``#`` starts a comment.

    Returns parsed values keyed by canonical option name; the optional key
    ``experiment`` is returned verbatim.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    out: dict = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        key = canonical_key(key)
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        if key == "experiment":
            out[key] = value.strip()
            continue
        if key not in OPTIONS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = OPTIONS[key].parse(value)
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: {key}: {exc}") from None
    return out
