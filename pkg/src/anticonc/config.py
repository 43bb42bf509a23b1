"""Experiment configuration read from INI files and command-line overrides.

Layout of a config file::

    [experiment]            ; shared defaults for every subcommand
    seed = 20240601
    n_samples = 200000
    eps = 0.05, 0.2, 1.0

    [spec]
    family = equicorrelated ; or "explicit"
    n = 4
    rho = 0.5
    ; explicit fields use mu = ... and sigma = row-major entries,
    ; or file = PATH (first row mu, then the n rows of sigma)

    [verify]                ; per-subcommand section, overrides [experiment]
    checks = sandwich, var_lower

Precedence, highest first: command-line flag, subcommand section,
``[experiment]``, built-in default.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import os
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import ConfigError
from .field_model import FieldSpec, equicorrelated_spec, validate_spec
from .rng_sampler import StatisticKind

CHECKS = ("sandwich", "exact", "var_lower", "var_upper", "mode", "deng")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.replace(",", " ").split())
    except ValueError as e:
        raise ConfigError(f"expected a list of numbers, got {text!r}") from e


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.replace(",", " ").split())
    except ValueError as e:
        raise ConfigError(f"expected a list of integers, got {text!r}") from e


def _words(text: str) -> tuple[str, ...]:
    return tuple(t for t in text.replace(",", " ").split() if t)


@dataclass(frozen=True)
class SpecSource:
    family: str = "equicorrelated"
    n: int = 2
    rho: float = 0.0
    mu: tuple[float, ...] = ()
    sigma: tuple[float, ...] = ()
    file: str = ""

    def build(self, base_dir: str = ".") -> FieldSpec:
        if self.family == "equicorrelated":
            return equicorrelated_spec(self.n, self.rho)
        if self.family != "explicit":
            raise ConfigError(f"unknown spec family {self.family!r}")
        if self.file:
            path = self.file if os.path.isabs(self.file) else os.path.join(base_dir, self.file)
            if not os.path.isfile(path):
                raise ConfigError(f"spec file not found: {path}")
            with open(path, encoding="utf-8") as fh:
                text = fh.read().replace(",", " ")
            try:
                a = np.atleast_2d(np.loadtxt(io.StringIO(text), comments="#", dtype=np.float64))
            except ValueError as e:
                raise ConfigError(f"cannot parse spec file {path}: {e}") from e
            return validate_spec(a[0], a[1:])
        n = len(self.mu)
        if n == 0 or len(self.sigma) != n * n:
            raise ConfigError(f"explicit spec needs mu (n values) and sigma (n*n values); "
                              f"got {len(self.mu)} and {len(self.sigma)}")
        return validate_spec(np.array(self.mu), np.array(self.sigma).reshape(n, n))


@dataclass(frozen=True)
class ExperimentConfig:
    spec: SpecSource = SpecSource()
    statistic: str = "max"
    eps: tuple[float, ...] = (0.05, 0.2, 1.0)
    n_samples: int = 100_000
    seed: int = 0
    budget: int = 4096
    checks: tuple[str, ...] = ("sandwich",)
    out: str = ""
    workers: int = 1
    var: float | None = None
    c0: float | None = None
    grid: tuple[float, ...] = ()
    n_list: tuple[int, ...] = (2, 4, 16, 64, 256)
    rho_list: tuple[float, ...] = (0.0, 0.25, 0.5, 0.9)
    base_dir: str = "."

    def validate(self, command: str = "") -> ExperimentConfig:
        if not self.eps or any(not e > 0 for e in self.eps):
            raise ConfigError("eps values must be > 0")
        if self.n_samples < 100:
            raise ConfigError("n_samples must be >= 100")
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            StatisticKind.parse(self.statistic)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        if command == "verify":
            if not self.checks:
                raise ConfigError("verify needs at least one check")
            bad = [c for c in self.checks if c not in CHECKS]
            if bad:
                raise ConfigError(f"unknown checks {bad}; choose from {list(CHECKS)}")
        if self.grid and len(self.grid) != 3:
            raise ConfigError("grid takes three values: lo, hi, m")
        return self

    @property
    def kind(self) -> StatisticKind:
        return StatisticKind.parse(self.statistic)

    def field(self) -> FieldSpec:
        return self.spec.build(self.base_dir)

    def to_ini(self) -> str:
        """Canonical text form; reading it back yields an equal config."""
        cp = configparser.ConfigParser(interpolation=None)
        s = self.spec
        cp["spec"] = {"family": s.family, "n": str(s.n), "rho": repr(s.rho),
                      "mu": ", ".join(repr(v) for v in s.mu),
                      "sigma": ", ".join(repr(v) for v in s.sigma), "file": s.file}
        exp = {}
        for f in fields(self):
            if f.name in ("spec", "base_dir"):
                continue
            v = getattr(self, f.name)
            if v is None:
                exp[f.name] = ""
            elif isinstance(v, tuple):
                exp[f.name] = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                exp[f.name] = repr(v)
            else:
                exp[f.name] = str(v)
        cp["experiment"] = exp
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def sha256(self) -> str:
        """Hash of the experiment; ``workers`` and ``out`` do not change results."""
        text = replace(self, workers=1, out="").to_ini()
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


_CASTS = {
    "statistic": str, "out": str,
    "eps": _floats, "grid": _floats, "rho_list": _floats,
    "n_samples": int, "seed": int, "budget": int, "workers": int,
    "n_list": _ints, "checks": _words,
    "var": lambda t: float(t) if t.strip() else None,
    "c0": lambda t: float(t) if t.strip() else None,
}


def _apply(cfg: ExperimentConfig, section) -> ExperimentConfig:
    upd = {}
    for key, raw in section.items():
        key = key.replace("-", "_")
        if key not in _CASTS:
            raise ConfigError(f"unknown key {key!r} in [{section.name}]")
        try:
            upd[key] = _CASTS[key](raw)
        except ValueError as e:
            raise ConfigError(f"bad value for {key}: {raw!r}") from e
    return replace(cfg, **upd)


def _spec_from(section) -> SpecSource:
    d = dict(section)
    unknown = set(d) - {"family", "n", "rho", "mu", "sigma", "file"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in [spec]")
    try:
        return SpecSource(family=d.get("family", "explicit" if ("mu" in d or "file" in d) else "equicorrelated"),
                          n=int(d.get("n", 2)), rho=float(d.get("rho", 0.0)),
                          mu=_floats(d.get("mu", "")), sigma=_floats(d.get("sigma", "")),
                          file=d.get("file", ""))
    except ValueError as e:
        raise ConfigError(f"bad [spec] value: {e}") from e


def load_config(path: str | None, command: str = "", overrides: dict | None = None) -> ExperimentConfig:
    """Resolve a config from an optional INI file plus flag overrides (None = unset)."""
    cfg = ExperimentConfig()
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"config file not found: {path}")
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        try:
            cp.read(path, encoding="utf-8")
        except configparser.Error as e:
            raise ConfigError(f"cannot parse {path}: {e}") from e
        cfg = replace(cfg, base_dir=os.path.dirname(os.path.abspath(path)))
        if cp.has_section("spec"):
            cfg = replace(cfg, spec=_spec_from(cp["spec"]))
        if cp.has_section("experiment"):
            cfg = _apply(cfg, cp["experiment"])
        if command and cp.has_section(command):
            cfg = _apply(cfg, cp[command])
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key == "spec":
            cfg = replace(cfg, spec=val)
        else:
            cfg = replace(cfg, **{key: val})
    return cfg.validate(command)
