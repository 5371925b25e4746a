"""Experiment configuration: flat INI sections, full validation, exact
round-trip.

The file format is diff-friendly key=value text in four or five sections
(torus, ensemble, radii, witness, output).  Every field round-trips
bit-exactly through serialize/parse because floats are written with
repr().  validate_config applies every rule the pipeline would later
enforce, so a config that validates cleanly cannot be rejected downstream
for the same reason.
"""

from __future__ import annotations

import configparser
import hashlib
import io as _io
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .allocation import SCHEMES
from .baselines import BASELINES, DEFAULT_ASSIGNMENT_CAP
from .errors import ConfigurationError
from .geometry import TorusSpec
from .matching import POLICIES

__all__ = [
    "ExperimentConfig",
    "ConfigIssue",
    "parse_config",
    "serialize_config",
    "load_config",
    "validate_config",
    "config_sha256",
]


@dataclass(frozen=True)
class ConfigIssue:
    field: str
    rule: str

    def __str__(self) -> str:
        return f"{self.field}: {self.rule}"


@dataclass(frozen=True)
class ExperimentConfig:
    d: int
    L: float
    G: int
    n: int
    realizations: int
    base_seed: int
    scheme: str = "stable"
    policy: str = "min-length"
    baselines: tuple[str, ...] = ("stable",)
    radii_start: float = 0.0
    radii_stop: float = 4.0
    radii_count: int = 81
    witness_enabled: bool = False
    epsilon: float = 0.25
    witness_r: float | None = None
    witness_N: float | None = None
    witness_D: int | None = None
    pilot_realizations: int = 8
    witness_realization: int = 0
    output_dir: str | None = None

    def spec(self) -> TorusSpec:
        return TorusSpec(d=self.d, L=self.L, G=self.G)

    def radii(self) -> np.ndarray:
        return np.linspace(self.radii_start, self.radii_stop, self.radii_count)

    def issues(self) -> list[ConfigIssue]:
        out: list[ConfigIssue] = []

        def bad(field: str, rule: str) -> None:
            out.append(ConfigIssue(field, rule))

        if self.d < 2:
            bad("torus.d", f"dimension must be >= 2, got {self.d}")
        if self.G < 2:
            bad("torus.G", f"grid side must be >= 2, got {self.G}")
        if not (self.L > 0):
            bad("torus.L", f"side length must be positive, got {self.L}")
        if self.n < 1:
            bad("ensemble.n", f"point count must be >= 1, got {self.n}")
        elif self.G >= 2 and self.d >= 2 and self.G**self.d % self.n != 0:
            bad("ensemble.n",
                f"n={self.n} must divide the site count G^d={self.G**self.d}")
        if self.realizations < 1:
            bad("ensemble.realizations",
                f"need at least 1 realization, got {self.realizations}")
        if self.base_seed < 0:
            bad("ensemble.base_seed", "seed must be a nonnegative integer")
        if self.scheme not in SCHEMES:
            bad("ensemble.scheme",
                f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        elif self.scheme == "dyadic" and self.G & (self.G - 1) != 0:
            bad("ensemble.scheme",
                f"dyadic scheme needs G to be a power of 2, got G={self.G}")
        if self.policy not in POLICIES:
            bad("ensemble.policy",
                f"unknown policy {self.policy!r}; expected one of {POLICIES}")
        for b in self.baselines:
            if b not in BASELINES:
                bad("ensemble.baselines",
                    f"unknown baseline {b!r}; expected among {BASELINES}")
        if "optimal" in self.baselines and self.n > DEFAULT_ASSIGNMENT_CAP:
            bad("ensemble.baselines",
                f"optimal assignment is capped at n={DEFAULT_ASSIGNMENT_CAP}")
        if self.radii_count < 2:
            bad("radii.count", f"need at least 2 gridpoints, got {self.radii_count}")
        if not (self.radii_stop > self.radii_start >= 0):
            bad("radii.start",
                "radii must satisfy 0 <= start < stop "
                f"(got start={self.radii_start}, stop={self.radii_stop})")
        if self.witness_enabled:
            if not (0 < self.epsilon < 1):
                bad("witness.epsilon",
                    f"epsilon must lie in (0,1), got {self.epsilon}")
            for name, v in (("witness.r", self.witness_r),
                            ("witness.N", self.witness_N)):
                if v is not None and not (v > 0):
                    bad(name, f"must be positive when given, got {v}")
            if self.witness_D is not None and self.witness_D < 1:
                bad("witness.D", f"D must be >= 1, got {self.witness_D}")
            if (self.witness_r is not None and self.witness_N is not None
                    and 0 < self.epsilon < 1 and self.witness_r > 0
                    and self.witness_N > 0
                    and not (2**self.d * self.witness_r / self.witness_N
                             < self.epsilon / 2)):
                bad("witness.r",
                    f"scale inequality violated: 2^d*r/N = "
                    f"{2**self.d * self.witness_r / self.witness_N:.6g} "
                    f"must be < epsilon/2 = {self.epsilon / 2:.6g}")
            if self.pilot_realizations < 1:
                bad("witness.pilot_realizations", "need at least 1 pilot")
            elif self.pilot_realizations > self.realizations:
                bad("witness.pilot_realizations",
                    f"{self.pilot_realizations} pilots exceed "
                    f"{self.realizations} realizations")
            if not (0 <= self.witness_realization < self.realizations):
                bad("witness.realization",
                    f"index {self.witness_realization} outside "
                    f"[0, {self.realizations})")
        return out


def serialize_config(config: ExperimentConfig) -> str:
    cp = configparser.ConfigParser()
    cp["torus"] = {"d": str(config.d), "L": repr(float(config.L)),
                   "G": str(config.G)}
    cp["ensemble"] = {
        "n": str(config.n),
        "realizations": str(config.realizations),
        "base_seed": str(config.base_seed),
        "scheme": config.scheme,
        "policy": config.policy,
        "baselines": ",".join(config.baselines),
    }
    cp["radii"] = {"start": repr(float(config.radii_start)),
                   "stop": repr(float(config.radii_stop)),
                   "count": str(config.radii_count)}
    wit = {"enabled": "true" if config.witness_enabled else "false",
           "epsilon": repr(float(config.epsilon)),
           "pilot_realizations": str(config.pilot_realizations),
           "realization": str(config.witness_realization)}
    if config.witness_r is not None:
        wit["r"] = repr(float(config.witness_r))
    if config.witness_N is not None:
        wit["N"] = repr(float(config.witness_N))
    if config.witness_D is not None:
        wit["D"] = str(config.witness_D)
    cp["witness"] = wit
    if config.output_dir is not None:
        cp["output"] = {"directory": config.output_dir}
    buf = _io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def parse_config(text: str) -> ExperimentConfig:
    """Parse INI text into a config; malformed syntax, missing required
    keys, or untyped values raise ConfigurationError."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"config syntax error: {exc}") from exc

    def need(section: str, key: str) -> str:
        try:
            return cp[section][key]
        except KeyError:
            raise ConfigurationError(
                f"missing required key [{section}] {key}") from None

    def typed(section: str, key: str, cast, default=None, required=True):
        if not required and (section not in cp or key not in cp[section]):
            return default
        raw = need(section, key)
        try:
            if cast is bool:
                low = raw.strip().lower()
                if low in ("true", "1", "yes", "on"):
                    return True
                if low in ("false", "0", "no", "off"):
                    return False
                raise ValueError(raw)
            return cast(raw)
        except ValueError:
            raise ConfigurationError(
                f"[{section}] {key}: cannot parse {raw!r} as {cast.__name__}"
            ) from None

    baselines_raw = typed("ensemble", "baselines", str, default="stable",
                          required=False)
    baselines = tuple(b.strip() for b in baselines_raw.split(",") if b.strip())
    return ExperimentConfig(
        d=typed("torus", "d", int),
        L=typed("torus", "L", float),
        G=typed("torus", "G", int),
        n=typed("ensemble", "n", int),
        realizations=typed("ensemble", "realizations", int),
        base_seed=typed("ensemble", "base_seed", int),
        scheme=typed("ensemble", "scheme", str, default="stable", required=False),
        policy=typed("ensemble", "policy", str, default="min-length",
                     required=False),
        baselines=baselines,
        radii_start=typed("radii", "start", float),
        radii_stop=typed("radii", "stop", float),
        radii_count=typed("radii", "count", int),
        witness_enabled=typed("witness", "enabled", bool, default=False,
                              required=False),
        epsilon=typed("witness", "epsilon", float, default=0.25, required=False),
        witness_r=typed("witness", "r", float, default=None, required=False),
        witness_N=typed("witness", "N", float, default=None, required=False),
        witness_D=typed("witness", "D", int, default=None, required=False),
        pilot_realizations=typed("witness", "pilot_realizations", int,
                                 default=8, required=False),
        witness_realization=typed("witness", "realization", int, default=0,
                                  required=False),
        output_dir=typed("output", "directory", str, default=None,
                         required=False),
    )


def load_config(path: Path | str) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file not found: {p}")
    return parse_config(p.read_text(encoding="utf-8"))


def validate_config(path: Path | str) -> ExperimentConfig | list[ConfigIssue]:
    """Parse and fully validate a config file.

    Returns the config when every rule passes, otherwise the list of
    violations, each carrying the field name and the rule it broke.
    """
    try:
        config = load_config(path)
    except ConfigurationError as exc:
        return [ConfigIssue("file", str(exc))]
    issues = config.issues()
    return config if not issues else issues


def config_sha256(config: ExperimentConfig) -> str:
    return hashlib.sha256(serialize_config(config).encode()).hexdigest()


def apply_overrides(config: ExperimentConfig, *, seed: int | None = None,
                    scheme: str | None = None, policy: str | None = None,
                    output_dir: str | None = None) -> ExperimentConfig:
    """CLI override hook: replace selected fields, leaving the rest."""
    updates = {}
    if seed is not None:
        updates["base_seed"] = seed
    if scheme is not None:
        updates["scheme"] = scheme
    if policy is not None:
        updates["policy"] = policy
    if output_dir is not None:
        updates["output_dir"] = output_dir
    return replace(config, **updates) if updates else config
