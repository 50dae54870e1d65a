"""Plain-text run configuration: one key=value per line, # comments.

Every knob of a run lives here so that (config, seed) pins down every
output byte apart from timestamps and wall-times.  Unknown keys are
rejected; omitted keys take the defaults below; a config round-trips
through dumps()/parse() unchanged.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

from .assimilation import TwinConfig
from .model import PhysicalParams
from .observations import KINDS, InterpolantSpec
from .spectral import Grid
from .stepping import SCHEMES, StepperConfig

__all__ = ["RunConfig", "ConfigError", "parse", "load", "dumps", "save"]


class ConfigError(ValueError):
    """Malformed text, unknown key, or a value of the wrong type."""


@dataclass(frozen=True)
class RunConfig:
    """Defaults are the calibrated supercritical twin-experiment point:
    velocity-only modal nudging synchronizes at energy rate ~1.9 while the
    mu=0 control stays order one."""

    nu: float = 0.03
    kappa: float = 0.03
    L: float = 2.0
    mu: float = 50.0
    h: float = 0.2
    nx: int = 128
    ny: int = 64
    dealias_fraction: float = 2.0 / 3.0
    dt: float = 5e-3
    scheme: str = "imex-cnab2"
    cfl_target: Optional[float] = None
    interpolant_kind: str = "modal"
    spinup_time: float = 100.0
    run_time: float = 20.0
    v0_policy: str = "zero"
    eta0_policy: str = "zero"
    epsilon: float = 0.0
    sample_cadence: int = 10
    seed: int = 0
    output_dir: str = "runs"
    sweep_mu: Tuple[float, ...] = ()
    sweep_h: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.interpolant_kind not in KINDS:
            raise ConfigError(
                f"interpolant_kind must be one of {KINDS}, got {self.interpolant_kind!r}"
            )
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")

    def grid(self) -> Grid:
        return Grid(self.L, self.nx, self.ny, self.dealias_fraction)

    def physical_params(self) -> PhysicalParams:
        return PhysicalParams(
            nu=self.nu, kappa=self.kappa, L=self.L, mu=self.mu, h=self.h
        )

    def stepper(self) -> StepperConfig:
        return StepperConfig(dt=self.dt, scheme=self.scheme, cfl_target=self.cfl_target)

    def interpolant(self) -> InterpolantSpec:
        return InterpolantSpec(self.interpolant_kind, self.h, self.grid())

    def twin_config(self) -> TwinConfig:
        return TwinConfig(
            params=self.physical_params(),
            spec=self.interpolant(),
            stepper=self.stepper(),
            run_time=self.run_time,
            spinup_time=self.spinup_time,
            v0_policy=self.v0_policy,
            eta0_policy=self.eta0_policy,
            epsilon=self.epsilon,
            sample_cadence=self.sample_cadence,
            seed=self.seed,
        )


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _parse_value(key: str, raw: str):
    f = _FIELDS[key]
    raw = raw.strip()
    if f.type in ("Optional[float]",):
        if raw.lower() in ("", "none"):
            return None
        return float(raw)
    if f.type == "Tuple[float, ...]":
        if raw == "":
            return ()
        return tuple(float(p) for p in raw.split(","))
    if f.type == "float":
        return float(raw)
    if f.type == "int":
        v = float(raw)
        if v != int(v):
            raise ConfigError(f"{key} must be an integer, got {raw!r}")
        return int(v)
    return raw


def parse(text: str) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = body.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(key, raw)
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(f"line {lineno}: bad value for {key}: {e}") from e
    try:
        return RunConfig(**values)
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from e


def dumps(cfg: RunConfig) -> str:
    lines = ["# twin-experiment run configuration", ""]
    for name in _FIELDS:
        v = getattr(cfg, name)
        if v is None:
            text = "none"
        elif isinstance(v, tuple):
            text = ",".join(repr(x) for x in v)
        elif isinstance(v, float):
            text = repr(v)
        else:
            text = str(v)
        lines.append(f"{name} = {text}")
    return "\n".join(lines) + "\n"


def load(path) -> RunConfig:
    return parse(Path(path).read_text())


def save(cfg: RunConfig, path) -> None:
    Path(path).write_text(dumps(cfg))
