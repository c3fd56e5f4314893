"""JSON experiment configuration with strict validation.

One JSON document describes one experiment.  Every block maps onto a frozen
dataclass; unknown keys are rejected with their dotted path and, when it can
be found, the line in the source file.  Lengths accept numbers or strings
such as ``"pi"``, ``"2pi"`` and ``"pi/2"``.
"""

from __future__ import annotations

import dataclasses
import json
import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .errors import ValidationError
from .integrator import StepperConfig
from .model import PARAM_NAMES, HRParameters, preset
from .spectral import DomainSpec

MAX_SEED = 2 ** 64


class ConfigError(ValidationError):
    """Validation failure tied to a key path (and line, when known)."""

    def __init__(self, path: str, message: str, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = f"{path}" + (f" (line {line})" if line else "")
        super().__init__(f"{where}: {message}")


_PI = re.compile(r"^\s*([0-9]*\.?[0-9]*)\s*\*?\s*pi\s*(?:/\s*([0-9]*\.?[0-9]+))?\s*$")


def parse_length(value, path: str = "domain.lengths") -> float:
    if isinstance(value, bool):
        raise ConfigError(path, f"expected a number or a multiple of 'pi', got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _PI.match(value.lower())
        if m:
            num = float(m.group(1)) if m.group(1) else 1.0
            den = float(m.group(2)) if m.group(2) else 1.0
            return num * math.pi / den
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(path, f"expected a number or a multiple of 'pi', got {value!r}")


# ----------------------------------------------------------------------------
# blocks


@dataclass(frozen=True)
class InitialCondition:
    """``zero``, ``constant`` (values = (u, v, w)), ``random`` (prescribed E-norm) or ``modes``.

    ``modes`` entries are ``[component, mode_index, coefficient]`` with
    0-based mode indices in the sorted basis.
    """

    kind: str = "random"
    values: tuple = (0.0, 0.0, 0.0)
    e_norm: float = 5.0
    n_active: int = 8
    modes: tuple = ()

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "random", "modes"):
            raise ValidationError(f"kind: must be zero|constant|random|modes, got {self.kind!r}")
        if len(self.values) != 3:
            raise ValidationError("values: need exactly three numbers (u, v, w)")
        if not self.e_norm >= 0:
            raise ValidationError(f"e_norm: must be >= 0, got {self.e_norm}")
        if self.n_active < 1:
            raise ValidationError(f"n_active: must be >= 1, got {self.n_active}")
        for entry in self.modes:
            if len(entry) != 3 or int(entry[0]) not in (0, 1, 2):
                raise ValidationError(f"modes: entries are [component 0-2, mode, value], got {entry!r}")


@dataclass(frozen=True)
class SimulateConfig:
    T: float = 10.0
    initial: InitialCondition = InitialCondition()
    binary_dump: bool = True

    def __post_init__(self):
        if not self.T > 0:
            raise ValidationError(f"T: must be > 0, got {self.T}")


@dataclass(frozen=True)
class OdeConfig:
    T: float = 1000.0
    dt: float = 1e-3
    record_every: int = 10
    initial: tuple = (0.0, 0.0, 0.0)
    spike_threshold: float = 1.0
    burst_gap: float = 50.0

    def __post_init__(self):
        if not self.T > 0:
            raise ValidationError(f"T: must be > 0, got {self.T}")
        if not self.dt > 0:
            raise ValidationError(f"dt: must be > 0, got {self.dt}")
        if self.record_every < 1:
            raise ValidationError(f"record_every: must be >= 1, got {self.record_every}")
        if len(self.initial) != 3:
            raise ValidationError("initial: need exactly three numbers (u, v, w)")
        if not self.burst_gap > 0:
            raise ValidationError(f"burst_gap: must be > 0, got {self.burst_gap}")


@dataclass(frozen=True)
class AbsorbConfig:
    ensemble: int = 16
    norm_min: float = 0.0
    norm_max: float = 100.0
    n_active: int = 8
    horizon: float = 200.0
    tail_fraction: float = 0.2
    margin: float = 1.05
    warmup_time: float = 0.5
    warmup_dt: float = 5e-5
    sample_every: int = 10
    restart_check: bool = True

    def __post_init__(self):
        if self.ensemble < 1:
            raise ValidationError(f"ensemble: must be >= 1, got {self.ensemble}")
        if not 0 <= self.norm_min <= self.norm_max:
            raise ValidationError("norm_min/norm_max: need 0 <= norm_min <= norm_max")
        if not self.horizon > 0:
            raise ValidationError(f"horizon: must be > 0, got {self.horizon}")
        if not 0 < self.tail_fraction <= 1:
            raise ValidationError(f"tail_fraction: must lie in (0, 1], got {self.tail_fraction}")
        if not self.margin >= 1:
            raise ValidationError(f"margin: must be >= 1, got {self.margin}")
        if not (0 <= self.warmup_time < self.horizon and self.warmup_dt > 0):
            raise ValidationError("warmup_time must lie in [0, horizon) and warmup_dt must be > 0")
        if self.sample_every < 1:
            raise ValidationError(f"sample_every: must be >= 1, got {self.sample_every}")


@dataclass(frozen=True)
class SqueezeConfig:
    absorb_artifact: Optional[str] = None
    n_pairs: int = 64
    t_star: float = 1.0
    m: Optional[int] = None
    extra_modes: int = 24
    delta_threshold: Optional[float] = None
    delta_cap: float = 0.5
    perturbation: float = 1e-4
    embedding_samples: int = 10_000
    record_every: int = 1
    phi_pairs: int = 8
    phi_dt: float = 1e-6
    phi_T: float = 2e-4
    inject_cone_violation: bool = False

    def __post_init__(self):
        if self.n_pairs < 1:
            raise ValidationError(f"n_pairs: must be >= 1, got {self.n_pairs}")
        if not self.t_star > 0:
            raise ValidationError(f"t_star: must be > 0, got {self.t_star}")
        if self.m is not None and self.m < 1:
            raise ValidationError(f"m: must be >= 1, got {self.m}")
        if self.delta_threshold is not None and not self.delta_threshold > 0:
            raise ValidationError(f"delta_threshold: must be > 0, got {self.delta_threshold}")
        if not 0 < self.delta_cap < 1:
            raise ValidationError(f"delta_cap: must lie in (0, 1), got {self.delta_cap}")
        if not self.perturbation > 0:
            raise ValidationError(f"perturbation: must be > 0, got {self.perturbation}")
        if self.embedding_samples < 1000:
            raise ValidationError(f"embedding_samples: need >= 1000, got {self.embedding_samples}")
        if self.record_every < 1 or self.extra_modes < 1 or self.phi_pairs < 0:
            raise ValidationError("record_every and extra_modes must be >= 1, phi_pairs >= 0")
        if not (self.phi_dt > 0 and self.phi_T > 0):
            raise ValidationError("phi_dt and phi_T must be > 0")


@dataclass(frozen=True)
class LipschitzConfig:
    absorb_artifact: Optional[str] = None
    n_pairs: int = 32
    t_max: float = 1.0
    t_points: int = 11
    u_sup: float = 3.0
    perturbation: float = 1e-3
    time_states: int = 8
    time_t_star: float = 1.0
    time_record_every: int = 10
    embedding_samples: int = 10_000

    def __post_init__(self):
        if self.n_pairs < 1 or self.time_states < 1:
            raise ValidationError("n_pairs and time_states must be >= 1")
        if not (self.t_max > 0 and self.t_points >= 2):
            raise ValidationError("need t_max > 0 and t_points >= 2")
        if not (self.u_sup > 0 and self.perturbation > 0 and self.time_t_star > 0):
            raise ValidationError("u_sup, perturbation and time_t_star must be > 0")
        if self.time_record_every < 1:
            raise ValidationError(f"time_record_every: must be >= 1, got {self.time_record_every}")
        if self.embedding_samples < 1000:
            raise ValidationError(f"embedding_samples: need >= 1000, got {self.embedding_samples}")


@dataclass(frozen=True)
class DetermineConfig:
    absorb_artifact: Optional[str] = None
    n_pairs: int = 16
    n_contrapositive: int = 8
    m: int = 4
    horizon: float = 30.0
    perturbation: float = 1e-4
    tol_P: float = 1e-6
    tol_full: float = 1e-4
    final_fraction: float = 0.2

    def __post_init__(self):
        if self.n_pairs < 1 or self.n_contrapositive < 0 or self.m < 1:
            raise ValidationError("n_pairs >= 1, n_contrapositive >= 0 and m >= 1 required")
        if not (self.horizon > 0 and self.perturbation > 0 and self.tol_P > 0 and self.tol_full > 0):
            raise ValidationError("horizon, perturbation, tol_P and tol_full must be > 0")
        if not 0 < self.final_fraction <= 1:
            raise ValidationError(f"final_fraction: must lie in (0, 1], got {self.final_fraction}")


@dataclass(frozen=True)
class DimensionConfig:
    n_rank: Optional[int] = None
    m: Optional[int] = None
    lipschitz: Optional[float] = None
    t_star: float = 1.0
    theta: Optional[float] = None
    theta_points: int = 99
    random_checks: int = 1000

    def __post_init__(self):
        if self.n_rank is not None and self.n_rank < 1:
            raise ValidationError(f"n_rank: must be >= 1, got {self.n_rank}")
        if self.m is not None and self.m < 1:
            raise ValidationError(f"m: must be >= 1, got {self.m}")
        if self.lipschitz is not None and not self.lipschitz > 0:
            raise ValidationError(f"lipschitz: must be > 0, got {self.lipschitz}")
        if self.theta is not None and not 0 < self.theta < 1:
            raise ValidationError(f"theta: must lie in (0, 1), got {self.theta}")
        if self.theta_points < 2 or self.random_checks < 0 or not self.t_star > 0:
            raise ValidationError("theta_points >= 2, random_checks >= 0 and t_star > 0 required")


@dataclass(frozen=True)
class DomainConfig:
    lengths: tuple = (math.pi,)
    grid_points: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(parse_length(v) for v in self.lengths))
        if self.grid_points is not None:
            object.__setattr__(self, "grid_points", tuple(int(n) for n in self.grid_points))

    def spec(self, m_max: int) -> DomainSpec:
        if self.grid_points is None:
            return DomainSpec.for_modes(self.lengths, m_max)
        return DomainSpec(self.lengths, self.grid_points)


BLOCKS = {
    "simulate": SimulateConfig,
    "ode": OdeConfig,
    "absorb": AbsorbConfig,
    "squeeze": SqueezeConfig,
    "lipschitz": LipschitzConfig,
    "determine": DetermineConfig,
    "dimension": DimensionConfig,
}
NESTED = {(SimulateConfig, "initial"): InitialCondition}
TOP_KEYS = ("params", "domain", "m_max", "stepper", "seed", "output_dir") + tuple(BLOCKS)


@dataclass(frozen=True)
class ExperimentConfig:
    params: HRParameters = HRParameters()
    preset: str = "paper-typical"
    domain: DomainConfig = DomainConfig()
    m_max: int = 16
    stepper: StepperConfig = StepperConfig()
    seed: int = 0
    output_dir: str = "out"
    simulate: SimulateConfig = SimulateConfig()
    ode: OdeConfig = OdeConfig()
    absorb: AbsorbConfig = AbsorbConfig()
    squeeze: SqueezeConfig = SqueezeConfig()
    lipschitz: LipschitzConfig = LipschitzConfig()
    determine: DetermineConfig = DetermineConfig()
    dimension: DimensionConfig = DimensionConfig()
    source: Optional[str] = field(default=None, compare=False)

    def domain_spec(self) -> DomainSpec:
        return self.domain.spec(self.m_max)

    def with_overrides(self, seed=None, output_dir=None) -> "ExperimentConfig":
        kw = {}
        if seed is not None:
            if not 0 <= int(seed) < MAX_SEED:
                raise ConfigError("seed", f"must be a 64-bit unsigned integer, got {seed}")
            kw["seed"] = int(seed)
        if output_dir is not None:
            kw["output_dir"] = str(output_dir)
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        """Fully resolved configuration (every default spelled out)."""
        d = {"params": dict(self.params.to_dict(), preset=self.preset),
             "domain": {"lengths": list(self.domain.lengths),
                        "grid_points": list(self.domain_spec().grid_points)},
             "m_max": self.m_max, "stepper": dataclasses.asdict(self.stepper), "seed": self.seed,
             "output_dir": self.output_dir}
        for name in BLOCKS:
            d[name] = dataclasses.asdict(getattr(self, name))
        return d


# ----------------------------------------------------------------------------
# loading


def _line_of(text: Optional[str], key: str) -> Optional[int]:
    if not text:
        return None
    idx = text.find(f'"{key}"')
    return text.count("\n", 0, idx) + 1 if idx >= 0 else None


def _coerce(value, default, path, text):
    if isinstance(default, tuple) or (default is None and isinstance(value, list)):
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {value!r}", _line_of(text, path.rsplit(".", 1)[-1]))
        return tuple(tuple(v) if isinstance(v, list) else v for v in value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}", _line_of(text, path.rsplit(".", 1)[-1]))
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(path, f"expected an integer, got {value!r}", _line_of(text, path.rsplit(".", 1)[-1]))
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}", _line_of(text, path.rsplit(".", 1)[-1]))
        return float(value)
    return value


def _build(cls, data, path, text):
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected an object, got {type(data).__name__}", _line_of(text, path.rsplit(".", 1)[-1]))
    known = {f.name: f for f in fields(cls)}
    kw = {}
    for key, value in data.items():
        sub = f"{path}.{key}"
        if key not in known:
            raise ConfigError(sub, f"unknown key (allowed: {', '.join(sorted(known))})", _line_of(text, key))
        nested = NESTED.get((cls, key))
        if nested is not None:
            kw[key] = _build(nested, value, sub, text)
        elif value is None:
            kw[key] = None
        else:
            default = known[key].default
            kw[key] = _coerce(value, default, sub, text)
    try:
        return cls(**kw)
    except ValidationError as err:
        if isinstance(err, ConfigError):
            raise
        msg = str(err)
        key = msg.split(":", 1)[0].split(".")[-1].strip()
        line = _line_of(text, key) if key in known else None
        raise ConfigError(path, msg, line) from None


def _params(data, text) -> tuple:
    if data is None:
        data = {}
    if isinstance(data, str):
        try:
            return preset(data), data
        except ValidationError as err:
            raise ConfigError("params", str(err), _line_of(text, "params")) from None
    if not isinstance(data, dict):
        raise ConfigError("params", "expected a preset name or an object", _line_of(text, "params"))
    name = data.get("preset", "paper-typical")
    try:
        base = preset(name)
    except ValidationError as err:
        raise ConfigError("params.preset", str(err), _line_of(text, "preset")) from None
    over = {}
    for key, value in data.items():
        if key == "preset":
            continue
        if key not in PARAM_NAMES:
            raise ConfigError(f"params.{key}", f"unknown key (allowed: preset, {', '.join(PARAM_NAMES)})",
                              _line_of(text, key))
        over[key] = _coerce(value, 0.0, f"params.{key}", text)
    try:
        return base.with_(**over), name
    except ValidationError as err:
        bad = str(err).split(":", 1)[0].split(".")[-1]
        raise ConfigError(f"params.{bad}", str(err).split(": ", 1)[-1], _line_of(text, bad)) from None


def from_dict(data: dict, text: Optional[str] = None, source: Optional[str] = None) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "the configuration must be a JSON object")
    for key in data:
        if key not in TOP_KEYS:
            raise ConfigError(key, f"unknown key (allowed: {', '.join(TOP_KEYS)})", _line_of(text, key))
    kw = {"source": source}
    kw["params"], kw["preset"] = _params(data.get("params"), text)
    if "domain" in data:
        dom = data["domain"]
        if not isinstance(dom, dict):
            raise ConfigError("domain", "expected an object", _line_of(text, "domain"))
        for key in dom:
            if key not in ("lengths", "grid_points"):
                raise ConfigError(f"domain.{key}", "unknown key (allowed: grid_points, lengths)", _line_of(text, key))
        lengths = dom.get("lengths", [math.pi])
        if not isinstance(lengths, list) or not 1 <= len(lengths) <= 2:
            raise ConfigError("domain.lengths", "expected a list of one or two lengths", _line_of(text, "lengths"))
        grid = dom.get("grid_points")
        try:
            kw["domain"] = DomainConfig(tuple(parse_length(v, "domain.lengths") for v in lengths),
                                        None if grid is None else tuple(grid))
        except ConfigError:
            raise
        except (ValidationError, TypeError, ValueError) as err:
            raise ConfigError("domain", str(err), _line_of(text, "domain")) from None
    if "m_max" in data:
        kw["m_max"] = _coerce(data["m_max"], 0, "m_max", text)
        if kw["m_max"] < 1:
            raise ConfigError("m_max", f"must be >= 1, got {kw['m_max']}", _line_of(text, "m_max"))
    if "stepper" in data:
        kw["stepper"] = _build(StepperConfig, data["stepper"], "stepper", text)
    if "seed" in data:
        seed = data["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < MAX_SEED:
            raise ConfigError("seed", f"must be a 64-bit unsigned integer, got {seed!r}", _line_of(text, "seed"))
        kw["seed"] = seed
    if "output_dir" in data:
        if not isinstance(data["output_dir"], str):
            raise ConfigError("output_dir", "expected a string", _line_of(text, "output_dir"))
        kw["output_dir"] = data["output_dir"]
    for name, cls in BLOCKS.items():
        if name in data:
            kw[name] = _build(cls, data[name], name, text)
    cfg = ExperimentConfig(**kw)
    try:
        cfg.domain_spec()
    except ValidationError as err:
        raise ConfigError("domain", str(err), _line_of(text, "domain")) from None
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError("<file>", f"cannot read {path}: {err.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError("<json>", err.msg, err.lineno) from None
    return from_dict(data, text, str(path))
