#
# Copyright (c) 2019 The aoi_lab authors
# All rights reserved.
#
# Distributed under the BSD 3-Clause License. See LICENSE for details.
#

"""
Run configuration: a flat `key = value` file, overridden by command-line flags.

Either the physical keys (d, P, eta, B, optionally noise_dbm, r, pathloss_coeff,
pathloss_exp) or the direct pair (beta, pi) describe the link, never a mix.
"""

import logging
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Tuple

from aoi_lab.exceptions import ConfigException, MissingArgumentException
from aoi_lab.experiments import DEFAULT_SEED, SimSettings
from aoi_lab.model import (
    PATHLOSS_COEFF_DEFAULT,
    PATHLOSS_EXP_DEFAULT,
    ChannelParams,
    PhysicalParams,
    SchemeKind,
    SchemePolicy,
    derive_channel,
)
from aoi_lab.simulator import SEED_MAX, StopKind, StopRule, SuccessMode

logger = logging.getLogger(__name__)

OUT_ENV = "AOI_LAB_OUT"
DEFAULT_OUT = "./results"
DEFAULT_HORIZON = 50000
FORMATS = ("csv", "json")

PHYSICAL_REQUIRED = ("d", "P", "eta", "B")
PHYSICAL_OPTIONAL = ("noise_dbm", "r", "pathloss_coeff", "pathloss_exp")
DIRECT_KEYS = ("beta", "pi")

FLOAT_KEYS = PHYSICAL_REQUIRED + PHYSICAL_OPTIONAL + DIRECT_KEYS + ("delta",)
INT_KEYS = ("horizon", "reps", "seed", "workers")
CHOICE_KEYS = {
    "scheme": tuple(k.value for k in SchemeKind),
    "stop": tuple(k.value for k in StopKind),
    "success_mode": tuple(k.value for k in SuccessMode),
}


def default_out():
    return os.environ.get(OUT_ENV, DEFAULT_OUT)


@dataclass(frozen=True)
class RunConfig:
    d: Optional[float] = None
    P: Optional[float] = None
    eta: Optional[float] = None
    B: Optional[float] = None
    noise_dbm: Optional[float] = None
    r: Optional[float] = None
    pathloss_coeff: Optional[float] = None
    pathloss_exp: Optional[float] = None
    beta: Optional[float] = None
    pi: Optional[float] = None
    scheme: str = SchemeKind.randomized.value
    delta: Optional[float] = None
    stop: Optional[str] = None
    horizon: Optional[int] = None
    reps: int = 1
    seed: int = DEFAULT_SEED
    success_mode: str = SuccessMode.bernoulli.value
    out: str = field(default_factory=default_out)
    format: Tuple[str, ...] = FORMATS
    workers: int = 1

    def __post_init__(self):
        if self.horizon is not None and self.horizon < 1:
            raise ConfigException("horizon must be >= 1", key="horizon")
        if self.reps < 1:
            raise ConfigException("reps must be >= 1", key="reps")
        if self.workers < 1:
            raise ConfigException("workers must be >= 1", key="workers")
        if not 0 <= self.seed <= SEED_MAX:
            raise ConfigException("seed must fit in 64 bits", key="seed")
        check_no_mix(self.to_dict())

    @property
    def mode(self):
        if any(getattr(self, k) is not None for k in DIRECT_KEYS):
            return "direct"
        if any(getattr(self, k) is not None for k in PHYSICAL_REQUIRED + PHYSICAL_OPTIONAL):
            return "physical"
        return None

    def physical(self):
        # type: () -> PhysicalParams
        missing = [k for k in PHYSICAL_REQUIRED if getattr(self, k) is None]
        if missing:
            raise MissingArgumentException("Incomplete physical parameters, missing {}".format(", ".join(missing)))
        return PhysicalParams(
            distance_m=self.d,
            tx_power_w=self.P,
            conversion_eff=self.eta,
            battery_capacity_j=self.B,
            noise_dbm=-50.0 if self.noise_dbm is None else self.noise_dbm,
            spectral_eff_bpcu=0.05 if self.r is None else self.r,
            pathloss_coeff=PATHLOSS_COEFF_DEFAULT if self.pathloss_coeff is None else self.pathloss_coeff,
            pathloss_exp=PATHLOSS_EXP_DEFAULT if self.pathloss_exp is None else self.pathloss_exp,
        )

    def channel(self):
        # type: () -> ChannelParams
        mode = self.mode
        if mode is None:
            raise MissingArgumentException("Give either --beta/--pi or the physical parameters --d --P --eta --B")
        if mode == "direct":
            missing = [k for k in DIRECT_KEYS if getattr(self, k) is None]
            if missing:
                raise MissingArgumentException("Direct mode needs both beta and pi, missing {}".format(missing[0]))
            return ChannelParams.from_beta_pi(self.beta, self.pi)
        return derive_channel(self.physical())

    def policy(self, pi):
        # type: (float) -> SchemePolicy
        kind = SchemeKind(self.scheme)
        if kind in (SchemeKind.deterministic, SchemeKind.randomized) and self.delta is None:
            raise MissingArgumentException("Scheme {} needs delta".format(kind.value))
        return SchemePolicy.for_delta(kind, pi, self.delta)

    def stop_rule(self, default=None):
        """
        Stop rule from `stop` and `horizon`. Whichever of the two was not set
        comes from `default`, or from 50000 sensed statuses.
        """
        if default is None:
            default = StopRule(StopKind.max_statuses_sensed, DEFAULT_HORIZON)
        return StopRule(
            default.kind if self.stop is None else StopKind(self.stop),
            default.limit if self.horizon is None else self.horizon,
        )

    def sim_settings(self):
        return SimSettings(
            stop=self.stop_rule(),
            reps=self.reps,
            seed=self.seed,
            success_mode=SuccessMode(self.success_mode),
            workers=self.workers,
        )

    def to_dict(self):
        out = asdict(self)
        out["format"] = list(self.format)
        return out

    @classmethod
    def from_dict(cls, values):
        return cls(**_coerce_all(values))


def check_no_mix(values):
    direct = [k for k in DIRECT_KEYS if values.get(k) is not None]
    physical = [k for k in PHYSICAL_REQUIRED + PHYSICAL_OPTIONAL if values.get(k) is not None]
    if direct and physical:
        raise ConfigException(
            "Both direct ({}) and physical ({}) parameters given".format(direct[0], physical[0]),
            key=physical[0],
        )


def _to_int(value):
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            value = float(value)
    if isinstance(value, float) and not value.is_integer():
        raise ValueError(value)
    return int(value)


def coerce(key, value):
    """Convert one raw value (string or already typed) to the type of `key`."""
    if value is None:
        return None
    try:
        if key in FLOAT_KEYS:
            return float(value)
        if key in INT_KEYS:
            return _to_int(value)
    except (TypeError, ValueError):
        raise ConfigException("Bad value {!r} for {}".format(value, key), key=key)
    if key in CHOICE_KEYS:
        if value not in CHOICE_KEYS[key]:
            raise ConfigException(
                "Bad value {!r} for {}, expected one of {}".format(value, key, ", ".join(CHOICE_KEYS[key])),
                key=key,
            )
        return value
    if key == "format":
        parts = value.split(",") if isinstance(value, str) else list(value)
        parts = tuple(p.strip() for p in parts if p.strip())
        if not parts or any(p not in FORMATS for p in parts):
            raise ConfigException("Bad value {!r} for format".format(value), key=key)
        return parts
    if key == "out":
        return str(value)
    raise ConfigException("Unknown key {}".format(key), key=key)


def _coerce_all(values):
    return {k: coerce(k, v) for k, v in values.items()}


def parse_config_text(text, source="<config>"):
    values = dict()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigException("{}:{}: expected key = value".format(source, lineno))
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigException("{}:{}: empty key".format(source, lineno))
        if key in values:
            raise ConfigException("{}:{}: duplicate key {}".format(source, lineno, key), key=key)
        values[key] = coerce(key, value)
    check_no_mix(values)
    return values


def load_config(path=None):
    # type: (Optional[str]) -> RunConfig
    if path is None:
        return RunConfig()
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigException("Cannot read config {}: {}".format(path, e.strerror))
    values = parse_config_text(text, path)
    logger.debug("Loaded %d key(s) from %s", len(values), path)
    return RunConfig(**values)


def merge_flags(config, flags):
    # type: (RunConfig, dict) -> RunConfig
    """Override `config` with every flag that was given (value not None)."""
    given = {k: v for k, v in flags.items() if v is not None}
    if not given:
        return config
    return replace(config, **_coerce_all(given))
