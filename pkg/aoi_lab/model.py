#
# Copyright (c) 2019 The aoi_lab authors
# All rights reserved.
#
# Distributed under the BSD 3-Clause License. See LICENSE for details.
#

"""
Physical and scheme parameters of the harvesting sensor link.

Everything downstream consumes the dimensionless pair (beta, pi):

    beta = lambda * B / (eta * P)                    mean charge time is 1 + beta slots
    pi   = exp(-lambda * (2**r - 1) * sigma2 / B)    success probability of one transmission
"""

import logging
import math
import numbers
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from aoi_lab.exceptions import InvalidArgumentException

logger = logging.getLogger(__name__)

PATHLOSS_COEFF_DEFAULT = 1e3
PATHLOSS_EXP_DEFAULT = 2.2

# Relative distance below which log_{1-pi}(delta) is treated as an integer
_LIMIT_SNAP_TOL = 1e-9


def dbm_to_watts(x):
    """Convert a power level in dBm to watts."""
    if not isinstance(x, numbers.Real) or not math.isfinite(x):
        raise InvalidArgumentException("Power level must be finite, got {}".format(x))
    return 10.0 ** ((float(x) - 30.0) / 10.0)


def miss_power(pi, k):
    """(1 - pi)**k, evaluated as exp(k * ln(1 - pi)) so large k stays accurate."""
    if k == 0:
        return 1.0
    return math.exp(k * math.log1p(-pi))


def check_probability(name, value, low_open=True, high_open=True):
    if not isinstance(value, numbers.Real) or not math.isfinite(value):
        raise InvalidArgumentException("{} must be a finite number, got {!r}".format(name, value))
    low_ok = value > 0.0 if low_open else value >= 0.0
    high_ok = value < 1.0 if high_open else value <= 1.0
    if not (low_ok and high_ok):
        raise InvalidArgumentException(
            "{} must lie in {}0, 1{}, got {}".format(
                name, "(" if low_open else "[", ")" if high_open else "]", value
            )
        )


def check_positive(name, value):
    if not isinstance(value, numbers.Real) or not math.isfinite(value) or value <= 0:
        raise InvalidArgumentException("{} must be positive, got {!r}".format(name, value))


def check_count(name, value):
    """Accept any integral type, numpy integers included, and return a plain int >= 1."""
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise InvalidArgumentException("{} must be an integer >= 1, got {!r}".format(name, value))
    return int(value)


@dataclass(frozen=True)
class PhysicalParams:
    """Raw inputs of the energy source, sensor and receiver setting."""

    distance_m: float
    tx_power_w: float
    conversion_eff: float
    battery_capacity_j: float
    noise_dbm: float = -50.0
    spectral_eff_bpcu: float = 0.05
    pathloss_coeff: float = PATHLOSS_COEFF_DEFAULT
    pathloss_exp: float = PATHLOSS_EXP_DEFAULT

    def __post_init__(self):
        check_positive("distance_m", self.distance_m)
        check_positive("tx_power_w", self.tx_power_w)
        check_positive("battery_capacity_j", self.battery_capacity_j)
        check_positive("spectral_eff_bpcu", self.spectral_eff_bpcu)
        check_positive("pathloss_coeff", self.pathloss_coeff)
        check_probability("conversion_eff", self.conversion_eff, high_open=False)
        if not math.isfinite(self.noise_dbm) or not math.isfinite(self.pathloss_exp):
            raise InvalidArgumentException("noise_dbm and pathloss_exp must be finite")

    def with_capacity(self, battery_capacity_j):
        return PhysicalParams(
            distance_m=self.distance_m,
            tx_power_w=self.tx_power_w,
            conversion_eff=self.conversion_eff,
            battery_capacity_j=battery_capacity_j,
            noise_dbm=self.noise_dbm,
            spectral_eff_bpcu=self.spectral_eff_bpcu,
            pathloss_coeff=self.pathloss_coeff,
            pathloss_exp=self.pathloss_exp,
        )


@dataclass(frozen=True)
class ChannelParams:
    """
    Derived channel description.

    `lam` is the exponential rate of both fading powers, `harvest_power_w` is
    eta * P. pi = 1 is accepted so that a perfect link can be simulated, the
    closed forms still require pi < 1.
    """

    lam: float
    beta: float
    pi: float
    noise_w: float
    battery_capacity_j: float
    harvest_power_w: float
    spectral_eff_bpcu: float

    def __post_init__(self):
        check_positive("lambda", self.lam)
        check_positive("beta", self.beta)
        check_positive("noise_w", self.noise_w)
        check_positive("battery_capacity_j", self.battery_capacity_j)
        check_positive("harvest_power_w", self.harvest_power_w)
        check_probability("pi", self.pi, high_open=False)
        if not math.isfinite(self.spectral_eff_bpcu) or self.spectral_eff_bpcu < 0:
            raise InvalidArgumentException(
                "spectral_eff_bpcu must be nonnegative, got {}".format(self.spectral_eff_bpcu)
            )

    @classmethod
    def from_beta_pi(cls, beta, pi):
        """
        Normalised channel with exactly the given (beta, pi):
        lambda = B = sigma2 = 1, eta * P = 1 / beta and r = log2(1 - ln pi).
        """
        check_positive("beta", beta)
        check_probability("pi", pi, high_open=False)
        return cls(
            lam=1.0,
            beta=float(beta),
            pi=float(pi),
            noise_w=1.0,
            battery_capacity_j=1.0,
            harvest_power_w=1.0 / beta,
            spectral_eff_bpcu=math.log2(1.0 - math.log(pi)),
        )

    @property
    def snr_threshold(self):
        """Fading power m_t above which a transmission is decoded."""
        return (2.0 ** self.spectral_eff_bpcu - 1.0) * self.noise_w / self.battery_capacity_j


def derive_channel(p):
    # type: (PhysicalParams) -> ChannelParams
    if not isinstance(p, PhysicalParams):
        raise InvalidArgumentException("Invalid argument type")

    lam = p.pathloss_coeff * p.distance_m ** p.pathloss_exp
    noise_w = dbm_to_watts(p.noise_dbm)
    harvest_power_w = p.conversion_eff * p.tx_power_w
    beta = lam * p.battery_capacity_j / harvest_power_w
    pi = math.exp(-lam * (2.0 ** p.spectral_eff_bpcu - 1.0) * noise_w / p.battery_capacity_j)

    if not 0.0 < pi < 1.0:
        raise InvalidArgumentException(
            "Parameters yield a degenerate success probability pi={} "
            "(d={}, B={}, r={})".format(pi, p.distance_m, p.battery_capacity_j, p.spectral_eff_bpcu)
        )
    if not math.isfinite(beta):
        raise InvalidArgumentException("Parameters yield a non-finite beta")

    logger.debug(
        "derive_channel lambda(%.6g) beta(%.6g) pi(%.6g) noise_w(%.6g)", lam, beta, pi, noise_w
    )
    return ChannelParams(
        lam=lam,
        beta=beta,
        pi=pi,
        noise_w=noise_w,
        battery_capacity_j=p.battery_capacity_j,
        harvest_power_w=harvest_power_w,
        spectral_eff_bpcu=p.spectral_eff_bpcu,
    )


def retry_limit(pi, delta):
    """Smallest k >= 1 with (1 - pi)**k <= delta, i.e. max(1, ceil(log_{1-pi} delta))."""
    check_probability("pi", pi)
    if delta == 0:
        raise InvalidArgumentException(
            "delta = 0 has no finite retry limit, use the zero-error scheme"
        )
    check_probability("delta", delta, high_open=False)

    raw = math.log(delta) / math.log1p(-pi)
    nearest = round(raw)
    if nearest >= 1 and abs(raw - nearest) <= _LIMIT_SNAP_TOL * max(1.0, abs(raw)):
        k = int(nearest)
    else:
        k = int(math.ceil(raw))
    return max(1, k)


@dataclass(frozen=True)
class RetryParams:
    """
    Retry limits of a status. The randomized scheme uses k with probability
    `alpha` and k - 1 otherwise; p1 and p2 are the failure probabilities of the
    two limits.
    """

    k: int
    p1: float
    p2: float
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "k", check_count("Retry limit k", self.k))
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgumentException("alpha must lie in [0, 1], got {}".format(self.alpha))
        if self.k > 1 and not self.p1 < self.p2:
            raise InvalidArgumentException("p1 must be below p2 when k > 1")

    @classmethod
    def for_limit(cls, pi, k, delta=None):
        """
        Retry parameters for a given k. Without delta the limit is always k
        (alpha = 1), otherwise alpha = (delta - p2) / (p1 - p2) clamped to [0, 1].
        """
        check_probability("pi", pi)
        p1 = miss_power(pi, k)
        p2 = miss_power(pi, k - 1)
        if k == 1 or delta is None:
            return cls(k=k, p1=p1, p2=p2, alpha=1.0)
        alpha = (delta - p2) / (p1 - p2)
        return cls(k=k, p1=p1, p2=p2, alpha=min(1.0, max(0.0, alpha)))

    @property
    def failure_probability(self):
        return self.alpha * self.p1 + (1.0 - self.alpha) * self.p2


def randomized_retry_params(pi, delta):
    # type: (float, float) -> RetryParams
    k = retry_limit(pi, delta)
    return RetryParams.for_limit(pi, k, delta)


class SchemeKind(Enum):
    single_shot = "single-shot"
    deterministic = "det"
    randomized = "rand"
    zero_error = "zero-error"


@dataclass(frozen=True)
class SchemePolicy:
    kind: SchemeKind
    delta: Optional[float] = None
    retry: Optional[RetryParams] = None

    def __post_init__(self):
        bounded = self.kind in (SchemeKind.deterministic, SchemeKind.randomized)
        if bounded and self.retry is None:
            raise InvalidArgumentException("{} scheme needs retry parameters".format(self.kind.value))
        if not bounded and self.retry is not None:
            raise InvalidArgumentException("{} scheme takes no retry parameters".format(self.kind.value))

    @classmethod
    def single_shot(cls):
        return cls(kind=SchemeKind.single_shot)

    @classmethod
    def zero_error(cls):
        return cls(kind=SchemeKind.zero_error)

    @classmethod
    def for_delta(cls, kind, pi, delta=None):
        """
        Build a policy for a failure target. For the bounded schemes delta = 1
        means single-shot and delta = 0 means zero-error.
        """
        kind = SchemeKind(kind)
        if kind == SchemeKind.single_shot:
            return cls.single_shot()
        if kind == SchemeKind.zero_error:
            return cls.zero_error()

        if delta is None:
            raise InvalidArgumentException("{} scheme needs delta".format(kind.value))
        check_probability("delta", delta, low_open=False, high_open=False)
        if delta == 0:
            return cls.zero_error()
        if delta == 1:
            return cls.single_shot()

        check_probability("pi", pi)
        if delta > 1.0 - pi:
            logger.warning(
                "delta(%.6g) exceeds 1 - pi(%.6g), every status is sent once "
                "and the reliability is pi",
                delta,
                1.0 - pi,
            )
        if kind == SchemeKind.deterministic:
            retry = RetryParams.for_limit(pi, retry_limit(pi, delta))
        else:
            retry = randomized_retry_params(pi, delta)
        return cls(kind=kind, delta=float(delta), retry=retry)

    @property
    def label(self):
        return self.kind.value

    def guaranteed_reliability(self, pi):
        if self.kind == SchemeKind.single_shot:
            return pi
        if self.kind == SchemeKind.zero_error:
            return 1.0
        if self.retry.k == 1:
            return pi
        return 1.0 - self.retry.failure_probability

    def attempt_limit(self, u):
        """
        Attempt limit of a freshly sensed status given a uniform draw u in [0, 1).
        None means unbounded.
        """
        if self.kind == SchemeKind.single_shot:
            return 1
        if self.kind == SchemeKind.zero_error:
            return None
        if self.kind == SchemeKind.deterministic or self.retry.k == 1:
            return self.retry.k
        return self.retry.k if u < self.retry.alpha else self.retry.k - 1

    def __str__(self):
        if self.retry is None:
            return "SchemePolicy({})".format(self.kind.value)
        return "SchemePolicy({} delta({}) k({}) alpha({:.6g}))".format(
            self.kind.value, self.delta, self.retry.k, self.retry.alpha
        )
