#
# Copyright (c) 2019 The aoi_lab authors
# All rights reserved.
#
# Distributed under the BSD 3-Clause License. See LICENSE for details.
#

"""
Closed-form moments and average AoI of the retry-limit schemes.

The AoI area of one renewal cycle (between two deliveries) splits into a
rectangle U of height H and width X and a discrete triangle V, so

    E[A]    = E[U] + E[V] = E[H] E[X] + (E[X^2] + E[X]) / 2
    avg AoI = E[A] / E[X]
"""

import functools
import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import wrapt

from aoi_lab.exceptions import IllegalStateException, InvalidArgumentException
from aoi_lab.model import (
    RetryParams,
    SchemeKind,
    SchemePolicy,
    check_count,
    check_positive,
    check_probability,
    miss_power,
    randomized_retry_params,
    retry_limit,
)

logger = logging.getLogger(__name__)

CLOSED_FORM_REL_TOL = 1e-9
RENEWAL_REL_TOL = 1e-12


def _rel_diff(a, b):
    scale = max(abs(a), abs(b), 1e-300)
    return abs(a - b) / scale


def ReportCheck(wrapped=None, rel_tol=RENEWAL_REL_TOL):
    """Verify the renewal-reward identity of every AnalyticReport a function returns."""
    if wrapped is None:
        return functools.partial(ReportCheck, rel_tol=rel_tol)

    @wrapt.decorator
    def wrapper(wrapped, _instance, args, kwargs):
        report = wrapped(*args, **kwargs)
        report.check(rel_tol)
        return report

    return wrapper(wrapped)


@dataclass(frozen=True)
class GeomMoments:
    """Moments of the number of transmissions F between two deliveries."""

    mean: float
    second: float


@dataclass(frozen=True)
class ChargeMoments:
    """Moments of the slots T needed to fill an empty battery."""

    mean: float
    second: float


@dataclass(frozen=True)
class IntersuccessMoments:
    """Moments of the slots X between two deliveries."""

    mean: float
    second: float


@dataclass(frozen=True)
class StaleHead:
    """
    E[H] together with the randomized-scheme intermediates: p is the probability
    that a delivered status had limit k, h1 and h2 the stale heads under k and k - 1.
    """

    mean: float
    p: Optional[float] = None
    h1: Optional[float] = None
    h2: Optional[float] = None


@dataclass(frozen=True)
class AnalyticReport:
    scheme: str
    k: Optional[int]
    charge: ChargeMoments
    geom: GeomMoments
    intersuccess: IntersuccessMoments
    stale_head: StaleHead
    triangle_mean: float
    rectangle_mean: float
    cycle_area_mean: float
    avg_aoi: float
    reliability: float

    @property
    def stale_head_mean(self):
        return self.stale_head.mean

    def check(self, rel_tol=RENEWAL_REL_TOL):
        values = (
            self.stale_head.mean,
            self.triangle_mean,
            self.rectangle_mean,
            self.cycle_area_mean,
            self.avg_aoi,
            self.reliability,
        )
        if any(not math.isfinite(v) or v < 0 for v in values):
            raise IllegalStateException("Report has negative or non-finite fields: {}".format(self))
        lhs = self.avg_aoi * self.intersuccess.mean
        if _rel_diff(lhs, self.cycle_area_mean) > rel_tol:
            raise IllegalStateException(
                "Renewal-reward identity broken: avg_aoi * E[X] = {} but E[A] = {}".format(
                    lhs, self.cycle_area_mean
                )
            )
        if _rel_diff(self.cycle_area_mean, self.rectangle_mean + self.triangle_mean) > rel_tol:
            raise IllegalStateException("E[A] differs from E[U] + E[V]")

    def to_dict(self):
        return {
            "scheme": self.scheme,
            "k": self.k,
            "E_T": self.charge.mean,
            "E_T2": self.charge.second,
            "E_F": self.geom.mean,
            "E_F2": self.geom.second,
            "E_X": self.intersuccess.mean,
            "E_X2": self.intersuccess.second,
            "E_H": self.stale_head.mean,
            "p": self.stale_head.p,
            "h1": self.stale_head.h1,
            "h2": self.stale_head.h2,
            "E_U": self.rectangle_mean,
            "E_V": self.triangle_mean,
            "E_A": self.cycle_area_mean,
            "avg_aoi": self.avg_aoi,
            "reliability": self.reliability,
        }


def geom_moments(pi):
    # type: (float) -> GeomMoments
    check_probability("pi", pi)
    return GeomMoments(mean=1.0 / pi, second=(2.0 - pi) / (pi * pi))


def charge_time_moments(beta):
    # type: (float) -> ChargeMoments
    check_positive("beta", beta)
    return ChargeMoments(mean=1.0 + beta, second=1.0 + 3.0 * beta + beta * beta)


def intersuccess_moments(beta, pi):
    # type: (float, float) -> IntersuccessMoments
    t = charge_time_moments(beta)
    f = geom_moments(pi)
    return IntersuccessMoments(
        mean=t.mean * f.mean,
        second=t.second * f.mean + t.mean ** 2 * f.second - t.mean ** 2 * f.mean,
    )


def truncated_geom_mean_shift(pi, k):
    """
    E[J - 1 | J <= k] for J ~ Geom(pi): the mean number of failed attempts
    before the successful one, given success within k attempts.
    """
    check_probability("pi", pi)
    k = check_count("k", k)
    if k == 1:
        return 0.0
    q = miss_power(pi, k)
    return 1.0 / pi - k * q / (1.0 - q) - 1.0


def stale_head_mean_det(beta, pi, k):
    check_positive("beta", beta)
    return (1.0 + beta) * truncated_geom_mean_shift(pi, k)


def stale_head_mean_rand(beta, pi, retry):
    # type: (float, float, RetryParams) -> StaleHead
    check_positive("beta", beta)
    check_probability("pi", pi)
    if not isinstance(retry, RetryParams):
        raise InvalidArgumentException("Invalid argument type")
    if retry.k == 1:
        return StaleHead(mean=0.0, p=1.0, h1=0.0, h2=0.0)

    alpha, p1, p2 = retry.alpha, retry.p1, retry.p2
    p = alpha * (1.0 - p1) / (1.0 - alpha * p1 - (1.0 - alpha) * p2)
    h1 = stale_head_mean_det(beta, pi, retry.k)
    h2 = stale_head_mean_det(beta, pi, retry.k - 1)
    return StaleHead(mean=p * h1 + (1.0 - p) * h2, p=p, h1=h1, h2=h2)


def stale_head_fixed_point_residual(pi, retry):
    """
    Residual of p = alpha (1 - p1) + p (alpha p1 + (1 - alpha) p2), the
    memoryless recursion over given-up statuses that defines p.
    """
    head = stale_head_mean_rand(1.0, pi, retry)
    alpha, p1, p2 = retry.alpha, retry.p1, retry.p2
    rhs = alpha * (1.0 - p1) + head.p * (alpha * p1 + (1.0 - alpha) * p2)
    return _rel_diff(head.p, rhs)


def _assemble(scheme, k, beta, pi, head, reliability):
    charge = charge_time_moments(beta)
    geom = geom_moments(pi)
    x = intersuccess_moments(beta, pi)
    triangle = 0.5 * (x.second + x.mean)
    rectangle = head.mean * x.mean
    return AnalyticReport(
        scheme=scheme,
        k=k,
        charge=charge,
        geom=geom,
        intersuccess=x,
        stale_head=head,
        triangle_mean=triangle,
        rectangle_mean=rectangle,
        cycle_area_mean=rectangle + triangle,
        avg_aoi=0.5 * (x.second / x.mean + 1.0) + head.mean,
        reliability=reliability,
    )


def aoi_det_closed_form(beta, pi, k):
    q = miss_power(pi, k)
    return (1.0 + beta) * (2.0 / pi - k * q / (1.0 - q) - 1.5) + (2.0 * beta + 1.0) / (
        2.0 * (1.0 + beta)
    )


def aoi_zero_error_closed_form(beta, pi):
    return (1.0 + beta) * (4.0 - 3.0 * pi) / (2.0 * pi) + (2.0 * beta + 1.0) / (2.0 * (1.0 + beta))


@ReportCheck
def aoi_det_for_limit(beta, pi, k):
    """Deterministic scheme with an explicit retry limit k."""
    head = StaleHead(mean=stale_head_mean_det(beta, pi, k))
    report = _assemble(
        SchemeKind.deterministic.value, k, beta, pi, head, 1.0 - miss_power(pi, k)
    )
    closed = aoi_det_closed_form(beta, pi, k)
    if _rel_diff(report.avg_aoi, closed) > CLOSED_FORM_REL_TOL:
        raise IllegalStateException(
            "Deterministic AoI {} disagrees with its closed form {}".format(report.avg_aoi, closed)
        )
    return report


def aoi_det(beta, pi, delta):
    # type: (float, float, float) -> AnalyticReport
    return aoi_det_for_limit(beta, pi, retry_limit(pi, delta))


@ReportCheck
def aoi_rand(beta, pi, delta):
    # type: (float, float, float) -> AnalyticReport
    retry = randomized_retry_params(pi, delta)
    head = stale_head_mean_rand(beta, pi, retry)
    reliability = pi if retry.k == 1 else 1.0 - retry.failure_probability
    return _assemble(SchemeKind.randomized.value, retry.k, beta, pi, head, reliability)


@ReportCheck
def aoi_zero_error(beta, pi):
    # type: (float, float) -> AnalyticReport
    head = StaleHead(mean=(1.0 + beta) * (1.0 / pi - 1.0))
    report = _assemble(SchemeKind.zero_error.value, None, beta, pi, head, 1.0)
    closed = aoi_zero_error_closed_form(beta, pi)
    if _rel_diff(report.avg_aoi, closed) > CLOSED_FORM_REL_TOL:
        raise IllegalStateException(
            "Zero-error AoI {} disagrees with its closed form {}".format(report.avg_aoi, closed)
        )
    return report


def aoi_single_shot(beta, pi):
    return replace(aoi_det_for_limit(beta, pi, 1), scheme=SchemeKind.single_shot.value, reliability=pi)


def aoi_for_policy(beta, pi, policy):
    # type: (float, float, SchemePolicy) -> AnalyticReport
    if policy.kind == SchemeKind.single_shot:
        return aoi_single_shot(beta, pi)
    if policy.kind == SchemeKind.zero_error:
        return aoi_zero_error(beta, pi)
    if policy.kind == SchemeKind.deterministic:
        return aoi_det_for_limit(beta, pi, policy.retry.k)
    return aoi_rand(beta, pi, policy.delta)


def zero_error_cost(beta, pi):
    """Extra average AoI paid for delivering every status instead of sending each once."""
    return aoi_zero_error(beta, pi).avg_aoi - aoi_single_shot(beta, pi).avg_aoi
