#
# Copyright (c) 2019 The aoi_lab authors
# All rights reserved.
#
# Distributed under the BSD 3-Clause License. See LICENSE for details.
#

import logging
import unittest
from dataclasses import replace

import hypothesis.strategies as st
import numpy as np
from hypothesis import given, settings

from sim_setup import Settings

from aoi_lab.analytic import (
    ReportCheck,
    aoi_det,
    aoi_det_closed_form,
    aoi_det_for_limit,
    aoi_for_policy,
    aoi_rand,
    aoi_single_shot,
    aoi_zero_error,
    aoi_zero_error_closed_form,
    charge_time_moments,
    geom_moments,
    intersuccess_moments,
    stale_head_fixed_point_residual,
    stale_head_mean_det,
    stale_head_mean_rand,
    truncated_geom_mean_shift,
    zero_error_cost,
)
from aoi_lab.checks import truncated_shift_direct_sum
from aoi_lab.exceptions import IllegalStateException, InvalidArgumentException
from aoi_lab.experiments import reference_physical
from aoi_lab.model import (
    RetryParams,
    SchemeKind,
    SchemePolicy,
    derive_channel,
    miss_power,
    randomized_retry_params,
)

logger = logging.getLogger(__name__)

betas = st.floats(min_value=0.01, max_value=5000.0)
pis = st.floats(min_value=0.01, max_value=0.99)
fractions = st.floats(min_value=1e-6, max_value=1.0)


def table_channel(capacity):
    return derive_channel(reference_physical(capacity))


class Moments(unittest.TestCase):
    def test_geom(self):
        g = geom_moments(0.5)
        self.assertEqual((g.mean, g.second), (2.0, 6.0))
        g = geom_moments(0.65)
        self.assertAlmostEqual(g.mean, 1.538462, places=6)
        self.assertAlmostEqual(g.second, 3.195266, places=6)
        g = geom_moments(1.0 - 1e-12)
        self.assertAlmostEqual(g.mean, 1.0, places=9)
        self.assertAlmostEqual(g.second, 1.0, places=9)

    def test_charge(self):
        t = charge_time_moments(87.0)
        self.assertEqual((t.mean, t.second), (88.0, 7831.0))
        t = charge_time_moments(1.0)
        self.assertEqual((t.mean, t.second), (2.0, 5.0))

    def test_intersuccess(self):
        x = intersuccess_moments(1.0, 0.5)
        self.assertEqual((x.mean, x.second), (4.0, 26.0))
        self.assertAlmostEqual(intersuccess_moments(87.0, 0.65).mean, 135.384615, places=5)

    def test_rejects_out_of_range(self):
        with self.assertRaises(InvalidArgumentException):
            geom_moments(0.0)
        with self.assertRaises(InvalidArgumentException):
            geom_moments(1.0)
        with self.assertRaises(InvalidArgumentException):
            charge_time_moments(0.0)

    @given(betas, pis)
    @settings(max_examples=200, deadline=None)
    def test_second_dominates_square(self, beta, pi):
        for m in (geom_moments(pi), charge_time_moments(beta), intersuccess_moments(beta, pi)):
            self.assertGreaterEqual(m.second, m.mean ** 2 * (1.0 - 1e-12))


class TruncatedShift(unittest.TestCase):
    def test_examples(self):
        self.assertEqual(truncated_geom_mean_shift(0.3, 1), 0.0)
        self.assertAlmostEqual(truncated_geom_mean_shift(0.5, 2), 1.0 / 3.0, places=14)
        self.assertAlmostEqual(truncated_geom_mean_shift(0.65, 2000), 1.0 / 0.65 - 1.0, places=12)

    def test_rejects_bad_k(self):
        with self.assertRaises(InvalidArgumentException):
            truncated_geom_mean_shift(0.5, 0)
        with self.assertRaises(InvalidArgumentException):
            truncated_geom_mean_shift(0.5, 2.5)
        with self.assertRaises(InvalidArgumentException):
            truncated_geom_mean_shift(0.5, np.float64(2.0))

    def test_numpy_scalars(self):
        self.assertAlmostEqual(truncated_geom_mean_shift(np.float64(0.5), np.int64(2)), 1.0 / 3.0, places=14)
        self.assertEqual(truncated_geom_mean_shift(np.float32(0.3), np.int32(1)), 0.0)

    def test_direct_sum_grid(self):
        for i in range(1, 20):
            pi = 0.05 * i
            for k in range(1, 51):
                self.assertLessEqual(
                    abs(truncated_geom_mean_shift(pi, k) - truncated_shift_direct_sum(pi, k)), 1e-10
                )


class StaleHead(unittest.TestCase):
    def test_det(self):
        self.assertEqual(stale_head_mean_det(87.0, 0.65, 1), 0.0)
        self.assertAlmostEqual(stale_head_mean_det(87.0, 0.65, 3), 35.5586, places=3)
        self.assertAlmostEqual(stale_head_mean_det(87.0, 0.65, 5000), 88.0 * (1.0 / 0.65 - 1.0), places=9)

    def test_rand_degenerate_mixtures(self):
        pi, beta = 0.65, 87.0
        always_k = RetryParams.for_limit(pi, 3)
        self.assertAlmostEqual(stale_head_mean_rand(beta, pi, always_k).mean, stale_head_mean_det(beta, pi, 3))
        p1, p2 = miss_power(pi, 3), miss_power(pi, 2)
        never_k = RetryParams(k=3, p1=p1, p2=p2, alpha=0.0)
        head = stale_head_mean_rand(beta, pi, never_k)
        self.assertEqual(head.p, 0.0)
        self.assertAlmostEqual(head.mean, stale_head_mean_det(beta, pi, 2))

    def test_rand_table_setting(self):
        chan = table_channel(1e-3)
        head = stale_head_mean_rand(chan.beta, chan.pi, randomized_retry_params(chan.pi, 0.1))
        self.assertAlmostEqual(head.p, 0.761056, places=5)
        self.assertAlmostEqual(head.h1, 269.13, delta=0.05)
        self.assertEqual(head.h2, 0.0)
        self.assertAlmostEqual(head.mean, 204.83, delta=0.05)

    @given(pis, fractions)
    @settings(max_examples=200, deadline=None)
    def test_fixed_point(self, pi, frac):
        retry = randomized_retry_params(pi, (1.0 - pi) * frac)
        self.assertLessEqual(stale_head_fixed_point_residual(pi, retry), 1e-12)


class Table1Theory(unittest.TestCase):
    def assertNear(self, value, golden, rel=1e-3):
        self.assertLessEqual(abs(value - golden), rel * golden, "{} vs {}".format(value, golden))

    def test_rows(self):
        for capacity, delta, det_golden, rand_golden in (
            (1e-3, 0.1, 1425.6, 1361.2),
            (1.5e-3, 0.1, 1799.1, 1641.3),
            (1e-3, 0.2, 1425.6, 1204.7),
        ):
            chan = table_channel(capacity)
            self.assertNear(aoi_det(chan.beta, chan.pi, delta).avg_aoi, det_golden)
            self.assertNear(aoi_rand(chan.beta, chan.pi, delta).avg_aoi, rand_golden)

    def test_clamped_row(self):
        # delta = 0.2 exceeds 1 - pi here, so both schemes send every status once
        chan = table_channel(1.5e-3)
        det = aoi_det(chan.beta, chan.pi, 0.2)
        rand = aoi_rand(chan.beta, chan.pi, 0.2)
        self.assertEqual(det.k, 1)
        self.assertNear(rand.avg_aoi, 1502.0)
        self.assertAlmostEqual(det.avg_aoi, rand.avg_aoi, places=9)
        self.assertAlmostEqual(det.reliability, chan.pi, places=12)

    def test_reliabilities(self):
        chan = table_channel(1e-3)
        self.assertAlmostEqual(aoi_rand(chan.beta, chan.pi, 0.1).reliability, 0.9, places=12)
        det = aoi_det(chan.beta, chan.pi, 0.1)
        self.assertAlmostEqual(det.reliability, 1.0 - (1.0 - chan.pi) ** 2, places=12)
        self.assertGreaterEqual(det.reliability, 0.9)


class Schemes(unittest.TestCase):
    def test_zero_error_example(self):
        report = aoi_zero_error(87.0, 0.65)
        self.assertAlmostEqual(report.avg_aoi, 139.7635, places=3)
        self.assertEqual(report.reliability, 1.0)
        self.assertIsNone(report.k)

    def test_zero_error_near_certain_success(self):
        beta = 87.0
        expected = (1 + beta) / 2 + (2 * beta + 1) / (2 * (1 + beta))
        self.assertAlmostEqual(aoi_zero_error_closed_form(beta, 1.0 - 1e-12), expected, places=6)

    def test_single_shot(self):
        beta, pi = 87.0, 0.65
        report = aoi_single_shot(beta, pi)
        expected = (1 + beta) * ((1 + pi) / pi - 1.5) + (2 * beta + 1) / (2 * (1 + beta))
        self.assertAlmostEqual(report.avg_aoi, expected, places=9)
        self.assertEqual(report.scheme, "single-shot")
        self.assertEqual(report.reliability, pi)
        self.assertAlmostEqual(aoi_det(beta, pi, 1.0 - pi).avg_aoi, expected, places=9)

    def test_for_policy_dispatch(self):
        beta, pi = 87.0, 0.65
        self.assertEqual(aoi_for_policy(beta, pi, SchemePolicy.zero_error()), aoi_zero_error(beta, pi))
        self.assertEqual(aoi_for_policy(beta, pi, SchemePolicy.single_shot()), aoi_single_shot(beta, pi))
        det = SchemePolicy.for_delta(SchemeKind.deterministic, pi, 0.1)
        self.assertEqual(aoi_for_policy(beta, pi, det), aoi_det(beta, pi, 0.1))
        rand = SchemePolicy.for_delta(SchemeKind.randomized, pi, 0.1)
        self.assertEqual(aoi_for_policy(beta, pi, rand), aoi_rand(beta, pi, 0.1))

    def test_numpy_inputs(self):
        beta, pi = np.float64(87.0), np.float64(0.65)
        for scheme in (aoi_det, aoi_rand):
            self.assertAlmostEqual(scheme(beta, pi, np.float64(0.1)).avg_aoi, scheme(87.0, 0.65, 0.1).avg_aoi, places=9)
        self.assertAlmostEqual(aoi_zero_error(beta, np.float64(0.65)).avg_aoi, 139.7635, places=3)

    def test_zero_error_cost(self):
        self.assertGreater(zero_error_cost(87.0, 0.65), 0.0)
        self.assertAlmostEqual(
            zero_error_cost(87.0, 0.65), aoi_zero_error(87.0, 0.65).avg_aoi - aoi_single_shot(87.0, 0.65).avg_aoi
        )

    def test_zero_error_is_limit_of_det(self):
        for beta in (0.5, 1.0, 10.0, 87.0, 1456.0):
            for pi in (0.1, 0.3, 0.5, 0.65, 0.9):
                limit = aoi_det_for_limit(beta, pi, 10 ** 4).avg_aoi
                self.assertAlmostEqual(limit / aoi_zero_error_closed_form(beta, pi), 1.0, places=6)

    def test_endpoint_continuity(self):
        for beta in (1.0, 87.0):
            for pi in (0.3, 0.65):
                for j in range(1, 7):
                    delta = miss_power(pi, j)
                    det = aoi_det(beta, pi, delta).avg_aoi
                    self.assertAlmostEqual(aoi_rand(beta, pi, delta).avg_aoi / det, 1.0, places=9)

    def test_report_decomposition(self):
        report = aoi_rand(87.0, 0.65, 0.1)
        x = report.intersuccess
        self.assertAlmostEqual(report.triangle_mean, 0.5 * (x.second + x.mean))
        self.assertAlmostEqual(report.rectangle_mean, report.stale_head_mean * x.mean)
        self.assertAlmostEqual(report.avg_aoi * x.mean / report.cycle_area_mean, 1.0, places=12)
        self.assertEqual(report.to_dict()["scheme"], "rand")

    def test_report_check_catches_broken_identity(self):
        @ReportCheck
        def broken():
            return replace(aoi_det_for_limit(87.0, 0.65, 3), avg_aoi=1.0)

        with self.assertRaises(IllegalStateException):
            broken()

    @given(betas, pis, fractions)
    @settings(max_examples=300, deadline=None)
    def test_randomized_never_worse(self, beta, pi, frac):
        delta = (1.0 - pi) * frac
        self.assertLessEqual(aoi_rand(beta, pi, delta).avg_aoi, aoi_det(beta, pi, delta).avg_aoi * (1.0 + 1e-9))

    @given(betas, pis, st.integers(min_value=1, max_value=60))
    @settings(max_examples=300, deadline=None)
    def test_det_monotone_in_limit(self, beta, pi, k):
        lower = aoi_det_for_limit(beta, pi, k).avg_aoi
        upper = aoi_det_for_limit(beta, pi, k + 1).avg_aoi
        self.assertLessEqual(lower, upper * (1.0 + 1e-12))
        self.assertLessEqual(upper, aoi_zero_error(beta, pi).avg_aoi * (1.0 + 1e-12))

    @given(betas, pis, st.integers(min_value=1, max_value=60))
    @settings(max_examples=200, deadline=None)
    def test_det_closed_form(self, beta, pi, k):
        report = aoi_det_for_limit(beta, pi, k)
        self.assertAlmostEqual(report.avg_aoi / aoi_det_closed_form(beta, pi, k), 1.0, places=9)


def test_suite():
    return unittest.TestLoader().loadTestsFromName(__name__)


if __name__ == "__main__":
    logging.basicConfig(
        level=Settings.current().log_level,
        format="%(asctime)s [%(thread)d/%(threadName)s] %(message)s",
    )
    unittest.main(argv=Settings.clean_args())
