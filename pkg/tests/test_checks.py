#
# Copyright (c) 2019 The aoi_lab authors
# All rights reserved.
#
# Distributed under the BSD 3-Clause License. See LICENSE for details.
#

import contextlib
import io
import logging
import unittest

from sim_setup import Settings

from aoi_lab.checks import (
    KNOWN_TABLE1_DEVIATIONS,
    CheckResult,
    check_engines_agree,
    check_table1_theory,
    run_checks,
    validate,
)
from aoi_lab.examples import delivery_trace

logger = logging.getLogger(__name__)


class InvariantSuite(unittest.TestCase):
    def test_analytic_checks_pass(self):
        results = run_checks()
        failed = [str(r) for r in results if not r.passed]
        self.assertEqual(failed, [])
        self.assertEqual(len(results), 9)

    def test_simulation_checks_pass(self):
        results = run_checks(include_sim=True, horizon=5000, seed=Settings.current().seed)
        self.assertEqual(len(results), 9 + 2 + 3 + 1)
        self.assertTrue(all(r.passed for r in results[:9]))
        self.assertTrue(results[-1].passed)
        for r in results[9:-1]:
            self.assertTrue(r.name.startswith("simulated"))
            self.assertIn("vs", r.detail)

    def test_known_deviation_only(self):
        result = check_table1_theory()
        self.assertTrue(result.passed)
        self.assertIn("{} known".format(len(KNOWN_TABLE1_DEVIATIONS)), result.detail)

    def test_engines(self):
        self.assertTrue(check_engines_agree(3).passed)

    def test_validate_returns_results(self):
        self.assertTrue(all(r.passed for r in validate()))

    def test_str(self):
        self.assertEqual(str(CheckResult("x", True)), "PASS   x")
        self.assertEqual(str(CheckResult("x", False, "why")), "FAIL   x: why")


class DeliveryTraceExample(unittest.TestCase):
    def test_runs(self):
        with contextlib.redirect_stdout(io.StringIO()) as out:
            tracers = delivery_trace.main(delta=0.1, successes=300, seed=5)
        det, rand = tracers
        self.assertEqual(det.deliveries, 300)
        self.assertEqual(rand.deliveries, 300)
        self.assertLessEqual(max(det.attempt_counts), 2)
        self.assertIn("rand: k(2)", out.getvalue())


def test_suite():
    return unittest.TestLoader().loadTestsFromName(__name__)


if __name__ == "__main__":
    logging.basicConfig(
        level=Settings.current().log_level,
        format="%(asctime)s [%(thread)d/%(threadName)s] %(message)s",
    )
    unittest.main(argv=Settings.clean_args())
