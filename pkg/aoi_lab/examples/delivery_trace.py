#
# Copyright (c) 2019 The aoi_lab authors
# All rights reserved.
#
# Distributed under the BSD 3-Clause License. See LICENSE for details.
#

import logging
import sys

from aoi_lab.analytic import aoi_for_policy
from aoi_lab.model import SchemeKind, SchemePolicy, derive_channel
from aoi_lab.experiments import reference_physical
from aoi_lab.observers import SimulationObserver
from aoi_lab.simulator import StopKind, StopRule, run_episode


class DeliveryTracer(SimulationObserver):
    def __init__(self):
        super(DeliveryTracer, self).__init__()
        self.deliveries = 0
        self.give_ups = 0
        self.attempt_counts = dict()

    def on_delivery(self, episode, slot, birth, attempts):
        self.deliveries += 1
        self.attempt_counts[attempts] = self.attempt_counts.get(attempts, 0) + 1

    def on_give_up(self, episode, slot, birth, attempts):
        self.give_ups += 1


def main(delta=0.1, successes=2000, seed=7):
    chan = derive_channel(reference_physical(1e-3))
    tracers = list()
    for kind in (SchemeKind.deterministic, SchemeKind.randomized):
        policy = SchemePolicy.for_delta(kind, chan.pi, delta)
        tracer = DeliveryTracer()
        tracers.append(tracer)
        result = run_episode(chan, policy, StopRule(StopKind.max_successes, successes), seed, observers=[tracer])
        report = aoi_for_policy(chan.beta, chan.pi, policy)
        print("{}: k({}) alpha({:.3f})".format(kind.value, policy.retry.k, policy.retry.alpha))
        print("  delivered {}, given up {}".format(tracer.deliveries, tracer.give_ups))
        print("  attempts at delivery {}".format(sorted(tracer.attempt_counts.items())))
        print(
            "  avg AoI {:.1f} (analytic {:.1f}), reliability {:.4f} (analytic {:.4f})".format(
                result.empirical_avg_aoi, report.avg_aoi, result.empirical_reliability, report.reliability
            )
        )
    return tracers


if __name__ == "__main__":
    logging.basicConfig(
        level="INFO",
        format="%(asctime)s [%(thread)d/%(threadName)s] %(message)s",
    )
    delta = float(sys.argv[1]) if len(sys.argv) > 1 else 0.1
    main(delta)
    quit()
