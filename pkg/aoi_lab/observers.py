#
# Copyright (c) 2019 The aoi_lab authors
# All rights reserved.
#
# Distributed under the BSD 3-Clause License. See LICENSE for details.
#

import logging

logger = logging.getLogger(__name__)


def gen_limit_str(attempt_limit):
    return "unbounded" if attempt_limit is None else str(attempt_limit)


class SimulationObserver(object):
    """
    Observer of a simulation episode. Handlers are called synchronously from
    the episode loop, in slot order.
    """

    def __init__(self, *args, **kwargs):
        super(SimulationObserver, self).__init__()

    def on_status_sensed(self, episode, slot, attempt_limit):
        logger.debug(
            "evt> status_sensed slot(%d) attempt_limit(%s)", slot, gen_limit_str(attempt_limit)
        )

    def on_transmission(self, episode, slot, attempt, success):
        pass

    def on_delivery(self, episode, slot, birth, attempts):
        logger.debug(
            "evt> delivered slot(%d)\n birth(%d)\n attempts(%d)", slot, birth, attempts
        )

    def on_give_up(self, episode, slot, birth, attempts):
        logger.debug("evt> give_up slot(%d)\n birth(%d)\n attempts(%d)", slot, birth, attempts)

    def on_cycle_complete(self, episode, cycle):
        logger.debug(
            "evt> cycle_complete length(%d) stale_head(%d) transmissions(%d)",
            cycle.length,
            cycle.stale_head,
            cycle.transmissions,
        )


class ReplicationObserver(object):
    """
    Observer used by replicate(), called once per finished replication.
    May be called from worker threads.
    """

    def __init__(self, *args, **kwargs):
        super(ReplicationObserver, self).__init__()

    def on_replication_done(self, index, result):
        logger.debug(
            "evt> replication_done index(%d) seed(%d) avg_aoi(%.6g) reliability(%.6g)",
            index,
            result.seed,
            result.empirical_avg_aoi,
            result.empirical_reliability,
        )
