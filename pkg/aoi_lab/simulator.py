#
# Copyright (c) 2019 The aoi_lab authors
# All rights reserved.
#
# Distributed under the BSD 3-Clause License. See LICENSE for details.
#

"""
Slot-level Monte Carlo of the sensor, energy source and receiver.

Each slot runs harvest -> sense -> transmit -> resolve. A transmission happens
in the slot the battery becomes full, drains it completely, and is seen by the
receiver one slot later. AoI is measured from the first delivery on, over
complete renewal cycles only.

Randomness comes from numpy's PCG64. An episode seed is split with
SeedSequence into three independent streams: harvest (one draw per slot),
channel (one draw per transmission) and scheme (one draw per sensed status).
Replication seeds are SeedSequence(base_seed, spawn_key=(index,)) reduced to
one 64-bit word. All exponential variates use the inverse CDF -log1p(-u).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from threading import Lock
from typing import Dict, List, Optional

import numpy as np
import wrapt
from scipy import stats

from aoi_lab.exceptions import IllegalStateException, InvalidArgumentException
from aoi_lab.model import ChannelParams, SchemePolicy, check_count
from aoi_lab.observers import ReplicationObserver, SimulationObserver

logger = logging.getLogger(__name__)

SEED_MAX = 2 ** 64 - 1
MIN_CHARGE_SAMPLES = 1000
CI_LEVEL = 0.95
AOI_BATCHES = 50

_HARVEST_BLOCK = 1 << 16
_CHANNEL_BLOCK = 1 << 12


class SuccessMode(Enum):
    bernoulli = "bernoulli"
    fading = "fading"


class StopKind(Enum):
    max_slots = "slots"
    max_statuses_sensed = "statuses"
    max_successes = "successes"


class Stepping(Enum):
    slot = "slot"
    charge = "charge"


@dataclass(frozen=True)
class StopRule:
    kind: StopKind
    limit: int

    def __post_init__(self):
        object.__setattr__(self, "limit", check_count("Stop rule limit", self.limit))

    def __str__(self):
        return "{}({})".format(self.kind.value, self.limit)


@dataclass
class SimState:
    slot: int = 0
    battery_j: float = 0.0
    current_status_birth: Optional[int] = None
    attempts_used: int = 0
    attempt_limit: Optional[int] = None
    receiver_aoi: Optional[int] = None
    last_delivered_birth: Optional[int] = None


@dataclass(frozen=True)
class CycleRecord:
    """One renewal cycle: X slots long, rectangle height H, F transmissions."""

    length: int
    stale_head: int
    transmissions: int

    @property
    def area(self):
        return self.stale_head * self.length + self.length * (self.length + 1) // 2


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    ci_low: float
    ci_high: float

    @classmethod
    def from_std_error(cls, mean, std_error, level=CI_LEVEL):
        z = float(stats.norm.ppf(0.5 + level / 2.0))
        return cls(mean=mean, std_error=std_error, ci_low=mean - z * std_error, ci_high=mean + z * std_error)

    @property
    def ci_half_width(self):
        return 0.5 * (self.ci_high - self.ci_low)

    def within(self, value, n_std_errors=3.0):
        return abs(value - self.mean) <= n_std_errors * self.std_error

    def __str__(self):
        return "{:.6g} +/- {:.3g}".format(self.mean, self.std_error)

    def to_dict(self):
        return {
            "mean": self.mean,
            "std_error": self.std_error,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
        }


@dataclass
class SimResult:
    seed: int
    slots_run: int
    statuses_sensed: int
    statuses_delivered: int
    measured_area: int
    cycles: np.ndarray
    charge_times: np.ndarray
    limit_tally: Dict[Optional[int], int] = field(default_factory=dict)
    max_attempts_used: int = 0

    @property
    def empirical_reliability(self):
        if self.statuses_sensed == 0:
            return float("nan")
        return self.statuses_delivered / self.statuses_sensed

    @property
    def cycle_lengths(self):
        return self.cycles[:, 0]

    @property
    def stale_heads(self):
        return self.cycles[:, 1]

    @property
    def transmissions(self):
        return self.cycles[:, 2]

    @property
    def cycle_areas(self):
        x = self.cycle_lengths
        return self.stale_heads * x + x * (x + 1) // 2

    @property
    def empirical_avg_aoi(self):
        total = int(self.cycle_lengths.sum())
        if total == 0:
            return float("nan")
        return self.measured_area / total

    def aoi_estimate(self):
        """
        Ratio estimator over cycles. The standard error is the delta-method one
        computed on batch sums, since a cycle's stale head is part of the
        previous cycle.
        """
        n = len(self.cycles)
        if n < 2:
            raise InvalidArgumentException("Need at least two renewal cycles for an error estimate")
        x = self.cycle_lengths.astype(float)
        ratio = self.empirical_avg_aoi
        resid = self.cycle_areas.astype(float) - ratio * x
        m = min(n, AOI_BATCHES)
        batch = np.array([chunk.sum() for chunk in np.array_split(resid, m)])
        std_error = math.sqrt(m / (m - 1.0) * float(np.dot(batch, batch))) / float(x.sum())
        return Estimate.from_std_error(ratio, std_error)

    def reliability_estimate(self):
        p = self.empirical_reliability
        return Estimate.from_std_error(p, math.sqrt(p * (1.0 - p) / self.statuses_sensed))

    def to_dict(self, include_records=False):
        charge = self.charge_times.astype(float)
        out = {
            "seed": self.seed,
            "slots_run": self.slots_run,
            "statuses_sensed": self.statuses_sensed,
            "statuses_delivered": self.statuses_delivered,
            "empirical_reliability": self.empirical_reliability,
            "empirical_avg_aoi": self.empirical_avg_aoi,
            "cycles": len(self.cycles),
            "charge_mean": float(charge.mean()) if len(charge) else None,
            "charge_second": float(np.mean(charge * charge)) if len(charge) else None,
            "max_attempts_used": self.max_attempts_used,
            "limit_tally": {gen_tally_key(k): v for k, v in sorted_tally(self.limit_tally)},
        }
        if include_records:
            out["cycle_records"] = self.cycles.tolist()
        return out


def gen_tally_key(limit):
    return "unbounded" if limit is None else str(limit)


def sorted_tally(tally):
    return sorted(tally.items(), key=lambda kv: -1 if kv[0] is None else kv[0])


@dataclass(frozen=True)
class ChargeEstimate:
    mean: float
    second: float
    mean_std_error: float
    second_std_error: float
    samples: int


def _moment_estimate(samples):
    values = np.asarray(samples, dtype=float)
    n = len(values)
    squares = values * values
    return ChargeEstimate(
        mean=float(values.mean()),
        second=float(squares.mean()),
        mean_std_error=float(values.std(ddof=1) / math.sqrt(n)),
        second_std_error=float(squares.std(ddof=1) / math.sqrt(n)),
        samples=n,
    )


def empirical_charge_moments(result):
    # type: (SimResult) -> ChargeEstimate
    if len(result.charge_times) < MIN_CHARGE_SAMPLES:
        raise InvalidArgumentException(
            "Insufficient samples: {} charge intervals, need {}".format(
                len(result.charge_times), MIN_CHARGE_SAMPLES
            )
        )
    return _moment_estimate(result.charge_times)


def empirical_attempt_moments(result):
    # type: (SimResult) -> ChargeEstimate
    if len(result.cycles) < 2:
        raise InvalidArgumentException("Insufficient samples: fewer than two renewal cycles")
    return _moment_estimate(result.transmissions)


def check_seed(seed):
    if not isinstance(seed, (int, np.integer)) or not 0 <= int(seed) <= SEED_MAX:
        raise InvalidArgumentException("Seed must be an integer in [0, 2**64), got {!r}".format(seed))
    return int(seed)


def derive_seed(base_seed, index):
    """64-bit seed of replication `index`, mixed from base_seed by SeedSequence."""
    base_seed = check_seed(base_seed)
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class _UniformStream(object):
    """Block-buffered uniforms on [0, 1)."""

    def __init__(self, generator, block):
        self._gen = generator
        self._block = block
        self._buf = np.empty(0)
        self._pos = 0

    def next(self):
        if self._pos == len(self._buf):
            self._buf = self._gen.random(self._block)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return float(u)


class HarvestProcess(object):
    """
    Energy harvested per slot as a fraction of the battery capacity,
    eta * P * n_t / B with n_t ~ Exp(lambda).
    """

    def __init__(self, generator, chan):
        self._gen = generator
        self._scale = chan.harvest_power_w / (chan.lam * chan.battery_capacity_j)
        self._window = int(min(2.0 * (1.0 + chan.beta) + 16, _HARVEST_BLOCK))
        self._buf = np.empty(0)
        self._pos = 0

    def _refill(self):
        u = self._gen.random(_HARVEST_BLOCK)
        buf = -np.log1p(-u) * self._scale
        if not np.all(np.isfinite(buf)):
            raise IllegalStateException("Non-finite harvest draw")
        self._buf = buf
        self._pos = 0

    def next_increment(self):
        if self._pos == len(self._buf):
            self._refill()
        inc = self._buf[self._pos]
        self._pos += 1
        return float(inc)

    def next_charge_time(self):
        """
        Slots until an empty battery is full. Partial sums are accumulated
        sequentially, so the result matches adding next_increment() slot by slot.
        """
        level = 0.0
        slots = 0
        while True:
            if self._pos == len(self._buf):
                self._refill()
            window = self._buf[self._pos:self._pos + self._window]
            sums = np.cumsum(np.concatenate(([level], window)))[1:]
            idx = int(np.searchsorted(sums, 1.0, side="left"))
            if idx < len(window):
                self._pos += idx + 1
                return slots + idx + 1
            level = float(sums[-1])
            slots += len(window)
            self._pos += len(window)


class Episode(object):
    observer_lock = Lock()

    def __init__(self, chan, scheme, stop, seed, success_mode=SuccessMode.bernoulli):
        # type: (ChannelParams, SchemePolicy, StopRule, int, SuccessMode) -> None
        super(Episode, self).__init__()
        if not isinstance(chan, ChannelParams) or not isinstance(scheme, SchemePolicy):
            raise InvalidArgumentException("Invalid argument type")
        if not isinstance(stop, StopRule):
            raise InvalidArgumentException("Invalid stop rule")
        self.chan = chan
        self.scheme = scheme
        self.stop = stop
        self.seed = check_seed(seed)
        self.success_mode = SuccessMode(success_mode)
        self.observers = list()  # type: List[SimulationObserver]

        harvest_ss, channel_ss, scheme_ss = np.random.SeedSequence(self.seed).spawn(3)
        self.harvest = HarvestProcess(np.random.Generator(np.random.PCG64(harvest_ss)), chan)
        self._channel = _UniformStream(np.random.Generator(np.random.PCG64(channel_ss)), _CHANNEL_BLOCK)
        self._scheme = _UniformStream(np.random.Generator(np.random.PCG64(scheme_ss)), _CHANNEL_BLOCK)

        self.state = SimState()
        self._sensed = 0
        self._delivered = 0
        self._cycles = list()
        self._charge_times = list()
        self._tally = dict()
        self._max_attempts = 0
        self._since_delivery = 0
        self._prev_reception = None
        self._prev_birth = None

    @wrapt.synchronized(observer_lock)
    def observer_register(self, observer):
        self.observers.append(observer)

    @wrapt.synchronized(observer_lock)
    def observer_unregister(self, observer):
        self.observers.remove(observer)

    def _transmission_succeeds(self):
        u = self._channel.next()
        if self.success_mode == SuccessMode.bernoulli:
            return u < self.chan.pi
        fading = -math.log1p(-u) / self.chan.lam
        snr = self.chan.battery_capacity_j * fading / self.chan.noise_w
        return math.log2(1.0 + snr) > self.chan.spectral_eff_bpcu

    def _sense(self, slot):
        s = self.state
        limit = self.scheme.attempt_limit(self._scheme.next())
        s.current_status_birth = slot
        s.attempts_used = 0
        s.attempt_limit = limit
        self._tally[limit] = self._tally.get(limit, 0) + 1
        for obs in self.observers:
            obs.on_status_sensed(self, slot, limit)

    def _transmit(self, slot):
        """Full battery at `slot`: sense if needed, send, resolve. Returns the delivered cycle, if any."""
        s = self.state
        if s.current_status_birth is None:
            self._sense(slot)
        s.attempts_used += 1
        self._since_delivery += 1
        success = self._transmission_succeeds()
        for obs in self.observers:
            obs.on_transmission(self, slot, s.attempts_used, success)

        cycle = None
        birth = s.current_status_birth
        if success:
            reception = slot + 1
            if self._prev_reception is not None:
                cycle = CycleRecord(
                    length=reception - self._prev_reception,
                    stale_head=self._prev_reception - self._prev_birth - 1,
                    transmissions=self._since_delivery,
                )
                self._cycles.append((cycle.length, cycle.stale_head, cycle.transmissions))
            self._since_delivery = 0
            self._prev_reception = reception
            self._prev_birth = birth
            self._delivered += 1
            self._sensed += 1
            self._max_attempts = max(self._max_attempts, s.attempts_used)
            for obs in self.observers:
                obs.on_delivery(self, slot, birth, s.attempts_used)
            s.current_status_birth = None
        elif s.attempt_limit is not None and s.attempts_used >= s.attempt_limit:
            self._sensed += 1
            self._max_attempts = max(self._max_attempts, s.attempts_used)
            for obs in self.observers:
                obs.on_give_up(self, slot, birth, s.attempts_used)
            s.current_status_birth = None

        if cycle is not None:
            for obs in self.observers:
                obs.on_cycle_complete(self, cycle)
        return cycle

    def _stop_reached(self):
        if self.stop.kind == StopKind.max_statuses_sensed:
            return self._sensed >= self.stop.limit
        if self.stop.kind == StopKind.max_successes:
            return self._delivered >= self.stop.limit
        return False

    def _run_charges(self):
        """Jump from one full charge to the next."""
        s = self.state
        area = 0
        while True:
            charge = self.harvest.next_charge_time()
            if self.stop.kind == StopKind.max_slots and s.slot + charge > self.stop.limit:
                s.slot = self.stop.limit
                break
            s.slot += charge
            self._charge_times.append(charge)
            cycle = self._transmit(s.slot)
            if cycle is not None:
                area += cycle.area
            if self._stop_reached():
                break
        return area

    def _run_slots(self):
        """Literal per-slot state machine; the receiver AoI is summed slot by slot."""
        s = self.state
        area = 0
        running = 0
        level = 0.0
        last_full = 0
        pending_reception = None
        delivered_birth = None
        while True:
            slot = s.slot + 1
            if self.stop.kind == StopKind.max_slots and slot > self.stop.limit:
                break
            s.slot = slot

            if slot == pending_reception:
                s.last_delivered_birth = delivered_birth
                s.receiver_aoi = slot - delivered_birth
                running = 0
            elif s.receiver_aoi is not None:
                s.receiver_aoi += 1
            if s.receiver_aoi is not None:
                if s.receiver_aoi != slot - s.last_delivered_birth:
                    raise IllegalStateException("Receiver AoI out of step at slot {}".format(slot))
                running += s.receiver_aoi

            level = level + self.harvest.next_increment()
            if level < 1.0:
                s.battery_j = level * self.chan.battery_capacity_j
                continue

            s.battery_j = self.chan.battery_capacity_j
            self._charge_times.append(slot - last_full)
            last_full = slot
            birth = s.current_status_birth if s.current_status_birth is not None else slot
            delivered_before = self._delivered
            cycle = self._transmit(slot)
            s.battery_j = 0.0
            level = 0.0
            if s.attempt_limit is not None and s.attempts_used > s.attempt_limit:
                raise IllegalStateException("Status sent more often than its attempt limit")

            if self._delivered > delivered_before:
                pending_reception = slot + 1
                delivered_birth = birth
                if cycle is not None:
                    area += running
            if self._stop_reached():
                break
        return area

    def run(self, stepping=Stepping.charge):
        # type: (Stepping) -> SimResult
        stepping = Stepping(stepping)
        logger.debug(
            "Episode seed(%d) %s stop(%s) mode(%s) stepping(%s)",
            self.seed,
            self.scheme,
            self.stop,
            self.success_mode.value,
            stepping.value,
        )
        if stepping == Stepping.charge:
            area = self._run_charges()
        else:
            area = self._run_slots()

        result = SimResult(
            seed=self.seed,
            slots_run=self.state.slot,
            statuses_sensed=self._sensed,
            statuses_delivered=self._delivered,
            measured_area=int(area),
            cycles=np.asarray(self._cycles, dtype=np.int64).reshape(-1, 3),
            charge_times=np.asarray(self._charge_times, dtype=np.int64),
            limit_tally=dict(self._tally),
            max_attempts_used=self._max_attempts,
        )
        if len(result.cycles) == 0:
            raise IllegalStateException(
                "No complete renewal cycle within stop rule {}, increase the horizon".format(self.stop)
            )
        return result


def run_episode(
    chan,
    scheme,
    stop,
    seed,
    success_mode=SuccessMode.bernoulli,
    stepping=Stepping.charge,
    observers=None,
):
    # type: (ChannelParams, SchemePolicy, StopRule, int, SuccessMode, Stepping, Optional[List[SimulationObserver]]) -> SimResult
    episode = Episode(chan, scheme, stop, seed, success_mode)
    for obs in observers or ():
        episode.observer_register(obs)
    return episode.run(stepping)


@dataclass
class ReplicatedResult:
    base_seed: int
    results: List[SimResult]
    aoi: Estimate
    reliability: Estimate

    @property
    def n_reps(self):
        return len(self.results)

    @property
    def statuses_sensed(self):
        return sum(r.statuses_sensed for r in self.results)

    @property
    def statuses_delivered(self):
        return sum(r.statuses_delivered for r in self.results)

    @property
    def pooled_reliability(self):
        return self.statuses_delivered / self.statuses_sensed

    def pooled(self):
        """All replications merged into one result, in replication order."""
        first = self.results[0]
        tally = dict()
        for r in self.results:
            for k, v in r.limit_tally.items():
                tally[k] = tally.get(k, 0) + v
        return SimResult(
            seed=first.seed,
            slots_run=sum(r.slots_run for r in self.results),
            statuses_sensed=self.statuses_sensed,
            statuses_delivered=self.statuses_delivered,
            measured_area=sum(r.measured_area for r in self.results),
            cycles=np.concatenate([r.cycles for r in self.results]),
            charge_times=np.concatenate([r.charge_times for r in self.results]),
            limit_tally=tally,
            max_attempts_used=max(r.max_attempts_used for r in self.results),
        )

    def to_dict(self, include_records=False):
        return {
            "base_seed": self.base_seed,
            "n_reps": self.n_reps,
            "statuses_sensed": self.statuses_sensed,
            "statuses_delivered": self.statuses_delivered,
            "avg_aoi": self.aoi.to_dict(),
            "reliability": self.reliability.to_dict(),
            "replications": [r.to_dict(include_records) for r in self.results],
        }


class _ReplicationCollector(object):
    lock = Lock()

    def __init__(self, observers):
        self.results = dict()
        self.observers = list(observers or ())

    @wrapt.synchronized(lock)
    def add(self, index, result):
        self.results[index] = result
        for obs in self.observers:
            obs.on_replication_done(index, result)

    def ordered(self):
        return [self.results[i] for i in sorted(self.results)]


def _between(values):
    values = np.asarray(values, dtype=float)
    return Estimate.from_std_error(
        float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))
    )


def replicate(
    chan,
    scheme,
    stop,
    n_reps,
    base_seed,
    success_mode=SuccessMode.bernoulli,
    stepping=Stepping.charge,
    workers=1,
    observers=None,
):
    # type: (ChannelParams, SchemePolicy, StopRule, int, int, SuccessMode, Stepping, int, Optional[List[ReplicationObserver]]) -> ReplicatedResult
    n_reps = check_count("n_reps", n_reps)
    base_seed = check_seed(base_seed)
    collector = _ReplicationCollector(observers)

    def work(index):
        seed = derive_seed(base_seed, index)
        collector.add(index, run_episode(chan, scheme, stop, seed, success_mode, stepping))

    if workers > 1 and n_reps > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, range(n_reps)))
    else:
        for index in range(n_reps):
            work(index)

    results = collector.ordered()
    if n_reps == 1:
        aoi = results[0].aoi_estimate()
        reliability = results[0].reliability_estimate()
    else:
        aoi = _between([r.empirical_avg_aoi for r in results])
        reliability = _between([r.empirical_reliability for r in results])

    logger.info(
        "Replicated %d episode(s) of %s: avg_aoi %.6g +/- %.3g, reliability %.6g +/- %.3g",
        n_reps,
        scheme,
        aoi.mean,
        aoi.ci_half_width,
        reliability.mean,
        reliability.ci_half_width,
    )
    return ReplicatedResult(base_seed=base_seed, results=results, aoi=aoi, reliability=reliability)
