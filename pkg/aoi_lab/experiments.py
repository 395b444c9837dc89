#
# Copyright (c) 2019 The aoi_lab authors
# All rights reserved.
#
# Distributed under the BSD 3-Clause License. See LICENSE for details.
#

"""
Sweeps and table reproductions built on the analytic and simulation engines,
together with the CSV / JSON writers for their output.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import aoi_lab
from aoi_lab.analytic import aoi_det, aoi_for_policy, aoi_rand, aoi_zero_error
from aoi_lab.exceptions import InvalidArgumentException, ValidationFailure
from aoi_lab.model import (
    PhysicalParams,
    SchemeKind,
    SchemePolicy,
    check_probability,
    derive_channel,
)
from aoi_lab.simulator import (
    Estimate,
    StopKind,
    StopRule,
    Stepping,
    SuccessMode,
    derive_seed,
    replicate,
)

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20190601
DEFAULT_GRID_POINTS = 200
DEFAULT_GRID_DEPTH = 6

GOLDEN_REL_TOL = 1e-3
SIM_REL_TOL = 0.02
RELIABILITY_TOL = 0.005
N_STD_ERRORS = 3.0

FIGURE4_SETTINGS = ((20, 1), (15, 1), (20, 3), (20, 5), (20, 10))
FIGURE4_DELTA = 0.01
FIGURE5_DELTAS = (1.0, 0.1, 0.01, 0.0)

# (battery_j, delta) -> printed (det theory, rand theory)
TABLE1_GOLDEN = (
    ((1e-3, 0.1), (1425.6, 1361.2)),
    ((1.5e-3, 0.1), (1799.1, 1641.3)),
    ((1e-3, 0.2), (1425.6, 1204.7)),
    ((1.5e-3, 0.2), (1799.1, 1502.0)),
)

# (battery_j, target) -> printed (sent, received, reliability %)
TABLE2_GOLDEN = (
    ((0.8e-3, 0.90), (69181, 62220, 89.94)),
    ((0.8e-3, 0.99), (62933, 62314, 99.02)),
    ((1e-3, 0.90), (58964, 53082, 90.02)),
    ((1e-3, 0.99), (53638, 53089, 98.98)),
    ((1.5e-3, 0.90), (42844, 38514, 89.89)),
    ((1.5e-3, 0.99), (39014, 38649, 99.06)),
)

TRADEOFF_COLUMNS = ["delta", "reliability", "k", "aoi_det", "aoi_rand", "aoi_zero_error"]
SWEEP_COLUMNS = [
    "battery_j",
    "beta",
    "pi",
    "scheme",
    "delta",
    "aoi_analytic",
    "aoi_sim_mean",
    "aoi_sim_ci_half",
]
TABLE1_COLUMNS = ["battery_j", "delta", "det_theory", "det_sim", "rand_theory", "rand_sim"]
TABLE2_COLUMNS = [
    "battery_j",
    "target_reliability",
    "statuses_sent",
    "statuses_received",
    "empirical_reliability",
]
CYCLE_COLUMNS = ["X", "H", "F"]


def reference_physical(battery_capacity_j=1e-3, distance_m=20.0, tx_power_w=1.0):
    """Evaluation setting: sigma2 = -50 dBm, eta = 0.5, r = 0.05 BPCU, lambda = 1e3 d^2.2."""
    return PhysicalParams(
        distance_m=float(distance_m),
        tx_power_w=float(tx_power_w),
        conversion_eff=0.5,
        battery_capacity_j=float(battery_capacity_j),
        noise_dbm=-50.0,
        spectral_eff_bpcu=0.05,
    )


def default_capacity_grid(points=26):
    return [float(b) for b in np.linspace(0.5e-3, 3e-3, points)]


@dataclass(frozen=True)
class SimSettings:
    """How every simulated cell of an experiment is run."""

    stop: StopRule = field(default_factory=lambda: StopRule(StopKind.max_successes, 50000))
    reps: int = 1
    seed: int = DEFAULT_SEED
    success_mode: SuccessMode = SuccessMode.bernoulli
    stepping: Stepping = Stepping.charge
    workers: int = 1

    def run(self, chan, scheme, cell_index):
        """Replications of one cell; the cell seed depends only on its index."""
        return replicate(
            chan,
            scheme,
            self.stop,
            self.reps,
            derive_seed(self.seed, cell_index),
            success_mode=self.success_mode,
            stepping=self.stepping,
            workers=self.workers,
        )

    def to_dict(self):
        return {
            "stop": self.stop.kind.value,
            "horizon": self.stop.limit,
            "reps": self.reps,
            "seed": self.seed,
            "success_mode": self.success_mode.value,
            "stepping": self.stepping.value,
        }


@dataclass(frozen=True)
class CurvePoint:
    delta: float
    reliability: float
    k: int
    aoi_det: float
    aoi_rand: float
    aoi_zero_error: float

    def to_record(self):
        return {c: getattr(self, c) for c in TRADEOFF_COLUMNS}


def default_delta_grid(pi, points=DEFAULT_GRID_POINTS, depth=DEFAULT_GRID_DEPTH):
    """`points` log-spaced failure targets in [(1 - pi)**depth, 1 - pi], ascending."""
    check_probability("pi", pi)
    if points < 2:
        raise InvalidArgumentException("Grid needs at least two points")
    top = 1.0 - pi
    grid = np.logspace(depth * np.log10(top), np.log10(top), points)
    grid[-1] = top
    return [float(d) for d in grid]


def tradeoff_curve(beta, pi, delta_grid):
    # type: (float, float, Sequence[float]) -> List[CurvePoint]
    check_probability("pi", pi)
    grid = list(delta_grid)
    if not grid:
        raise InvalidArgumentException("Empty delta grid")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise InvalidArgumentException("Delta grid must be sorted ascending")
    top = 1.0 - pi
    for delta in grid:
        if not 0.0 < delta <= top * (1.0 + 1e-12):
            raise InvalidArgumentException(
                "delta {} outside (0, 1 - pi] = (0, {}]".format(delta, top)
            )

    zero_error = aoi_zero_error(beta, pi).avg_aoi
    points = list()
    for delta in grid:
        delta = min(delta, top)
        det = aoi_det(beta, pi, delta)
        rand = aoi_rand(beta, pi, delta)
        points.append(
            CurvePoint(
                delta=delta,
                reliability=rand.reliability,
                k=rand.k,
                aoi_det=det.avg_aoi,
                aoi_rand=rand.avg_aoi,
                aoi_zero_error=zero_error,
            )
        )
    logger.info("Trade-off curve beta(%g) pi(%g): %d points", beta, pi, len(points))
    return points


@dataclass(frozen=True)
class SweepRow:
    battery_capacity_j: float
    beta: float
    pi: float
    scheme: str
    delta: Optional[float]
    k: Optional[int]
    analytic_aoi: float
    reliability: float
    distance_m: float
    tx_power_w: float
    simulated: Optional[Estimate] = None

    def to_record(self):
        return {
            "battery_j": self.battery_capacity_j,
            "beta": self.beta,
            "pi": self.pi,
            "scheme": self.scheme,
            "delta": self.delta,
            "aoi_analytic": self.analytic_aoi,
            "aoi_sim_mean": None if self.simulated is None else self.simulated.mean,
            "aoi_sim_ci_half": None if self.simulated is None else self.simulated.ci_half_width,
        }

    def sim_consistent(self):
        return self.simulated is None or self.simulated.within(self.analytic_aoi, N_STD_ERRORS)


def capacity_sweep(phys, capacity_grid, kind, delta=None, sim=None, first_cell=0, strict=True):
    # type: (PhysicalParams, Sequence[float], SchemeKind, Optional[float], Optional[SimSettings], int, bool) -> List[SweepRow]
    """
    AoI over battery capacities for one scheme. (beta, pi) are re-derived at
    every capacity since both depend on B. With `sim` every capacity is also
    simulated; an analytic value outside the simulated 3 standard-error band
    raises ValidationFailure when `strict`, and is logged otherwise.
    """
    if not isinstance(phys, PhysicalParams):
        raise InvalidArgumentException("Invalid argument type")
    grid = [float(b) for b in capacity_grid]
    if not grid or any(b <= 0 for b in grid):
        raise InvalidArgumentException("Battery capacities must be positive")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidArgumentException("Battery capacities must be strictly increasing")

    rows = list()
    for index, capacity in enumerate(grid):
        chan = derive_channel(phys.with_capacity(capacity))
        policy = SchemePolicy.for_delta(kind, chan.pi, delta)
        report = aoi_for_policy(chan.beta, chan.pi, policy)
        simulated = None
        if sim is not None:
            simulated = sim.run(chan, policy, first_cell + index).aoi
        row = SweepRow(
            battery_capacity_j=capacity,
            beta=chan.beta,
            pi=chan.pi,
            scheme=policy.label,
            delta=policy.delta if delta is None else float(delta),
            k=report.k,
            analytic_aoi=report.avg_aoi,
            reliability=report.reliability,
            distance_m=phys.distance_m,
            tx_power_w=phys.tx_power_w,
            simulated=simulated,
        )
        if not row.sim_consistent():
            msg = "Sweep B({:g}) {}: analytic AoI {:.2f} outside simulated {}".format(
                capacity, row.scheme, row.analytic_aoi, row.simulated
            )
            if strict:
                raise ValidationFailure(msg)
            logger.warning(msg)
        rows.append(row)
    return rows


def figure4_sweep(capacity_grid=None, sim=None, delta=FIGURE4_DELTA, strict=True):
    # type: (Optional[Sequence[float]], Optional[SimSettings], float, bool) -> Dict[Tuple[float, float], List[SweepRow]]
    """Randomized scheme at 99% reliability for every (d, P) of the preset."""
    grid = default_capacity_grid() if capacity_grid is None else list(capacity_grid)
    curves = dict()
    for index, (distance, power) in enumerate(FIGURE4_SETTINGS):
        curves[(distance, power)] = capacity_sweep(
            reference_physical(distance_m=distance, tx_power_w=power),
            grid,
            SchemeKind.randomized,
            delta,
            sim,
            first_cell=index * len(grid),
            strict=strict,
        )
    return curves


def figure5_sweep(capacity_grid=None, sim=None, deltas=FIGURE5_DELTAS, strict=True):
    # type: (Optional[Sequence[float]], Optional[SimSettings], Sequence[float], bool) -> Dict[float, List[SweepRow]]
    """Randomized scheme at d = 20 m, P = 1 W; delta 1 is single-shot and delta 0 zero-error."""
    grid = default_capacity_grid() if capacity_grid is None else list(capacity_grid)
    curves = dict()
    for index, delta in enumerate(deltas):
        curves[delta] = capacity_sweep(
            reference_physical(),
            grid,
            SchemeKind.randomized,
            delta,
            sim,
            first_cell=index * len(grid),
            strict=strict,
        )
    return curves


def _deviates(value, golden, rel_tol=GOLDEN_REL_TOL):
    return abs(value - golden) > rel_tol * abs(golden)


def _sim_disagrees(simulated, theory):
    if simulated is None:
        return False
    return not simulated.within(theory, N_STD_ERRORS) or _deviates(simulated.mean, theory, SIM_REL_TOL)


@dataclass(frozen=True)
class Table1Row:
    battery_capacity_j: float
    delta: float
    beta: float
    pi: float
    k: int
    det_theory: float
    rand_theory: float
    det_golden: float
    rand_golden: float
    det_sim: Optional[Estimate] = None
    rand_sim: Optional[Estimate] = None

    @property
    def det_deviates(self):
        return _deviates(self.det_theory, self.det_golden)

    @property
    def rand_deviates(self):
        return _deviates(self.rand_theory, self.rand_golden)

    def sim_failures(self):
        """
        Simulated cells that disagree with theory: the analytic value lies outside
        the 3 standard-error band, or the simulated mean is off by more than 2%.
        """
        failed = list()
        if _sim_disagrees(self.det_sim, self.det_theory):
            failed.append("det")
        if _sim_disagrees(self.rand_sim, self.rand_theory):
            failed.append("rand")
        return failed

    def to_record(self):
        return {
            "battery_j": self.battery_capacity_j,
            "delta": self.delta,
            "det_theory": self.det_theory,
            "det_sim": None if self.det_sim is None else self.det_sim.mean,
            "rand_theory": self.rand_theory,
            "rand_sim": None if self.rand_sim is None else self.rand_sim.mean,
        }

    def to_dict(self):
        out = dict(self.to_record())
        out.update(
            {
                "beta": self.beta,
                "pi": self.pi,
                "k": self.k,
                "det_golden": self.det_golden,
                "rand_golden": self.rand_golden,
                "det_deviates": self.det_deviates,
                "rand_deviates": self.rand_deviates,
                "det_sim": None if self.det_sim is None else self.det_sim.to_dict(),
                "rand_sim": None if self.rand_sim is None else self.rand_sim.to_dict(),
            }
        )
        return out


def reproduce_table1(sim=None, strict=True):
    # type: (Optional[SimSettings], bool) -> List[Table1Row]
    """
    Deterministic vs randomized AoI at d = 20 m, P = 1 W. Theory cells are
    compared with the printed values; with `sim` every cell is also simulated
    and, when `strict`, a cell that fails the 3 standard-error band or the 2%
    tolerance raises ValidationFailure.
    """
    rows = list()
    for index, ((capacity, delta), (det_golden, rand_golden)) in enumerate(TABLE1_GOLDEN):
        chan = derive_channel(reference_physical(capacity))
        det = aoi_det(chan.beta, chan.pi, delta)
        rand = aoi_rand(chan.beta, chan.pi, delta)
        det_sim = rand_sim = None
        if sim is not None:
            det_policy = SchemePolicy.for_delta(SchemeKind.deterministic, chan.pi, delta)
            rand_policy = SchemePolicy.for_delta(SchemeKind.randomized, chan.pi, delta)
            det_sim = sim.run(chan, det_policy, 2 * index).aoi
            rand_sim = sim.run(chan, rand_policy, 2 * index + 1).aoi
        row = Table1Row(
            battery_capacity_j=capacity,
            delta=delta,
            beta=chan.beta,
            pi=chan.pi,
            k=det.k,
            det_theory=det.avg_aoi,
            rand_theory=rand.avg_aoi,
            det_golden=det_golden,
            rand_golden=rand_golden,
            det_sim=det_sim,
            rand_sim=rand_sim,
        )
        if row.det_deviates or row.rand_deviates:
            logger.warning(
                "Table 1 B(%g) delta(%g): theory det(%.1f) rand(%.1f) differs from printed det(%.1f) rand(%.1f), k(%d)",
                capacity,
                delta,
                row.det_theory,
                row.rand_theory,
                det_golden,
                rand_golden,
                row.k,
            )
        failed = row.sim_failures()
        if failed:
            msg = (
                "Table 1 B({:g}) delta({:g}): simulated {} AoI inconsistent with theory, "
                "det {} vs {:.2f}, rand {} vs {:.2f}"
            ).format(
                capacity, delta, "/".join(failed), row.det_sim, row.det_theory, row.rand_sim, row.rand_theory
            )
            if strict:
                raise ValidationFailure(msg)
            logger.warning(msg)
        rows.append(row)
    return rows


@dataclass(frozen=True)
class Table2Row:
    battery_capacity_j: float
    target_reliability: float
    statuses_sent: int
    statuses_received: int
    reliability: Estimate
    golden_percent: float

    @property
    def empirical_reliability(self):
        return self.statuses_received / self.statuses_sent

    @property
    def within_tolerance(self):
        return abs(self.empirical_reliability - self.target_reliability) <= RELIABILITY_TOL

    def to_record(self):
        return {
            "battery_j": self.battery_capacity_j,
            "target_reliability": self.target_reliability,
            "statuses_sent": self.statuses_sent,
            "statuses_received": self.statuses_received,
            "empirical_reliability": self.empirical_reliability,
        }

    def to_dict(self):
        out = dict(self.to_record())
        out.update(
            {
                "reliability": self.reliability.to_dict(),
                "golden_percent": self.golden_percent,
                "within_tolerance": self.within_tolerance,
            }
        )
        return out


def table2_settings(sim=None):
    """Default Table 2 run: 10^8 slots per cell, the horizon implied by the printed status counts."""
    if sim is not None:
        return sim
    return SimSettings(stop=StopRule(StopKind.max_slots, 10 ** 8))


def reproduce_table2(sim=None, strict=True):
    # type: (Optional[SimSettings], bool) -> List[Table2Row]
    """Empirical reliability of the randomized scheme against its 90% / 99% guarantee."""
    sim = table2_settings(sim)
    rows = list()
    for index, ((capacity, target), golden) in enumerate(TABLE2_GOLDEN):
        chan = derive_channel(reference_physical(capacity))
        policy = SchemePolicy.for_delta(SchemeKind.randomized, chan.pi, round(1.0 - target, 12))
        result = sim.run(chan, policy, index)
        row = Table2Row(
            battery_capacity_j=capacity,
            target_reliability=target,
            statuses_sent=result.statuses_sensed,
            statuses_received=result.statuses_delivered,
            reliability=result.reliability,
            golden_percent=golden[2],
        )
        logger.info(
            "Table 2 B(%g) target(%.2f): %d sent, %d received, %.2f%%",
            capacity,
            target,
            row.statuses_sent,
            row.statuses_received,
            100.0 * row.empirical_reliability,
        )
        if not row.within_tolerance:
            msg = "Table 2 B({:g}) target({:.2f}): empirical reliability {:.4f} off target".format(
                capacity, target, row.empirical_reliability
            )
            if strict:
                raise ValidationFailure(msg)
            logger.warning(msg)
        rows.append(row)
    return rows


def run_metadata(**extra):
    meta = {"tool": "aoi_lab", "version": aoi_lab.__version__}
    meta.update(extra)
    return meta


def _records(rows):
    return [r if isinstance(r, dict) else r.to_record() for r in rows]


def write_csv(rows, path, columns=None):
    """One header row, comma separated, 6 significant digits, empty cells for missing values."""
    frame = pd.DataFrame(_records(rows), columns=columns)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.6g", na_rep="", lineterminator="\n")
    logger.info("Wrote %d rows to %s", len(frame), path)
    return path


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def write_json(payload, path):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w") as f:
        json.dump(_jsonable(payload), f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info("Wrote %s", path)
    return path


def write_cycles_csv(result, path):
    """Per-cycle records of one episode: length X, stale head H, transmissions F."""
    frame = pd.DataFrame(result.cycles, columns=CYCLE_COLUMNS)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path
