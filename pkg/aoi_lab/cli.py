#
# Copyright (c) 2019 The aoi_lab authors
# All rights reserved.
#
# Distributed under the BSD 3-Clause License. See LICENSE for details.
#

import argparse
import logging
import os
import sys

from aoi_lab import __version__
from aoi_lab.analytic import aoi_for_policy, zero_error_cost
from aoi_lab.checks import run_checks
from aoi_lab.config import load_config, merge_flags
from aoi_lab.exceptions import (
    AoiLabException,
    ConfigException,
    InvalidArgumentException,
    MissingArgumentException,
    ValidationFailure,
)
from aoi_lab.experiments import (
    SWEEP_COLUMNS,
    TABLE1_COLUMNS,
    TABLE2_COLUMNS,
    TRADEOFF_COLUMNS,
    SimSettings,
    capacity_sweep,
    default_capacity_grid,
    default_delta_grid,
    figure4_sweep,
    figure5_sweep,
    reference_physical,
    reproduce_table1,
    reproduce_table2,
    run_metadata,
    tradeoff_curve,
    write_csv,
    write_cycles_csv,
    write_json,
)
from aoi_lab.model import SchemeKind
from aoi_lab.simulator import StopKind, StopRule, SuccessMode

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(thread)d/%(threadName)s] %(message)s"

CONFIG_FLAGS = (
    "d",
    "P",
    "eta",
    "B",
    "noise_dbm",
    "r",
    "beta",
    "pi",
    "scheme",
    "delta",
    "stop",
    "horizon",
    "reps",
    "seed",
    "success_mode",
    "out",
    "format",
    "workers",
)


def _common_parser():
    parser = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--out", help="output directory (default $AOI_LAB_OUT or ./results)")
    parser.add_argument("--format", help="comma separated output formats: csv,json")
    parser.add_argument("--seed", help="base seed, unsigned 64-bit")
    parser.add_argument("--reps", help="number of replications")
    parser.add_argument("--horizon", help="stop rule limit")
    parser.add_argument("--stop", choices=[k.value for k in StopKind], help="stop rule kind")
    parser.add_argument("--scheme", choices=[k.value for k in SchemeKind], help="retransmission scheme")
    parser.add_argument("--delta", help="failure probability target")
    parser.add_argument("--beta", help="direct mode: lambda B / (eta P)")
    parser.add_argument("--pi", help="direct mode: per-transmission success probability")
    parser.add_argument("--d", help="distance in meters")
    parser.add_argument("--P", help="transmit power of the energy source in watts")
    parser.add_argument("--eta", help="RF-to-DC conversion efficiency")
    parser.add_argument("--B", help="battery capacity in joules")
    parser.add_argument("--noise-dbm", dest="noise_dbm", help="receiver noise in dBm")
    parser.add_argument("--r", help="spectral efficiency threshold in bits per channel use")
    parser.add_argument(
        "--success-mode", dest="success_mode", choices=[m.value for m in SuccessMode], help="success model"
    )
    parser.add_argument("--workers", help="replications run concurrently")
    parser.add_argument(
        "--log-level",
        help="logging log level",
        choices=["debug", "info", "warning", "error", "critical"],
        default="info",
    )
    return parser


def build_parser():
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="aoi-lab",
        description="Average AoI and reliability of an energy-harvesting sensor with retry-limit schemes",
        allow_abbrev=False,
    )
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    sub = parser.add_subparsers(dest="command")
    sub.required = True

    sub.add_parser("analytic", parents=[common], help="closed-form report for one setting")

    p = sub.add_parser("simulate", parents=[common], help="run seeded replications")
    p.add_argument("--cycles", action="store_true", help="also export per-cycle records X,H,F")

    p = sub.add_parser("tradeoff", parents=[common], help="AoI against the failure target")
    p.add_argument("--points", type=int, default=200, help="points of the default delta grid")

    p = sub.add_parser("sweep", parents=[common], help="AoI against battery capacity")
    p.add_argument("--preset", choices=["figure4", "figure5"], help="preset curve family")
    p.add_argument("--capacities", help="comma separated battery capacities in joules")
    p.add_argument("--with-sim", dest="with_sim", action="store_true", help="attach simulation estimates")

    p = sub.add_parser("tables", parents=[common], help="reproduce the comparison tables")
    p.add_argument("--theory-only", dest="theory_only", action="store_true", help="skip simulation")

    p = sub.add_parser("validate", parents=[common], help="run the invariant suite")
    p.add_argument("--sim", action="store_true", help="include simulation oracles")
    return parser


def resolve_config(args):
    config = load_config(args.config)
    return merge_flags(config, {k: getattr(args, k, None) for k in CONFIG_FLAGS})


def _path(config, name):
    return os.path.join(config.out, name)


def _emit(config, stem, rows, columns, payload):
    written = list()
    if "csv" in config.format:
        written.append(write_csv(rows, _path(config, stem + ".csv"), columns))
    if "json" in config.format:
        written.append(write_json(payload, _path(config, stem + ".json")))
    for path in written:
        print("wrote {}".format(path))


def _metadata(config, **extra):
    return run_metadata(config=config.to_dict(), **extra)


def cmd_analytic(args, config):
    chan = config.channel()
    policy = config.policy(chan.pi)
    report = aoi_for_policy(chan.beta, chan.pi, policy)
    guaranteed = policy.guaranteed_reliability(chan.pi)
    cost = zero_error_cost(chan.beta, chan.pi)
    print("scheme       {}".format(policy))
    print("beta         {:.6g}".format(chan.beta))
    print("pi           {:.6g}".format(chan.pi))
    print("k            {}".format("unbounded" if report.k is None else report.k))
    print("E[X]         {:.6g}".format(report.intersuccess.mean))
    print("E[H]         {:.6g}".format(report.stale_head_mean))
    print("avg AoI      {:.2f}".format(report.avg_aoi))
    print("reliability  {:.2f}%".format(100.0 * report.reliability))
    print("guaranteed   {:.2f}%".format(100.0 * guaranteed))
    print("0-error cost {:+.2f}".format(cost))
    if "json" in config.format:
        payload = {
            "meta": _metadata(config),
            "report": report.to_dict(),
            "guaranteed_reliability": guaranteed,
            "zero_error_cost": cost,
        }
        path = write_json(payload, _path(config, "analytic.json"))
        print("wrote {}".format(path))


def cmd_simulate(args, config):
    chan = config.channel()
    policy = config.policy(chan.pi)
    sim = config.sim_settings()
    agg = sim.run(chan, policy, 0)
    analytic = None
    if chan.pi < 1.0:
        analytic = aoi_for_policy(chan.beta, chan.pi, policy)

    print("scheme       {}".format(policy))
    print("replications {}".format(agg.n_reps))
    print("sensed       {}".format(agg.statuses_sensed))
    print("delivered    {}".format(agg.statuses_delivered))
    print("avg AoI      {:.1f} +/- {:.1f}".format(agg.aoi.mean, agg.aoi.ci_half_width))
    print("reliability  {:.2f}% +/- {:.2f}".format(100.0 * agg.reliability.mean, 100.0 * agg.reliability.ci_half_width))
    if analytic is not None:
        print("analytic     {:.1f} / {:.2f}%".format(analytic.avg_aoi, 100.0 * analytic.reliability))

    if "json" in config.format:
        payload = {
            "meta": _metadata(config, sim=sim.to_dict()),
            "result": agg.to_dict(),
            "analytic": None if analytic is None else analytic.to_dict(),
        }
        print("wrote {}".format(write_json(payload, _path(config, "simulate.json"))))
    if args.cycles:
        print("wrote {}".format(write_cycles_csv(agg.pooled(), _path(config, "cycles.csv"))))


def cmd_tradeoff(args, config):
    chan = config.channel()
    points = tradeoff_curve(chan.beta, chan.pi, default_delta_grid(chan.pi, args.points))
    payload = {
        "meta": _metadata(config, beta=chan.beta, pi=chan.pi),
        "rows": [p.to_record() for p in points],
    }
    _emit(config, "tradeoff", points, TRADEOFF_COLUMNS, payload)


def _capacities(args):
    if not args.capacities:
        return default_capacity_grid()
    try:
        return [float(x) for x in args.capacities.split(",") if x.strip()]
    except ValueError:
        raise ConfigException("Bad value {!r} for capacities".format(args.capacities), key="capacities")


def cmd_sweep(args, config):
    grid = _capacities(args)
    sim = config.sim_settings() if args.with_sim else None
    if args.preset == "figure4":
        curves = figure4_sweep(grid, sim)
        named = [("capacity_sweep_d{:g}_P{:g}".format(d, p), rows) for (d, p), rows in curves.items()]
    elif args.preset == "figure5":
        curves = figure5_sweep(grid, sim)
        named = [("capacity_sweep", [row for rows in curves.values() for row in rows])]
    else:
        if config.mode == "direct":
            raise ConfigException("sweep needs physical parameters, beta and pi depend on B", key="beta")
        phys = reference_physical() if config.mode is None else config.physical()
        kind = SchemeKind(config.scheme)
        named = [("capacity_sweep", capacity_sweep(phys, grid, kind, config.delta, sim))]

    for stem, rows in named:
        payload = {
            "meta": _metadata(config, preset=args.preset, sim=None if sim is None else sim.to_dict()),
            "rows": [r.to_record() for r in rows],
        }
        _emit(config, stem, rows, SWEEP_COLUMNS, payload)


def _table_settings(config, default_stop):
    return SimSettings(
        stop=config.stop_rule(default_stop),
        reps=config.reps,
        seed=config.seed,
        success_mode=SuccessMode(config.success_mode),
        workers=config.workers,
    )


def cmd_tables(args, config):
    sim1 = None if args.theory_only else _table_settings(config, StopRule(StopKind.max_successes, 50000))
    table1 = reproduce_table1(sim1)
    print("B        delta  det theory  det sim  rand theory  rand sim")
    for row in table1:
        print(
            "{:<8g} {:<6g} {:>10.1f}  {:>7}  {:>11.1f}  {:>8}{}".format(
                row.battery_capacity_j,
                row.delta,
                row.det_theory,
                "-" if row.det_sim is None else "{:.1f}".format(row.det_sim.mean),
                row.rand_theory,
                "-" if row.rand_sim is None else "{:.1f}".format(row.rand_sim.mean),
                "  (printed det {:.1f})".format(row.det_golden) if row.det_deviates else "",
            )
        )
    meta = _metadata(config, table1_sim=None if sim1 is None else sim1.to_dict())
    _emit(config, "table1", table1, TABLE1_COLUMNS, {"meta": meta, "rows": [r.to_dict() for r in table1]})

    if args.theory_only:
        return
    sim2 = _table_settings(config, StopRule(StopKind.max_slots, 10 ** 8))
    table2 = reproduce_table2(sim2)
    print("B        target  sent     received  reliability")
    for row in table2:
        print(
            "{:<8g} {:<6.0%}  {:<8d} {:<9d} {:.2f}%".format(
                row.battery_capacity_j,
                row.target_reliability,
                row.statuses_sent,
                row.statuses_received,
                100.0 * row.empirical_reliability,
            )
        )
    meta = _metadata(config, table2_sim=sim2.to_dict())
    _emit(config, "table2", table2, TABLE2_COLUMNS, {"meta": meta, "rows": [r.to_dict() for r in table2]})


def cmd_validate(args, config):
    results = run_checks(include_sim=args.sim, horizon=config.stop_rule().limit, seed=config.seed)
    for r in results:
        print(r)
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise ValidationFailure("{} of {} checks failed: {}".format(len(failed), len(results), ", ".join(failed)))


COMMANDS = {
    "analytic": cmd_analytic,
    "simulate": cmd_simulate,
    "tradeoff": cmd_tradeoff,
    "sweep": cmd_sweep,
    "tables": cmd_tables,
    "validate": cmd_validate,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper()), format=LOG_FORMAT)

    try:
        config = resolve_config(args)
        COMMANDS[args.command](args, config)
    except ConfigException as e:
        key = " ({})".format(e.key) if e.key else ""
        print("aoi-lab: error{}: {}".format(key, e.msg), file=sys.stderr)
        return 2
    except (InvalidArgumentException, MissingArgumentException) as e:
        print("aoi-lab: error: {}".format(e.msg), file=sys.stderr)
        return 2
    except ValidationFailure as e:
        print("aoi-lab: validation failed: {}".format(e.msg), file=sys.stderr)
        return 1
    except AoiLabException as e:
        logger.exception("Internal error")
        print("aoi-lab: {}".format(e.msg), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
