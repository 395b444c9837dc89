"""
    Shared settings of the test suites. Each suite can be run on its own,
    `python tests/test_simulator.py --seed 7 --horizon 5000`, or through a
    test runner, in which case the defaults apply.
"""

import sys
import argparse
import logging

from typing import List

from aoi_lab.experiments import DEFAULT_SEED


class Settings(object):
    """
    This class should be in the parent package (tests), but the suites are
    run as scripts so it lives in its own importable package.
    """

    settings = None  # type: Settings

    def __init__(self, log_level, seed, horizon):
        # type: (str, int, int) -> None
        self.log_level = getattr(logging, log_level.upper(), None)  # type: int
        self.seed = seed  # type: int
        self.horizon = horizon  # type: int

    @classmethod
    def current(cls):
        # type: () -> Settings

        if cls.settings is None:
            cls.parse_args()

        return cls.settings

    @staticmethod
    def clean_args():
        # type: () -> List[str]
        args_to_remove = ["--log-level", "--seed", "--horizon"]

        retval = list(sys.argv)

        for arg_to_remove in args_to_remove:
            try:
                idx = retval.index(arg_to_remove)
                # Remove argument and argument value
                del retval[idx]
                del retval[idx]
            except ValueError as _:
                pass

        return retval

    @classmethod
    def parse_args(cls):
        # type: () -> Settings
        parser = argparse.ArgumentParser(add_help=False)
        parser.add_argument(
            "--log-level",
            help="logging log level",
            choices=["debug", "info", "warning", "error", "critical"],
            default="warning",
        )
        parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="base seed of the simulation suites")
        parser.add_argument(
            "--horizon",
            type=int,
            default=20000,
            help="deliveries per episode in the statistical tests",
        )

        args, _ = parser.parse_known_args()

        cls.settings = Settings(args.log_level, args.seed, args.horizon)

        return cls.settings


__all__ = ["Settings"]
