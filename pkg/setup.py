#
# Copyright (c) 2019 The aoi_lab authors
# All rights reserved.
#
# Distributed under the BSD 3-Clause License. See LICENSE for details.
#
import sys
import re
import codecs
import os

from setuptools import find_packages, setup

py_version_old_message = "aoi_lab only supports Python version 3.8 and newer"

if sys.version_info < (3, 8):
    print(py_version_old_message)
    sys.exit(-1)

requirements = ["numpy>=1.17", "scipy", "pandas>=1.5", "wrapt"]

here = os.path.abspath(os.path.dirname(__file__))


def read(*parts):
    with codecs.open(os.path.join(here, *parts), "r") as fp:
        return fp.read()


def find_version(*file_paths):
    version_file = read(*file_paths)
    version_match = re.search(
        r"^__version__ = ['\"]([^'\"]*)['\"]", version_file, re.M,
    )
    if version_match:
        return version_match.group(1)

    raise RuntimeError("Unable to find version string.")


packages = find_packages(exclude=["tests*"])

setup(
    name="aoi_lab",
    version=find_version("aoi_lab", "__init__.py"),
    description="Average age of information and reliability of an energy-harvesting sensor with retry-limit schemes",
    long_description="Closed-form AoI and reliability of a wirelessly powered sensor that retransmits each status "
    "under a deterministic, randomized or unbounded retry limit, a seeded slot-level Monte Carlo simulator to "
    "check them, and scripts that regenerate the trade-off curves and comparison tables.",
    license="BSD 3-Clause License",
    author="The aoi_lab authors",
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering",
        "License :: OSI Approved :: BSD License",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
    keywords="age of information aoi energy harvesting wireless power transfer retransmission monte carlo",
    python_requires=">=3.8",
    install_requires=requirements,
    packages=packages,
    entry_points={"console_scripts": ["aoi-lab=aoi_lab.cli:main"]},
)
