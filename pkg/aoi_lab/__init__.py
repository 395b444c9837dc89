#
# Copyright (c) 2019 The aoi_lab authors
# All rights reserved.
#
# Distributed under the BSD 3-Clause License. See LICENSE for details.
#

"""
Package marker file.

"""

__version__ = "0.1.0"
