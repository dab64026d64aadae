#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""
Version utility
"""

__version__ = "0.1.0"  # This is the version of the package. Flit will use this to set the version in the wheel.
