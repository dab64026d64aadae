#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""
Command line script.
"""

import sys

from .cli import cli_main

sys.exit(cli_main())
