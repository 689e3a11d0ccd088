#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created module entry point so `python -m strokeseg` runs the CLI
#

"""Allow ``python -m strokeseg``."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
