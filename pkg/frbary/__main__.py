#!/usr/bin/env python3
"""Allow `python -m frbary`."""

import sys

from .cli import main

sys.exit(main())

#fin
