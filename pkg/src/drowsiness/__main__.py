"""Entry point for ``python3 -m drowsiness``."""

import sys

from .cli import main

sys.exit(main())
