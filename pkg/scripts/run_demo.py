#!/usr/bin/env python3
"""Run the shipped demonstration scenario end to end and print the checks.

Equivalent to: noetherlab all --config configs/paper_section4.toml
"""

import sys
from pathlib import Path

from noetherlab.labcli.cli import main

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "paper_section4.toml"

if __name__ == "__main__":
    sys.exit(main(["all", "--config", str(CONFIG), *sys.argv[1:]]))
