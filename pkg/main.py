"""
Launcher for the qtebounds command line
Run `python main.py bounds --input data.csv` from a source checkout
"""

import sys

from qtebounds.cli.main import main

if __name__ == "__main__":
    sys.exit(main())
