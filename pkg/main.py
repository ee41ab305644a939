# main.py

"""Entry point: `python main.py <subcommand> ...`, same as the `gtn` script."""

import sys

from gtn.cli import main

if __name__ == "__main__":
    sys.exit(main())
