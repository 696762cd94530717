#!/usr/bin/env python3
"""Command-line entry point for the binning calibration toolkit."""

import sys

from dotenv import load_dotenv

# Load environment variables before the settings module reads them
load_dotenv()

from src.binning_calibration.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
