#!/usr/bin/env python3
"""Entry point when the package is not installed."""
import os
import sys

# Add project root to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from nearcrit.main import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
