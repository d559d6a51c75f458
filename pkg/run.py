"""
Application runner script.

This script runs the mfront CLI from a source checkout without installing it.
"""

import sys

from mfront import main

if __name__ == "__main__":
    sys.exit(main())
