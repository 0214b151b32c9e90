#!/usr/bin/env python3
"""Run the acceptance suite and print one line per criterion.

Usage: python3 scripts/run_acceptance.py [extra pytest args]
Exit status is pytest's.
"""

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent


def main(argv):
    target = str(ROOT / "tests" / "test_acceptance.py")
    return pytest.main([target, "-q", "-p", "no:cacheprovider", *argv])


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
