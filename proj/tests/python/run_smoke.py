"""Runs the python smoke tests; exits 77 (ctest skip) when hner is not installed."""
import importlib.util
import os
import sys

if importlib.util.find_spec("hner") is None or importlib.util.find_spec("pytest") is None:
    print("hner or pytest not installed; skipping python smoke tests")
    sys.exit(77)

import pytest

sys.exit(pytest.main(["-q", os.path.dirname(os.path.abspath(__file__))]))
