#!/usr/bin/python

# Script for running casflow directly from the repository, without properly installing it.
# (Actual installation will use `pyproject.toml` and bypass this file.)
import sys
from casflow.lib import casf
sys.exit(casf.main())
