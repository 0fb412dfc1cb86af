"""Make the shared builders importable by bare name from any rootdir."""

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
