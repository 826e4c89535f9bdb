import os
import sys
from pathlib import Path

# make `import oracles` work regardless of invocation directory, and anchor
# the relative scenario paths used throughout the suite at the repo root
TESTS = Path(__file__).resolve().parent
sys.path.insert(0, str(TESTS))
os.chdir(TESTS.parent)
