import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import armtwin.kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # compile (or no-op in fallback mode) before anything is timed
    armtwin.kernels.warmup()
