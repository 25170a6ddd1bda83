import os
import tempfile

# keep run logs out of the working tree and seed sweeps in-process
os.environ.setdefault("COLME_LOG_PATH", os.path.join(tempfile.mkdtemp(prefix="colme-log-"), "run_log.jsonl"))
os.environ.setdefault("COLME_WORKERS", "1")

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
