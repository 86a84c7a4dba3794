from __future__ import annotations

import sys
from pathlib import Path

from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "suite",
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

FIXTURES = Path(__file__).parent.parent / "src" / "conductor" / "fixtures"
GOLDEN = Path(__file__).parent / "golden"
FUZZ_CORPUS = Path(__file__).parent / "fuzz_corpus"
