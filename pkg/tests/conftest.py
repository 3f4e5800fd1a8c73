import json
import sys
from pathlib import Path

import pytest

from hybridlink import images

GOLDEN = Path(__file__).parent / "golden" / "fixtures.json"


@pytest.fixture(scope="session")
def golden():
    return json.loads(GOLDEN.read_text())


@pytest.fixture(scope="session")
def corpus_small():
    """Ten deterministic 128x128 frames for chain-level metric tests."""
    return [images.synthetic_image(seed, 128, 128) for seed in range(10)]


@pytest.fixture(scope="session")
def frame_default():
    """The default-size frame used by full-chain tests."""
    return images.synthetic_image(1, 256, 256)


def stub_cmd(mode: str = "echo") -> list[str]:
    return [sys.executable, "-m", "hybridlink.plugin_stub", "--mode", mode]
