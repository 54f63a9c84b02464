import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bubbletrack.corpus import Calibration


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def cal100_3000():
    """The reference calibration used across fixtures: 100 px/cm, 3000 fps."""
    return Calibration(pixels_per_cm=100.0, frame_rate=3000.0)
