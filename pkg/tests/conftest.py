import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from saflite.core import Mission, Obstacle, ScenarioBody, TestCase


@pytest.fixture
def mission():
    """Three-leg route used across the simulator and campaign tests."""
    return Mission(
        name="fixture-3wp",
        waypoints=((-12.0, -12.0, 2.5), (0.0, 12.0, 2.5), (12.0, -6.0, 2.5)),
    )


@pytest.fixture
def straight_mission():
    return Mission(name="straight", waypoints=((-10.0, 0.0, 2.5), (10.0, 0.0, 2.5)))


@pytest.fixture
def far_seed_case():
    """A single obstacle well away from the fixture mission's route."""
    return TestCase(
        id="seed-000001",
        body=ScenarioBody((Obstacle(center=(14.0, 14.0, 1.5), size=(2.0, 2.0, 3.0)),)),
    )
