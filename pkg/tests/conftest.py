import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sketchmotion.geometry import load_calibration
from sketchmotion.instruction import SceneBundle, parse_instruction, parse_scene_bundle
from sketchmotion.models import ScriptedBackend, parse_scenario
from sketchmotion.pipeline import PipelineConfig

FIXTURES = Path(__file__).parent / "fixtures"

settings.register_profile(
    "suite", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("suite")

# one [PASS]/[FAIL] line per acceptance check, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


def make_rotation(rng) -> np.ndarray:
    """Uniform-ish random rotation via QR with positive diagonal."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 2] = -q[:, 2]
    return q


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def fixture_views():
    return load_calibration((FIXTURES / "calibration_fixture_a.json").read_bytes())


@pytest.fixture(scope="session")
def runnable_bundle():
    bundle = parse_scene_bundle((FIXTURES / "scene_bundle.json").read_bytes())
    return SceneBundle(
        views=bundle.views,
        image_paths=tuple(str(FIXTURES / p) for p in bundle.image_paths),
        min_baseline_deg=bundle.min_baseline_deg,
    )


@pytest.fixture(scope="session")
def slide_instruction():
    return parse_instruction((FIXTURES / "instruction_slide.json").read_bytes())


@pytest.fixture(scope="session")
def slide_config():
    return PipelineConfig.from_dict(
        json.loads((FIXTURES / "pipeline_config_slide.json").read_text())
    )


@pytest.fixture(scope="session")
def slide_scenario():
    return parse_scenario((FIXTURES / "scenario_slide.json").read_bytes())


@pytest.fixture()
def slide_backend(slide_scenario):
    return ScriptedBackend(slide_scenario)


@pytest.fixture(scope="session")
def golden_plan_bytes():
    return (FIXTURES / "golden_plan.json").read_bytes()
