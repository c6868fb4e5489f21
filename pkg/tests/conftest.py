import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from procflow.corpus import load_segment_annotations

FIXTURE_DIR = Path(__file__).parent / "fixtures"

# The shipped single-segment annotation example: 5 ingredients, 3 utensils,
# 5 actions over 59-69 s.
EXAMPLE_SEGMENT = {
    "timestamp": "59-69",
    "title": "Hyderabadi Chicken Dum Biryani #biryani",
    "url": "https://www.youtube.com/watch?v=BIXMwLFCboA&t=59s",
    "ingredients": [
        "Mint Leaves",
        "Coriander Leaves",
        "Kesar Milk",
        "Kewra & Rose Water",
        "Ghee",
    ],
    "utensils": ["Large cooking pot or bowl", "Orange cup", "Metal cup"],
    "actions": [
        "Adding mint leaves to rice",
        "Adding coriander leaves to rice",
        "Pouring kesar milk over rice",
        "Pouring kewra and rose water over rice",
        "Pouring ghee over rice",
    ],
}


@pytest.fixture()
def example_segment_file(tmp_path):
    path = tmp_path / "video7.json"
    path.write_text(json.dumps([EXAMPLE_SEGMENT]), encoding="utf-8")
    return path


@pytest.fixture()
def example_segment(example_segment_file):
    return load_segment_annotations(example_segment_file, "video7")[0]


@pytest.fixture(scope="session")
def mock_workspace(tmp_path_factory):
    """A built mock workspace with the full pipeline already run."""
    from procflow.fixtures import build_mock_workspace
    from procflow.stages import PIPELINE_ORDER, StageFlags, run_stage
    from procflow.workspace import Workspace

    root = tmp_path_factory.mktemp("ws")
    build_mock_workspace(root, seed=0)
    ws = Workspace(root)
    for stage in PIPELINE_ORDER:
        run_stage(stage, ws, StageFlags(seed=0))
    return ws
