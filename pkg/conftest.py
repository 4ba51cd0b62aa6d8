import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).parent
sys.path.insert(0, str(ROOT))
sys.path.insert(0, str(ROOT / "tests"))

from schemas import BoundaryModel  # noqa: E402


@pytest.fixture
def half_curvature_model():
    """Boundary model with every principal curvature equal to 1/2."""

    def build(dim, **kwargs):
        return BoundaryModel.uniform(dim, 0.5, **kwargs)

    return build


@pytest.fixture
def out_dir(tmp_path):
    path = tmp_path / "out"
    path.mkdir()
    return path
