import copy
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

SECVI = {
    "graph": {"kind": "ring", "n": 10},
    "objective": {"family": "secvi", "seed": 0},
    "algorithm": {"mode": "dt", "alpha": 10, "beta": 10, "h": 0.02, "iters": 5000},
    "init": {"seed": 4},
}


@pytest.fixture
def secvi_dict():
    return copy.deepcopy(SECVI)
