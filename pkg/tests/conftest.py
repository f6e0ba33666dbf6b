import importlib.util
import sys
from pathlib import Path

import pytest

# Oracles live next to the tests, not in the package.
sys.path.insert(0, str(Path(__file__).parent))

REPO_ROOT = Path(__file__).parent.parent
TESTDATA = REPO_ROOT / "testdata"


@pytest.fixture(scope="session")
def testdata_dir() -> Path:
    return TESTDATA


@pytest.fixture(scope="session")
def golden_model_path() -> Path:
    """Small pretrained model checked into testdata/golden.

    Rebuilt from scratch (a few minutes) if the file is missing, so the
    suite stays runnable from a clean checkout of the sources alone.
    """
    path = TESTDATA / "golden" / "toy.model"
    if not path.exists():
        spec = importlib.util.spec_from_file_location(
            "make_golden", REPO_ROOT / "tools" / "make_golden.py")
        module = importlib.util.module_from_spec(spec)
        spec.loader.exec_module(module)
        module.main()
    return path
