"""
pytest configuration and shared fixtures
"""
import sys
from pathlib import Path

import pytest

# Add project root to Python path for imports
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))


@pytest.fixture
def temp_output_dir(tmp_path):
    """Fresh output directory for a CLI run (not created yet)"""
    return tmp_path / "out"
