import sys
from pathlib import Path

import pytest

# Make the sibling oracle module importable regardless of invocation dir.
sys.path.insert(0, str(Path(__file__).parent))

from swapcomm.quantum import BellLabel, PauliCode  # noqa: E402


@pytest.fixture(scope="session")
def label_by_name():
    return {label.value: label for label in BellLabel}


@pytest.fixture(scope="session")
def op_by_name():
    return {op.name: op for op in PauliCode}
