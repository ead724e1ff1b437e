from pathlib import Path

import pytest

BENCHMARKS = Path(__file__).resolve().parent.parent / "benchmarks"


@pytest.fixture
def benchmark_path():
    def path(name: str) -> Path:
        return BENCHMARKS / f"{name}.json"
    return path
