import numpy as np
import pytest

from bussgang.sampling import RandomStream


@pytest.fixture
def stream():
    return RandomStream(42, 0)


@pytest.fixture
def verdict(capsys):
    """Print a one-line PASS/FAIL record past pytest's capture, then assert."""

    def emit(label, ok, detail=""):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {label} {detail}".rstrip())
        assert ok, f"{label}: {detail}"

    return emit


@pytest.fixture
def correlated_cx():
    """A fixed non-diagonal 4x4 Hermitian positive definite correlation."""
    return np.array(
        [[1.0, 0.6, 0.3j, 0.0], [0.6, 1.0, 0.5, 0.2], [-0.3j, 0.5, 1.5, 0.1], [0.0, 0.2, 0.1, 0.8]],
        dtype=complex,
    )
