import pytest

from feedback_bandit.simulate import a1_walk


@pytest.fixture(scope="session")
def a1_summary():
    """The two-topic walk at its published setting, computed once per session."""
    return a1_walk(T=1000, runs=1000, master_seed=7)
