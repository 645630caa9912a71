import itertools

import numpy as np
import pytest

from topomamba.complex import build_complex
from topomamba.lifting import FeaturedGraph, clique_lift


def complete_graph(n, features=None):
    return FeaturedGraph(n, list(itertools.combinations(range(n), 2)), features)


def random_graph(rng, n, p):
    edges = [(u, v) for u, v in itertools.combinations(range(n), 2) if rng.random() < p]
    return FeaturedGraph(n, edges)


def random_complex(rng, n_nodes=None, max_rank=None, p=None):
    """Clique complex of a random graph; closure-complete by construction."""
    n_nodes = n_nodes or int(rng.integers(4, 31))
    max_rank = max_rank or int(rng.integers(1, 4))
    p = p if p is not None else float(rng.uniform(0.1, 0.5))
    return clique_lift(random_graph(rng, n_nodes, p), max_rank)


def central_difference(f, arr, h=1e-5):
    """Numerical gradient of scalar ``f()`` with respect to ``arr`` (perturbed in place)."""
    grad = np.zeros_like(arr, dtype=np.float64)
    for idx in np.ndindex(arr.shape):
        orig = arr[idx]
        arr[idx] = orig + h
        fp = f()
        arr[idx] = orig - h
        fm = f()
        arr[idx] = orig
        grad[idx] = (fp - fm) / (2 * h)
    return grad


def rel_error(analytic, numeric):
    """Normwise relative error, guarded against all-zero gradients."""
    num = np.linalg.norm(numeric)
    return np.linalg.norm(analytic - numeric) / max(num, np.linalg.norm(analytic), 1e-12)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def k3():
    return build_complex([[], [], [(0, 1, 2)]], 3)


@pytest.fixture
def k4():
    return clique_lift(complete_graph(4), 3)


# acceptance criteria report one line each in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, status: str, title: str, detail: str = "") -> None:
    line = f"[{status}] criterion {number}: {title}"
    ACCEPTANCE_LINES[number] = f"{line} ({detail})" if detail else line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
