"""Compiled-vs-python backend agreement on identical increments."""

import numpy as np
import pytest

from bubbleflow._backend import BACKEND, get_backend
from bubbleflow.dynamics import simulate_path
from bubbleflow.network import poisson_degrees
from bubbleflow.params import ModelParams

ER = poisson_degrees(3.2, 50000)

HAS_COMPILED = True
try:
    get_backend("compiled")
except Exception:  # pragma: no cover - build-less environments
    HAS_COMPILED = False

needs_compiled = pytest.mark.skipif(not HAS_COMPILED,
                                    reason="compiled backend not built")


def _sup_rel(a, b):
    scale = np.nanmax(np.abs(a)) or 1.0
    return np.nanmax(np.abs(a - b)) / scale


@needs_compiled
def test_backends_agree_deterministic():
    p = ModelParams(sigma_bar=0.0, sigma_M=0.0, sigma_theta=0.0)
    c = simulate_path(p, ER, 0, backend="compiled")
    q = simulate_path(p, ER, 0, backend="python")
    for attr in ("WF", "M", "theta", "X", "n", "beta"):
        assert _sup_rel(getattr(c, attr), getattr(q, attr)) < 1e-9, attr
    assert c.switch_idx == q.switch_idx


@needs_compiled
def test_backends_agree_stochastic():
    p = ModelParams()
    c = simulate_path(p, ER, 5, backend="compiled")
    q = simulate_path(p, ER, 5, backend="python")
    for attr in ("WF", "M", "theta", "X", "beta"):
        assert _sup_rel(getattr(c, attr), getattr(q, attr)) < 1e-7, attr


def test_python_backend_self_deterministic():
    p = ModelParams(T=0.5)
    a = simulate_path(p, ER, 1, backend="python")
    b = simulate_path(p, ER, 1, backend="python")
    assert np.array_equal(a.beta, b.beta, equal_nan=True)


def test_active_backend_reported():
    assert BACKEND in ("compiled", "python")
