"""Shared oracles and helpers for the test suite."""

import numpy as np
import pytest

from advspec.ndtensor import Tensor


def central_diff_grads(fn, arrays, eps=1e-6):
    """Central finite-difference gradients of a scalar function.

    ``fn`` takes plain numpy arrays and returns a float. Independent of the
    autodiff engine by construction.
    """
    grads = []
    for j, base in enumerate(arrays):
        g = np.zeros_like(base, dtype=np.float64)
        flat = g.reshape(-1)
        for i in range(base.size):
            bumped = [a.copy() for a in arrays]
            bumped[j].reshape(-1)[i] += eps
            hi = fn(*bumped)
            bumped[j].reshape(-1)[i] -= 2 * eps
            lo = fn(*bumped)
            flat[i] = (hi - lo) / (2 * eps)
        grads.append(g)
    return grads


def max_rel_err(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = max(float(np.max(np.abs(numeric))), float(np.max(np.abs(analytic))), 1e-8)
    return float(np.max(np.abs(analytic - numeric))) / denom


def check_grads(build_loss, arrays, tol=1e-5, eps=1e-6):
    """Compare engine gradients of a scalar loss against central differences.

    ``build_loss`` maps Tensors (one per input array) to a scalar Tensor.
    Returns the worst relative error over all inputs.
    """
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    loss = build_loss(*tensors)
    loss.backward()

    def as_float(*arrs):
        ts = [Tensor(a) for a in arrs]
        return float(build_loss(*ts).data.reshape(-1)[0])

    numeric = central_diff_grads(as_float, [a.copy() for a in arrays], eps=eps)
    worst = 0.0
    for t, n in zip(tensors, numeric):
        assert t.grad is not None, "missing gradient"
        worst = max(worst, max_rel_err(t.grad, n))
    assert worst < tol, f"gradient mismatch: max rel err {worst:.3e} >= {tol}"
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
