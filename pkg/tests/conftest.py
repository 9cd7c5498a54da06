"""Shared test utilities.

``finite_difference_check`` is the independent gradient oracle used
throughout: central differences with h=1e-5 in 64-bit, compared against
the engine's reverse-mode gradients via max relative error.
"""
import numpy as np
import pytest


def finite_difference_check(loss_fn, params, h=1e-5):
    """Max relative error between analytic and central-difference grads.

    loss_fn: () -> Tensor scalar, rebuilt from the current param values.
    params:  iterable of Tensor leaves (requires_grad).
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    worst = 0.0
    for p in params:
        analytic = np.zeros_like(p.data) if p.grad is None else p.grad
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn().item()
            flat[i] = orig - h
            down = loss_fn().item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            a = analytic.reshape(-1)[i]
            # the 1e-6 floor keeps coordinates whose true gradient sits
            # below the central-difference noise floor (~1e-11 for an
            # O(1) loss) from reporting spurious relative error
            denom = max(abs(a), abs(numeric), 1e-6)
            worst = max(worst, abs(a - numeric) / denom)
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(0)
