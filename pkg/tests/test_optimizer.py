import numpy as np
import pytest

from errors import ConfigError, UsageError
from optimizer import AdamState, adam_step, init_adam
from tensor import Tensor, mul, total


def test_first_step_moves_by_lr_against_the_gradient_sign():
    p = Tensor(np.array([[1.0, -2.0, 0.5]]), requires_grad=True)
    p.grad = np.array([[0.3, -4.0, 1e-3]])
    states = init_adam([p])
    adam_step([p], states, 0.01)
    # bias-corrected first step is lr * g / (|g| + eps)
    assert np.allclose(p.data, [[0.99, -1.99, 0.49]], atol=1e-6)
    assert np.all(p.grad == 0.0)
    assert states[0].t == 1


def test_matches_reference_update_over_several_steps():
    rng = np.random.default_rng(0)
    p = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
    ref = p.data.copy()
    m = np.zeros_like(ref)
    v = np.zeros_like(ref)
    states = init_adam([p])
    for t in range(1, 6):
        g = rng.normal(size=(2, 2))
        p.grad = g.copy()
        adam_step([p], states, 0.05)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref -= 0.05 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    assert np.allclose(p.data, ref, atol=1e-12)


def test_minimises_a_quadratic():
    p = Tensor(np.array([[3.0, -2.0]]), requires_grad=True)
    states = init_adam([p])
    for _ in range(1000):
        total(mul(p, p)).backward()
        adam_step([p], states, 0.05)
    assert np.all(np.abs(p.data) < 0.1)


def test_zero_lr_leaves_params_untouched():
    p = Tensor(np.array([[1.5]]), requires_grad=True)
    p.grad = np.array([[7.0]])
    adam_step([p], init_adam([p]), 0.0)
    assert p.data[0, 0] == 1.5


def test_missing_grad_updates_nothing():
    a = Tensor(np.array([[1.0]]), requires_grad=True, name="a")
    b = Tensor(np.array([[2.0]]), requires_grad=True, name="b")
    a.grad = np.array([[1.0]])
    with pytest.raises(UsageError, match="b"):
        adam_step([a, b], init_adam([a, b]), 0.1)
    assert a.data[0, 0] == 1.0


def test_bad_state_is_rejected():
    with pytest.raises(ConfigError):
        AdamState(m=np.zeros((1, 1)), v=np.zeros((1, 1)), beta1=1.0)


def test_scalar_quadratic_from_one():
    w = Tensor(np.array([[1.0]]), requires_grad=True)
    states = init_adam([w])
    for _ in range(100):
        total(mul(w, w)).backward()
        adam_step([w], states, 0.1)
    assert abs(w.item()) < 0.1


def test_zero_gradient_leaves_params_untouched():
    p = Tensor(np.array([[0.25, -4.0]]), requires_grad=True)
    p.grad = np.zeros((1, 2))
    adam_step([p], init_adam([p]), 0.1)
    assert p.data.tolist() == [[0.25, -4.0]]
