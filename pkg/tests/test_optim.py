import math

import numpy as np
import pytest

from hardneg_lab.optim import (adamw_step, cosine_lr, init_adamw_state, init_sgd_state, sgd_step)


def test_zero_grads_no_decay_keep_params(rng):
    params = {"w": rng.normal(size=(3, 2)), "b": rng.normal(size=2)}
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    new, state = adamw_step(params, grads, init_adamw_state(params), lr=0.1, weight_decay=0.0)
    for k in params:
        np.testing.assert_array_equal(new[k], params[k])
    assert state["step"] == 1


def test_zero_grads_decay_is_decoupled(rng):
    params = {"w": rng.normal(size=5)}
    new, _ = adamw_step(params, {"w": np.zeros(5)}, init_adamw_state(params), lr=0.1, weight_decay=0.01)
    np.testing.assert_allclose(new["w"], params["w"] * (1 - 0.1 * 0.01), rtol=0, atol=1e-15)


def test_single_step_hand_computed():
    lr, b1, b2, eps, wd = 0.1, 0.9, 0.999, 1e-8, 0.01
    p, g = 1.0, 0.5
    # decoupled decay, then Adam with bias correction at t = 1
    p = p - lr * wd * p
    m = (1 - b1) * g
    v = (1 - b2) * g * g
    m_hat = m / (1 - b1)
    v_hat = v / (1 - b2)
    expected = p - lr * m_hat / (math.sqrt(v_hat) + eps)
    params = {"p": np.array([1.0])}
    new, state = adamw_step(params, {"p": np.array([0.5])}, init_adamw_state(params), lr,
                            (b1, b2), eps, wd)
    assert abs(new["p"][0] - expected) <= 1e-12
    assert abs(state["m"]["p"][0] - m) <= 1e-15 and abs(state["v"]["p"][0] - v) <= 1e-15


def test_inputs_not_mutated(rng):
    params = {"w": rng.normal(size=3)}
    keep = params["w"].copy()
    state = init_adamw_state(params)
    adamw_step(params, {"w": np.ones(3)}, state, 0.1, weight_decay=0.1)
    np.testing.assert_array_equal(params["w"], keep)
    assert state["step"] == 0 and not state["m"]["w"].any()


def test_shape_mismatch(rng):
    params = {"w": np.zeros(3)}
    with pytest.raises(ValueError):
        adamw_step(params, {"w": np.zeros(4)}, init_adamw_state(params), 0.1)


def test_sgd_step():
    params = {"w": np.array([1.0])}
    state = init_sgd_state(params)
    p1, state = sgd_step(params, {"w": np.array([2.0])}, state, lr=0.1, momentum=0.9)
    p2, state = sgd_step(p1, {"w": np.array([2.0])}, state, lr=0.1, momentum=0.9)
    assert p1["w"][0] == pytest.approx(0.8)
    assert p2["w"][0] == pytest.approx(0.8 - 0.1 * (0.9 * 2 + 2))


def test_cosine_lr():
    assert cosine_lr(0, 100, 0.5) == 0.5
    assert cosine_lr(50, 100, 0.5) == pytest.approx(0.25)
    assert cosine_lr(4679, 4680, 1e-3) <= 1e-3 * 1e-3
