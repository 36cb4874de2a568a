"""Adam update rules and convergence behaviour."""

import numpy as np
import pytest

from fingermi.optim import adam_init, adam_step
from fingermi.tensor import Tensor


def _param(value):
    t = Tensor(np.asarray(value, dtype=np.float64), requires_grad=True)
    return {"w": t}


class TestAdamInit:
    def test_moments_zero(self):
        params = _param([1.0, 2.0])
        state = adam_init(params)
        assert np.array_equal(state.m["w"], np.zeros(2))
        assert np.array_equal(state.v["w"], np.zeros(2))
        assert state.step == 0

    def test_invalid_hyperparameters(self):
        params = _param([1.0])
        with pytest.raises(ValueError):
            adam_init(params, lr=0.0)
        with pytest.raises(ValueError):
            adam_init(params, beta1=1.0)
        with pytest.raises(ValueError):
            adam_init(params, epsilon=0.0)

    def test_zero_gradient_step_leaves_params(self):
        params = _param([1.0, -2.0])
        state = adam_init(params)
        adam_step(state, params, {"w": np.zeros(2)})
        assert np.array_equal(params["w"].data, [1.0, -2.0])


class TestAdamStep:
    def test_first_step_hand_value(self):
        # w=1, g=2, lr=0.1: bias correction makes the first step lr*g/(|g|+eps)
        params = _param([1.0])
        state = adam_init(params, lr=0.1)
        adam_step(state, params, {"w": np.array([2.0])})
        assert params["w"].data[0] == pytest.approx(0.9, abs=1e-9)

    def test_first_step_scale_invariant(self):
        small = _param([1.0])
        big = _param([1.0])
        s1 = adam_init(small, lr=0.01)
        s2 = adam_init(big, lr=0.01)
        adam_step(s1, small, {"w": np.array([1.0])})
        adam_step(s2, big, {"w": np.array([1000.0])})
        d1 = 1.0 - small["w"].data[0]
        d2 = 1.0 - big["w"].data[0]
        assert d2 == pytest.approx(d1, rel=1e-6)

    def test_quadratic_convergence(self):
        params = _param([1.0])
        state = adam_init(params, lr=0.05)
        for _ in range(500):
            g = 2.0 * params["w"].data
            adam_step(state, params, {"w": g})
        assert abs(params["w"].data[0]) < 1e-2

    def test_v_stays_nonnegative(self):
        rng = np.random.default_rng(0)
        params = _param(rng.normal(size=8))
        state = adam_init(params)
        for _ in range(50):
            adam_step(state, params, {"w": rng.normal(size=8) * 10})
            assert (state.v["w"] >= 0).all()

    def test_bit_identical_trajectories(self):
        rng = np.random.default_rng(1)
        grads = [rng.normal(size=4) for _ in range(20)]
        trajs = []
        for _ in range(2):
            params = _param([1.0, 2.0, 3.0, 4.0])
            state = adam_init(params)
            for g in grads:
                adam_step(state, params, {"w": g})
            trajs.append(params["w"].data.copy())
        assert np.array_equal(trajs[0], trajs[1])

    def test_nan_gradient_aborts(self):
        params = _param([1.0])
        state = adam_init(params)
        with pytest.raises(FloatingPointError, match="w"):
            adam_step(state, params, {"w": np.array([np.nan])})

    def test_uses_param_grad_when_grads_omitted(self):
        params = _param([1.0])
        params["w"].grad = np.array([2.0])
        state = adam_init(params, lr=0.1)
        adam_step(state, params)
        assert params["w"].data[0] == pytest.approx(0.9, abs=1e-9)

    def test_shape_mismatch_raises(self):
        params = _param([1.0, 2.0])
        state = adam_init(params)
        with pytest.raises(ValueError, match="shape"):
            adam_step(state, params, {"w": np.zeros(3)})
