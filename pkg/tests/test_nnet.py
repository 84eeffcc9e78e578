import math

import numpy as np
import pytest

from uavcsi.config import AdamConfig
from uavcsi.errors import ConfigurationError, TrainingDivergedError
from uavcsi.nnet import (Adam, _act, eval_mse, hard_decision, loss_and_grads,
                         make_aidnet, make_recnet, make_sennet, maxpool_backward,
                         maxpool_forward, mse_loss, pool_out_shape,
                         predict_batched, train)


def numerical_gradients(net, params, x, y, h=1e-5):
    """Central finite differences of the MSE loss over every parameter."""
    grads = {}
    for key, p in params.items():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            lp, _ = loss_and_grads(net, params, x, y)
            p[idx] = orig - h
            lm, _ = loss_and_grads(net, params, x, y)
            p[idx] = orig
            g[idx] = (lp - lm) / (2.0 * h)
        grads[key] = g
    return grads


def max_rel_error(analytic, numeric):
    worst = 0.0
    for k in analytic:
        denom = max(np.linalg.norm(analytic[k]), np.linalg.norm(numeric[k]), 1e-12)
        worst = max(worst, np.linalg.norm(analytic[k] - numeric[k]) / denom)
    return worst


def tiny_nets():
    return [
        (make_sennet(3, 6), (3, 12), 1),
        (make_aidnet(3), (6,), 6),
        (make_recnet(2, 3), (6,), 12),
    ]


def test_gradients_match_finite_differences_at_random_points():
    for net, in_shape, out_dim in tiny_nets():
        for point in range(10):
            rng = np.random.default_rng(1000 + point)
            params = net.init_params(rng)
            x = rng.standard_normal((3, *in_shape))
            y = rng.standard_normal((3, out_dim))
            if out_dim == 1:
                y = rng.random((3, 1))
            _, analytic = loss_and_grads(net, params, x, y)
            numeric = numerical_gradients(net, params, x, y)
            assert max_rel_error(analytic, numeric) < 1e-4


def test_sensing_net_zero_weights_give_half():
    net = make_sennet(5, 64)
    params = {k: np.zeros_like(v)
              for k, v in net.init_params(np.random.default_rng(0)).items()}
    out = net.forward(params, np.zeros((2, 5, 128)))
    assert np.allclose(out, 0.5)


def test_sensing_net_feature_count_and_range():
    net = make_sennet(5, 64)
    assert net.n_features == 21  # floor(5/3) * floor(64/3)
    params = net.init_params(np.random.default_rng(1))
    out = net.forward(params, np.random.default_rng(2).standard_normal((4, 5, 128)))
    assert out.shape == (4, 1)
    assert np.all((out > 0.0) & (out < 1.0))


def test_sensing_net_rejects_wrong_shape():
    net = make_sennet(5, 64)
    params = net.init_params(np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        net.forward(params, np.zeros((2, 4, 128)))


def test_pool_shapes_follow_floor_rule():
    for la in range(3, 9):
        for n in range(3, 22):
            assert pool_out_shape(la, 2 * n) == (la // 3, n // 3)


def test_maxpool_forward_backward_routing():
    x = np.zeros((1, 3, 6))
    x[0, 1, 4] = 5.0
    out, idx = maxpool_forward(x)
    assert out.shape == (1, 1, 1)
    assert out[0, 0, 0] == 5.0
    dx = maxpool_backward(np.array([[[2.0]]]), idx, x.shape)
    assert dx[0, 1, 4] == 2.0
    assert np.sum(dx != 0) == 1


def test_aidnet_hand_computed_forward():
    # 2 -> 4 -> 2 with hand-set weights, leaky ReLU slope 0.01
    net = make_aidnet(1)
    params = {
        "fc1.w": np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 0.0]]),
        "fc1.b": np.array([0.0, 0.5, 0.0, -0.25]),
        "fc2.w": np.array([[1.0, 2.0, 0.0, 4.0], [0.0, -1.0, 1.0, 0.0]]),
        "fc2.b": np.array([0.1, -0.1]),
    }
    x = np.array([[0.5, -1.0]])
    # pre-activations: (0.5, -1+0.5, 0.5-1, -0.5-0.25) = (0.5, -0.5, -0.5, -0.75)
    hidden = np.array([0.5, -0.005, -0.005, -0.0075])
    expect = np.array([
        hidden @ np.array([1.0, 2.0, 0.0, 4.0]) + 0.1,
        hidden @ np.array([0.0, -1.0, 1.0, 0.0]) - 0.1,
    ])
    out = net.forward(params, x)
    assert np.allclose(out[0], expect, atol=1e-12)


def test_activation_values():
    a = np.array([-1.0, 0.0, 2.0])
    assert np.allclose(_act(a, "lrelu"), [-0.01, 0.0, 2.0])
    assert np.allclose(_act(a, "relu"), [0.0, 0.0, 2.0])
    assert np.allclose(_act(a, "tanh"), np.tanh(a))
    assert np.allclose(_act(a, "linear"), a)
    with pytest.raises(ConfigurationError):
        _act(a, "swish")


def test_recnet_widths_and_tanh_bound():
    net = make_recnet(5, 64)
    assert net.sizes == (128, 4 * 5 * 64, 2 * 5 * 64)
    params = net.init_params(np.random.default_rng(3))
    # tanh keeps hidden values inside [-1, 1] even for huge pre-activations
    # (float64 rounds the open bound to exactly 1 under saturation)
    out, cache = net.forward(params, 100.0 * np.ones((1, 128)), want_cache=True)
    assert np.all(np.abs(cache["h"]) <= 1.0)
    assert out.shape == (1, 640)
    _, cache2 = net.forward(params, np.ones((1, 128)), want_cache=True)
    assert np.all(np.abs(cache2["h"]) < 1.0)


def test_zero_parameters_give_zero_output():
    for maker in (lambda: make_aidnet(2), lambda: make_recnet(2, 2)):
        net = maker()
        params = {k: np.zeros_like(v)
                  for k, v in net.init_params(np.random.default_rng(0)).items()}
        out = net.forward(params, np.ones((3, net.sizes[0])))
        assert not out.any()


def test_adam_zero_gradient_keeps_parameters():
    params = {"w": np.array([1.0, -2.0, 3.0])}
    before = params["w"].copy()
    opt = Adam(cfg=AdamConfig())
    for _ in range(5):
        opt.step(params, {"w": np.zeros(3)})
    assert np.array_equal(params["w"], before)


def test_adam_single_step_matches_hand_calculation():
    cfg = AdamConfig(lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)
    params = {"w": np.array([1.0])}
    opt = Adam(cfg=cfg)
    opt.step(params, {"w": np.array([0.5])})
    m_hat = 0.1 * 0.5 / (1 - 0.9)
    v_hat = 0.001 * 0.25 / (1 - 0.999)
    expect = 1.0 - 0.1 * m_hat / (math.sqrt(v_hat) + 1e-8)
    assert abs(params["w"][0] - expect) < 1e-12


def test_single_sample_memorization():
    rng = np.random.default_rng(4)
    cases = [
        (make_aidnet(2), rng.standard_normal((1, 4)), rng.standard_normal((1, 4)), 2000),
        (make_recnet(2, 2), rng.standard_normal((1, 4)), rng.standard_normal((1, 8)), 2000),
        (make_sennet(3, 6), rng.standard_normal((1, 3, 12)), np.array([[1.0]]), 4000),
    ]
    for net, x, y, epochs in cases:
        params = net.init_params(np.random.default_rng(5))
        res = train(net, params, x, y, x, y, epochs=epochs, batch_size=1,
                    adam_cfg=AdamConfig(lr=1e-2), rng=np.random.default_rng(6))
        assert res.history[-1][1] < 1e-6


def test_training_decreases_loss_and_logs_history():
    rng = np.random.default_rng(7)
    net = make_aidnet(2)
    x = rng.standard_normal((256, 4))
    y = x @ rng.standard_normal((4, 4)) * 0.3
    params = net.init_params(rng)
    res = train(net, params, x, y, x[:64], y[:64], epochs=10, batch_size=32,
                adam_cfg=AdamConfig(), rng=rng)
    assert len(res.history) == 10
    assert res.history[-1][1] < res.history[0][1]
    assert 0 <= res.best_epoch < 10
    assert set(res.best_params) == set(params)


def test_training_determinism():
    def run():
        rng = np.random.default_rng(8)
        net = make_aidnet(2)
        x = np.random.default_rng(9).standard_normal((64, 4))
        y = np.random.default_rng(10).standard_normal((64, 4))
        params = net.init_params(rng)
        return train(net, params, x, y, x, y, epochs=5, batch_size=16,
                     adam_cfg=AdamConfig(), rng=rng).params

    a, b = run(), run()
    for k in a:
        assert np.array_equal(a[k], b[k])


def test_nan_loss_aborts():
    net = make_aidnet(2)
    params = net.init_params(np.random.default_rng(11))
    x = np.full((4, 4), 1e200)
    y = np.zeros((4, 4))
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(TrainingDivergedError):
            train(net, params, x, y, x, y, epochs=1, batch_size=4,
                  adam_cfg=AdamConfig(), rng=np.random.default_rng(12))


def test_empty_training_set_rejected():
    net = make_aidnet(2)
    params = net.init_params(np.random.default_rng(13))
    with pytest.raises(ConfigurationError):
        train(net, params, np.zeros((0, 4)), np.zeros((0, 4)),
              np.zeros((0, 4)), np.zeros((0, 4)), epochs=1, batch_size=4,
              adam_cfg=AdamConfig(), rng=np.random.default_rng(14))


def test_forward_determinism_and_batched_predict():
    net = make_recnet(2, 3)
    params = net.init_params(np.random.default_rng(15))
    x = np.random.default_rng(16).standard_normal((10, 6))
    a = net.forward(params, x)
    b = net.forward(params, x)
    assert np.array_equal(a, b)
    # different batch shapes may reassociate BLAS sums; values still agree
    c = predict_batched(net, params, x, batch=3)
    assert np.allclose(a, c, rtol=1e-10, atol=0)


def test_mse_loss_value_and_gradient():
    pred = np.array([[1.0, 2.0]])
    target = np.array([[0.0, 0.0]])
    loss, grad = mse_loss(pred, target)
    assert loss == pytest.approx(2.5)
    assert np.allclose(grad, [[1.0, 2.0]])
    assert eval_mse(make_aidnet(1),
                    {k: np.zeros_like(v) for k, v in make_aidnet(1).init_params(
                        np.random.default_rng(0)).items()},
                    np.ones((4, 2)), np.zeros((4, 2))) == pytest.approx(0.0)


def test_hard_decision_threshold_and_tie():
    assert hard_decision(0.7) == 1
    assert hard_decision(0.3) == 0
    assert hard_decision(0.5) == 0
