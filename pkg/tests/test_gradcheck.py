import time

import numpy as np
import pytest

from pose_pipeline.errors import InputError
from pose_pipeline.nn import Linear, grad_check
from pose_pipeline.regressor import RegressorConfig, ResidualPoseNetwork


def _small_network(rng, blocks=1, dropout_rate=0.0):
    config = RegressorConfig(
        num_landmarks=4,
        features=16,
        blocks=blocks,
        dropout_rate=dropout_rate,
        zero_init_output=False,
    )
    return ResidualPoseNetwork(config, rng)


def test_linear_layer_is_exact(rng):
    layer = Linear(12, 12, rng)
    inputs = rng.uniform(0.5, 1.5, size=(6, 12))
    target = 5.0 + rng.normal(size=(6, 12))
    report = grad_check(layer, inputs, target)
    assert report.passed(1e-7)
    assert report.checked == 12 * 12 + 12
    assert set(report.per_parameter) == {"weight", "bias"}


@pytest.mark.parametrize("blocks", [1, 2])
def test_residual_network_gradients(rng, blocks):
    network = _small_network(rng, blocks=blocks)
    inputs = rng.normal(size=(8, 12))
    target = network.forward(inputs) + 0.1 * rng.normal(size=(8, 12))
    report = grad_check(network, inputs, target, max_entries=20, check_inputs=True)
    assert report.passed(1e-4), report.per_parameter
    assert report.checked > 0
    assert "output.weight" in report.per_parameter


def test_running_statistics_untouched(rng):
    network = _small_network(rng)
    before = [b.copy() for _, b in network.named_buffers()]
    inputs = rng.normal(size=(8, 12))
    grad_check(network, inputs, np.zeros((8, 12)), max_entries=5)
    for (_, after), expected in zip(network.named_buffers(), before):
        np.testing.assert_array_equal(after, expected)


def test_corrupted_gradient_fails(rng):
    layer = Linear(4, 4, rng)
    inputs = rng.uniform(0.5, 1.5, size=(3, 4))
    report = grad_check(layer, inputs, 5.0 + np.zeros((3, 4)), perturb_analytic=1.0)
    assert not report.passed(1e-4)


def test_active_dropout_is_rejected(rng):
    network = _small_network(rng, dropout_rate=0.3)
    with pytest.raises(InputError):
        grad_check(network, rng.normal(size=(4, 12)), np.zeros((4, 12)))


def test_default_network_gradients():
    config = RegressorConfig(dropout_rate=0.0, zero_init_output=False)
    rng = np.random.default_rng(config.seed)
    network = ResidualPoseNetwork(config, rng)
    inputs = rng.normal(size=(8, 45))
    target = network.forward(inputs) + 0.1 * rng.normal(size=(8, 45))

    started = time.perf_counter()
    report = grad_check(network, inputs, target, max_entries=20, check_inputs=True)
    elapsed = time.perf_counter() - started

    assert (config.num_landmarks, config.features, config.blocks) == (15, 1024, 3)
    assert report.passed(1e-4), report.per_parameter
    assert report.checked > 100
    assert elapsed < 60.0


def test_default_width_linear_layer_is_exact(rng):
    layer = Linear(45, 45, rng)
    inputs = rng.uniform(0.5, 1.5, size=(8, 45))
    target = 5.0 + rng.normal(size=(8, 45))
    report = grad_check(layer, inputs, target, max_entries=200)
    assert report.passed(1e-7)
