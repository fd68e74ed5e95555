import copy
import json
import struct
import time

import numpy as np
import pytest
import yaml

from pose_pipeline.constants import Provenance
from pose_pipeline.errors import (
    ChecksumError,
    DimensionMismatchError,
    FormatVersionError,
    InputError,
    SchemaError,
)
from pose_pipeline.lifting import LiftedPose
from pose_pipeline.regressor import (
    NormalizationStats,
    RegressorConfig,
    ResidualRegressor,
    fit,
    learning_rate,
    load_model,
    minibatches,
    save_model,
)
from pose_pipeline.skeleton import DEFAULT_SKELETON_PATH, load_skeleton

SMALL = dict(features=32, blocks=1, dropout_rate=0.0, batch_size=32)


def _as_lifted(positions, confidence=None):
    J = positions.shape[0]
    conf = np.ones(J) if confidence is None else confidence
    return LiftedPose(positions, (Provenance.DETECTED,) * J, conf)


def _dataset(ground_truth_poses, offset=(0.0, 0.0, 0.0), n=200):
    return [(_as_lifted(gt + np.asarray(offset)), gt) for gt in ground_truth_poses[:n]]


@pytest.mark.parametrize("use_confidence", [False, True])
def test_zero_output_layer_is_identity(rng, ground_truth_poses, use_confidence):
    config = RegressorConfig(use_confidence=use_confidence, **SMALL)
    lifted = ground_truth_poses[:16] + rng.normal(scale=0.02, size=(16, 15, 3))
    stats = NormalizationStats.from_data(lifted, ground_truth_poses[:16])
    regressor = ResidualRegressor(config, stats)

    features = lifted
    if use_confidence:
        features = np.concatenate([lifted, rng.uniform(size=(16, 15, 1))], axis=2)
    np.testing.assert_allclose(regressor.forward(features), lifted, rtol=0, atol=1e-12)


def test_without_shortcut_zero_output_is_target_mean(ground_truth_poses):
    config = RegressorConfig(residual=False, **SMALL)
    stats = NormalizationStats.from_data(ground_truth_poses[:10] + 0.1, ground_truth_poses[:10])
    regressor = ResidualRegressor(config, stats)
    out = regressor.forward(ground_truth_poses[:3])
    expected = np.broadcast_to(stats.target_mean.reshape(15, 3), (3, 15, 3))
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_parameter_count():
    config = RegressorConfig(features=16, blocks=2)
    regressor = ResidualRegressor(config, NormalizationStats.identity(15))
    J3, F = 45, 16
    expected = (J3 * F + F) + 2 * F + 2 * (F * F + F + 2 * F) + (F * J3 + J3)
    assert regressor.parameter_count() == expected


def test_encode_rejects_bad_shapes():
    regressor = ResidualRegressor(RegressorConfig(**SMALL), NormalizationStats.identity(15))
    with pytest.raises(DimensionMismatchError):
        regressor.forward(np.zeros((2, 14, 3)))
    with pytest.raises(DimensionMismatchError):
        regressor.forward(np.zeros((2, 15, 4)))
    with pytest.raises(InputError):
        regressor.predict([])


def test_target_normalization_round_trip(rng, ground_truth_poses):
    lifted = ground_truth_poses[:50] + rng.normal(scale=0.03, size=(50, 15, 3))
    stats = NormalizationStats.from_data(lifted, ground_truth_poses[:50])
    poses = ground_truth_poses[50:80]
    normalized = stats.normalize_target(poses)
    assert normalized.shape == poses.shape
    np.testing.assert_allclose(stats.denormalize_target(normalized), poses, rtol=0, atol=1e-12)


def test_learning_rate_schedule():
    config = RegressorConfig()
    assert learning_rate(config, 0) == 1e-3
    assert learning_rate(config, 19) == 1e-3
    assert learning_rate(config, 20) == 5e-4
    assert learning_rate(config, 40) == 2.5e-4


def test_minibatches_merge_trailing_singleton():
    assert [len(b) for b in minibatches(np.arange(11), 5)] == [5, 6]
    assert [len(b) for b in minibatches(np.arange(10), 5)] == [5, 5]
    assert [len(b) for b in minibatches(np.arange(12), 5)] == [5, 5, 2]
    merged = np.concatenate(minibatches(np.arange(11), 5))
    np.testing.assert_array_equal(merged, np.arange(11))


def test_zero_residual_is_learned_from_random_output(skeleton, ground_truth_poses):
    config = RegressorConfig(epochs=50, zero_init_output=False, **SMALL)
    _, report = fit(config, skeleton, _dataset(ground_truth_poses, n=400))
    losses = np.array([r.train_loss for r in report.epochs])
    assert len(losses) == 50
    assert losses[0] > 1e-3
    assert report.final_loss < 1e-4

    # 5-epoch moving average, 5% upticks tolerated
    smoothed = np.convolve(losses[5:], np.ones(5) / 5, mode="valid")
    assert np.all(smoothed[1:] <= 1.05 * smoothed[:-1] + 1e-7)


def test_fit_learns_constant_offset(skeleton, ground_truth_poses):
    config = RegressorConfig(epochs=40, **SMALL)
    dataset = _dataset(ground_truth_poses, offset=(0.0, 0.0, 0.10))
    regressor, report = fit(config, skeleton, dataset)

    lifted = [lifted for lifted, _ in dataset]
    targets = np.stack([gt for _, gt in dataset])
    before = np.linalg.norm(np.stack([p.positions for p in lifted]) - targets, axis=-1).mean()
    after = np.linalg.norm(regressor.predict(lifted) - targets, axis=-1).mean()
    assert after < 0.5 * before
    assert report.epochs[-1].train_loss < report.epochs[0].train_loss
    assert not regressor.network.training


def test_fit_validation_schedule(skeleton, ground_truth_poses):
    config = RegressorConfig(epochs=4, validate_every=3, **SMALL)
    dataset = _dataset(ground_truth_poses, n=64)
    _, report = fit(config, skeleton, dataset, validation=dataset[:16])
    validated = [r.epoch for r in report.epochs if r.val_loss is not None]
    assert validated == [2, 3]
    assert report.val_samples == 16


def test_fit_errors(skeleton, ground_truth_poses):
    dataset = _dataset(ground_truth_poses, n=8)
    with pytest.raises(InputError):
        fit(RegressorConfig(**SMALL), skeleton, dataset[:1])
    with pytest.raises(DimensionMismatchError):
        fit(RegressorConfig(num_landmarks=14, **SMALL), skeleton, dataset)
    bad = [(lifted, gt.copy()) for lifted, gt in dataset]
    bad[0][1][0, 0] = np.nan
    with pytest.raises(InputError):
        fit(RegressorConfig(**SMALL), skeleton, bad)


def test_training_is_deterministic(tmp_path, skeleton, ground_truth_poses):
    config = RegressorConfig(epochs=3, **SMALL)
    dataset = _dataset(ground_truth_poses, offset=(0.02, 0.0, 0.05), n=64)
    a, _ = fit(config, skeleton, dataset)
    b, _ = fit(config, skeleton, dataset)
    checksum_a = save_model(a, tmp_path / "a.rpm")
    checksum_b = save_model(b, tmp_path / "b.rpm")
    assert checksum_a == checksum_b
    assert (tmp_path / "a.rpm").read_bytes() == (tmp_path / "b.rpm").read_bytes()


@pytest.fixture
def trained(skeleton, ground_truth_poses):
    config = RegressorConfig(epochs=2, **SMALL)
    regressor, _ = fit(config, skeleton, _dataset(ground_truth_poses, offset=(0.0, 0.03, 0.0), n=64))
    return regressor


def test_model_file_round_trip(tmp_path, skeleton, ground_truth_poses, trained):
    path = tmp_path / "model.rpm"
    save_model(trained, path)
    loaded = load_model(path, skeleton)

    assert loaded.config == trained.config
    assert not loaded.network.training
    for (name, p), (_, q) in zip(trained.network.named_parameters(), loaded.network.named_parameters()):
        np.testing.assert_array_equal(p.value, q.value, err_msg=name)
    for (name, a), (_, b) in zip(trained.network.named_buffers(), loaded.network.named_buffers()):
        np.testing.assert_array_equal(a, b, err_msg=name)
    features = ground_truth_poses[100:110]
    np.testing.assert_array_equal(loaded.forward(features), trained.forward(features))


def _rewrite_header(path, **changes):
    data = path.read_bytes()
    magic, length = struct.unpack_from("<8sQ", data)
    header = json.loads(data[16 : 16 + length])
    header.update(changes)
    encoded = json.dumps(header).encode()
    path.write_bytes(struct.pack("<8sQ", magic, len(encoded)) + encoded + data[16 + length :])


def test_model_file_rejections(tmp_path, skeleton, trained):
    path = tmp_path / "model.rpm"
    save_model(trained, path)
    data = path.read_bytes()

    path.write_bytes(data[:-5])
    with pytest.raises(SchemaError):
        load_model(path, skeleton)

    path.write_bytes(b"NOTMODEL" + data[8:])
    with pytest.raises(SchemaError):
        load_model(path, skeleton)

    flipped = bytearray(data)
    flipped[-1] ^= 0xFF
    path.write_bytes(bytes(flipped))
    with pytest.raises(ChecksumError):
        load_model(path, skeleton)

    path.write_bytes(data)
    _rewrite_header(path, format_version=99)
    with pytest.raises(FormatVersionError):
        load_model(path, skeleton)


def test_model_skeleton_checks(tmp_path, skeleton, trained):
    path = tmp_path / "model.rpm"
    save_model(trained, path)

    definition = yaml.safe_load(DEFAULT_SKELETON_PATH.read_text())
    changed = copy.deepcopy(definition)
    changed["trunk"] = [n for n in changed["trunk"] if n != "left_hip"]
    with pytest.raises(ChecksumError):
        load_model(path, load_skeleton(changed))

    config = trained.config.model_copy(update={"num_landmarks": 14})
    _rewrite_header(path, config=config.model_dump(mode="json"))
    with pytest.raises(DimensionMismatchError):
        load_model(path, skeleton)


@pytest.mark.slow
def test_inference_throughput_at_default_width(ground_truth_poses):
    regressor = ResidualRegressor(RegressorConfig(), NormalizationStats.identity(15))
    assert regressor.config.features == 1024
    lifted = [_as_lifted(p) for p in ground_truth_poses[:200]]

    started = time.perf_counter()
    for pose in lifted:
        regressor.predict([pose])
    single_rate = len(lifted) / (time.perf_counter() - started)

    started = time.perf_counter()
    regressor.predict(lifted)
    batched_rate = len(lifted) / (time.perf_counter() - started)

    assert single_rate >= 200.0
    assert batched_rate >= 200.0
