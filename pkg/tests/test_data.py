import logging

import numpy as np
import pytest

from pose_pipeline.constants import Provenance
from pose_pipeline.data import (
    SampleRecord,
    SynthConfig,
    generate_synthetic,
    normalize_depth_range,
    read_dataset,
    surface_offsets,
    write_dataset,
)
from pose_pipeline.errors import DimensionMismatchError, InputError, SchemaError
from pose_pipeline.lifting import DepthFrame, lift_pose, write_depth_frame
from pose_pipeline.metrics import mpjpe


def _truncated(record, J=14):
    return record.model_copy(
        update={
            "sample_id": "short",
            "detections": record.detections[:J],
            "depths": record.depths[:J],
            "ground_truth": record.ground_truth[:J],
            "gt_2d": record.gt_2d[:J],
        }
    )


# ---------------------------------------------------------------------------
# Dataset files
# ---------------------------------------------------------------------------


def test_dataset_round_trip(tmp_path, skeleton, synthetic_records):
    path = tmp_path / "samples.jsonl"
    assert write_dataset(synthetic_records[:3], path) == 3
    loaded = read_dataset(path, skeleton)
    assert [r.sample_id for r in loaded] == [r.sample_id for r in synthetic_records[:3]]
    np.testing.assert_array_equal(loaded[0].ground_truth_array(), synthetic_records[0].ground_truth_array())


def test_dataset_landmark_count_mismatch(tmp_path, skeleton, synthetic_records):
    path = tmp_path / "samples.jsonl"
    write_dataset([synthetic_records[0], _truncated(synthetic_records[1])], path)
    with pytest.raises(DimensionMismatchError, match="short"):
        read_dataset(path, skeleton)
    assert len(read_dataset(path, skeleton, strict=False)) == 1


def test_dataset_malformed_line(tmp_path, skeleton, synthetic_records, caplog):
    path = tmp_path / "samples.jsonl"
    write_dataset(synthetic_records[:2], path)
    with open(path, "a", encoding="utf-8") as f:
        f.write("\n{\"sample_id\": \"broken\"}\n")
    with pytest.raises(SchemaError, match=":4:"):
        read_dataset(path, skeleton)
    with caplog.at_level(logging.WARNING):
        assert len(read_dataset(path, skeleton, strict=False)) == 2
    assert "skipping invalid record" in caplog.text


def test_empty_dataset_warns(tmp_path, skeleton, caplog):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    with caplog.at_level(logging.WARNING):
        assert read_dataset(path, skeleton) == []
    assert "contains no records" in caplog.text


def test_record_validation(synthetic_records):
    data = synthetic_records[0].model_dump()
    with pytest.raises(ValueError):
        SampleRecord.model_validate({**data, "depth_frame": "frame.rpd"})
    with pytest.raises(ValueError):
        SampleRecord.model_validate({**data, "depths": data["depths"][:-1]})
    with pytest.raises(ValueError):
        SampleRecord.model_validate({**data, "bbox_height": None})

    invalid_joint = list(data["ground_truth"])
    invalid_joint[2] = None
    record = SampleRecord.model_validate({**data, "ground_truth": invalid_joint})
    assert not record.gt_valid()[2]
    assert np.isnan(record.ground_truth_array()[2]).all()


def test_record_with_depth_frame(tmp_path, skeleton, synthetic_records):
    record = synthetic_records[0]
    depth = np.zeros((424, 512))
    pose2d = record.pose2d()
    for u, v, z in zip(pose2d.u, pose2d.v, record.depths):
        col, row = int(np.floor(u + 0.5)), int(np.floor(v + 0.5))
        if z is not None and 0 <= row < 424 and 0 <= col < 512:
            depth[row, col] = z
    write_depth_frame(tmp_path / "frame.rpd", DepthFrame(depth, record.intrinsics))

    framed = record.model_copy(update={"depths": None, "depth_frame": "frame.rpd"})
    source = framed.depth_source(tmp_path)
    assert isinstance(source, DepthFrame)
    assert (source.height, source.width) == (424, 512)


# ---------------------------------------------------------------------------
# Depth range normalization
# ---------------------------------------------------------------------------


def test_normalize_depth_range():
    assert normalize_depth_range(0.0) == -0.5
    assert normalize_depth_range(8.0) == 0.5
    assert normalize_depth_range(4.0) == 0.0
    np.testing.assert_allclose(normalize_depth_range(np.array([2.0, 6.0])), [-0.25, 0.25])


def test_normalize_depth_range_out_of_range(caplog):
    with caplog.at_level(logging.WARNING):
        np.testing.assert_array_equal(normalize_depth_range(np.array([-1.0, 9.0])), [-0.5, 0.5])
    assert "Clamping" in caplog.text
    with pytest.raises(InputError):
        normalize_depth_range(9.0, clamp=False)
    with pytest.raises(InputError):
        normalize_depth_range(np.nan)


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------


def test_synthetic_is_deterministic(skeleton):
    config = SynthConfig(samples=5, seed=11)
    a = [r.model_dump_json() for r in generate_synthetic(config, skeleton)]
    b = [r.model_dump_json() for r in generate_synthetic(config, skeleton)]
    assert a == b
    c = generate_synthetic(config.model_copy(update={"seed": 12}), skeleton)
    assert c[0].model_dump_json() != a[0]


def _lift_all(records, skeleton):
    lifted = [
        lift_pose(skeleton, r.pose2d(), r.depth_source(), None, intrinsics=r.intrinsics)
        for r in records
    ]
    return [r.eval_pair(p.positions) for r, p in zip(records, lifted)], lifted


def test_zero_offset_lifts_to_ground_truth(skeleton):
    config = SynthConfig(samples=20, seed=3, offset_magnitude=0.0, depth_noise=0.0, dropout=0.0)
    pairs, lifted = _lift_all(generate_synthetic(config, skeleton), skeleton)
    for pair in pairs:
        np.testing.assert_allclose(pair.predicted, pair.ground_truth, atol=1e-9)
    assert all(set(p.provenance) == {Provenance.DETECTED} for p in lifted)


def test_surface_offset_sets_lifting_error(skeleton):
    config = SynthConfig(samples=50, seed=4, offset_magnitude=0.03, depth_noise=0.0, dropout=0.0)
    pairs, _ = _lift_all(generate_synthetic(config, skeleton), skeleton)
    assert mpjpe(pairs).mean == pytest.approx(3.0, rel=0.1)


def test_surface_offsets_have_exact_magnitude(rng):
    joints = rng.uniform(-1, 1, size=(15, 3)) + [0.0, 0.0, 3.0]
    offsets = surface_offsets(joints, 0.03, 0.3)
    np.testing.assert_allclose(np.linalg.norm(offsets, axis=1), 0.03)
    assert np.all(offsets[:, 2] < 0)


def test_synthetic_respects_trunk_guarantee(skeleton):
    config = SynthConfig(samples=200, seed=5, dropout=0.5, trunk_dropout=0.9)
    extra = sorted(skeleton.trunk_landmarks - set(skeleton.root_landmarks))
    for record in generate_synthetic(config, skeleton):
        detected = record.pose2d().detected
        assert detected[list(skeleton.root_landmarks)].all()
        assert detected[extra].sum() >= 2


def test_synthetic_config_errors(skeleton):
    with pytest.raises(InputError):
        generate_synthetic(SynthConfig(samples=1, trunk_dropout=1.0), skeleton)
    lengths = dict(SynthConfig().limb_lengths)
    del lengths["head"]
    with pytest.raises(InputError):
        generate_synthetic(SynthConfig(samples=1, limb_lengths=lengths), skeleton)
