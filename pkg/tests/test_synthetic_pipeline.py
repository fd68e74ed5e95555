import numpy as np
import pytest

from pose_pipeline.constants import RecoveryMode
from pose_pipeline.data import SynthConfig, generate_synthetic
from pose_pipeline.errors import ChecksumError, InputError
from pose_pipeline.lifting import LiftConfig
from pose_pipeline.metrics import ap_at_threshold, mpjpe
from pose_pipeline.pipeline import PosePipeline, training_pairs, unprocessable_fraction
from pose_pipeline.regressor import NormalizationStats, RegressorConfig, ResidualRegressor, fit


def _scores(records, poses):
    pairs = [r.eval_pair(p) for r, p in zip(records, poses)]
    return ap_at_threshold(pairs).mean, mpjpe(pairs).mean


def _lift(pipeline, records):
    outcomes = pipeline.lift_records(records)
    assert unprocessable_fraction(outcomes) == 0.0
    return [o.lifted for o in outcomes]


def _train_and_score(skeleton, pipeline, train_config, test_config, regressor_config):
    train = generate_synthetic(train_config, skeleton)
    test = generate_synthetic(test_config, skeleton)
    regressor, _ = fit(regressor_config, skeleton, training_pairs(train, pipeline.lift_records(train)))
    refining = PosePipeline(skeleton, pipeline.prior, regressor)

    lifted = _lift(refining, test)
    refined = refining.refine(lifted)
    baseline = _scores(test, [p.positions for p in lifted])
    return baseline, _scores(test, refined)


def test_refinement_beats_lifting(skeleton, pipeline):
    common = dict(offset_magnitude=0.03, depth_noise=0.0, dropout=0.0)
    (_, lifted_mpjpe), (_, refined_mpjpe) = _train_and_score(
        skeleton,
        pipeline,
        SynthConfig(samples=600, seed=21, **common),
        SynthConfig(samples=200, seed=22, **common),
        RegressorConfig(features=64, blocks=1, dropout_rate=0.0, epochs=30, batch_size=64),
    )
    assert lifted_mpjpe == pytest.approx(3.0, rel=1e-6)
    assert refined_mpjpe < lifted_mpjpe


def test_prior_recovery_beats_trunk_centroid(skeleton, limb_prior):
    records = generate_synthetic(SynthConfig(samples=200, seed=31, dropout=0.3), skeleton)
    prior_pipeline = PosePipeline(skeleton, limb_prior)
    centroid_pipeline = PosePipeline(
        skeleton, lift_config=LiftConfig(recovery_mode=RecoveryMode.TRUNK_CENTROID)
    )
    prior_ap, prior_mpjpe = _scores(records, [p.positions for p in _lift(prior_pipeline, records)])
    centroid_ap, centroid_mpjpe = _scores(
        records, [p.positions for p in _lift(centroid_pipeline, records)]
    )
    assert prior_ap > centroid_ap
    assert prior_mpjpe < centroid_mpjpe


def test_unprocessable_samples_are_reported(skeleton, pipeline, synthetic_records):
    record = synthetic_records[0]
    detections = [d.model_copy() for d in record.detections]
    detections[skeleton.index("torso")] = detections[skeleton.index("torso")].model_copy(
        update={"detected": False}
    )
    broken = record.model_copy(update={"sample_id": "no-torso", "detections": detections})
    outcomes = pipeline.lift_records([broken, synthetic_records[1]])
    assert [o.ok for o in outcomes] == [False, True]
    assert unprocessable_fraction(outcomes) == 0.5
    assert len(training_pairs([broken, synthetic_records[1]], outcomes)) == 1
    assert pipeline.last_throughput[0].count == 2


def test_pipeline_guards(skeleton, limb_prior, pipeline, synthetic_records):
    with pytest.raises(InputError):
        pipeline.refine(_lift(pipeline, synthetic_records[:2]))

    regressor = ResidualRegressor(
        RegressorConfig(features=8, blocks=1), NormalizationStats.identity(15), skeleton_checksum="0" * 64
    )
    with pytest.raises(ChecksumError):
        PosePipeline(skeleton, limb_prior, regressor)


@pytest.mark.slow
def test_full_synthetic_experiment(skeleton, pipeline):
    common = dict(offset_magnitude=0.03, depth_noise=0.005, dropout=0.1)
    (lifted_ap, lifted_mpjpe), (refined_ap, refined_mpjpe) = _train_and_score(
        skeleton,
        pipeline,
        SynthConfig(samples=15000, seed=41, **common),
        SynthConfig(samples=1500, seed=42, **common),
        RegressorConfig(features=256, blocks=3, epochs=60),
    )
    assert np.isfinite(refined_mpjpe)
    assert refined_mpjpe <= 0.5 * lifted_mpjpe
    assert refined_ap >= lifted_ap
