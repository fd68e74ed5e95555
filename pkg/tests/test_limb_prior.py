import json

import numpy as np
import pytest

from pose_pipeline.errors import ChecksumError, FormatVersionError, InputError, SchemaError
from pose_pipeline.lifting import (
    LimbPrior,
    PriorConfig,
    fit_limb_prior,
    load_limb_prior,
    recover_landmark,
    save_limb_prior,
)
from pose_pipeline.skeleton import recovery_order


def _single_limb_prior(mean, cov):
    return LimbPrior(
        means={1: np.asarray(mean, dtype=np.float64)},
        covariances={1: np.asarray(cov, dtype=np.float64)},
        parents={1: 0},
        epsilon=0.0,
        skeleton_checksum="",
    )


def _random_spd(rng, n=6):
    a = rng.normal(size=(n, n))
    return a @ a.T + n * np.eye(n) * 0.1


def test_recover_matches_explicit_inverse(rng):
    for _ in range(1000):
        cov = _random_spd(rng)
        mean = rng.normal(size=6)
        parent = rng.normal(size=3)
        expected = mean[:3] + cov[:3, 3:] @ np.linalg.inv(cov[3:, 3:]) @ (parent - mean[3:])
        got = recover_landmark(_single_limb_prior(mean, cov), 1, parent)
        np.testing.assert_allclose(got, expected, rtol=0, atol=1e-9)


def test_zero_cross_covariance_returns_marginal_mean(rng):
    cov = np.eye(6)
    mean = np.array([0.1, 0.2, 0.3, 1.0, 2.0, 3.0])
    got = recover_landmark(_single_limb_prior(mean, cov), 1, rng.normal(size=3))
    np.testing.assert_array_equal(got, mean[:3])


def test_parent_at_its_mean_returns_child_mean(rng):
    cov = _random_spd(rng)
    mean = rng.normal(size=6)
    got = recover_landmark(_single_limb_prior(mean, cov), 1, mean[3:])
    np.testing.assert_allclose(got, mean[:3], atol=1e-12)


def test_recover_errors(rng):
    prior = _single_limb_prior(np.zeros(6), np.eye(6))
    with pytest.raises(InputError):
        recover_landmark(prior, 0, np.zeros(3))
    with pytest.raises(InputError):
        recover_landmark(prior, 1, np.array([np.nan, 0.0, 0.0]))


def test_fit_recovers_known_gaussians(skeleton):
    rng = np.random.default_rng(5)
    n = 10_000
    # independent Gaussian limb vectors yield known joint pair statistics
    limb_means = rng.normal(scale=0.3, size=(skeleton.num_limbs, 3))
    limb_std = rng.uniform(0.01, 0.05, size=(skeleton.num_limbs, 3))
    vectors = limb_means + limb_std * rng.normal(size=(n, skeleton.num_limbs, 3))

    poses = np.zeros((n, skeleton.num_landmarks, 3))
    for limb in recovery_order(skeleton):
        child, shared = skeleton.limbs[limb]
        poses[:, child] = poses[:, shared] + vectors[:, limb]

    prior = fit_limb_prior(skeleton, poses)
    within = total = 0
    for limb in skeleton.non_root_limbs:
        parent = skeleton.limb_parents[limb]
        true_mean = np.concatenate([limb_means[limb], limb_means[parent]])
        true_var = np.concatenate([limb_std[limb], limb_std[parent]]) ** 2
        true_cov = np.diag(true_var)
        mean_se = np.sqrt(true_var / n)
        within += np.sum(np.abs(prior.means[limb] - true_mean) <= 3 * mean_se)
        total += 6
        # standard error of a covariance entry: sqrt((s_ii s_jj + s_ij^2) / n)
        cov_se = np.sqrt((np.outer(true_var, true_var) + true_cov**2) / n)
        within += np.sum(np.abs(prior.covariances[limb] - true_cov) <= 3 * cov_se + 1e-6)
        total += 36
    assert within / total >= 0.95


def test_fit_adds_epsilon_and_is_symmetric(skeleton, ground_truth_poses):
    prior = fit_limb_prior(skeleton, ground_truth_poses, PriorConfig(epsilon=1e-3))
    for limb, cov in prior.covariances.items():
        np.testing.assert_array_equal(cov, cov.T)
        assert np.all(np.linalg.eigvalsh(cov) >= 1e-3 - 1e-12)
    assert set(prior.means) == set(skeleton.non_root_limbs)


def test_fit_errors(skeleton, ground_truth_poses):
    with pytest.raises(InputError):
        fit_limb_prior(skeleton, ground_truth_poses[:1])
    with pytest.raises(InputError):
        fit_limb_prior(skeleton, ground_truth_poses[:, :14])
    bad = ground_truth_poses[:5].copy()
    bad[0, 0, 0] = np.nan
    with pytest.raises(InputError):
        fit_limb_prior(skeleton, bad)


def test_prior_file_round_trip(tmp_path, skeleton, limb_prior):
    path = tmp_path / "prior.json"
    save_limb_prior(limb_prior, path)
    loaded = load_limb_prior(path, skeleton)
    for limb in limb_prior.means:
        np.testing.assert_array_equal(loaded.means[limb], limb_prior.means[limb])
        np.testing.assert_array_equal(loaded.covariances[limb], limb_prior.covariances[limb])
    assert loaded.parents == limb_prior.parents


def test_prior_file_rejections(tmp_path, skeleton, limb_prior):
    path = tmp_path / "prior.json"
    data = limb_prior.to_dict()

    path.write_text(json.dumps({**data, "skeleton_checksum": "0" * 64}))
    with pytest.raises(ChecksumError):
        load_limb_prior(path, skeleton)

    path.write_text(json.dumps({**data, "format_version": 99}))
    with pytest.raises(FormatVersionError):
        load_limb_prior(path, skeleton)

    path.write_text(json.dumps({**data, "limbs": data["limbs"][1:]}))
    with pytest.raises(SchemaError):
        load_limb_prior(path, skeleton)

    asymmetric = json.loads(json.dumps(data))
    asymmetric["limbs"][0]["covariance"][1] += 1.0
    path.write_text(json.dumps(asymmetric))
    with pytest.raises(SchemaError):
        load_limb_prior(path, skeleton)

    path.write_text("{not json")
    with pytest.raises(SchemaError):
        load_limb_prior(path, skeleton)
