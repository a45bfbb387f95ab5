import math

import numpy as np
import pytest

from formsim.estimator import (
    DistanceSources,
    HumanEstimate,
    Measurement,
    MeasurementNoiseConfig,
    PixelBox,
    ProcessNoiseConfig,
    apparent_distance,
    build_measurement,
    direction_from_bbox,
    estimate_tick,
    kf_predict,
    kf_update,
    select_distance,
    stereo_distance,
)
from formsim.geometry import CameraIntrinsics, CameraPose, camera_rotation


class TextbookKF:
    """Independent full-matrix constant-velocity filter used as oracle."""

    def __init__(self, mean, cov):
        self.x = np.asarray(mean, dtype=float).copy()
        self.P = np.asarray(cov, dtype=float).copy()
        self.H = np.hstack([np.eye(3), np.zeros((3, 3))])

    def predict(self, dt, Q):
        F = np.block([[np.eye(3), dt * np.eye(3)], [np.zeros((3, 3)), np.eye(3)]])
        self.x = F @ self.x
        self.P = F @ self.P @ F.T + Q

    def update(self, z, R):
        S = self.H @ self.P @ self.H.T + R
        K = self.P @ self.H.T @ np.linalg.inv(S)
        self.x = self.x + K @ (np.asarray(z) - self.H @ self.x)
        self.P = (np.eye(6) - K @ self.H) @ self.P


def random_psd(rng, n, scale=1.0):
    A = rng.normal(size=(n, n))
    return scale * (A @ A.T) + 1e-6 * np.eye(n)


def test_kf_predict_constant_velocity_mean():
    est = HumanEstimate(np.array([1, 0, 0, 1, 0, 0], dtype=float), np.eye(6))
    out = kf_predict(est, 0.1, ProcessNoiseConfig())
    np.testing.assert_allclose(out.position, [1.1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(out.velocity, [1, 0, 0], atol=1e-15)


def test_kf_predict_covariance_matches_dense_oracle():
    rng = np.random.default_rng(10)
    q = ProcessNoiseConfig(sigma_p=(0.1, 0.2, 0.3), sigma_v=(0.4, 0.5, 0.6))
    for _ in range(20):
        P = random_psd(rng, 6)
        est = HumanEstimate(rng.normal(size=6), P)
        dt = rng.uniform(0.01, 1.0)
        out = kf_predict(est, dt, q)
        F = np.block([[np.eye(3), dt * np.eye(3)], [np.zeros((3, 3)), np.eye(3)]])
        np.testing.assert_allclose(out.cov, F @ P @ F.T + q.matrix(), atol=1e-9)
        # exact algebraic identity: P' - F P F^T = Q
        np.testing.assert_allclose(out.cov - F @ P @ F.T, q.matrix(), atol=1e-9)


def test_kf_predict_rejects_bad_dt():
    est = HumanEstimate(np.zeros(6), np.eye(6))
    for dt in (0.0, -0.1):
        with pytest.raises(ValueError):
            kf_predict(est, dt, ProcessNoiseConfig())


def test_kf_update_measurement_dominated():
    est = HumanEstimate(np.zeros(6), np.eye(6) * 1e6)
    m = Measurement(np.array([3.0, 4.0, 5.0]), np.eye(3) * 1e-9, "uwb")
    out = kf_update(est, m)
    np.testing.assert_allclose(out.position, [3, 4, 5], atol=1e-6)


def test_kf_update_prior_dominated():
    est = HumanEstimate(np.array([1, 2, 3, 0, 0, 0], dtype=float), np.eye(6) * 1e-3)
    m = Measurement(np.array([100.0, 100.0, 100.0]), np.eye(3) * 1e12, "uwb")
    out = kf_update(est, m)
    np.testing.assert_allclose(out.position, [1, 2, 3], atol=1e-6)


def test_kf_update_matches_textbook_oracle():
    rng = np.random.default_rng(11)
    for _ in range(50):
        P = random_psd(rng, 6)
        mean = rng.normal(size=6)
        est = HumanEstimate(mean, P)
        R = random_psd(rng, 3, scale=0.1)
        z = rng.normal(size=3)
        oracle = TextbookKF(mean, P)
        oracle.update(z, R)
        out = kf_update(est, Measurement(z, R, "uwb"))
        np.testing.assert_allclose(out.mean, oracle.x, atol=1e-9)
        np.testing.assert_allclose(out.cov, oracle.P, atol=1e-9)


def test_kf_update_never_inflates_position_covariance():
    rng = np.random.default_rng(12)
    for _ in range(50):
        P = random_psd(rng, 6)
        est = HumanEstimate(rng.normal(size=6), P)
        R = random_psd(rng, 3, scale=0.5)
        out = kf_update(est, Measurement(rng.normal(size=3), R, "uwb"))
        diff = P[:3, :3] - out.cov[:3, :3]
        assert np.linalg.eigvalsh(diff).min() >= -1e-9


def test_kf_update_rejects_singular_innovation():
    est = HumanEstimate(np.zeros(6), np.zeros((6, 6)))
    m = Measurement(np.zeros(3), np.zeros((3, 3)), "uwb")
    with pytest.raises(ValueError, match="singular"):
        kf_update(est, m)


def _cam(heading=0.0, pitch=0.0, p=(0, 0, 0)):
    return CameraPose(camera_rotation(heading, pitch), np.asarray(p, dtype=float),
                      CameraIntrinsics())


def test_direction_from_bbox_principal_point():
    cam = _cam()
    bbox = PixelBox(630, 350, 650, 370)  # centered on (640, 360)
    np.testing.assert_allclose(direction_from_bbox(cam, bbox), [0, 0, 1], atol=1e-12)


def test_direction_from_bbox_45_degrees():
    cam = _cam()
    # center offset u - cx = focal -> 45 degree ray in the x-z plane
    bbox = PixelBox(1230, 350, 1250, 370)
    np.testing.assert_allclose(
        direction_from_bbox(cam, bbox), np.array([1, 0, 1]) / math.sqrt(2), atol=1e-12
    )


def test_direction_from_bbox_reprojects():
    cam = _cam()
    intr = cam.intrinsics
    rng = np.random.default_rng(13)
    for _ in range(100):
        u = rng.uniform(1, intr.width - 1)
        v = rng.uniform(1, intr.height - 1)
        d = direction_from_bbox(cam, PixelBox(u - 5, v - 5, u + 5, v + 5))
        u2 = intr.cx + intr.focal * d[0] / d[2]
        v2 = intr.cy + intr.focal * d[1] / d[2]
        assert abs(u2 - u) < 1e-6 and abs(v2 - v) < 1e-6


def test_direction_from_bbox_rejects_degenerate():
    cam = _cam()
    with pytest.raises(ValueError):
        direction_from_bbox(cam, PixelBox(10, 10, 10, 30))
    with pytest.raises(ValueError):
        direction_from_bbox(cam, PixelBox(2000, 10, 2040, 30))


def test_apparent_distance_arithmetic():
    assert apparent_distance(108, 1.8, 600) == pytest.approx(10.0, abs=1e-12)
    assert apparent_distance(1080, 1.8, 600) == pytest.approx(1.0, abs=1e-12)
    # halving the bbox height doubles the distance
    assert apparent_distance(54, 1.8, 600) == pytest.approx(20.0, abs=1e-12)
    with pytest.raises(ValueError):
        apparent_distance(0, 1.8, 600)


def test_stereo_distance_median():
    assert stereo_distance([5, 7, 6]) == 6
    assert stereo_distance([]) is None
    assert stereo_distance([4, 1000, 5, 6, 1001]) == sorted([4, 1000, 5, 6, 1001])[2]
    assert stereo_distance([math.inf, 3.0]) == 3.0


def test_select_distance_priority_table():
    noise = MeasurementNoiseConfig()
    cam = CameraPose(np.eye(3), np.zeros(3), CameraIntrinsics())
    cases = [
        (DistanceSources(uwb=9.8, stereo=10.3, apparent=11.0), 9.8, "uwb"),
        (DistanceSources(uwb=9.8, stereo=10.3), 9.8, "uwb"),
        (DistanceSources(uwb=9.8, apparent=11.0), 9.8, "uwb"),
        (DistanceSources(uwb=9.8), 9.8, "uwb"),
        (DistanceSources(stereo=10.3, apparent=11.0), 10.3, "stereo"),
        (DistanceSources(stereo=10.3), 10.3, "stereo"),
        (DistanceSources(apparent=11.0), 11.0, "apparent"),
    ]
    for sources, expect_d, expect_src in cases:
        d, cov, src = select_distance(sources, cam, noise)
        assert d == expect_d and src == expect_src
        sz = noise.sigma_z(expect_src)
        expected = np.diag([noise.sigma_xy**2, noise.sigma_xy**2, sz**2])
        np.testing.assert_allclose(cov, expected, atol=1e-15)  # identity rotation
    assert select_distance(DistanceSources(), cam, noise) is None


def test_select_distance_rotates_covariance():
    noise = MeasurementNoiseConfig()
    cam = _cam(heading=0.7, pitch=-0.3)
    _, cov, _ = select_distance(DistanceSources(uwb=5.0), cam, noise)
    R = cam.rotation
    manual = R @ np.diag([noise.sigma_xy**2, noise.sigma_xy**2, noise.sigma_z_uwb**2]) @ R.T
    np.testing.assert_allclose(cov, manual, atol=1e-15)


def test_select_distance_lower_priority_never_changes_output():
    noise = MeasurementNoiseConfig()
    cam = _cam()
    base = select_distance(DistanceSources(stereo=10.3), cam, noise)
    more = select_distance(DistanceSources(stereo=10.3, apparent=11.0), cam, noise)
    assert base[0] == more[0] and base[2] == more[2]
    np.testing.assert_allclose(base[1], more[1])


def test_build_measurement_cases():
    cam = _cam()
    # camera frame z-axis is the boresight: x east camera at origin
    z = build_measurement(cam, 10.0, np.array([0.0, 0.0, 1.0]))
    np.testing.assert_allclose(z, cam.rotation[:, 2] * 10.0, atol=1e-12)

    cam2 = CameraPose(np.eye(3), np.array([1.0, 2.0, 3.0]), CameraIntrinsics())
    np.testing.assert_allclose(
        build_measurement(cam2, 10.0, np.array([0.0, 0.0, 1.0])), [1, 2, 13], atol=1e-12
    )
    # 90 degree yaw about z: hand-built rotation matrix oracle
    Rz = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    cam3 = CameraPose(Rz, np.zeros(3), CameraIntrinsics())
    np.testing.assert_allclose(
        build_measurement(cam3, 5.0, np.array([0.0, 0.0, 1.0])), Rz @ [0, 0, 5], atol=1e-12
    )


def test_build_measurement_is_isometry():
    rng = np.random.default_rng(14)
    for _ in range(100):
        cam = _cam(rng.uniform(-3, 3), rng.uniform(-1.4, 1.4), rng.normal(size=3))
        d = rng.uniform(0.1, 50)
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        z = build_measurement(cam, d, v)
        assert abs(np.linalg.norm(z - cam.p) - d) < 1e-12


def test_build_measurement_rejects_non_unit():
    cam = _cam()
    with pytest.raises(ValueError):
        build_measurement(cam, 5.0, np.array([0.0, 0.0, 2.0]))


def test_estimate_tick_no_bbox_is_pure_predict():
    q = ProcessNoiseConfig()
    noise = MeasurementNoiseConfig()
    est = HumanEstimate(np.array([1, 2, 3, 0.5, 0, 0], dtype=float), np.eye(6))
    out = estimate_tick(est, 0.1, None, _cam(), DistanceSources(uwb=5.0), q, noise)
    ref = kf_predict(est, 0.1, q)
    np.testing.assert_allclose(out.mean, ref.mean, atol=1e-15)
    np.testing.assert_allclose(out.cov, ref.cov, atol=1e-15)


def test_estimate_tick_uses_priority_source_covariance():
    q = ProcessNoiseConfig()
    noise = MeasurementNoiseConfig()
    cam = _cam()
    est = HumanEstimate(np.zeros(6), np.eye(6))
    bbox = PixelBox(630, 350, 650, 370)
    out = estimate_tick(est, 0.1, bbox, cam, DistanceSources(uwb=9.0, apparent=11.0), q, noise)
    # manual composition with the UWB covariance
    pred = kf_predict(est, 0.1, q)
    d, cov, _ = select_distance(DistanceSources(uwb=9.0), cam, noise)
    z = build_measurement(cam, d, direction_from_bbox(cam, bbox))
    ref = kf_update(pred, Measurement(z, cov, "uwb"))
    np.testing.assert_allclose(out.mean, ref.mean, atol=1e-15)
    np.testing.assert_allclose(out.cov, ref.cov, atol=1e-15)


def test_estimate_tick_trace_matches_monolithic_oracle():
    rng = np.random.default_rng(15)
    q = ProcessNoiseConfig()
    noise = MeasurementNoiseConfig()
    cam = _cam(heading=0.4, pitch=-0.2, p=(1, 1, 2))
    est = None
    oracle = None
    dt = 0.1
    for k in range(200):
        u = rng.uniform(100, 1100)
        v = rng.uniform(100, 600)
        bbox = PixelBox(u - 20, v - 50, u + 20, v + 50) if rng.random() < 0.8 else None
        sources = DistanceSources(uwb=rng.uniform(5, 15) if rng.random() < 0.7 else None,
                                  apparent=rng.uniform(5, 15))
        est = estimate_tick(est, dt, bbox, cam, sources, q, noise)
        if est is not None and oracle is None:
            oracle = TextbookKF(est.mean, est.cov)  # both initialize identically
            continue
        if oracle is not None:
            oracle.predict(dt, q.matrix())
            if bbox is not None:
                d, cov, _ = select_distance(sources, cam, noise)
                z = build_measurement(cam, d, direction_from_bbox(cam, bbox))
                oracle.update(z, cov)
            np.testing.assert_allclose(est.mean, oracle.x, atol=1e-9)
            np.testing.assert_allclose(est.cov, oracle.P, atol=1e-9)


def test_estimator_converges_on_stationary_target():
    rng = np.random.default_rng(16)
    q = ProcessNoiseConfig()
    noise = MeasurementNoiseConfig()
    cam = _cam(p=(0, 0, 5))
    truth = np.array([8.0, 0.5, 1.0])
    est = None
    first_err = None
    for _ in range(100):
        direction = truth - cam.p
        d_true = np.linalg.norm(direction)
        pc = cam.rotation.T @ direction
        u = cam.intrinsics.cx + cam.intrinsics.focal * pc[0] / pc[2]
        v = cam.intrinsics.cy + cam.intrinsics.focal * pc[1] / pc[2]
        bbox = PixelBox(u - 10 + rng.normal(0, 1), v - 30 + rng.normal(0, 1),
                        u + 10 + rng.normal(0, 1), v + 30 + rng.normal(0, 1))
        sources = DistanceSources(uwb=float(d_true + rng.normal(0, 0.1)))
        est = estimate_tick(est, 0.1, bbox, cam, sources, q, noise)
        if first_err is None:
            first_err = np.linalg.norm(est.position - truth)
    final_err = np.linalg.norm(est.position - truth)
    assert final_err < max(first_err, 0.2)
    assert final_err < 0.25
