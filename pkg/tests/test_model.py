import math

import numpy as np
import pytest

from flatcam3d import (
    AngularGrid,
    CameraGeometry,
    CameraPose,
    MaskSpec,
    ValidationError,
    adjoint,
    build_operator,
    build_phi_1d,
    build_phi_posed,
    collapse_intensity,
    densify,
    effective_view,
    forward,
    generate_mask,
    is_structured,
    sample_depth_planes,
    unvec_volume,
    vec_images,
    vec_volume,
    volume_from_depth_intensity,
    volume_to_depth_intensity,
)


def pinhole(pitch):
    return MaskSpec(bits=[1], pitch=pitch, offset=-pitch / 2)


class TestBuildPhi1d:
    def test_pinhole_shadow_on_axis(self):
        cam = CameraGeometry(n_sensor=64, sensor_pitch=0.01, mask_distance=1.0)
        depth = 2.0
        mask = pinhole(0.1)
        phi = build_phi_1d(cam, mask, depth, np.array([0.0]))
        s = cam.pixel_coords()
        expected = (np.abs((1 - 1.0 / depth) * s) < 0.05).astype(float)
        assert np.array_equal(phi[:, 0], expected)

    def test_all_transparent_mask_gives_ones(self):
        cam = CameraGeometry(n_sensor=8, sensor_pitch=0.02, mask_distance=1.0)
        mask = MaskSpec(bits=np.ones(1000, dtype=np.uint8), pitch=1.0, offset=-500.0)
        grid = AngularGrid(6, -0.3, 0.3)
        phi = build_phi_1d(cam, mask, 40.0, grid)
        assert (phi == 1.0).all()

    def test_entries_binary_and_row_sums(self):
        cam = CameraGeometry(n_sensor=16, sensor_pitch=0.05, mask_distance=1.0)
        mask = generate_mask(256, 0.013, seed=2)
        grid = AngularGrid(8, -0.3, 0.3)
        phi = build_phi_1d(cam, mask, 100.0, grid)
        assert set(np.unique(phi)) <= {0.0, 1.0}
        assert phi.sum(axis=1).max() <= grid.n_angles

    def test_shift_property(self):
        # with d*(sin t_{j+1} - sin t_j) = (1 - d/D) * sensor_pitch, column
        # j+1 is column j shifted down by one pixel on interior rows
        d, depth = 1.0, 5.0
        cam = CameraGeometry(n_sensor=16, sensor_pitch=0.25, mask_distance=d)
        step = (1 - d / depth) * cam.sensor_pitch  # 0.2
        angles = np.arcsin(np.arange(-3, 4) * step / d)
        mask = generate_mask(257, 0.0173, seed=5)
        phi = build_phi_1d(cam, mask, depth, angles)
        assert np.array_equal(phi[:-1, 1:], phi[1:, :-1])

    def test_depth_below_mask_rejected(self):
        cam = CameraGeometry(n_sensor=4, sensor_pitch=0.1, mask_distance=1.0)
        with pytest.raises(ValidationError):
            build_phi_1d(cam, pinhole(0.1), 0.5, np.array([0.0]))

    def test_shadow_width_scales_with_magnification(self):
        # pinhole shadow width is proportional to 1/(1 - d/D)
        cam = CameraGeometry(n_sensor=256, sensor_pitch=0.01, mask_distance=1.0)
        mask = pinhole(0.1)
        widths = {}
        for depth in (2.0, 1.25):
            col = build_phi_1d(cam, mask, depth, np.array([0.0]))[:, 0]
            widths[depth] = col.sum()
        predicted = widths[2.0] * (1 - 1.0 / 2.0) / (1 - 1.0 / 1.25)
        assert abs(widths[1.25] - predicted) <= 1.0

    def test_matches_pointwise_definition(self, small_op, small_config):
        cfg = small_config
        cam = cfg.camera()
        mask = cfg.mask_spec()
        grid = cfg.angular_grid()
        depth = float(small_op.depths.depths[1])
        phi = build_phi_1d(cam, mask, depth, grid)
        s = cam.pixel_coords()
        theta = grid.angles()
        from flatcam3d import mask_transparency

        for i in (0, 7, 15):
            for j in (0, 3, 7):
                u = (1 - cam.mask_distance / depth) * s[i] + cam.mask_distance * math.sin(theta[j])
                assert phi[i, j] == mask_transparency(mask, u)


class TestBuildPhiPosed:
    def test_identity_pose_matches_1d(self, small_config):
        cfg = small_config
        cam, mask, grid = cfg.camera(), cfg.mask_spec(), cfg.angular_grid()
        a = build_phi_posed(cam, CameraPose(), mask, 500.0, grid)
        b = build_phi_1d(cam, mask, 500.0, grid)
        assert np.array_equal(a, b)

    def test_yawed_pinhole_shadow_position(self):
        d = 1.0
        cam = CameraGeometry(n_sensor=256, sensor_pitch=0.02, mask_distance=d)
        mask = pinhole(0.2)
        pose = CameraPose(yaw=0.15)
        depth = 50.0
        phi = build_phi_posed(cam, pose, mask, depth, np.array([0.0]))
        theta_c, z_c = effective_view(pose, 0.0, depth, d)
        s = cam.pixel_coords()
        expected = (np.abs((1 - d / z_c) * s + d * math.sin(theta_c)) < 0.1).astype(float)
        assert np.array_equal(phi[:, 0], expected)
        center = -d * math.sin(theta_c) / (1 - d / z_c)
        assert abs(s[phi[:, 0] > 0].mean() - center) < cam.sensor_pitch

    def test_behind_mask_angle_rejected(self):
        cam = CameraGeometry(n_sensor=8, sensor_pitch=0.1, mask_distance=1.0)
        pose = CameraPose(yaw=0.0, translation=(0.0, 499.0))
        with pytest.raises(ValidationError):
            build_phi_posed(cam, pose, pinhole(0.1), 500.0, np.array([0.0]))


class TestOperator:
    def test_reference_camera_shares_axes(self, small_op):
        assert small_op.phi_x[0][0] is small_op.phi_y[0][0]

    def test_single_camera_single_depth_reduces_to_planar(self, small_config):
        cfg = small_config
        planes = cfg.depth_planes(1)
        op = cfg.build_rig_operator(n_cameras=1, depths=planes)
        phi = op.phi_x[0][0]
        rng = np.random.default_rng(0)
        image = rng.random((8, 8))
        vol = image[:, :, None]
        out = forward(op, vol)
        assert len(out) == 1
        assert np.allclose(out[0], phi @ image @ phi.T, rtol=0, atol=1e-12)

    def test_three_camera_rig_produces_three_images(self, small_config):
        op = small_config.build_rig_operator(n_cameras=3)
        vol = np.zeros(op.volume_shape)
        assert len(forward(op, vol)) == 3
        yaws = [pose.yaw for _, pose in op.cameras]
        assert yaws == pytest.approx([-math.radians(20), 0.0, math.radians(20)])

    def test_needs_a_camera(self, small_config):
        cfg = small_config
        with pytest.raises(ValidationError):
            build_operator([], cfg.mask_spec(), cfg.depth_planes(), cfg.angular_grid())


class TestForwardAdjoint:
    def test_zero_volume(self, small_op_2cam):
        images = forward(small_op_2cam, np.zeros(small_op_2cam.volume_shape))
        assert all((im == 0).all() for im in images)

    def test_rank_one_response(self, small_op_2cam):
        op = small_op_2cam
        vol = np.zeros(op.volume_shape)
        x0, y0, k0, v = 2, 5, 1, 0.7
        vol[x0, y0, k0] = v
        for c, image in enumerate(forward(op, vol)):
            expected = v * np.outer(op.phi_x[c][k0][:, x0], op.phi_y[c][k0][:, y0])
            assert np.allclose(image, expected, rtol=0, atol=1e-14)

    def test_linearity(self, small_op, rng):
        op = small_op
        a = rng.random(op.volume_shape)
        b = rng.random(op.volume_shape)
        lhs = forward(op, 2.5 * a - 0.5 * b)
        rhs = [2.5 * x - 0.5 * y for x, y in zip(forward(op, a), forward(op, b))]
        for x, y in zip(lhs, rhs):
            assert np.allclose(x, y, rtol=1e-12, atol=1e-12 * np.abs(y).max())

    def test_zero_images(self, small_op_2cam):
        op = small_op_2cam
        m = op.sensor_pixels(0)
        vol = adjoint(op, [np.zeros((m, m)) for _ in range(2)])
        assert (vol == 0).all()

    def test_adjoint_identity(self, small_op_2cam, rng):
        op = small_op_2cam
        m = op.sensor_pixels(0)
        for _ in range(25):
            vol = rng.standard_normal(op.volume_shape)
            images = [rng.standard_normal((m, m)) for _ in range(2)]
            fx = forward(op, vol)
            aty = adjoint(op, images)
            lhs = sum(float(np.vdot(a, b)) for a, b in zip(fx, images))
            rhs = float(np.vdot(vol, aty))
            scale = abs(lhs) + abs(rhs) + 1e-30
            assert abs(lhs - rhs) <= 1e-10 * scale

    def test_dimension_mismatch(self, small_op):
        with pytest.raises(ValidationError):
            forward(small_op, np.zeros((4, 4, 3)))
        with pytest.raises(ValidationError):
            adjoint(small_op, [np.zeros((3, 3))])
        with pytest.raises(ValidationError):
            adjoint(small_op, [])


class TestDensify:
    def test_kron_identity_single_plane(self, small_config):
        op = small_config.build_rig_operator(n_cameras=1, depths=small_config.depth_planes(1))
        a = densify(op)
        assert np.array_equal(a, np.kron(op.phi_y[0][0], op.phi_x[0][0]))

    def test_forward_agreement(self, small_op_2cam, rng):
        op = small_op_2cam
        a = densify(op)
        for _ in range(20):
            vol = rng.random(op.volume_shape)
            assert np.abs(a @ vec_volume(vol) - vec_images(forward(op, vol))).max() <= 1e-12

    def test_adjoint_agreement(self, small_op_2cam, rng):
        op = small_op_2cam
        a = densify(op)
        m = op.sensor_pixels(0)
        for _ in range(20):
            images = [rng.random((m, m)) for _ in range(2)]
            direct = vec_volume(adjoint(op, images))
            assert np.abs(a.T @ vec_images(images) - direct).max() <= 1e-12

    def test_size_guard(self, small_op):
        with pytest.raises(ValidationError):
            densify(small_op, max_entries=10)

    def test_vec_round_trip(self, rng):
        vol = rng.random((4, 5, 3))
        assert np.array_equal(unvec_volume(vec_volume(vol), vol.shape), vol)


class TestVolumeHelpers:
    def test_structured_round_trip(self, rng):
        depth_map = rng.integers(0, 4, size=(6, 6))
        intensity = rng.random((6, 6))
        vol = volume_from_depth_intensity(depth_map, intensity, 4)
        assert is_structured(vol)
        dm, inten = volume_to_depth_intensity(vol)
        assert np.array_equal(inten, intensity)
        nz = intensity != 0
        assert np.array_equal(dm[nz], depth_map[nz])

    def test_multi_depth_pixel_rejected(self):
        vol = np.zeros((2, 2, 3))
        vol[0, 0, 0] = 1.0
        vol[0, 0, 2] = 1.0
        assert not is_structured(vol)
        with pytest.raises(ValidationError):
            volume_to_depth_intensity(vol)

    def test_collapse(self):
        vol = np.zeros((2, 2, 2))
        vol[0, 0, 0] = 1.5
        vol[1, 1, 1] = 2.0
        assert collapse_intensity(vol).tolist() == [[1.5, 0.0], [0.0, 2.0]]

    def test_depth_index_range_checked(self):
        with pytest.raises(ValidationError):
            volume_from_depth_intensity(np.array([[5]]), np.array([[1.0]]), 3)
