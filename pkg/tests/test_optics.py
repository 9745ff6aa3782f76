import math

import numpy as np
import pytest

from flatcam3d import (
    AngularGrid,
    CameraGeometry,
    CameraPose,
    DepthPlaneSet,
    MaskSpec,
    ValidationError,
    effective_view,
    generate_mask,
    lightfield_slope,
    mask_transparency,
    sample_depth_planes,
)
from flatcam3d.optics import _bernoulli_bits


class TestMaskTransparency:
    def test_outside_extent_is_opaque(self):
        mask = MaskSpec(bits=[1, 1, 1], pitch=0.25, offset=0.0)
        assert mask_transparency(mask, -0.01) == 0
        assert mask_transparency(mask, 0.75) == 0  # right edge excluded
        assert mask_transparency(mask, 0.74) == 1
        assert mask_transparency(mask, 1e6) == 0

    def test_feature_centers(self):
        bits = [1, 0, 1, 1, 0]
        mask = MaskSpec(bits=bits, pitch=0.2, offset=-0.3)
        for i, b in enumerate(bits):
            u = mask.offset + (i + 0.5) * mask.pitch
            assert mask_transparency(mask, u) == b

    def test_index_formula(self):
        # floor((0.05 + 0.2) / 0.1) = 2
        mask = MaskSpec(bits=[1, 0, 1, 1], pitch=0.1, offset=-0.2)
        assert mask_transparency(mask, 0.05) == 1

    def test_array_input(self):
        mask = MaskSpec(bits=[1, 0], pitch=1.0, offset=0.0)
        got = mask_transparency(mask, np.array([-0.5, 0.5, 1.5, 2.5]))
        assert got.tolist() == [0, 1, 0, 0]

    def test_piecewise_constant_with_breaks_at_boundaries(self):
        mask = MaskSpec(bits=[1, 0, 1], pitch=0.5, offset=-0.75)
        eps = 1e-9
        for boundary in (-0.75, -0.25, 0.25, 0.75):
            left = mask_transparency(mask, boundary - eps)
            right = mask_transparency(mask, boundary + eps)
            inside_left = mask_transparency(mask, boundary - 0.2)
            assert left == inside_left  # constant within a feature
            assert (left, right) != (None, None)

    def test_transparency_integral_counts_open_features(self):
        mask = generate_mask(32, 0.125, seed=9)
        u = np.linspace(mask.offset - 0.5, mask.offset + mask.extent + 0.5, 200001)
        integral = np.trapezoid(mask_transparency(mask, u).astype(float), u)
        assert integral == pytest.approx(mask.bits.sum() * mask.pitch, rel=1e-3)


class TestGenerateMask:
    def test_single_feature_pinhole(self):
        mask = generate_mask(1, 0.3, seed=4)
        assert mask.n_features == 1
        assert mask.offset == -0.15
        if mask.bits[0] == 1:
            assert mask_transparency(mask, 0.0) == 1

    def test_symmetric_even_and_odd(self):
        for n in (4, 5, 9, 16):
            mask = generate_mask(n, 0.1, seed=3, symmetric=True)
            assert mask.bits.tolist() == mask.bits.tolist()[::-1]

    def test_deterministic(self):
        a = generate_mask(64, 0.05, seed=11)
        b = generate_mask(64, 0.05, seed=11)
        assert np.array_equal(a.bits, b.bits)
        assert (a.pitch, a.offset, a.seed, a.symmetric) == (b.pitch, b.offset, b.seed, b.symmetric)

    def test_frozen_generator_regression(self):
        # frozen splitmix64-seeded xorshift64* stream; a change here breaks
        # every mask file ever written
        assert "".join(map(str, _bernoulli_bits(1, 16))) == "0100100110001000"
        assert "".join(map(str, _bernoulli_bits(2, 16))) == "1010011000101000"
        assert generate_mask(8, 0.1, seed=12345).bits.tolist() == [0, 0, 0, 1, 1, 0, 1, 0]

    def test_bits_are_fair(self):
        bits = _bernoulli_bits(7, 4096)
        assert 0.45 < bits.mean() < 0.55

    def test_centered_offset(self):
        mask = generate_mask(10, 0.2, seed=0)
        assert mask.offset == pytest.approx(-1.0)

    def test_invalid_feature_count(self):
        with pytest.raises(ValidationError):
            generate_mask(0, 0.1, seed=1)


class TestLightfieldSlope:
    def test_paper_values(self):
        assert lightfield_slope(1.0, 100.0) == pytest.approx(0.01, rel=1e-15)
        assert lightfield_slope(1.0, 3000.0) == pytest.approx(1.0 / 3000.0, rel=1e-15)

    def test_collimated_limit(self):
        assert lightfield_slope(1.0, 1e15) < 1e-14

    def test_domain_errors(self):
        with pytest.raises(ValidationError):
            lightfield_slope(1.0, 1.0)
        with pytest.raises(ValidationError):
            lightfield_slope(1.0, 0.5)
        with pytest.raises(ValidationError):
            lightfield_slope(-1.0, 10.0)


class TestSampleDepthPlanes:
    def test_endpoints_exact(self):
        planes = sample_depth_planes(1.0, 100.0, 3000.0, 10)
        assert planes.depths[0] == 3000.0
        assert planes.depths[-1] == 100.0

    def test_second_plane_value(self):
        # q2 = 1/3000 + (1/100 - 1/3000)/9 = 19/13500
        planes = sample_depth_planes(1.0, 100.0, 3000.0, 10)
        assert planes.depths[1] == pytest.approx(13500.0 / 19.0, rel=1e-12)

    def test_uniform_slopes(self):
        planes = sample_depth_planes(1.0, 100.0, 3000.0, 10)
        dq = np.diff(planes.slopes())
        assert np.abs(dq - dq[0]).max() <= 1e-12 * (planes.slopes()[-1] - planes.slopes()[0])

    def test_gaps_shrink_toward_camera(self):
        planes = sample_depth_planes(1.0, 100.0, 3000.0, 10)
        gaps = -np.diff(planes.depths)
        assert (np.diff(gaps) < 0).all()

    def test_single_plane(self):
        planes = sample_depth_planes(1.0, 100.0, 3000.0, 1)
        assert planes.depths.tolist() == [3000.0]

    def test_preconditions(self):
        with pytest.raises(ValidationError):
            sample_depth_planes(1.0, 100.0, 3000.0, 0)
        with pytest.raises(ValidationError):
            sample_depth_planes(1.0, 3000.0, 100.0, 5)
        with pytest.raises(ValidationError):
            sample_depth_planes(200.0, 100.0, 3000.0, 5)


class TestEffectiveView:
    def test_identity_pose(self):
        theta, z = effective_view(CameraPose(), 0.21, 320.0)
        assert theta == pytest.approx(0.21, rel=1e-13)
        assert z == pytest.approx(320.0, rel=1e-13)

    def test_pure_yaw_on_axis(self):
        phi = 0.3
        theta, z = effective_view(CameraPose(yaw=phi), 0.0, 50.0)
        assert theta == pytest.approx(-phi, abs=1e-12)
        assert z == pytest.approx(50.0 * math.cos(phi), rel=1e-12)

    def test_translation_and_yaw(self):
        pose = CameraPose(yaw=0.2, translation=(3.0, 10.0))
        theta, z = effective_view(pose, 0.1, 50.0)
        assert theta == pytest.approx(-0.1496243161442784, abs=1e-12)
        assert z == pytest.approx(39.603326229202395, rel=1e-12)

    def test_behind_mask_rejected(self):
        pose = CameraPose()
        with pytest.raises(ValidationError):
            effective_view(pose, 0.0, 1.0, mask_distance=2.0)  # z' = d/2


class TestTypes:
    def test_mask_spec_validation(self):
        with pytest.raises(ValidationError):
            MaskSpec(bits=[0, 2], pitch=0.1, offset=0.0)
        with pytest.raises(ValidationError):
            MaskSpec(bits=[1], pitch=0.0, offset=0.0)
        with pytest.raises(ValidationError):
            MaskSpec(bits=[], pitch=0.1, offset=0.0)

    def test_mask_bits_immutable(self):
        mask = generate_mask(4, 0.1, seed=1)
        with pytest.raises(ValueError):
            mask.bits[0] = 0

    def test_camera_geometry_validation(self):
        with pytest.raises(ValidationError):
            CameraGeometry(0, 0.1, 1.0)
        with pytest.raises(ValidationError):
            CameraGeometry(4, -0.1, 1.0)
        with pytest.raises(ValidationError):
            CameraGeometry(4, 0.1, 0.0)

    def test_pixel_coords_centering(self):
        cam = CameraGeometry(4, 0.5, 1.0)
        assert cam.pixel_coords().tolist() == [-0.75, -0.25, 0.25, 0.75]
        assert cam.pixel_coords().sum() == 0.0

    def test_camera_pose_validation(self):
        with pytest.raises(ValidationError):
            CameraPose(yaw=math.pi / 2)
        assert CameraPose().is_identity
        assert not CameraPose(yaw=0.1).is_identity

    def test_angular_grid(self):
        grid = AngularGrid(5, -0.2, 0.2)
        assert grid.angles().tolist() == pytest.approx([-0.2, -0.1, 0.0, 0.1, 0.2])
        with pytest.raises(ValidationError):
            AngularGrid(1, -0.2, 0.2)
        with pytest.raises(ValidationError):
            AngularGrid(5, 0.2, -0.2)

    def test_depth_plane_set_validation(self):
        with pytest.raises(ValidationError):
            DepthPlaneSet(np.array([100.0, 300.0]), 1.0)  # increasing
        with pytest.raises(ValidationError):
            DepthPlaneSet(np.array([3.0, 0.5]), 1.0)  # below mask plane
        with pytest.raises(ValidationError):
            DepthPlaneSet(np.array([300.0, 200.0, 100.0]), 1.0)  # non-uniform slopes
        planes = sample_depth_planes(1.0, 50.0, 500.0, 7)
        assert len(planes) == 7
