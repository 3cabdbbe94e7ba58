"""
Tests für Range-Bild-Projektion, zirkuläres Padding und die synthetische Welt.
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from rangeloop.models.pose import Pose
from rangeloop.models.range_image import PointCloud, RangeImage
from rangeloop.models.world import Primitive, PrimitiveKind, SyntheticWorld
from rangeloop.schemas.projection_schema import ProjectionParams
from rangeloop.schemas.world_schema import WorldSpec
from rangeloop.services.projection_service import (
    circular_extend, circular_padding, project_cloud, project_point, rotate_cloud_yaw, shift_columns,
)
from rangeloop.services.synthetic_service import (
    generate_world, pixel_directions, primitive_footprint, synth_scan, synth_sequence,
)

KITTI_LIKE = ProjectionParams.from_degrees(900, 64, 3.0, 25.0)


def _single_pose_world(primitives, ground_z=None) -> SyntheticWorld:
    return SyntheticWorld(primitives=primitives, ground_z=ground_z, trajectory=[Pose.identity()],
                          visits=[0], revisit_of=[None])


def _pixel_center_cloud(params: ProjectionParams, rng) -> PointCloud:
    ranges = rng.uniform(2.0, 30.0, size=(params.h, params.w)).astype(np.float32)
    ranges[rng.random(ranges.shape) < 0.2] = 0.0
    valid = ranges > 0
    return PointCloud(points=pixel_directions(params)[valid] * ranges[valid].astype(np.float64)[:, None])


class TestProjectPoint:
    def test_forward_point(self):
        assert project_point((1.0, 0.0, 0.0), KITTI_LIKE) == (450, 57, 1.0)

    def test_behind_sensor_wraps_to_first_column(self):
        u, _, _ = project_point((-1.0, 0.0, 0.0), KITTI_LIKE)
        assert u == 0

    def test_left_is_quarter_turn(self):
        u, _, r = project_point((0.0, 2.0, 0.0), KITTI_LIKE)
        assert (u, r) == (225, 2.0)

    def test_outside_vertical_fov(self):
        assert project_point((0.0, 0.0, 1.0), KITTI_LIKE) is None
        assert project_point((1.0, 0.0, -5.0), KITTI_LIKE) is None

    def test_below_min_range(self):
        params = ProjectionParams.from_degrees(900, 64, 3.0, 25.0, min_range=2.0)
        assert project_point((1.0, 0.0, 0.0), params) is None

    def test_origin_rejected(self):
        with pytest.raises(ValueError, match="origin"):
            project_point((0.0, 0.0, 0.0), KITTI_LIKE)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            project_point((float("nan"), 0.0, 0.0), KITTI_LIKE)


class TestProjectCloud:
    def test_single_point(self):
        image, stats = project_cloud(PointCloud(points=[[1.0, 0.0, 0.0]]), KITTI_LIKE)
        assert image.pixels.shape == (64, 900)
        assert image.pixels[57, 450] == 1.0
        assert image.valid_count == 1
        assert stats.projected == 1

    def test_nearest_point_wins(self):
        cloud = PointCloud(points=[[4.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, 0.0, 0.0]])
        image, _ = project_cloud(cloud, KITTI_LIKE)
        assert image.pixels[57, 450] == 2.0
        assert image.valid_count == 1

    def test_empty_cloud_gives_invalid_image(self):
        image, stats = project_cloud(PointCloud(points=np.zeros((0, 3))), KITTI_LIKE)
        assert image.valid_count == 0
        assert stats.total == 0

    def test_dropped_points_are_counted(self):
        cloud = PointCloud(points=[[1.0, 0.0, 0.0], [0.0, 0.0, 5.0], [1e-4, 0.0, 0.0]])
        _, stats = project_cloud(cloud, KITTI_LIKE)
        assert (stats.total, stats.projected, stats.outside_fov, stats.below_min_range) == (3, 1, 1, 1)

    def test_nan_point_rejected(self):
        with pytest.raises(ValidationError):
            PointCloud(points=[[np.nan, 0.0, 0.0]])

    def test_pixel_centers_roundtrip(self, rng):
        params = ProjectionParams.from_degrees(90, 16, 5.0, 15.0)
        cloud = _pixel_center_cloud(params, rng)
        image, stats = project_cloud(cloud, params)
        assert stats.projected == len(cloud)
        assert image.valid_count == len(cloud)

    @pytest.mark.parametrize("k", [1, 7, 45, 89])
    def test_yaw_rotation_shifts_columns(self, rng, k):
        params = ProjectionParams.from_degrees(90, 16, 5.0, 15.0)
        cloud = _pixel_center_cloud(params, rng)
        image, _ = project_cloud(cloud, params)
        rotated, _ = project_cloud(rotate_cloud_yaw(cloud, -k * 2.0 * math.pi / params.w), params)
        assert rotated == shift_columns(image, k)


class TestRangeImage:
    @pytest.mark.parametrize("k", [0, 90])
    def test_full_period_shift_is_identity(self, rng, k):
        params = ProjectionParams.from_degrees(90, 16, 5.0, 15.0)
        image = RangeImage(params=params, pixels=rng.uniform(0.0, 10.0, size=(16, 90)))
        assert shift_columns(image, k) == image

    def test_shift_and_back(self, rng):
        params = ProjectionParams.from_degrees(90, 16, 5.0, 15.0)
        image = RangeImage(params=params, pixels=rng.uniform(0.0, 10.0, size=(16, 90)))
        assert shift_columns(shift_columns(image, 13), -13) == image
        assert shift_columns(image, 13) != image

    def test_shape_must_match_params(self):
        with pytest.raises(ValidationError):
            RangeImage(params=KITTI_LIKE, pixels=np.zeros((4, 4)))

    def test_negative_range_rejected(self):
        params = ProjectionParams.from_degrees(4, 2, 5.0, 5.0)
        with pytest.raises(ValidationError):
            RangeImage(params=params, pixels=-np.ones((2, 4)))

    def test_zero_fov_rejected(self):
        with pytest.raises(ValidationError):
            ProjectionParams(w=4, h=2, f_up=0.0, f_down=0.0)


class TestCircularPadding:
    @pytest.mark.parametrize("w, k_w, s_w, expected", [
        (900, 3, 1, (1, 1)),
        (900, 5, 1, (2, 2)),
        (900, 4, 1, (1, 2)),
        (900, 1, 1, (0, 0)),
        (10, 5, 2, (1, 2)),
        (11, 5, 2, (2, 2)),
        (10, 1, 2, (0, 0)),
    ])
    def test_padding_widths(self, w, k_w, s_w, expected):
        assert circular_padding(w, k_w, s_w) == expected

    def test_extend_wraps_columns(self):
        pixels = np.array([[1.0, 2.0, 3.0, 4.0]])
        assert circular_extend(pixels, 3, 1).tolist() == [[4.0, 1.0, 2.0, 3.0, 4.0, 1.0]]

    def test_extend_keeps_rows(self, rng):
        pixels = rng.random((5, 12))
        extended = circular_extend(pixels, 5, 1)
        assert extended.shape == (5, 16)
        np.testing.assert_array_equal(extended[:, 2:-2], pixels)

    def test_invalid_kernel_rejected(self):
        with pytest.raises(ValueError):
            circular_padding(10, 0, 1)


class TestSyntheticWorld:
    def test_sphere_straight_ahead(self):
        params = ProjectionParams.from_degrees(91, 15, 10.0, 10.0)
        sphere = Primitive(kind=PrimitiveKind.SPHERE, center=(5.0, 0.0, 0.0), half_extents=(1.0, 1.0, 1.0))
        cloud, image = synth_scan(_single_pose_world([sphere]), Pose.identity(), params)
        assert image.pixels[7, 45] == 4.0
        assert image.valid_count == len(cloud)
        assert image.pixels[0, 0] == 0.0

    def test_cloud_reprojects_exactly(self, tiny_profile):
        world = generate_world(tiny_profile.world)
        for pose, visit in list(zip(world.trajectory, world.visits))[:4]:
            cloud, image = synth_scan(world, pose, tiny_profile.projection, visit)
            reprojected, _ = project_cloud(cloud, tiny_profile.projection)
            assert reprojected == image

    def test_generation_is_deterministic(self, tiny_profile):
        first = generate_world(tiny_profile.world)
        second = generate_world(tiny_profile.world)
        assert first == second
        _, images_a = synth_sequence(first, tiny_profile.projection)
        _, images_b = synth_sequence(second, tiny_profile.projection)
        assert all(a == b for a, b in zip(images_a, images_b))

    def test_seed_changes_world(self, tiny_profile):
        assert generate_world(tiny_profile.world) != generate_world(tiny_profile.world.model_copy(update={"seed": 1}))

    def test_revisits_reference_first_pass(self):
        world = generate_world(WorldSpec(static_count=3, movable_count=1, poses_per_loop=10, revisit_passes=1))
        assert world.visits == [0] * 10 + [1] * 10
        assert world.revisit_of == [None] * 10 + list(range(10))
        assert world.trajectory[3].distance_to(world.trajectory[13]) < 1e-9

    def test_movable_objects_alternate(self):
        world = generate_world(WorldSpec(static_count=2, movable_count=3, poses_per_loop=6, revisit_passes=2))
        for primitive in world.movable:
            assert primitive.presence[0] != primitive.presence[1]
            assert primitive.presence[1] != primitive.presence[2]

    def test_movable_object_changes_scan(self):
        params = ProjectionParams.from_degrees(90, 16, 5.0, 15.0)
        car = Primitive(kind=PrimitiveKind.BOX, center=(4.0, 0.0, 0.0), half_extents=(1.0, 1.0, 1.0),
                        movable=True, presence=[True, False])
        world = _single_pose_world([car], ground_z=-1.7)
        _, present = synth_scan(world, Pose.identity(), params, visit_index=0)
        _, absent = synth_scan(world, Pose.identity(), params, visit_index=1)
        assert present.valid_count > 0
        assert present != absent
        assert primitive_footprint(world, 0, Pose.identity(), params).any()
        changed = present.pixels != absent.pixels
        assert not np.any(changed & ~primitive_footprint(world, 0, Pose.identity(), params))

    def test_empty_world_is_all_invalid(self):
        params = ProjectionParams.from_degrees(90, 16, 5.0, 15.0)
        cloud, image = synth_scan(_single_pose_world([]), Pose.identity(), params)
        assert image.valid_count == 0
        assert len(cloud) == 0

    def test_ground_plane_only(self):
        params = ProjectionParams.from_degrees(90, 16, 15.0, 5.0)
        _, image = synth_scan(_single_pose_world([], ground_z=-1.7), Pose.identity(), params)
        # nur Strahlen unter dem Horizont treffen den Boden
        assert image.valid_count > 0
        assert not image.pixels[0].any()

    def test_max_range_drops_far_hits(self):
        params = ProjectionParams.from_degrees(91, 15, 10.0, 10.0)
        sphere = Primitive(kind=PrimitiveKind.SPHERE, center=(50.0, 0.0, 0.0), half_extents=(1.0, 1.0, 1.0))
        world = SyntheticWorld(primitives=[sphere], max_range=20.0, trajectory=[Pose.identity()],
                               visits=[0], revisit_of=[None])
        _, image = synth_scan(world, Pose.identity(), params)
        assert image.valid_count == 0

    def test_impossible_placement_rejected(self):
        with pytest.raises(ValueError, match="cannot place"):
            generate_world(WorldSpec(static_count=1, movable_count=0, extent=1.0, loop_radius=8.0, clearance=5.0))

    def test_invalid_primitive_rejected(self):
        with pytest.raises(ValidationError):
            Primitive(kind=PrimitiveKind.SPHERE, center=(0.0, 0.0, 0.0), half_extents=(0.0, 0.0, 0.0))
