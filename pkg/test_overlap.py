"""
Tests für Reprojektion, Overlap-Maß und das Labeling von Sequenzen.
"""
import math

import numpy as np
import pytest

from rangeloop.models.pose import Pose
from rangeloop.models.range_image import PointCloud
from rangeloop.schemas.projection_schema import ProjectionParams
from rangeloop.schemas.world_schema import WorldSpec
from rangeloop.services.overlap_service import (
    is_loop_closure, label_lookup, label_sequence, overlap, reproject,
)
from rangeloop.services.projection_service import project_cloud, shift_columns
from rangeloop.services.synthetic_service import generate_world, pixel_directions, synth_sequence

PARAMS = ProjectionParams.from_degrees(90, 16, 5.0, 15.0)


def _brute_force_overlap(a: np.ndarray, b: np.ndarray, delta: float) -> float:
    hits = count_a = count_b = 0
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            count_a += a[i, j] > 0
            count_b += b[i, j] > 0
            if a[i, j] > 0 and b[i, j] > 0 and abs(float(a[i, j]) - float(b[i, j])) <= delta:
                hits += 1
    return hits / min(count_a, count_b)


@pytest.fixture
def center_cloud(rng):
    ranges = rng.uniform(2.0, 30.0, size=(PARAMS.h, PARAMS.w)).astype(np.float32)
    ranges[rng.random(ranges.shape) < 0.2] = 0.0
    valid = ranges > 0
    return PointCloud(points=pixel_directions(PARAMS)[valid] * ranges[valid].astype(np.float64)[:, None])


class TestReproject:
    def test_identical_poses(self, center_cloud):
        pose = Pose.from_yaw(0.4, (3.0, -2.0, 0.0))
        expected, _ = project_cloud(center_cloud, PARAMS)
        assert reproject(center_cloud, pose, pose, PARAMS) == expected

    def test_yaw_offset_shifts_columns(self, center_cloud):
        image, _ = project_cloud(center_cloud, PARAMS)
        pose_r = Pose.from_yaw(-2.0 * math.pi / PARAMS.w)
        assert reproject(center_cloud, Pose.identity(), pose_r, PARAMS) == shift_columns(image, 1)

    def test_far_translation_leaves_nothing_in_common(self, center_cloud):
        image, _ = project_cloud(center_cloud, PARAMS)
        far = reproject(center_cloud, Pose.identity(), Pose.from_yaw(0.0, (0.0, 0.0, 1000.0)), PARAMS)
        assert not np.any(far.valid_mask & image.valid_mask)


class TestOverlap:
    def test_identical_images(self, rng):
        a = rng.uniform(1.0, 5.0, size=(4, 8))
        assert overlap(a, a) == 1.0

    def test_disjoint_masks(self):
        a = np.zeros((4, 8))
        b = np.zeros((4, 8))
        a[:, :4] = 2.0
        b[:, 4:] = 2.0
        assert overlap(a, b) == 0.0

    def test_matches_brute_force(self, rng):
        for _ in range(200):
            a = rng.uniform(0.0, 4.0, size=(4, 8)) * (rng.random((4, 8)) > 0.3)
            b = rng.uniform(0.0, 4.0, size=(4, 8)) * (rng.random((4, 8)) > 0.3)
            if not (a > 0).any() or not (b > 0).any():
                continue
            assert overlap(a, b, 1.0) == _brute_force_overlap(a, b, 1.0)

    def test_delta_boundary_is_inclusive(self):
        a = np.full((1, 2), 2.0)
        b = np.array([[3.0, 3.5]])
        assert overlap(a, b, 1.0) == 0.5

    def test_denominator_is_smaller_valid_count(self):
        a = np.array([[1.0, 1.0, 1.0, 1.0]])
        b = np.array([[1.0, 0.0, 0.0, 0.0]])
        assert overlap(a, b) == 1.0

    def test_one_invalid_image_gives_zero(self):
        assert overlap(np.ones((2, 3)), np.zeros((2, 3))) == 0.0

    def test_both_invalid_rejected(self):
        with pytest.raises(ValueError, match="both images"):
            overlap(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="equal size"):
            overlap(np.ones((2, 3)), np.ones((3, 2)))

    def test_loop_threshold_is_strict(self):
        assert is_loop_closure(0.31)
        assert not is_loop_closure(0.3)


class TestLabelSequence:
    def test_single_scan(self, center_cloud):
        labels = label_sequence([center_cloud], [Pose.identity()], PARAMS)
        assert [(l.query_id, l.reference_id, l.overlap) for l in labels] == [(0, 0, 1.0)]

    def test_distant_scans_get_no_pair_label(self, center_cloud):
        poses = [Pose.identity(), Pose.from_yaw(0.0, (500.0, 0.0, 0.0))]
        labels = label_sequence([center_cloud, center_cloud], poses, PARAMS, gate_radius=50.0)
        assert sorted((l.query_id, l.reference_id) for l in labels) == [(0, 0), (1, 1)]

    def test_length_mismatch_rejected(self, center_cloud):
        with pytest.raises(ValueError):
            label_sequence([center_cloud], [Pose.identity(), Pose.identity()], PARAMS)

    def test_matches_direct_overlap(self):
        world = generate_world(WorldSpec(static_count=4, movable_count=1, poses_per_loop=6, revisit_passes=1))
        scans, images = synth_sequence(world, PARAMS)
        labels = label_sequence(scans, world.trajectory, PARAMS, workers=2)
        lookup = label_lookup(labels)
        assert len(lookup) == len(labels)
        for (i, j), value in lookup.items():
            if i == j:
                assert value == 1.0
                continue
            expected = overlap(images[i], reproject(scans[j], world.trajectory[i], world.trajectory[j], PARAMS))
            assert value == expected

    def test_static_revisit_overlap_is_high(self):
        world = generate_world(WorldSpec(static_count=8, movable_count=0, poses_per_loop=6, revisit_passes=1))
        scans, _ = synth_sequence(world, PARAMS)
        lookup = label_lookup(label_sequence(scans, world.trajectory, PARAMS))
        for revisit, first in enumerate(world.revisit_of):
            if first is not None:
                assert lookup[(revisit, first)] > 0.99

    def test_threads_give_identical_labels(self):
        world = generate_world(WorldSpec(static_count=3, movable_count=1, poses_per_loop=5))
        scans, _ = synth_sequence(world, PARAMS)
        single = label_sequence(scans, world.trajectory, PARAMS, workers=1)
        threaded = label_sequence(scans, world.trajectory, PARAMS, workers=3)
        assert single == threaded
