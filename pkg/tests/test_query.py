import json
import os

import numpy as np
import pytest

from app.errors import ValidationError
from app.models import ClothType, LossWeights, MappedClothPoints, QueryBox
from app.supervision.query import (
    a_pose,
    build_query_sets,
    cloth_query_box,
    cloth_query_boxes,
    grid_points,
    select_query_points,
)

from conftest import FIXTURES


@pytest.fixture(scope="module")
def expected_boxes():
    with open(os.path.join(FIXTURES, "query_boxes.json"), "r", encoding="utf-8") as f:
        return json.load(f)


def _check(box, expected):
    assert len(expected) == 6
    for got, want in zip(box.corners, expected):
        assert got == pytest.approx(want, abs=1e-9)


@pytest.mark.parametrize("cloth", [ClothType.UPPER, ClothType.COAT, ClothType.PANTS, ClothType.SKIRT])
def test_garment_boxes(tpose, expected_boxes, cloth):
    box = cloth_query_box(tpose, cloth, abduction_deg=expected_boxes["abduction_deg"])
    _check(box, expected_boxes[cloth.value])
    assert box.side is None


def test_upper_box_depth_follows_body_extent(tpose):
    box = cloth_query_box(tpose, ClothType.UPPER)
    depth = tpose.z_max - tpose.z_min
    assert box.lo[2] == pytest.approx(tpose.z_min - 0.25 * depth)
    assert box.hi[2] == pytest.approx(tpose.z_max + 0.25 * depth)


def test_body_depth_extent(tpose):
    assert tpose.z_min == pytest.approx(-0.1, abs=1e-12)
    assert tpose.z_max == pytest.approx(1.78 / 13.0, abs=1e-12)


@pytest.mark.parametrize("cloth", [ClothType.PANTS, ClothType.SKIRT])
def test_lower_boxes_pad_body_depth(tpose, cloth):
    box = cloth_query_box(tpose, cloth)
    depth = tpose.z_max - tpose.z_min
    assert box.lo[2] == pytest.approx(tpose.z_min - 0.25 * depth)
    assert box.hi[2] == pytest.approx(tpose.z_max + 0.25 * depth)
    assert box.lo[2] == pytest.approx(cloth_query_box(tpose, ClothType.UPPER).lo[2])


@pytest.mark.parametrize("side", ["left", "right"])
def test_shoe_boxes(tpose, expected_boxes, side):
    box = cloth_query_box(tpose, ClothType.SHOES, side)
    _check(box, expected_boxes[f"shoes_{side}"])
    assert box.side == side


def test_shoe_boxes_mirror(tpose):
    left, right = cloth_query_boxes(tpose, ClothType.SHOES)
    assert (left.side, right.side) == ("left", "right")
    assert left.lo[0] == pytest.approx(-right.hi[0])
    assert left.hi[0] == pytest.approx(-right.lo[0])
    assert np.allclose(left.corners[[1, 2, 4, 5]], right.corners[[1, 2, 4, 5]])


def test_shoe_box_needs_side(tpose):
    with pytest.raises(ValidationError):
        cloth_query_box(tpose, ClothType.SHOES)


def test_a_pose_spreads_the_hips(tpose):
    body_model = tpose.model
    theta = a_pose(tpose, 10.0).theta
    assert theta[body_model.joint("L_hip")][2] == pytest.approx(np.deg2rad(10.0))
    assert theta[body_model.joint("R_hip")][2] == pytest.approx(-np.deg2rad(10.0))
    assert np.count_nonzero(theta) == 2


def test_grid_points_include_both_corners():
    box = QueryBox(ClothType.UPPER, [0.0, -1.0, 2.0, 1.0, 1.0, 3.0])
    points = grid_points(box, 5)
    assert points.shape == (125, 3)
    assert np.array_equal(points[0], box.lo)
    assert np.array_equal(points[-1], box.hi)
    # x slowest, z fastest
    assert np.array_equal(points[1], [0.0, -1.0, 2.25])
    assert np.array_equal(points[25], [0.25, -1.0, 2.0])
    with pytest.raises(ValidationError):
        grid_points(box, 1)


def _mapped(positions, labels):
    positions = np.asarray(positions, dtype=np.float64)
    n = len(positions)
    return MappedClothPoints(positions, np.asarray(labels), np.zeros((n, 2), dtype=np.int64),
                             np.zeros(n, dtype=np.int64), np.full((n, 3), 1.0 / 3.0))


UNIT = QueryBox(ClothType.UPPER, [0.0, 0.0, 0.0, 1.0, 1.0, 1.0])


def test_selection_keeps_points_within_tau():
    mapped = _mapped([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]], [ClothType.UPPER.label, ClothType.PANTS.label])
    qs = select_query_points(UNIT, mapped, tau=0.3, resolution=5)
    # each corner keeps itself and its three axis neighbours at 0.25
    assert len(qs) == 8
    assert int(qs.membership.sum()) == 4
    assert np.all(np.linalg.norm(qs.points[qs.membership == 1.0], axis=1) <= 0.3)


def test_selection_ties_go_to_lowest_mapped_index():
    mapped = _mapped([[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]], [ClothType.PANTS.label, ClothType.UPPER.label])
    qs = select_query_points(UNIT, mapped, tau=0.3, resolution=5)
    hit = np.all(qs.points == [0.25, 0.0, 0.0], axis=1)
    assert hit.sum() == 1
    assert qs.labels[hit][0] == ClothType.PANTS.label


def test_selection_edge_cases():
    assert len(select_query_points(UNIT, MappedClothPoints.empty(), tau=0.3)) == 0
    far = _mapped([[5.0, 5.0, 5.0]], [ClothType.UPPER.label])
    assert len(select_query_points(UNIT, far, tau=0.3)) == 0
    with pytest.raises(ValidationError):
        select_query_points(UNIT, far, tau=-0.1)


def test_query_sets_for_every_garment(tpose):
    corner = cloth_query_box(tpose, ClothType.UPPER).lo
    mapped = _mapped([corner], [ClothType.UPPER.label])
    sets = build_query_sets(tpose, mapped, LossWeights(), resolution=9)
    assert set(sets) == set(ClothType)
    assert len(sets[ClothType.UPPER]) > 0
    assert np.all(sets[ClothType.UPPER].membership == 1.0)
    # coat has a wider tau, so it sees at least as many points
    assert len(sets[ClothType.COAT]) >= len(sets[ClothType.UPPER])
    assert np.all(sets[ClothType.COAT].membership == 0.0)
