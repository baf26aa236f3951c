import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from app.errors import DegenerateInputError, ValidationError
from app.evaluation.alignment import alignment_residual, estimate_similarity
from app.evaluation.bcc import evaluate_bcc
from app.evaluation.chamfer import chamfer_distance, evaluate_cd
from app.evaluation.gt import build_gt_surface, register_clothed_body
from app.evaluation.pairs import match_vertex_pairs
from app.geometry.proximity import TriangleSoupIndex
from app.models import ClothType, Mesh, PoseParams, SimilarityTransform
from app.raster.rasterizer import rasterize

from conftest import state_with


def test_similarity_is_recovered():
    rng = np.random.default_rng(11)
    src = rng.normal(size=(30, 3))
    truth = SimilarityTransform(1.7, Rotation.random(random_state=4).as_matrix(), [0.2, -1.0, 3.0])
    found = estimate_similarity(src, truth.apply(src))
    assert found.scale == pytest.approx(1.7)
    assert np.allclose(found.rotation, truth.rotation, atol=1e-9)
    assert np.allclose(found.translation, truth.translation, atol=1e-9)
    assert alignment_residual(found, src, truth.apply(src)) < 1e-12


def test_mirrored_targets_still_give_a_rotation():
    rng = np.random.default_rng(2)
    src = rng.normal(size=(12, 3))
    found = estimate_similarity(src, src * [-1.0, 1.0, 1.0])
    assert np.linalg.det(found.rotation) == pytest.approx(1.0)


def test_degenerate_alignment_inputs():
    with pytest.raises(DegenerateInputError):
        estimate_similarity(np.zeros((2, 3)), np.zeros((2, 3)))
    line = np.outer(np.arange(5.0), [1.0, 2.0, 0.5])
    with pytest.raises(DegenerateInputError):
        estimate_similarity(line, line)
    with pytest.raises(DegenerateInputError):
        estimate_similarity(np.eye(3), np.eye(4)[:, :3])


def _square(z):
    verts = [[0.0, 0.0, z], [1.0, 0.0, z], [1.0, 1.0, z], [0.0, 1.0, z]]
    return Mesh(verts, [[0, 1, 2], [0, 2, 3]])


def test_parallel_squares_are_five_millimeters_apart():
    assert chamfer_distance(_square(0.0), _square(0.005)) == pytest.approx(5.0)
    assert chamfer_distance(_square(0.0), _square(0.0)) == 0.0


def test_chamfer_is_symmetric_mean_of_both_directions():
    small = Mesh([[0.4, 0.4, 0.01], [0.6, 0.4, 0.01], [0.5, 0.6, 0.01]], [[0, 1, 2]])
    big = _square(0.0)
    # small -> big: every vertex 10 mm above the square
    # big -> small: corners reach the nearest small-triangle vertex or edge
    back = TriangleSoupIndex(small.triangles).distance(big.vertices).mean()
    expected = 1000.0 * (0.01 + back) / 2.0
    assert chamfer_distance(small, big) == pytest.approx(expected)
    assert chamfer_distance(big, small) == pytest.approx(expected)


def test_chamfer_needs_surfaces():
    with pytest.raises(ValidationError):
        chamfer_distance(Mesh.empty(), _square(0.0))


def test_pairs_cover_co_visible_pixels(tpose_mesh, camera):
    pairs = match_vertex_pairs(tpose_mesh, tpose_mesh, camera)
    assert len(pairs) == int(rasterize(tpose_mesh, camera).covered.sum())
    assert np.array_equal(pairs.recon, pairs.gt)
    assert len(pairs.to_points_text().splitlines()) == 2 * len(pairs)


def test_identical_meshes_score_zero(tpose_mesh, camera):
    cd, transform, _ = evaluate_cd(tpose_mesh, tpose_mesh, camera)
    assert cd == pytest.approx(0.0, abs=1e-6)
    assert transform.scale == pytest.approx(1.0)


def test_depth_offset_is_aligned_away(tpose_mesh, camera):
    pushed = tpose_mesh.with_vertices(tpose_mesh.vertices + [0.0, 0.0, 0.3])
    cd, transform, pairs = evaluate_cd(pushed, tpose_mesh, camera)
    assert len(pairs) > 0
    assert cd == pytest.approx(0.0, abs=1e-6)
    assert np.allclose(transform.translation, [0.0, 0.0, -0.3], atol=1e-9)


def test_bcc_without_garments(make_observation, tpose, tpose_mesh):
    obs = make_observation({(0, 62): ClothType.UPPER.label})
    scores, average, flagged = evaluate_bcc({"body": tpose_mesh}, obs, tpose, n_points=300, seed=1)
    assert scores == {"upper_body": 0.0, "non_cloth": 1.0}
    assert flagged == ["lower_body"]
    assert average == pytest.approx(0.5)


def test_bcc_with_a_skin_tight_top(make_observation, tpose, tpose_mesh):
    obs = make_observation({(0, 62): ClothType.UPPER.label})
    scores, _, _ = evaluate_bcc({"upper": tpose_mesh, "pants": Mesh.empty()}, obs, tpose, n_points=300, seed=1)
    assert scores["upper_body"] == 1.0
    assert scores["non_cloth"] == 0.0


def test_registered_body_keeps_topology(tpose, backend):
    bare = register_clothed_body(tpose, backend, state_with())
    assert np.array_equal(bare.vertices, tpose.vertices)

    dressed = register_clothed_body(tpose, backend, state_with(ClothType.UPPER, ClothType.SKIRT))
    assert np.array_equal(dressed.faces, tpose.faces)
    lift = np.linalg.norm(dressed.vertices - tpose.vertices, axis=1)
    assert lift.max() > 0.0


def test_top_lifts_by_its_thickness(tpose, backend):
    dressed = register_clothed_body(tpose, backend, state_with(ClothType.UPPER))
    lift = np.linalg.norm(dressed.vertices - tpose.vertices, axis=1)
    moved = lift > 0
    assert moved.any()
    assert np.allclose(lift[moved], 0.015)


def test_gt_surface_poses_with_body_skinning(tpose, backend):
    registered = register_clothed_body(tpose, backend, state_with(ClothType.PANTS))
    posed = build_gt_surface(registered, tpose, PoseParams.zeros())
    assert np.allclose(posed.vertices, registered.vertices, atol=1e-12)
    assert np.array_equal(posed.faces, tpose.faces)
    with pytest.raises(ValidationError):
        build_gt_surface(Mesh(tpose.vertices[:10], [[0, 1, 2]]), tpose, PoseParams.zeros())


@pytest.mark.parametrize("seed", range(50))
def test_random_similarities_are_recovered(seed):
    rng = np.random.default_rng(100 + seed)
    src = rng.normal(size=(40, 3))
    truth = SimilarityTransform(rng.uniform(0.5, 2.0), Rotation.random(random_state=seed).as_matrix(),
                                rng.normal(size=3))
    found = estimate_similarity(src, truth.apply(src))
    assert found.scale == pytest.approx(truth.scale, abs=1e-9)
    assert np.allclose(found.rotation, truth.rotation, atol=1e-9)
    assert np.allclose(found.translation, truth.translation, atol=1e-9)


def _sub(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _along(a, d, t):
    return (a[0] + t * d[0], a[1] + t * d[1], a[2] + t * d[2])


def _closest_on_triangle(p, a, b, c):
    """Closest point on triangle abc by Voronoi region tests."""
    ab, ac, ap = _sub(b, a), _sub(c, a), _sub(p, a)
    d1, d2 = _dot(ab, ap), _dot(ac, ap)
    if d1 <= 0.0 and d2 <= 0.0:
        return a
    bp = _sub(p, b)
    d3, d4 = _dot(ab, bp), _dot(ac, bp)
    if d3 >= 0.0 and d4 <= d3:
        return b
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        return _along(a, ab, d1 / (d1 - d3))
    cp = _sub(p, c)
    d5, d6 = _dot(ab, cp), _dot(ac, cp)
    if d6 >= 0.0 and d5 <= d6:
        return c
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        return _along(a, ac, d2 / (d2 - d6))
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and d4 - d3 >= 0.0 and d5 - d6 >= 0.0:
        return _along(b, _sub(c, b), (d4 - d3) / ((d4 - d3) + (d5 - d6)))
    denom = 1.0 / (va + vb + vc)
    q = _along(a, ab, vb * denom)
    return _along(q, ac, vc * denom)


def _brute_one_way(src: Mesh, dst: Mesh) -> float:
    tris = [[tuple(float(v) for v in dst.vertices[i]) for i in face] for face in dst.faces]
    total = 0.0
    for vertex in src.vertices:
        p = tuple(float(v) for v in vertex)
        total += min(math.sqrt(_dot(d, d)) for d in (_sub(p, _closest_on_triangle(p, *t)) for t in tris))
    return total / len(src.vertices)


def _random_mesh(rng):
    n = int(rng.integers(5, 16))
    vertices = rng.uniform(-0.5, 0.5, (n, 3))
    faces = [rng.choice(n, 3, replace=False) for _ in range(int(rng.integers(3, 11)))]
    return Mesh(vertices, faces)


@pytest.mark.parametrize("seed", range(20))
def test_chamfer_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    a, b = _random_mesh(rng), _random_mesh(rng)
    expected = 1000.0 * (_brute_one_way(a, b) + _brute_one_way(b, a)) / 2.0
    assert chamfer_distance(a, b) == pytest.approx(expected, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_cd_ignores_depth_placement_of_the_reconstruction(seed, tpose, backend, camera):
    # orthographic projection keeps the pixel footprint under depth translation
    gt = register_clothed_body(tpose, backend, state_with(ClothType.UPPER, ClothType.PANTS))
    recon = Mesh(tpose.vertices, tpose.faces)
    base, _, base_pairs = evaluate_cd(recon, gt, camera)
    dz = np.random.default_rng(seed).uniform(-0.3, 0.3)
    moved, _, moved_pairs = evaluate_cd(recon.with_vertices(recon.vertices + [0.0, 0.0, dz]), gt, camera)
    assert len(moved_pairs) == len(base_pairs)
    assert moved == pytest.approx(base, abs=1e-6)
