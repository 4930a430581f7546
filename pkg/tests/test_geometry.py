import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthforge.errors import BehindCameraError, EmptyMeshError, SynthForgeError
from synthforge.geometry import (
    BOX_CORNER_BITS,
    CameraIntrinsics,
    Mesh,
    ModelInfo,
    RigidTransform,
    compose,
    mesh_stats,
    obb_corners,
    project,
    quaternion_to_rotation,
    rpy_to_rotation,
    unproject,
)

angles = st.floats(-720, 720, allow_nan=False)


def qmul(a, b):
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def axis_quat(axis, deg):
    h = np.radians(deg) / 2
    return np.concatenate([[np.cos(h)], np.sin(h) * np.asarray(axis, float)])


def qrotate(q, v):
    qv = np.concatenate([[0.0], v])
    conj = q * np.array([1, -1, -1, -1])
    return qmul(qmul(q, qv), conj)[1:]


def random_pose(rng):
    q = rng.normal(size=4)
    return RigidTransform(quaternion_to_rotation(q), rng.normal(size=3))


def test_rpy_zero_is_identity():
    assert np.array_equal(rpy_to_rotation(0, 0, 0), np.eye(3))


def test_rpy_roll_quarter_turn():
    r = rpy_to_rotation(90, 0, 0)
    assert np.allclose(r @ [0, 1, 0], [0, 0, 1], atol=1e-15)
    assert np.allclose(r @ [0, 0, 1], [0, -1, 0], atol=1e-15)


def test_rpy_matches_quaternion_oracle():
    # extrinsic X, then Y, then Z: q = qz * qy * qx
    q = qmul(axis_quat([0, 0, 1], 60), qmul(axis_quat([0, 1, 0], 45), axis_quat([1, 0, 0], 30)))
    r = rpy_to_rotation(30, 45, 60)
    for e in np.eye(3):
        assert np.abs(r @ e - qrotate(q, e)).max() < 1e-12


@given(angles, angles, angles)
@settings(max_examples=200, deadline=None)
def test_rpy_is_rotation(a, b, c):
    r = rpy_to_rotation(a, b, c)
    assert np.abs(r.T @ r - np.eye(3)).max() < 1e-12
    assert abs(np.linalg.det(r) - 1) < 1e-12


def test_compose_laws(rng):
    t = random_pose(rng)
    i = compose(RigidTransform.identity(), t)
    assert np.array_equal(i.rotation, t.rotation) and np.array_equal(i.translation, t.translation)
    e = compose(t, t.inverse())
    assert np.abs(e.matrix - np.eye(4)).max() < 1e-12


def test_compose_matches_homogeneous_product(rng):
    for _ in range(50):
        a, b = random_pose(rng), random_pose(rng)
        assert np.abs(compose(a, b).matrix - a.matrix @ b.matrix).max() < 1e-12
        assert np.abs((a @ b).matrix - a.matrix @ b.matrix).max() < 1e-12


def test_rigid_transform_rejects_reflection():
    with pytest.raises(SynthForgeError):
        RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


def test_project_examples():
    k = CameraIntrinsics(500, 500, 320, 240, 640, 480)
    assert project(k, (0, 0, 2)) == (320, 240)
    u, v = project(k, (0.1, 0, 2))
    assert (u, v) == (500 * 0.1 / 2 + 320, 240)
    assert abs(u - 345) < 1e-12
    with pytest.raises(BehindCameraError):
        project(k, (0, 0, -1))


@given(st.integers(0, 639), st.integers(0, 479), st.floats(0.01, 100))
@settings(max_examples=200, deadline=None)
def test_project_unproject_roundtrip(u, v, z):
    k = CameraIntrinsics(572.4, 571.0, 320, 240, 640, 480)
    pu, pv = project(k, unproject(k, u, v, z))
    assert abs(pu - u) < 1e-9 and abs(pv - v) < 1e-9


def test_intrinsics_validation():
    with pytest.raises(SynthForgeError):
        CameraIntrinsics(0, 500, 320, 240, 640, 480)
    with pytest.raises(SynthForgeError):
        CameraIntrinsics(500, 500, 640, 240, 640, 480)


def brute_diameter(v):
    best = 0.0
    for i in range(len(v)):
        for j in range(i + 1, len(v)):
            best = max(best, float(np.sqrt(((v[i] - v[j]) ** 2).sum())))
    return best


def test_mesh_stats_unit_cube(unit_cube):
    info = mesh_stats(unit_cube)
    assert abs(info.diameter - np.sqrt(3)) < 1e-15
    assert (info.min_x, info.min_y, info.min_z) == (0, 0, 0)
    assert (info.size_x, info.size_y, info.size_z) == (1, 1, 1)


def test_mesh_stats_degenerate_point():
    m = Mesh(np.ones((3, 3)), [[0, 1, 2]])
    info = mesh_stats(m)
    assert info.diameter == 0 and tuple(info.size) == (0, 0, 0)


def test_mesh_stats_random_cloud_matches_brute_force(rng):
    for _ in range(5):
        v = rng.normal(size=(50, 3))
        m = Mesh(v, [[0, 1, 2]])
        assert mesh_stats(m).diameter == brute_diameter(v)


def test_mesh_stats_large_mesh_uses_hull(rng):
    v = rng.normal(size=(10_050, 3))
    m = Mesh(v, [[0, 1, 2]])
    from scipy.spatial.distance import pdist
    from scipy.spatial import ConvexHull

    assert abs(mesh_stats(m).diameter - pdist(v[ConvexHull(v).vertices]).max()) < 1e-12


def test_mesh_stats_empty():
    with pytest.raises(EmptyMeshError):
        mesh_stats(Mesh(np.zeros((0, 3)), np.zeros((0, 3), int)))


def test_mesh_rejects_bad_indices_and_nan():
    with pytest.raises(SynthForgeError):
        Mesh(np.zeros((3, 3)), [[0, 1, 3]])
    with pytest.raises(SynthForgeError):
        Mesh(np.array([[0, 0, np.nan], [1, 0, 0], [0, 1, 0]]), [[0, 1, 2]])


def test_obb_corners_unit_identity_and_translation():
    info = ModelInfo(np.sqrt(3), 0, 0, 0, 1, 1, 1)
    c = obb_corners(info, RigidTransform.identity()).corners
    assert {tuple(p) for p in c} == set(itertools.product((0.0, 1.0), repeat=3))
    assert np.array_equal(c, BOX_CORNER_BITS)
    t = np.array([0.5, -2.0, 3.0])
    assert np.array_equal(obb_corners(info, RigidTransform(np.eye(3), t)).corners, c + t)


def test_obb_corners_random_pose_oracle(rng):
    info = ModelInfo(1.0, -0.1, 0.2, -0.3, 0.4, 0.5, 0.6)
    pose = random_pose(rng)
    got = obb_corners(info, pose).corners
    for bits, corner in zip(itertools.product((0, 1), repeat=3), got):
        local = np.array([info.min_x, info.min_y, info.min_z]) + np.array(bits) * [info.size_x, info.size_y, info.size_z]
        homog = pose.matrix @ np.append(local, 1.0)
        assert np.abs(corner - homog[:3]).max() < 1e-12
    # opposite corners differ by the rotated diagonal
    assert np.abs(got[7] - got[0] - pose.rotation @ info.size).max() < 1e-12
