import numpy as np
import pytest

from hemlets import (
    MetricSummary,
    SimilarityTransform,
    auc,
    mpjpe,
    pa_mpjpe,
    pck3d,
    procrustes_align,
    summarize,
)
from hemlets.errors import (
    DegenerateGeometryError,
    InvalidJointError,
    ValidationError,
)
from hemlets.skeleton import Pose3D


def rand_pose(rng, skel, spread=200.0):
    return Pose3D.full(rng.normal(0.0, spread, (skel.n_joints, 3)))


def rand_rotation(rng):
    q, _ = np.linalg.qr(rng.normal(0.0, 1.0, (3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def rand_similarity(rng):
    return SimilarityTransform(
        rotation=rand_rotation(rng),
        scale=float(rng.uniform(0.5, 2.0)),
        translation=rng.normal(0.0, 300.0, 3),
    )


def umeyama_error(pred_coords, gt_coords, root):
    """Closed-form similarity alignment redone from scratch, then the mean
    per-joint error over everything but the root."""
    x = np.asarray(pred_coords, dtype=float)
    y = np.asarray(gt_coords, dtype=float)
    n = len(x)
    mx = x.mean(axis=0)
    my = y.mean(axis=0)
    xc = x - mx
    yc = y - my
    cov = yc.T @ xc / n
    u, d, vt = np.linalg.svd(cov)
    s = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s[2, 2] = -1.0
    r = u @ s @ vt
    var = float((xc ** 2).sum()) / n
    c = float(np.trace(np.diag(d) @ s)) / var
    t = my - c * r @ mx
    aligned = c * x @ r.T + t
    keep = [i for i in range(n) if i != root]
    return float(np.mean(np.linalg.norm(aligned[keep] - y[keep], axis=1)))


# ---------------------------------------------------------------------------
# mpjpe
# ---------------------------------------------------------------------------

def test_mpjpe_zero_on_identical(skel):
    pose = rand_pose(np.random.default_rng(70), skel)
    assert mpjpe(pose, pose, skel) == 0.0


def test_mpjpe_cancels_global_offset(skel):
    rng = np.random.default_rng(71)
    pose = rand_pose(rng, skel)
    shifted = Pose3D.full(pose.coords + rng.normal(0.0, 500.0, 3))
    assert mpjpe(shifted, pose, skel) < 1e-9


def test_mpjpe_single_displacement_arithmetic(skel):
    rng = np.random.default_rng(72)
    gt = rand_pose(rng, skel)
    pred_coords = gt.coords.copy()
    pred_coords[7, 0] += 30.0
    got = mpjpe(Pose3D.full(pred_coords), gt, skel)
    evaluated = skel.n_joints - 1
    assert abs(got - 30.0 / evaluated) < 1e-12


def test_mpjpe_translation_invariance(skel):
    rng = np.random.default_rng(73)
    for _ in range(20):
        pred = rand_pose(rng, skel)
        gt = rand_pose(rng, skel)
        offset = rng.normal(0.0, 400.0, 3)
        moved = mpjpe(
            Pose3D.full(pred.coords + offset), Pose3D.full(gt.coords + offset), skel
        )
        assert abs(moved - mpjpe(pred, gt, skel)) < 1e-9


def test_mpjpe_needs_root(skel):
    rng = np.random.default_rng(74)
    pred = rand_pose(rng, skel)
    gt = rand_pose(rng, skel)
    pred.valid[skel.root_index] = False
    with pytest.raises(InvalidJointError):
        mpjpe(pred, gt, skel)


# ---------------------------------------------------------------------------
# procrustes alignment
# ---------------------------------------------------------------------------

def test_align_identity_on_equal(skel):
    pose = rand_pose(np.random.default_rng(75), skel)
    t = procrustes_align(pose, pose, skel)
    assert np.allclose(t.rotation, np.eye(3), atol=1e-9)
    assert abs(t.scale - 1.0) < 1e-9
    assert np.abs(t.translation).max() < 1e-6


def test_align_recovers_known_transform(skel):
    rng = np.random.default_rng(76)
    for _ in range(10):
        pose = rand_pose(rng, skel)
        t = rand_similarity(rng)
        moved = Pose3D.full(t.apply(pose.coords))
        got = procrustes_align(pose, moved, skel)
        assert np.abs(got.rotation - t.rotation).max() < 1e-6
        assert abs(got.scale - t.scale) < 1e-6
        assert np.abs(got.translation - t.translation).max() < 1e-6


def test_align_beats_random_search(skel):
    rng = np.random.default_rng(77)
    pred = rand_pose(rng, skel)
    gt = rand_pose(rng, skel)
    best = procrustes_align(pred, gt, skel)

    def residual(t):
        moved = t.apply(pred.coords)
        return float(np.sum((moved - gt.coords) ** 2))

    opt = residual(best)
    for _ in range(1000):
        assert opt <= residual(rand_similarity(rng)) + 1e-9


def test_align_rotation_stays_proper(skel):
    rng = np.random.default_rng(78)
    for _ in range(25):
        t = procrustes_align(rand_pose(rng, skel), rand_pose(rng, skel), skel)
        assert np.allclose(t.rotation @ t.rotation.T, np.eye(3), atol=1e-9)
        assert abs(np.linalg.det(t.rotation) - 1.0) < 1e-9
        assert t.scale > 0.0


def test_align_rejects_degenerate(skel):
    line = np.zeros((skel.n_joints, 3))
    line[:, 0] = np.arange(skel.n_joints)
    with pytest.raises(DegenerateGeometryError):
        procrustes_align(Pose3D.full(line), Pose3D.full(line * 2.0), skel)
    flat = np.zeros((skel.n_joints, 3))
    with pytest.raises(DegenerateGeometryError):
        procrustes_align(Pose3D.full(flat), Pose3D.full(flat), skel)


# ---------------------------------------------------------------------------
# pa_mpjpe
# ---------------------------------------------------------------------------

def test_pa_mpjpe_zero_under_similarity(skel):
    rng = np.random.default_rng(79)
    for _ in range(20):
        pose = rand_pose(rng, skel)
        moved = Pose3D.full(rand_similarity(rng).apply(pose.coords))
        assert pa_mpjpe(moved, pose, skel) < 1e-6


def test_pa_mpjpe_matches_independent_recomputation(skel):
    rng = np.random.default_rng(80)
    for _ in range(15):
        gt = rand_pose(rng, skel)
        pred = Pose3D.full(gt.coords + rng.normal(0.0, 25.0, gt.coords.shape))
        got = pa_mpjpe(pred, gt, skel)
        expect = umeyama_error(pred.coords, gt.coords, skel.root_index)
        assert abs(got - expect) < 1e-9


# ---------------------------------------------------------------------------
# pck and auc
# ---------------------------------------------------------------------------

def _displaced_pair(skel, distances, rng):
    # integer joints displaced along one axis keep every error norm exact
    gt = Pose3D.full(rng.integers(-400, 400, (skel.n_joints, 3)).astype(float))
    pred_coords = gt.coords.copy()
    joints = [i for i in range(skel.n_joints) if i != skel.root_index]
    for j, dist in zip(joints, distances):
        axis = int(rng.integers(0, 3))
        sign = 1.0 if rng.integers(0, 2) else -1.0
        pred_coords[j, axis] += sign * dist
    return Pose3D.full(pred_coords), gt


def test_pck_auc_perfect(skel):
    pose = rand_pose(np.random.default_rng(81), skel)
    assert pck3d(pose, pose, 150.0, skel) == 1.0
    assert pck3d(pose, pose, 0.0, skel) == 1.0
    assert auc(pose, pose, skel) == 1.0


def test_pck_all_beyond_threshold(skel):
    rng = np.random.default_rng(82)
    pred, gt = _displaced_pair(skel, [200.0] * (skel.n_joints - 1), rng)
    assert pck3d(pred, gt, 150.0, skel) == 0.0


def test_pck_matches_counting_oracle(skel):
    rng = np.random.default_rng(83)
    distances = [10.0 * (i + 1) for i in range(skel.n_joints - 1)]
    pred, gt = _displaced_pair(skel, distances, rng)
    for threshold in (0.0, 50.0, 100.0, 150.0):
        hits = sum(1 for d in distances if d <= threshold + 1e-9)
        expect = hits / len(distances)
        assert abs(pck3d(pred, gt, threshold, skel) - expect) < 1e-12


def test_pck_boundary_is_inclusive(skel):
    rng = np.random.default_rng(84)
    pred, gt = _displaced_pair(skel, [150.0] * (skel.n_joints - 1), rng)
    assert pck3d(pred, gt, 150.0, skel) == 1.0


def test_pck_monotone_in_threshold(skel):
    rng = np.random.default_rng(85)
    pred = rand_pose(rng, skel)
    gt = Pose3D.full(pred.coords + rng.normal(0.0, 60.0, pred.coords.shape))
    values = [pck3d(pred, gt, t, skel) for t in np.arange(0.0, 155.0, 5.0)]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_auc_is_mean_of_threshold_sweep(skel):
    rng = np.random.default_rng(86)
    distances = [13.0 * (i + 1) for i in range(skel.n_joints - 1)]
    pred, gt = _displaced_pair(skel, distances, rng)
    thresholds = [5.0 * i for i in range(31)]
    expect = sum(
        sum(1 for d in distances if d <= t + 1e-9) / len(distances)
        for t in thresholds
    ) / len(thresholds)
    got = auc(pred, gt, skel)
    assert abs(got - expect) < 1e-12
    assert 0.0 <= got <= 1.0


def test_pck_rejects_negative_threshold(skel):
    pose = rand_pose(np.random.default_rng(87), skel)
    with pytest.raises(ValidationError):
        pck3d(pose, pose, -1.0, skel)


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

def test_summary_groups_by_action(skel):
    rng = np.random.default_rng(88)
    pairs = []
    for action in ("walk", "walk", "sit"):
        gt = rand_pose(rng, skel)
        pred = Pose3D.full(gt.coords + rng.normal(0.0, 20.0, gt.coords.shape))
        pairs.append((pred, gt, action))
    table = summarize(pairs, skel)
    assert set(table) == {"walk", "sit", "ALL"}
    assert table["walk"].count == 2
    assert table["sit"].count == 1
    assert table["ALL"].count == 3
    walk_rows = [
        (mpjpe(p, g, skel), pa_mpjpe(p, g, skel))
        for p, g, a in pairs
        if a == "walk"
    ]
    assert abs(table["walk"].mpjpe - np.mean([r[0] for r in walk_rows])) < 1e-12
    assert abs(table["walk"].pa_mpjpe - np.mean([r[1] for r in walk_rows])) < 1e-12


def test_summary_rejects_empty(skel):
    with pytest.raises(ValidationError):
        summarize([], skel)


def test_summary_line_format():
    row = MetricSummary(mpjpe=12.5, pa_mpjpe=10.0, pck=1.0, auc=0.75, count=4)
    line = row.to_line("walk")
    assert line.startswith("action walk count 4 ")
    assert "mpjpe 12.5" in line
    assert "auc 0.75" in line


def test_transform_validation():
    with pytest.raises(ValidationError):
        SimilarityTransform(np.eye(3) * 2.0, 1.0, np.zeros(3))
    with pytest.raises(ValidationError):
        SimilarityTransform(np.diag([1.0, 1.0, -1.0]), 1.0, np.zeros(3))
    with pytest.raises(ValidationError):
        SimilarityTransform(np.eye(3), -1.0, np.zeros(3))
