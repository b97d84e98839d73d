"""Pose accuracy metrics in millimeters.

All metrics compare two Pose3D instances joint by joint on the set of joints
valid in both poses, excluding the root (whose error is zero by construction
after root alignment). Alignment conventions:

  mpjpe / pck3d / auc: both poses are translated so the root sits at the
  origin before errors are taken.

  pa_mpjpe: the prediction is mapped by the similarity transform (rotation,
  isotropic scale, translation) that minimizes the summed squared distance
  to the ground truth before errors are taken. Including scale makes the
  score invariant to the monocular depth/scale ambiguity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, InvalidJointError, ValidationError
from .skeleton import canonical_skeleton


@dataclass(frozen=True)
class SimilarityTransform:
    rotation: np.ndarray  # (3, 3), orthonormal, det +1
    scale: float
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        tr = np.asarray(self.translation, dtype=np.float64)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)
        if rot.shape != (3, 3) or tr.shape != (3,):
            raise ValidationError("similarity transform has wrong shapes")
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-9):
            raise ValidationError("rotation is not orthonormal")
        if not np.linalg.det(rot) > 0.0:
            raise ValidationError("rotation must be proper (det +1)")
        if not self.scale > 0.0:
            raise ValidationError("scale must be positive")

    def apply(self, coords):
        arr = np.asarray(coords, dtype=np.float64)
        return self.scale * arr @ self.rotation.T + self.translation


def _common_joints(pred, gt, skeleton, exclude_root=True):
    if pred.n_joints != gt.n_joints:
        raise ValidationError("poses have different joint counts")
    both = pred.valid & gt.valid
    if exclude_root:
        both = both.copy()
        both[skeleton.root_index] = False
    idx = np.flatnonzero(both)
    if idx.size == 0:
        raise ValidationError("no jointly annotated joints to evaluate")
    return idx


def _root_aligned_errors(pred, gt, skeleton):
    root = skeleton.root_index
    if not (pred.valid[root] and gt.valid[root]):
        raise InvalidJointError("root joint must be annotated in both poses")
    idx = _common_joints(pred, gt, skeleton)
    p = pred.coords - pred.coords[root]
    g = gt.coords - gt.coords[root]
    return np.linalg.norm(p[idx] - g[idx], axis=1)


def mpjpe(pred, gt, skeleton=None):
    """Mean per-joint position error after root alignment, millimeters."""
    skeleton = skeleton or canonical_skeleton()
    return float(np.mean(_root_aligned_errors(pred, gt, skeleton)))


def procrustes_align(pred, gt, skeleton=None):
    """Best-fit similarity transform taking pred onto gt.

    Minimizes sum ||s R p_i + t - g_i||^2 over the jointly valid joints
    (root included). Solved through the SVD of the cross-covariance with the
    usual reflection correction so the rotation is always proper.
    """
    skeleton = skeleton or canonical_skeleton()
    idx = _common_joints(pred, gt, skeleton, exclude_root=False)
    if idx.size < 3:
        raise DegenerateGeometryError("need at least three joints to align")
    x = pred.coords[idx]
    y = gt.coords[idx]
    mx = x.mean(axis=0)
    my = y.mean(axis=0)
    xc = x - mx
    yc = y - my
    var_x = float(np.mean(np.sum(xc * xc, axis=1)))
    if var_x <= 0.0:
        raise DegenerateGeometryError("prediction joints are coincident")
    cov = yc.T @ xc / idx.size
    u, d, vt = np.linalg.svd(cov)
    if d[0] <= 0.0 or d[1] <= 1e-12 * d[0]:
        raise DegenerateGeometryError("joint configuration is (near) collinear")
    signs = np.ones(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0.0:
        signs[2] = -1.0
    rotation = (u * signs) @ vt
    scale = float(np.sum(d * signs) / var_x)
    if scale <= 0.0:
        raise DegenerateGeometryError("alignment collapsed to a non-positive scale")
    translation = my - scale * rotation @ mx
    return SimilarityTransform(rotation, scale, translation)


def pa_mpjpe(pred, gt, skeleton=None):
    """MPJPE after similarity alignment of the prediction to the truth."""
    skeleton = skeleton or canonical_skeleton()
    transform = procrustes_align(pred, gt, skeleton)
    aligned = transform.apply(pred.coords)
    idx = _common_joints(pred, gt, skeleton)
    return float(np.mean(np.linalg.norm(aligned[idx] - gt.coords[idx], axis=1)))


def pck3d(pred, gt, threshold=150.0, skeleton=None):
    """Fraction of evaluated joints whose root-aligned error is within the
    threshold (inclusive, so exact ties and zero error at threshold 0 count)."""
    if threshold < 0.0:
        raise ValidationError("threshold must be non-negative")
    skeleton = skeleton or canonical_skeleton()
    errors = _root_aligned_errors(pred, gt, skeleton)
    return float(np.mean(errors <= threshold))


def auc(pred, gt, skeleton=None, max_threshold=150.0, step=5.0):
    """Mean pck3d over thresholds 0, step, ..., max_threshold."""
    skeleton = skeleton or canonical_skeleton()
    thresholds = np.arange(0.0, max_threshold + step / 2.0, step)
    errors = _root_aligned_errors(pred, gt, skeleton)
    return float(np.mean([np.mean(errors <= t) for t in thresholds]))


@dataclass
class MetricSummary:
    mpjpe: float
    pa_mpjpe: float
    pck: float
    auc: float
    count: int

    def to_line(self, label):
        return (
            f"action {label} count {self.count} mpjpe {self.mpjpe!r} "
            f"pa_mpjpe {self.pa_mpjpe!r} pck {self.pck!r} auc {self.auc!r}"
        )


def summarize(pairs, skeleton=None, threshold=150.0):
    """Per-action metric table for (pred, gt, action) triples.

    Per-sample metrics are averaged within each action label, plus an 'ALL'
    row over every pair. Returns {label: MetricSummary}.
    """
    skeleton = skeleton or canonical_skeleton()
    if not pairs:
        raise ValidationError("nothing to evaluate")
    groups = {}
    for pred, gt, action in pairs:
        row = (
            mpjpe(pred, gt, skeleton),
            pa_mpjpe(pred, gt, skeleton),
            pck3d(pred, gt, threshold, skeleton),
            auc(pred, gt, skeleton),
        )
        groups.setdefault(action or "unlabeled", []).append(row)
        groups.setdefault("ALL", []).append(row)
    out = {}
    for label, rows in groups.items():
        arr = np.asarray(rows)
        out[label] = MetricSummary(
            mpjpe=float(arr[:, 0].mean()),
            pa_mpjpe=float(arr[:, 1].mean()),
            pck=float(arr[:, 2].mean()),
            auc=float(arr[:, 3].mean()),
            count=len(rows),
        )
    return out
