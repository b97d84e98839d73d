"""Heatmap-triplet codec: ground truth in, supervision targets out.

Each skeleton part gets a stack of polarity layers at heatmap resolution,
ordered (negative, zero, positive). The parent joint's Gaussian always lives
in the zero layer; the child joint's Gaussian goes into the layer selected by
the part's ordinal depth label

    +1  parent deeper than child by more than epsilon,
     0  depths within epsilon of each other (peaks combined by per-pixel max),
    -1  child deeper than parent by more than epsilon,

with epsilon adapting to the part's own length. Two alternative layouts are
provided for comparison experiments: a two-state form (closer joint in the
positive layer, farther in the negative) and a five-state form binned by the
part's elevation angle out of the image plane.

Conventions: heatmap pixel (row i, column j) covers the normalized cell
[j/w, (j+1)/w) x [i/h, (i+1)/h) and has center ((j+0.5)/w, (i+0.5)/h).
A Gaussian is rendered with value exactly 1 at the pixel containing its
center and truncated to zero beyond ``truncation_radius * sigma`` pixels.
Centers outside [0, 1)^2 produce an all-zero grid and are flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import AnnotationError, ValidationError
from .samples import AnnotatedSample, AnnotationKind
from .skeleton import Pose2D, Pose3D, canonical_skeleton, part_length
from .validation import check_in_set, check_positive

VARIANTS = ("hemlets", "2s", "5s")

# Elevation-angle bin edges (degrees) for the five-state layout. A boundary
# angle belongs to the higher bin; the parent sits in the center layer (2).
FIVE_STATE_EDGES = (-60.0, -30.0, 30.0, 60.0)

# Decode thresholds, as fractions of the unit peak: a part counts as
# annotated when any layer reaches _PEAK_MIN; a second zero-layer peak is
# accepted when the parent-suppressed residual reaches _SECOND_PEAK_MIN.
_PEAK_MIN = 0.25
_SECOND_PEAK_MIN = 0.15


@dataclass(frozen=True)
class CodecConfig:
    heatmap_resolution: tuple = (64, 64)  # (height, width) pixels
    sigma: float = 2.0  # Gaussian std dev, pixels
    epsilon_scale: float = 0.5  # epsilon = scale * part length
    truncation_radius: float = 3.0  # cutoff, multiples of sigma
    depth_window: float = 2000.0  # metric z span mapped onto [0, 1], mm

    def __post_init__(self):
        h, w = self.heatmap_resolution
        if int(h) != h or int(w) != w or h < 8 or w < 8:
            raise ValidationError("heatmap_resolution must be integers >= 8")
        check_positive("sigma", self.sigma)
        if not (math.isfinite(self.epsilon_scale) and self.epsilon_scale >= 0.0):
            raise ValidationError("epsilon_scale must be non-negative")
        check_positive("truncation_radius", self.truncation_radius)
        check_positive("depth_window", self.depth_window)


@dataclass
class TrainingTarget:
    """Everything the loss stack consumes for one sample."""

    hemlets: np.ndarray  # (n_parts, n_states, h, w)
    mask_hem: np.ndarray  # (n_parts, n_states) binary
    heatmaps2d: np.ndarray  # (n_joints, h, w)
    coords3d: np.ndarray  # (n_joints, 3) normalized volume coordinates
    lambda_z: int  # 1 when metric depth supervision is present


def polarity(z_parent, z_child, epsilon):
    """Tri-state depth comparison; boundary values (|diff| == epsilon) map to 0."""
    epsilon = float(epsilon)
    if not (math.isfinite(epsilon) and epsilon >= 0.0):
        raise ValidationError("epsilon must be finite and non-negative")
    diff = float(z_parent) - float(z_child)
    if not math.isfinite(diff):
        raise ValidationError("polarity needs finite depths")
    if diff > epsilon:
        return 1
    if diff < -epsilon:
        return -1
    return 0


def adaptive_epsilon(pose3d, part_index, skeleton=None, scale=0.5):
    """Comparison threshold for one part: scale times its metric length."""
    scale = float(scale)
    if not (math.isfinite(scale) and scale >= 0.0):
        raise ValidationError("scale must be finite and non-negative")
    return scale * part_length(pose3d, part_index, skeleton)


def derive_ordinal_labels(pose3d, skeleton=None, epsilon_scale=0.5):
    """Ordinal labels for every part of a fully annotated 3D pose."""
    skeleton = skeleton or canonical_skeleton()
    labels = []
    for k, (p, c) in enumerate(skeleton.parts):
        eps = adaptive_epsilon(pose3d, k, skeleton, epsilon_scale)
        labels.append(polarity(pose3d.coords[p, 2], pose3d.coords[c, 2], eps))
    return labels


_PATCH_CACHE = {}


def _gaussian_patch(sigma, truncation_radius):
    key = (float(sigma), float(truncation_radius))
    patch = _PATCH_CACHE.get(key)
    if patch is None:
        rad = int(math.floor(truncation_radius * sigma))
        offs = np.arange(-rad, rad + 1, dtype=np.float64)
        d2 = offs[None, :] ** 2 + offs[:, None] ** 2
        patch = np.exp(-d2 / (2.0 * sigma * sigma))
        patch[d2 > (truncation_radius * sigma) ** 2] = 0.0
        _PATCH_CACHE[key] = (rad, patch)
    return _PATCH_CACHE[key]


def _pixel_of(center, h, w):
    """Grid indices of the pixel containing a normalized point, or None."""
    x, y = float(center[0]), float(center[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValidationError("heatmap center must be finite")
    ix = math.floor(x * w)
    iy = math.floor(y * h)
    if 0 <= ix < w and 0 <= iy < h:
        return iy, ix
    return None


def _paste_peak(dst, iy, ix, config):
    """Max-combine a unit-peak Gaussian stencil into dst at pixel (iy, ix)."""
    rad, patch = _gaussian_patch(config.sigma, config.truncation_radius)
    h, w = dst.shape
    y0, y1 = max(iy - rad, 0), min(iy + rad + 1, h)
    x0, x1 = max(ix - rad, 0), min(ix + rad + 1, w)
    view = patch[y0 - iy + rad : y1 - iy + rad, x0 - ix + rad : x1 - ix + rad]
    np.maximum(dst[y0:y1, x0:x1], view, out=dst[y0:y1, x0:x1])


def render_gaussian(center, config=None):
    """Render one truncated Gaussian on a fresh grid.

    Returns (grid, in_crop). Centers whose containing pixel falls outside the
    grid yield an all-zero grid with in_crop False.
    """
    config = config or CodecConfig()
    h, w = config.heatmap_resolution
    grid = np.zeros((h, w), dtype=np.float64)
    pix = _pixel_of(center, h, w)
    if pix is None:
        return grid, False
    _paste_peak(grid, pix[0], pix[1], config)
    return grid, True


def _resolve_labels(sample, skeleton, config):
    if sample.kind is AnnotationKind.FULL_3D:
        # Labels are always re-derived from the 3D ground truth here, even if
        # the sample happens to carry stored ordinal labels.
        return derive_ordinal_labels(sample.pose3d, skeleton, config.epsilon_scale)
    if sample.kind is AnnotationKind.ORDINAL_ONLY:
        return list(sample.ordinal)
    return [None] * skeleton.n_parts


def _require_part_2d(sample, skeleton, k):
    p, c = skeleton.parts[k]
    if not (sample.pose2d.valid[p] and sample.pose2d.valid[c]):
        raise AnnotationError(
            f"part {skeleton.part_names[k]!r} has an ordinal label but no 2D joints"
        )
    return p, c


def encode_hemlets(sample, skeleton=None, config=None):
    """Encode one sample into the triplet tensor and its supervision mask.

    Returns (tensor, mask) with shapes (n_parts, 3, h, w) and (n_parts, 3).
    Parts with an unknown ordinal label stay all-zero with mask 0; their
    layers must not contribute to any loss.
    """
    skeleton = skeleton or canonical_skeleton()
    config = config or CodecConfig()
    sample.validate(skeleton)
    h, w = config.heatmap_resolution
    labels = _resolve_labels(sample, skeleton, config)
    tensor = np.zeros((skeleton.n_parts, 3, h, w), dtype=np.float64)
    mask = np.zeros((skeleton.n_parts, 3), dtype=np.float64)
    for k, r in enumerate(labels):
        if r is None:
            continue
        p, c = _require_part_2d(sample, skeleton, k)
        mask[k, :] = 1.0
        ppix = _pixel_of(sample.pose2d.coords[p], h, w)
        cpix = _pixel_of(sample.pose2d.coords[c], h, w)
        if ppix is not None:
            _paste_peak(tensor[k, 1], ppix[0], ppix[1], config)
        if cpix is not None:
            _paste_peak(tensor[k, 1 + r], cpix[0], cpix[1], config)
    return tensor, mask


def encode_2s(sample, skeleton=None, config=None):
    """Two-state layout: closer joint in the positive layer, farther in the
    negative; near-equal depths put both joints in the zero layer."""
    skeleton = skeleton or canonical_skeleton()
    config = config or CodecConfig()
    sample.validate(skeleton)
    h, w = config.heatmap_resolution
    labels = _resolve_labels(sample, skeleton, config)
    tensor = np.zeros((skeleton.n_parts, 3, h, w), dtype=np.float64)
    mask = np.zeros((skeleton.n_parts, 3), dtype=np.float64)
    for k, r in enumerate(labels):
        if r is None:
            continue
        p, c = _require_part_2d(sample, skeleton, k)
        mask[k, :] = 1.0
        ppix = _pixel_of(sample.pose2d.coords[p], h, w)
        cpix = _pixel_of(sample.pose2d.coords[c], h, w)
        if r == 0:
            for pix in (ppix, cpix):
                if pix is not None:
                    _paste_peak(tensor[k, 1], pix[0], pix[1], config)
        else:
            # r = +1 means the parent is deeper, so the child is closer.
            closer, farther = (cpix, ppix) if r == 1 else (ppix, cpix)
            if closer is not None:
                _paste_peak(tensor[k, 2], closer[0], closer[1], config)
            if farther is not None:
                _paste_peak(tensor[k, 0], farther[0], farther[1], config)
    return tensor, mask


def elevation_angle(pose3d, part_index, skeleton=None):
    """Angle (degrees) of the part vector out of the image plane.

    Positive when the parent is deeper than the child. A zero-length part has
    no direction; its angle is defined as 0.
    """
    skeleton = skeleton or canonical_skeleton()
    length = part_length(pose3d, part_index, skeleton)
    p, c = skeleton.parts[part_index]
    if length == 0.0:
        return 0.0
    dz = pose3d.coords[p, 2] - pose3d.coords[c, 2]
    return math.degrees(math.asin(min(1.0, max(-1.0, dz / length))))


def five_state_bin(angle_deg):
    """Bin index 0..4 for an elevation angle; boundaries go to the higher bin."""
    return int(np.searchsorted(FIVE_STATE_EDGES, angle_deg, side="right"))


def encode_5s(sample, skeleton=None, config=None):
    """Five-state layout keyed by elevation angle; needs full 3D annotations.

    The parent joint always sits in the center layer (index 2); the child
    goes into the layer of its part's angle bin, combined by per-pixel max
    when that is also the center layer.
    """
    skeleton = skeleton or canonical_skeleton()
    config = config or CodecConfig()
    sample.validate(skeleton)
    if sample.kind is not AnnotationKind.FULL_3D:
        raise AnnotationError("five-state encoding requires full 3D annotations")
    h, w = config.heatmap_resolution
    tensor = np.zeros((skeleton.n_parts, 5, h, w), dtype=np.float64)
    mask = np.zeros((skeleton.n_parts, 5), dtype=np.float64)
    for k in range(skeleton.n_parts):
        p, c = _require_part_2d(sample, skeleton, k)
        mask[k, :] = 1.0
        layer = five_state_bin(elevation_angle(sample.pose3d, k, skeleton))
        ppix = _pixel_of(sample.pose2d.coords[p], h, w)
        cpix = _pixel_of(sample.pose2d.coords[c], h, w)
        if ppix is not None:
            _paste_peak(tensor[k, 2], ppix[0], ppix[1], config)
        if cpix is not None:
            _paste_peak(tensor[k, layer], cpix[0], cpix[1], config)
    return tensor, mask


def encode_2d_heatmaps(sample, skeleton=None, config=None):
    """One Gaussian heatmap per joint; invalid or out-of-crop joints yield
    all-zero maps."""
    skeleton = skeleton or canonical_skeleton()
    config = config or CodecConfig()
    h, w = config.heatmap_resolution
    maps = np.zeros((skeleton.n_joints, h, w), dtype=np.float64)
    for i in range(skeleton.n_joints):
        if not sample.pose2d.valid[i]:
            continue
        pix = _pixel_of(sample.pose2d.coords[i], h, w)
        if pix is not None:
            _paste_peak(maps[i], pix[0], pix[1], config)
    return maps


def encode_targets(sample, skeleton=None, config=None, variant="hemlets"):
    """Assemble the full supervision bundle for one sample.

    coords3d rows hold (x, y) from the 2D annotation and, for fully 3D
    samples, the depth mapped onto [0, 1] through the configured window;
    joints without valid 2D stay zero. lambda_z gates metric depth terms.
    """
    skeleton = skeleton or canonical_skeleton()
    config = config or CodecConfig()
    check_in_set("variant", variant, VARIANTS)
    sample.validate(skeleton)
    if variant == "2s":
        hem, mask = encode_2s(sample, skeleton, config)
    elif variant == "5s":
        hem, mask = encode_5s(sample, skeleton, config)
    else:
        hem, mask = encode_hemlets(sample, skeleton, config)
    heatmaps = encode_2d_heatmaps(sample, skeleton, config)
    coords = np.zeros((skeleton.n_joints, 3), dtype=np.float64)
    is_3d = sample.kind is AnnotationKind.FULL_3D
    for i in range(skeleton.n_joints):
        if not sample.pose2d.valid[i]:
            continue
        coords[i, 0] = sample.pose2d.coords[i, 0]
        coords[i, 1] = sample.pose2d.coords[i, 1]
        if is_3d:
            coords[i, 2] = 0.5 + sample.pose3d.coords[i, 2] / config.depth_window
    return TrainingTarget(hem, mask, heatmaps, coords, int(is_3d))


def _argmax2d(grid):
    iy, ix = np.unravel_index(int(np.argmax(grid)), grid.shape)
    return int(iy), int(ix)


def _second_zero_peak(zero, apix, config):
    """Zero-layer peak that remains after suppressing the Gaussian rendered
    at apix (the parent candidate's truncation window)."""
    rad, patch = _gaussian_patch(config.sigma, config.truncation_radius)
    resid = zero.copy()
    h, w = zero.shape
    iy, ix = apix
    y0, y1 = max(iy - rad, 0), min(iy + rad + 1, h)
    x0, x1 = max(ix - rad, 0), min(ix + rad + 1, w)
    resid[y0:y1, x0:x1] -= patch[
        y0 - iy + rad : y1 - iy + rad, x0 - ix + rad : x1 - ix + rad
    ]
    keep = resid > _SECOND_PEAK_MIN
    if not keep.any():
        return None
    return _argmax2d(np.where(keep, zero, -np.inf))


def decode_hemlets(tensor, skeleton=None, config=None):
    """Recover 2D joints and ordinal labels from a triplet tensor.

    Returns (Pose2D, labels). Recovered coordinates are pixel centers, so a
    round trip is exact up to quantization. Parts whose layers are all
    (near) zero are reported with label None. Within a near-equal-depth part
    the two zero-layer peaks are symmetric, so parent and child are told
    apart by walking parts root-outward and matching the end nearer to the
    already-known parent joint; the root is anchored by a vote across its
    own parts. Joints that are not endpoints of any part are not represented
    and come back invalid.
    """
    skeleton = skeleton or canonical_skeleton()
    tensor = np.asarray(tensor, dtype=np.float64)
    if tensor.ndim != 4 or tensor.shape[0] != skeleton.n_parts or tensor.shape[1] != 3:
        raise ValidationError(
            f"expected a (n_parts, 3, h, w) tensor, got shape {tensor.shape}"
        )
    h, w = tensor.shape[2], tensor.shape[3]
    if config is None:
        config = CodecConfig(heatmap_resolution=(h, w))
    elif config.heatmap_resolution != (h, w):
        raise ValidationError("config resolution does not match the tensor")

    labels = [None] * skeleton.n_parts
    onepeak = {}  # part -> (r, parent pix or None, child pix)
    twopeak = {}  # part -> (pix a, pix b) for near-equal-depth parts
    for k in range(skeleton.n_parts):
        neg, zero, pos = tensor[k]
        if max(neg.max(), zero.max(), pos.max()) < _PEAK_MIN:
            continue
        if max(neg.max(), pos.max()) >= _PEAK_MIN:
            r = 1 if pos.max() >= neg.max() else -1
            child = _argmax2d(tensor[k, 1 + r])
            parent = _argmax2d(zero) if zero.max() >= _PEAK_MIN else None
            onepeak[k] = (r, parent, child)
            labels[k] = r
        else:
            a = _argmax2d(zero)
            b = _second_zero_peak(zero, a, config)
            twopeak[k] = (a, b if b is not None else a)
            labels[k] = 0

    def dist(p, q):
        return math.hypot(p[0] - q[0], p[1] - q[1])

    joint_pix = {}
    # Anchor the root: prefer a part whose parent peak is unambiguous, else
    # vote across the candidate pairs of the root's near-equal parts.
    root = skeleton.root_index
    root_parts = [k for k, (p, _) in enumerate(skeleton.parts) if p == root]
    for k in root_parts:
        if k in onepeak and onepeak[k][1] is not None:
            joint_pix[root] = onepeak[k][1]
            break
    if root not in joint_pix:
        cands = [pix for k in root_parts if k in twopeak for pix in twopeak[k]]
        best, best_score = None, 0
        for pix in cands:
            score = sum(1 for other in cands if dist(pix, other) <= 1.5)
            if score > best_score:
                best, best_score = pix, score
        if best is not None:
            joint_pix[root] = best

    for k, (p, c) in enumerate(skeleton.parts):
        if k in onepeak:
            _, parent, child = onepeak[k]
            if parent is not None and p not in joint_pix:
                joint_pix[p] = parent
            joint_pix[c] = child
        elif k in twopeak:
            a, b = twopeak[k]
            if p in joint_pix:
                child = b if dist(a, joint_pix[p]) <= dist(b, joint_pix[p]) else a
            else:
                joint_pix[p] = a
                child = b
            joint_pix[c] = child

    coords = np.zeros((skeleton.n_joints, 2), dtype=np.float64)
    valid = np.zeros(skeleton.n_joints, dtype=bool)
    for j, (iy, ix) in joint_pix.items():
        coords[j] = ((ix + 0.5) / w, (iy + 0.5) / h)
        valid[j] = True
    return Pose2D(coords, valid), labels


def transform_sample(sample, skeleton=None, angle_deg=0.0, scale=1.0, flip=False):
    """Geometric augmentation primitive: mirror, then rotate, then scale.

    2D coordinates move about the crop center (0.5, 0.5). The mirror negates
    metric x and permutes joints and part labels through the skeleton's flip
    pairs; in-plane rotation turns metric (x, y); scaling is an image-space
    operation and leaves metric coordinates untouched, so depth orderings
    survive every transform.
    """
    skeleton = skeleton or canonical_skeleton()
    check_positive("scale", scale)
    c2 = sample.pose2d.coords.copy()
    v2 = sample.pose2d.valid.copy()
    pose3d = sample.pose3d.copy() if sample.pose3d is not None else None
    ordinal = list(sample.ordinal) if sample.ordinal is not None else None

    if flip:
        perm = skeleton.flip_permutation()
        c2 = c2[perm]
        v2 = v2[perm]
        c2[:, 0] = 1.0 - c2[:, 0]
        if pose3d is not None:
            c3 = pose3d.coords[perm].copy()
            c3[:, 0] = -c3[:, 0]
            pose3d = Pose3D(c3, pose3d.valid[perm].copy())
        if ordinal is not None:
            pperm = skeleton.part_flip_permutation()
            flipped = [None] * skeleton.n_parts
            for k, r in enumerate(ordinal):
                flipped[int(pperm[k])] = r
            ordinal = flipped

    if angle_deg != 0.0:
        phi = math.radians(angle_deg)
        rot = np.array(
            [[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]]
        )
        c2 = (c2 - 0.5) @ rot.T + 0.5
        if pose3d is not None:
            c3 = pose3d.coords.copy()
            c3[:, :2] = c3[:, :2] @ rot.T
            pose3d = Pose3D(c3, pose3d.valid.copy())

    if scale != 1.0:
        c2 = (c2 - 0.5) * scale + 0.5

    return AnnotatedSample(
        kind=sample.kind,
        pose2d=Pose2D(c2, v2),
        pose3d=pose3d,
        ordinal=ordinal,
        action=sample.action,
    )


def augment(sample, rng, skeleton=None, rotation_deg=30.0, scale_range=(0.75, 1.25), flip_prob=0.5):
    """Random crop-space augmentation: rotation within +/- rotation_deg,
    scale within scale_range, horizontal flip with probability flip_prob."""
    angle = float(rng.uniform(-rotation_deg, rotation_deg))
    scale = float(rng.uniform(scale_range[0], scale_range[1]))
    flip = bool(rng.random() < flip_prob)
    return transform_sample(sample, skeleton, angle, scale, flip)


class HemletsEncoder(TransformerMixin, BaseEstimator):
    """Stateless transformer from annotated samples to training targets.

    transform(samples) -> list of TrainingTarget; inverse_transform(tensors)
    decodes triplet tensors back to (Pose2D, ordinal labels). fit only
    validates the configuration, keeping the estimator clone-friendly.
    """

    def __init__(
        self,
        resolution=(64, 64),
        sigma=2.0,
        epsilon_scale=0.5,
        truncation_radius=3.0,
        depth_window=2000.0,
        variant="hemlets",
        skeleton=None,
    ):
        self.resolution = resolution
        self.sigma = sigma
        self.epsilon_scale = epsilon_scale
        self.truncation_radius = truncation_radius
        self.depth_window = depth_window
        self.variant = variant
        self.skeleton = skeleton

    def _config(self):
        check_in_set("variant", self.variant, VARIANTS)
        return CodecConfig(
            heatmap_resolution=tuple(self.resolution),
            sigma=self.sigma,
            epsilon_scale=self.epsilon_scale,
            truncation_radius=self.truncation_radius,
            depth_window=self.depth_window,
        )

    def _skeleton(self):
        return self.skeleton or canonical_skeleton()

    def fit(self, X=None, y=None):
        self._config()
        return self

    def transform(self, X):
        config = self._config()
        skeleton = self._skeleton()
        return [encode_targets(s, skeleton, config, self.variant) for s in X]

    def inverse_transform(self, X):
        config = self._config()
        skeleton = self._skeleton()
        return [decode_hemlets(t, skeleton, config) for t in X]
