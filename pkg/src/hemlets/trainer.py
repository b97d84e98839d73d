"""Desk-scale training demo on synthetic poses.

Pieces: a forward-kinematic pose generator with fixed bone lengths and an
orthographic camera, a tiny fully connected network with hand-derived
backprop, an Adam optimizer, and a training loop that wires the loss stack
through the volumetric soft-argmax. Everything takes explicit RNGs and runs
single threaded, so identical configs replay bit-exactly.

Losses are per-sample sums; the trainer averages them over the batch before
the optimizer step, accumulating in fixed sample order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields as dataclass_fields

import numpy as np
from sklearn.base import BaseEstimator

from .codec import CodecConfig, derive_ordinal_labels, encode_targets
from .errors import DivergenceError, FormatError, ValidationError
from .losses import LossReport, heatmap2d_loss, hemlets_loss, joint3d_l1_loss
from .metrics import mpjpe, pa_mpjpe
from .samples import AnnotatedSample, AnnotationKind
from .skeleton import Pose2D, Pose3D, canonical_skeleton
from .volumetric import _axis_centers, soft_argmax, soft_argmax_gradient

# Fixed bone lengths (millimeters) for every part of the canonical skeleton.
BONE_MM = {
    "torso": 520.0,
    "neck_head": 140.0,
    "left_clavicle": 170.0,
    "right_clavicle": 170.0,
    "left_upper_arm": 280.0,
    "right_upper_arm": 280.0,
    "left_forearm": 250.0,
    "right_forearm": 250.0,
    "left_hip_link": 110.0,
    "right_hip_link": 110.0,
    "left_thigh": 440.0,
    "right_thigh": 440.0,
    "left_shin": 430.0,
    "right_shin": 430.0,
}
# Joints that are not part endpoints sit on fixed offsets of the torso/head.
SPINE_FRACTION = 0.45
THORAX_FRACTION = 0.80
HEAD_TOP_MM = 110.0

ACTIONS = ("walk", "sit", "reach", "wave")

ABLATION_ORDER = ("baseline", "with_2d", "with_hemlets", "full")


def _unit(v):
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValidationError("zero direction vector")
    return v / n


def _rotation(axis, angle):
    """Rodrigues rotation matrix about a unit axis."""
    x, y, z = _unit(np.asarray(axis, dtype=np.float64))
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def _tilted(center, polar, azim, ref=(1.0, 0.0, 0.0)):
    """Unit vector at angle ``polar`` from ``center``, spun by ``azim``."""
    center = _unit(np.asarray(center, dtype=np.float64))
    ref = np.asarray(ref, dtype=np.float64)
    if abs(center @ _unit(ref)) > 0.9:
        ref = np.array([0.0, 0.0, 1.0])
    perp = _unit(np.cross(center, ref))
    out = _rotation(perp, polar) @ center
    return _rotation(center, azim) @ out


def synth_pose(rng, skeleton=None):
    """One random articulated pose, millimeters, root-relative.

    The frame is x right, y down, z away from the camera. Part lengths match
    BONE_MM exactly; limb angles are drawn from loose anatomical ranges and a
    global rotation is applied last.
    """
    skeleton = skeleton or canonical_skeleton()
    if skeleton.part_names != canonical_skeleton().part_names:
        raise ValidationError("the synthetic generator only knows the canonical skeleton")
    j = {name: i for i, name in enumerate(skeleton.joint_names)}
    coords = np.zeros((skeleton.n_joints, 3))
    up = np.array([0.0, -1.0, 0.0])
    down = -up

    torso_dir = _tilted(up, rng.uniform(0.0, 0.6), rng.uniform(0.0, 2 * math.pi))
    neck = BONE_MM["torso"] * torso_dir
    coords[j["neck"]] = neck
    coords[j["spine"]] = SPINE_FRACTION * neck
    coords[j["thorax"]] = THORAX_FRACTION * neck

    head_dir = _tilted(torso_dir, rng.uniform(0.0, 0.35), rng.uniform(0.0, 2 * math.pi))
    coords[j["head"]] = neck + BONE_MM["neck_head"] * head_dir
    coords[j["head_top"]] = coords[j["head"]] + HEAD_TOP_MM * head_dir

    lateral = _unit(np.cross(np.array([0.0, 0.0, 1.0]), torso_dir))
    pelvis_axis = _rotation(torso_dir, rng.uniform(-0.4, 0.4)) @ lateral
    shoulder_axis = _rotation(torso_dir, rng.uniform(-0.45, 0.45)) @ lateral
    coords[j["left_hip"]] = BONE_MM["left_hip_link"] * pelvis_axis
    coords[j["right_hip"]] = -BONE_MM["right_hip_link"] * pelvis_axis
    coords[j["left_shoulder"]] = neck + BONE_MM["left_clavicle"] * shoulder_axis
    coords[j["right_shoulder"]] = neck - BONE_MM["right_clavicle"] * shoulder_axis

    for side in ("left", "right"):
        thigh_dir = _tilted(down, rng.uniform(0.0, 1.1), rng.uniform(0.0, 2 * math.pi))
        knee = coords[j[f"{side}_hip"]] + BONE_MM[f"{side}_thigh"] * thigh_dir
        coords[j[f"{side}_knee"]] = knee
        hinge = _rotation(thigh_dir, rng.uniform(0.0, 2 * math.pi)) @ _unit(
            np.cross(thigh_dir, up if abs(thigh_dir @ up) < 0.9 else np.array([1.0, 0.0, 0.0]))
        )
        shin_dir = _rotation(hinge, rng.uniform(0.0, 1.9)) @ thigh_dir
        coords[j[f"{side}_ankle"]] = knee + BONE_MM[f"{side}_shin"] * shin_dir

        arm_dir = _tilted(down, rng.uniform(0.0, 2.4), rng.uniform(0.0, 2 * math.pi))
        elbow = coords[j[f"{side}_shoulder"]] + BONE_MM[f"{side}_upper_arm"] * arm_dir
        coords[j[f"{side}_elbow"]] = elbow
        hinge = _rotation(arm_dir, rng.uniform(0.0, 2 * math.pi)) @ _unit(
            np.cross(arm_dir, up if abs(arm_dir @ up) < 0.9 else np.array([1.0, 0.0, 0.0]))
        )
        fore_dir = _rotation(hinge, rng.uniform(0.0, 2.3)) @ arm_dir
        coords[j[f"{side}_wrist"]] = elbow + BONE_MM[f"{side}_forearm"] * fore_dir

    spin = (
        _rotation(np.array([0.0, 0.0, 1.0]), rng.uniform(-0.25, 0.25))
        @ _rotation(np.array([1.0, 0.0, 0.0]), rng.uniform(-0.35, 0.35))
        @ _rotation(up, rng.uniform(0.0, 2 * math.pi))
    )
    return Pose3D.full(coords @ spin.T)


def project_orthographic(pose3d, margin=0.15):
    """Drop depth and fit the pose into the crop with an equal-axis scale.

    Returns (Pose2D, units_per_mm); every joint lands in
    [margin, 1 - margin]^2.
    """
    xy = pose3d.coords[:, :2]
    lo = xy.min(axis=0)
    hi = xy.max(axis=0)
    span = max(float(np.max(hi - lo)), 1e-6)
    scale = (1.0 - 2.0 * margin) / span
    center = (lo + hi) / 2.0
    return Pose2D.full(0.5 + (xy - center) * scale), scale


@dataclass
class SynthSample:
    """One generated training sample.

    ``sample`` is the supervision view (3D stripped for non-full3d kinds);
    ``true_pose3d`` keeps the generating pose for evaluation only.
    """

    sample: AnnotatedSample
    descriptor: np.ndarray  # (3 * n_joints,) noisy 2D plus corruption flags
    true_pose3d: Pose3D
    units_per_mm: float


def _descriptor(pose2d, rng, noise_std, occlusion_rate):
    n = pose2d.n_joints
    noisy = pose2d.coords + rng.normal(0.0, noise_std, size=(n, 2))
    corrupt = rng.random(n) < occlusion_rate
    noisy[corrupt] = 0.5
    return np.concatenate([noisy.ravel(), corrupt.astype(np.float64)])


def synth_dataset(
    rng,
    count,
    skeleton=None,
    kind_mix=(0.7, 0.2, 0.1),
    noise_std=0.02,
    occlusion_rate=0.15,
    epsilon_scale=0.5,
):
    """Generate ``count`` samples with the requested annotation-kind mix.

    ``rng`` is a numpy Generator (or an int seed). Ordinal-only samples carry
    labels derived from their own (discarded) 3D pose, so weak supervision is
    exercised without leaking coordinates.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    skeleton = skeleton or canonical_skeleton()
    if count <= 0:
        raise ValidationError("count must be positive")
    if len(kind_mix) != 3 or abs(sum(kind_mix) - 1.0) > 1e-9 or min(kind_mix) < 0:
        raise ValidationError("kind_mix must be three non-negative shares summing to 1")
    out = []
    for _ in range(int(count)):
        pose3d = synth_pose(rng, skeleton)
        pose2d, units = project_orthographic(pose3d)
        u = rng.random()
        action = ACTIONS[int(rng.integers(0, len(ACTIONS)))]
        labels = derive_ordinal_labels(pose3d, skeleton, epsilon_scale)
        if u < kind_mix[0]:
            sample = AnnotatedSample(
                AnnotationKind.FULL_3D, pose2d, pose3d, list(labels), action
            )
        elif u < kind_mix[0] + kind_mix[1]:
            sample = AnnotatedSample(
                AnnotationKind.ORDINAL_ONLY, pose2d, None, list(labels), action
            )
        else:
            sample = AnnotatedSample(AnnotationKind.TWO_D_ONLY, pose2d, None, None, action)
        descriptor = _descriptor(pose2d, rng, noise_std, occlusion_rate)
        out.append(SynthSample(sample.validate(skeleton), descriptor, pose3d, units))
    return out


class ToyPoseNet:
    """Fully connected trunk with three heads (part stacks, 2D heatmaps,
    score volumes). Forward/backward are hand written; forward works on
    batches (B, in) and backward returns parameter gradients summed over the
    batch.

    The volume head does not read the trunk features alone: the predicted
    part stacks are mean-pooled to a coarse grid, projected, and added to
    the trunk output first. Depth cues that supervision pushes into the
    stacks (which layer holds the child peak) therefore feed the volumes
    directly, which is the point of supervising an intermediate
    representation instead of only the final coordinates."""

    def __init__(
        self,
        skeleton=None,
        heatmap_size=16,
        volume_depth=16,
        hidden=(64,),
        n_states=3,
        seed=0,
        volume_size=None,
        scalar_head_bias=False,
        hem_pool=4,
    ):
        skeleton = skeleton or canonical_skeleton()
        volume_size = heatmap_size if volume_size is None else volume_size
        if int(heatmap_size) < 8 or int(volume_size) < 2 or int(volume_depth) < 2:
            raise ValidationError("model resolutions are too small")
        if int(hem_pool) < 1 or int(heatmap_size) % int(hem_pool) != 0:
            raise ValidationError("hem_pool must divide heatmap_size")
        self.skeleton = skeleton
        self.h = int(heatmap_size)
        self.vs = int(volume_size)
        self.d = int(volume_depth)
        self.n_states = int(n_states)
        self.scalar_head_bias = bool(scalar_head_bias)
        self.hidden = tuple(int(v) for v in hidden)
        if not self.hidden or min(self.hidden) < 1:
            raise ValidationError("hidden must name at least one positive width")
        n, k = skeleton.n_joints, skeleton.n_parts
        self.in_dim = 3 * n
        self.pool = int(hem_pool)
        self.hem_shape = (k, self.n_states, self.h, self.h)
        self.hm_shape = (n, self.h, self.h)
        self.vol_shape = (n, self.vs, self.vs, self.d)
        self.pool_dim = k * self.n_states * self.pool * self.pool
        rng = np.random.default_rng(seed)
        self.params = {}
        prev = self.in_dim
        for i, width in enumerate(self.hidden):
            self.params[f"W{i}"] = rng.normal(0.0, math.sqrt(2.0 / prev), (prev, width))
            self.params[f"b{i}"] = np.zeros(width)
            prev = width
        for name, shape in (
            ("hem", self.hem_shape),
            ("hm", self.hm_shape),
            ("vol", self.vol_shape),
        ):
            out_dim = int(np.prod(shape))
            # Small head weights start every map near zero: volumes decode to
            # the crop center and the squared losses see only the targets.
            self.params[f"W_{name}"] = rng.normal(0.0, 0.01 / math.sqrt(prev), (prev, out_dim))
            self.params[f"b_{name}"] = np.zeros(1 if self.scalar_head_bias else out_dim)
        # Projects the pooled part stacks into the trunk width for the
        # volume head; starts small so the fused input begins at the trunk.
        self.params["W_fuse"] = rng.normal(
            0.0, 0.01 / math.sqrt(self.pool_dim), (self.pool_dim, prev)
        )

    def n_params(self):
        return int(sum(p.size for p in self.params.values()))

    def _check_finite(self):
        for name, p in self.params.items():
            if not np.all(np.isfinite(p)):
                raise DivergenceError(f"parameter {name} became non-finite")

    def _pool_hem(self, hem):
        """Mean-pool part stacks (B, K, S, h, h) to the coarse fusion grid."""
        b = hem.shape[0]
        k, s = self.hem_shape[0], self.hem_shape[1]
        g, block = self.pool, self.h // self.pool
        grid = hem.reshape(b, k, s, g, block, g, block).mean(axis=(4, 6))
        return grid.reshape(b, self.pool_dim)

    def forward(self, descriptors):
        """descriptors (B, in) -> (hem (B,K,S,h,h), hm (B,N,h,h),
        vol (B,N,vs,vs,d), cache)."""
        self._check_finite()
        x = np.asarray(descriptors, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValidationError(f"descriptors must be (B, {self.in_dim})")
        acts = [x]
        for i in range(len(self.hidden)):
            pre = acts[-1] @ self.params[f"W{i}"] + self.params[f"b{i}"]
            acts.append(np.maximum(pre, 0.0))
        top = acts[-1]
        b = x.shape[0]
        hem = (top @ self.params["W_hem"] + self.params["b_hem"]).reshape((b,) + self.hem_shape)
        hm = (top @ self.params["W_hm"] + self.params["b_hm"]).reshape((b,) + self.hm_shape)
        pooled = self._pool_hem(hem)
        fused = top + pooled @ self.params["W_fuse"]
        vol = (fused @ self.params["W_vol"] + self.params["b_vol"]).reshape(
            (b,) + self.vol_shape
        )
        cache = {"acts": acts, "pooled": pooled, "fused": fused}
        return hem, hm, vol, cache

    def backward(self, cache, g_hem, g_hm, g_vol):
        """Parameter gradients (summed over the batch) for head gradients
        shaped like the forward outputs.

        The volume gradient reaches the part-stack head twice: through the
        fused input (pooled stacks) and through the trunk, on top of the
        stack head's own loss gradient."""
        acts = cache["acts"]
        pooled, fused = cache["pooled"], cache["fused"]
        b = acts[0].shape[0]
        top = acts[-1]
        grads = {}

        def head_bias(name, flat):
            if self.params[f"b_{name}"].size == 1:  # scalar bias broadcast
                return np.array([flat.sum()])
            return flat.sum(axis=0)

        gv = np.asarray(g_vol, dtype=np.float64).reshape(b, -1)
        grads["W_vol"] = fused.T @ gv
        grads["b_vol"] = head_bias("vol", gv)
        g_fused = gv @ self.params["W_vol"].T
        grads["W_fuse"] = pooled.T @ g_fused
        g_pooled = g_fused @ self.params["W_fuse"].T

        # Mean pooling spreads each coarse-cell gradient evenly over its
        # block of stack pixels.
        k, s = self.hem_shape[0], self.hem_shape[1]
        g, block = self.pool, self.h // self.pool
        g_grid = g_pooled.reshape(b, k, s, g, 1, g, 1) / float(block * block)
        g_hem_total = np.asarray(g_hem, dtype=np.float64) + np.broadcast_to(
            g_grid, (b, k, s, g, block, g, block)
        ).reshape((b,) + self.hem_shape)

        gh = g_hem_total.reshape(b, -1)
        grads["W_hem"] = top.T @ gh
        grads["b_hem"] = head_bias("hem", gh)
        gm = np.asarray(g_hm, dtype=np.float64).reshape(b, -1)
        grads["W_hm"] = top.T @ gm
        grads["b_hm"] = head_bias("hm", gm)

        g_top = g_fused + gh @ self.params["W_hem"].T + gm @ self.params["W_hm"].T
        g_act = g_top
        for i in range(len(self.hidden) - 1, -1, -1):
            g_pre = g_act * (acts[i + 1] > 0.0)
            grads[f"W{i}"] = acts[i].T @ g_pre
            grads[f"b{i}"] = g_pre.sum(axis=0)
            g_act = g_pre @ self.params[f"W{i}"].T
        return grads


class Adam:
    """Adam with bias correction; moments live here, parameters stay with
    the model. A zero gradient (or zero learning rate) leaves parameters
    bit-identical."""

    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        if learning_rate < 0.0:
            raise ValidationError("learning_rate must be non-negative")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ValidationError("betas must lie in [0, 1)")
        if epsilon <= 0.0:
            raise ValidationError("epsilon must be positive")
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.epsilon = float(epsilon)
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        if set(grads) != set(params):
            raise ValidationError("gradient keys do not match parameters")
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for key, p in params.items():
            g = grads[key]
            m = self.m[key]
            v = self.v[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / b1c) / (np.sqrt(v / b2c) + self.epsilon)


def prepare_targets(samples, skeleton=None, config=None, variant="hemlets"):
    """Encode a list of SynthSamples once; returns (descriptors, targets)."""
    skeleton = skeleton or canonical_skeleton()
    config = config or CodecConfig()
    descs = np.stack([s.descriptor for s in samples])
    targets = [encode_targets(s.sample, skeleton, config, variant) for s in samples]
    return descs, targets


def _soft_argmax_stack(vols):
    """Softmax fields and expected (x, y, z) rows for stacked volumes.

    Vectorized twin of the single-volume soft_argmax: (m, h, w, d) scores in,
    ((m, h, w, d) fields, (m, 3) coords) out, same formulas per row.
    """
    m, h, w, d = vols.shape
    flat = vols.reshape(m, -1)
    e = np.exp(flat - flat.max(axis=1, keepdims=True))
    p = (e / e.sum(axis=1, keepdims=True)).reshape(m, h, w, d)
    x = p.sum(axis=(1, 3)) @ _axis_centers(w)
    y = p.sum(axis=(2, 3)) @ _axis_centers(h)
    z = p.sum(axis=(1, 2)) @ _axis_centers(d)
    return p, np.stack([x, y, z], axis=1)


def _soft_argmax_stack_gradient(fields, coords, upstream):
    """Score gradients for stacked volumes given (m, 3) upstream rows."""
    m, h, w, d = fields.shape
    sy = upstream[:, 1, None] * _axis_centers(h)
    sx = upstream[:, 0, None] * _axis_centers(w)
    sz = upstream[:, 2, None] * _axis_centers(d)
    s = sy[:, :, None, None] + sx[:, None, :, None] + sz[:, None, None, :]
    dot = (upstream * coords).sum(axis=1)
    return fields * (s - dot[:, None, None, None])


def train_step(model, optimizer, descriptors, targets, alpha=0.05, use_hem=True, use_2d=True):
    """One optimizer update on a batch; returns the batch-mean LossReport.

    The objective is alpha * (included intermediate losses) + the coordinate
    loss; excluded components are reported as zero and contribute nothing to
    the gradients.
    """
    if alpha < 0.0:
        raise ValidationError("alpha must be non-negative")
    b = len(targets)
    if b == 0 or descriptors.shape[0] != b:
        raise ValidationError("batch descriptors and targets must align")
    hem, hm, vol, cache = model.forward(descriptors)
    g_hem = np.zeros_like(hem)
    g_hm = np.zeros_like(hm)
    sums = np.zeros(3)  # hem, heat2d, joint3d
    n_joints = model.vol_shape[0]
    fields, coords_flat = _soft_argmax_stack(vol.reshape((-1,) + vol.shape[2:]))
    coords_all = coords_flat.reshape(b, n_joints, 3)
    g3_all = np.empty((b, n_joints, 3))
    for i, tgt in enumerate(targets):
        if use_hem:
            value, grad = hemlets_loss(hem[i], tgt.hemlets, tgt.mask_hem)
            sums[0] += value
            g_hem[i] = alpha * grad
        if use_2d:
            value, grad = heatmap2d_loss(hm[i], tgt.heatmaps2d)
            sums[1] += value
            g_hm[i] = alpha * grad
        value, grad = joint3d_l1_loss(coords_all[i], tgt.coords3d, tgt.lambda_z)
        sums[2] += value
        g3_all[i] = grad
    if not np.all(np.isfinite(sums)):
        raise DivergenceError("loss became non-finite")
    g_vol = _soft_argmax_stack_gradient(
        fields, coords_flat, g3_all.reshape(-1, 3)
    ).reshape(vol.shape)
    grads = model.backward(cache, g_hem, g_hm, g_vol)
    for key in grads:
        grads[key] /= b
        if not np.all(np.isfinite(grads[key])):
            raise DivergenceError(f"gradient for {key} became non-finite")
    optimizer.step(model.params, grads)
    hem_mean, heat_mean, joint_mean = (float(v) / b for v in sums)
    return LossReport(
        total=alpha * (hem_mean + heat_mean) + joint_mean,
        hem=hem_mean,
        heat2d=heat_mean,
        joint3d=joint_mean,
        alpha=alpha,
    ).check()


def predict_poses(model, samples, depth_window):
    """Decode metric poses (n, n_joints, 3) for a list of SynthSamples."""
    descs = np.stack([s.descriptor for s in samples])
    _, _, vol, _ = model.forward(descs)
    n_joints = model.vol_shape[0]
    _, flat = _soft_argmax_stack(vol.reshape((-1,) + vol.shape[2:]))
    norm = flat.reshape(len(samples), n_joints, 3)
    out = np.empty_like(norm)
    for i, s in enumerate(samples):
        out[i, :, 0] = (norm[i, :, 0] - 0.5) / s.units_per_mm
        out[i, :, 1] = (norm[i, :, 1] - 0.5) / s.units_per_mm
        out[i, :, 2] = (norm[i, :, 2] - 0.5) * depth_window
    return out


def evaluate_model(model, samples, depth_window, skeleton=None):
    """Mean MPJPE and PA-MPJPE (millimeters) against the generating poses."""
    skeleton = skeleton or canonical_skeleton()
    preds = predict_poses(model, samples, depth_window)
    e1 = [mpjpe(Pose3D.full(p), s.true_pose3d, skeleton) for p, s in zip(preds, samples)]
    e2 = [pa_mpjpe(Pose3D.full(p), s.true_pose3d, skeleton) for p, s in zip(preds, samples)]
    return float(np.mean(e1)), float(np.mean(e2))


def finite_difference_check(
    seed=0,
    heatmap_size=8,
    volume_size=4,
    volume_depth=2,
    hidden=(1,),
    step=1e-5,
    skeleton=None,
):
    """Central-difference audit of the end-to-end objective gradient.

    Builds a model small enough to sweep exhaustively (every parameter
    entry; the defaults give 4642 of them), one fully annotated synthetic
    sample, and compares analytic gradients of alpha * (hem + 2d) + the
    coordinate loss against central differences. Returns
    (max_relative_error, n_params); the relative error uses scale
    max(1, |analytic|, |numeric|).
    """
    skeleton = skeleton or canonical_skeleton()
    config = CodecConfig(
        heatmap_resolution=(heatmap_size, heatmap_size), sigma=0.8, depth_window=2600.0
    )
    data = synth_dataset(np.random.default_rng(seed), 1, skeleton, kind_mix=(1.0, 0.0, 0.0))
    descs, targets = prepare_targets(data, skeleton, config)
    target = targets[0]
    model = ToyPoseNet(
        skeleton,
        heatmap_size=heatmap_size,
        volume_depth=volume_depth,
        hidden=hidden,
        n_states=3,
        seed=seed,
        volume_size=volume_size,
        scalar_head_bias=True,
        hem_pool=2,
    )
    alpha = 0.05

    def objective():
        hem, hm, vol, _ = model.forward(descs)
        v1, _ = hemlets_loss(hem[0], target.hemlets, target.mask_hem)
        v2, _ = heatmap2d_loss(hm[0], target.heatmaps2d)
        _, coords = _soft_argmax_stack(vol[0])
        v3, _ = joint3d_l1_loss(coords, target.coords3d, target.lambda_z)
        return alpha * (v1 + v2) + v3

    hem, hm, vol, cache = model.forward(descs)
    _, g1 = hemlets_loss(hem[0], target.hemlets, target.mask_hem)
    _, g2 = heatmap2d_loss(hm[0], target.heatmaps2d)
    fields, coords = _soft_argmax_stack(vol[0])
    _, g3 = joint3d_l1_loss(coords, target.coords3d, target.lambda_z)
    g_vol = _soft_argmax_stack_gradient(fields, coords, g3)
    grads = model.backward(cache, (alpha * g1)[None], (alpha * g2)[None], g_vol[None])

    worst = 0.0
    for key in sorted(model.params):
        flat = model.params[key].reshape(-1)
        gflat = grads[key].reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + step
            f_plus = objective()
            flat[i] = saved - step
            f_minus = objective()
            flat[i] = saved
            numeric = (f_plus - f_minus) / (2.0 * step)
            rel = abs(numeric - gflat[i]) / max(1.0, abs(numeric), abs(gflat[i]))
            worst = max(worst, rel)
    return float(worst), model.n_params()


def _fd_sweep(value_and_grad, x, step, skip=None):
    """Max relative error of an analytic gradient over every entry of x."""
    value, grad = value_and_grad(x)
    flat = x.reshape(-1)
    gflat = np.asarray(grad).reshape(-1)
    worst = 0.0
    for i in range(flat.size):
        if skip is not None and skip(i):
            continue
        saved = flat[i]
        flat[i] = saved + step
        f_plus = value_and_grad(x)[0]
        flat[i] = saved - step
        f_minus = value_and_grad(x)[0]
        flat[i] = saved
        numeric = (f_plus - f_minus) / (2.0 * step)
        worst = max(worst, abs(numeric - gflat[i]) / max(1.0, abs(numeric), abs(gflat[i])))
    return float(worst), flat.size


def gradient_audit(seed=0, step=1e-5):
    """Finite-difference table over every differentiable operation.

    Returns a list of (op name, entries checked, max relative error) rows:
    the three losses, the soft-argmax, and the end-to-end network objective.
    L1 entries within 1e-6 of the kink are skipped.
    """
    rng = np.random.default_rng(seed)
    rows = []

    volume = rng.normal(0.0, 1.0, (5, 4, 3))
    upstream = rng.normal(0.0, 1.0, 3)

    def sa(v):
        return float(upstream @ soft_argmax(v)), soft_argmax_gradient(v, upstream)

    worst, n = _fd_sweep(sa, volume, 1e-4)
    rows.append(("soft_argmax", n, worst))

    pred = rng.normal(0.0, 1.0, (3, 3, 8, 8))
    tgt = rng.normal(0.0, 1.0, (3, 3, 8, 8))
    mask = (rng.random((3, 3)) < 0.7).astype(np.float64)

    def hl(p):
        return hemlets_loss(p, tgt, mask)

    worst, n = _fd_sweep(hl, pred, step)
    rows.append(("hemlets_loss", n, worst))

    hm_pred = rng.normal(0.0, 1.0, (4, 8, 8))
    hm_tgt = rng.normal(0.0, 1.0, (4, 8, 8))

    def h2(p):
        return heatmap2d_loss(p, hm_tgt)

    worst, n = _fd_sweep(h2, hm_pred, step)
    rows.append(("heatmap2d_loss", n, worst))

    c_pred = rng.normal(0.0, 1.0, (6, 3))
    c_tgt = rng.normal(0.0, 1.0, (6, 3))
    diffs = np.abs(c_pred - c_tgt).reshape(-1)

    def l1(p):
        return joint3d_l1_loss(p, c_tgt, 1.0)

    worst, n = _fd_sweep(l1, c_pred, step, skip=lambda i: diffs[i] < 1e-6)
    rows.append(("joint3d_l1_loss", n, worst))

    worst, n = finite_difference_check(seed=seed, step=step)
    rows.append(("network", n, worst))
    return rows


@dataclass
class DemoConfig:
    """Knobs for the self-contained demo; parsed from key = value files."""

    seed: int = 0
    train_count: int = 160
    eval_count: int = 40
    heatmap_size: int = 16
    volume_size: int = 12
    volume_depth: int = 8
    hidden: tuple = (64,)
    steps: int = 400
    batch_size: int = 16
    learning_rate: float = 1e-3
    alpha: float = 0.05
    sigma: float = 1.0
    epsilon_scale: float = 0.5
    truncation_radius: float = 3.0
    noise_std: float = 0.025
    occlusion_rate: float = 0.15
    kind_mix: tuple = (0.7, 0.2, 0.1)
    depth_window: float = 2600.0
    variant: str = "hemlets"
    curve_every: int = 20
    variant_curves: bool = True
    variant_curve_steps: int = 120

    def __post_init__(self):
        if self.train_count < 1 or self.eval_count < 1:
            raise ValidationError("sample counts must be positive")
        if self.steps < 1 or self.batch_size < 1:
            raise ValidationError("steps and batch_size must be positive")
        if self.curve_every < 1:
            raise ValidationError("curve_every must be positive")
        if self.variant not in ("hemlets", "2s", "5s"):
            raise ValidationError(f"unknown variant {self.variant!r}")
        if self.variant == "5s" and (self.kind_mix[1] > 0 or self.kind_mix[2] > 0):
            raise ValidationError(
                "the five-state layout needs full 3D data; set kind_mix = 1,0,0"
            )

    def codec_config(self):
        return CodecConfig(
            heatmap_resolution=(self.heatmap_size, self.heatmap_size),
            sigma=self.sigma,
            epsilon_scale=self.epsilon_scale,
            truncation_radius=self.truncation_radius,
            depth_window=self.depth_window,
        )

    def to_lines(self):
        lines = []
        for f in dataclass_fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                value = str(value).lower()
            elif isinstance(value, tuple):
                value = ",".join(repr(v) for v in value)
            lines.append(f"config {f.name} = {value}")
        return lines

    @classmethod
    def from_file(cls, path):
        kwargs = {}
        types = {f.name: f for f in dataclass_fields(cls)}
        with open(path, "r", encoding="ascii") as fh:
            for raw in fh:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                # accept the 'config ' prefix report logs use, so a report's
                # config block can be fed straight back in
                if line.startswith("config "):
                    line = line[len("config "):]
                if "=" not in line:
                    raise FormatError(f"config line without '=': {line!r}")
                key, _, value = (part.strip() for part in line.partition("="))
                if key not in types:
                    raise FormatError(f"unknown config key {key!r}")
                default = getattr(cls, key, types[key].default)
                try:
                    if isinstance(default, bool):
                        if value.lower() not in ("true", "false", "0", "1"):
                            raise ValueError(value)
                        kwargs[key] = value.lower() in ("true", "1")
                    elif isinstance(default, int):
                        kwargs[key] = int(value)
                    elif isinstance(default, float):
                        kwargs[key] = float(value)
                    elif isinstance(default, tuple):
                        parts = [p for p in value.split(",") if p]
                        conv = int if all(isinstance(v, int) for v in default) else float
                        kwargs[key] = tuple(conv(p) for p in parts)
                    else:
                        kwargs[key] = value
                except ValueError as exc:
                    raise FormatError(f"bad value for {key!r}: {value!r}") from exc
        return cls(**kwargs)


@dataclass
class DemoReport:
    config: DemoConfig
    rows: list  # (name, final_total, eval_mpjpe, eval_pa_mpjpe) in ABLATION_ORDER
    curves: dict  # name -> list of (step, total, hem, heat2d, joint3d)
    variant_curves: dict  # variant -> list of (step, heldout hem loss)
    n_params: int = 0

    def mpjpe_by_name(self):
        return {name: m for name, _, m, _ in self.rows}

    def ordering_improves(self):
        m = self.mpjpe_by_name()
        return (
            m["full"] <= m["with_hemlets"] <= m["with_2d"] <= m["baseline"]
        )

    def full_gain_over_baseline(self):
        m = self.mpjpe_by_name()
        return 1.0 - m["full"] / m["baseline"]

    def to_lines(self):
        lines = ["train demo v1"]
        lines.extend(self.config.to_lines())
        lines.append(f"model_params {self.n_params}")
        for name, final_total, e1, e2 in self.rows:
            lines.append(
                f"row {name} final_total {final_total!r} mpjpe {e1!r} pa_mpjpe {e2!r}"
            )
        lines.append(f"ordering_improves {str(self.ordering_improves()).lower()}")
        lines.append(f"full_gain_over_baseline {self.full_gain_over_baseline()!r}")
        lines.append("end")
        return lines

    def write(self, outdir):
        import os

        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "report.txt"), "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(self.to_lines()) + "\n")
        with open(os.path.join(outdir, "curves.csv"), "w", encoding="ascii", newline="\n") as fh:
            fh.write("variant,step,total,hem,heat2d,joint3d\n")
            for name in ABLATION_ORDER:
                for step, total, hem, heat, joint in self.curves[name]:
                    fh.write(f"{name},{step},{total!r},{hem!r},{heat!r},{joint!r}\n")
        if self.variant_curves:
            path = os.path.join(outdir, "hem_variants.csv")
            with open(path, "w", encoding="ascii", newline="\n") as fh:
                fh.write("variant,step,heldout_hem\n")
                for name, rows in self.variant_curves.items():
                    for step, value in rows:
                        fh.write(f"{name},{step},{value!r}\n")


def _run_training(model, optimizer, descs, targets, config, rng, use_hem, use_2d):
    n = len(targets)
    curve = []
    for step in range(config.steps):
        idx = rng.integers(0, n, size=min(config.batch_size, n))
        report = train_step(
            model,
            optimizer,
            descs[idx],
            [targets[i] for i in idx],
            alpha=config.alpha,
            use_hem=use_hem,
            use_2d=use_2d,
        )
        if step % config.curve_every == 0 or step == config.steps - 1:
            curve.append((step, report.total, report.hem, report.heat2d, report.joint3d))
    return curve


def train_demo(config=None, skeleton=None):
    """Run the four supervision ablations (and optional layout comparison)
    on one shared synthetic dataset; returns a DemoReport."""
    config = config or DemoConfig()
    skeleton = skeleton or canonical_skeleton()
    codec_config = config.codec_config()
    data_rng = np.random.default_rng(config.seed)
    train_samples = synth_dataset(
        data_rng,
        config.train_count,
        skeleton,
        kind_mix=config.kind_mix,
        noise_std=config.noise_std,
        occlusion_rate=config.occlusion_rate,
        epsilon_scale=config.epsilon_scale,
    )
    eval_samples = synth_dataset(
        np.random.default_rng(config.seed + 1),
        config.eval_count,
        skeleton,
        kind_mix=(1.0, 0.0, 0.0),
        noise_std=config.noise_std,
        occlusion_rate=config.occlusion_rate,
        epsilon_scale=config.epsilon_scale,
    )
    descs, targets = prepare_targets(train_samples, skeleton, codec_config, config.variant)

    flags = {
        "baseline": (False, False),
        "with_2d": (False, True),
        "with_hemlets": (True, False),
        "full": (True, True),
    }
    rows = []
    curves = {}
    n_params = 0
    for name in ABLATION_ORDER:
        use_hem, use_2d = flags[name]
        model = ToyPoseNet(
            skeleton,
            heatmap_size=config.heatmap_size,
            volume_depth=config.volume_depth,
            hidden=config.hidden,
            n_states=5 if config.variant == "5s" else 3,
            seed=config.seed,
            volume_size=config.volume_size,
        )
        n_params = model.n_params()
        optimizer = Adam(model.params, learning_rate=config.learning_rate)
        rng = np.random.default_rng(config.seed + 2)
        curve = _run_training(model, optimizer, descs, targets, config, rng, use_hem, use_2d)
        e1, e2 = evaluate_model(model, eval_samples, config.depth_window, skeleton)
        rows.append((name, curve[-1][1], e1, e2))
        curves[name] = curve

    variant_curves = {}
    if config.variant_curves:
        full3d_train = [s for s in train_samples if s.sample.kind is AnnotationKind.FULL_3D]
        for variant, states in (("hemlets", 3), ("2s", 3), ("5s", 5)):
            vdescs, vtargets = prepare_targets(full3d_train, skeleton, codec_config, variant)
            hdescs, htargets = prepare_targets(eval_samples, skeleton, codec_config, variant)
            model = ToyPoseNet(
                skeleton,
                heatmap_size=config.heatmap_size,
                volume_depth=config.volume_depth,
                hidden=config.hidden,
                n_states=states,
                seed=config.seed,
                volume_size=config.volume_size,
            )
            optimizer = Adam(model.params, learning_rate=config.learning_rate)
            rng = np.random.default_rng(config.seed + 3)
            rows_v = []
            for step in range(config.variant_curve_steps):
                idx = rng.integers(0, len(vtargets), size=min(config.batch_size, len(vtargets)))
                train_step(
                    model,
                    optimizer,
                    vdescs[idx],
                    [vtargets[i] for i in idx],
                    alpha=config.alpha,
                )
                if step % config.curve_every == 0 or step == config.variant_curve_steps - 1:
                    hem_pred, _, _, _ = model.forward(hdescs)
                    vals = [
                        hemlets_loss(hem_pred[i], t.hemlets, t.mask_hem)[0]
                        for i, t in enumerate(htargets)
                    ]
                    rows_v.append((step, float(np.mean(vals))))
            variant_curves[variant] = rows_v

    return DemoReport(config, rows, curves, variant_curves, n_params)


class PoseRegressor(BaseEstimator):
    """sklearn-style front door to the demo trainer.

    fit(samples) trains a fresh ToyPoseNet on SynthSamples; predict(samples)
    returns metric poses (n, n_joints, 3); score is negative MPJPE so larger
    is better.
    """

    def __init__(
        self,
        heatmap_size=16,
        volume_size=12,
        volume_depth=8,
        hidden=(64,),
        steps=400,
        batch_size=16,
        learning_rate=1e-3,
        alpha=0.05,
        use_hem=True,
        use_2d=True,
        sigma=1.0,
        epsilon_scale=0.5,
        depth_window=2600.0,
        seed=0,
    ):
        self.heatmap_size = heatmap_size
        self.volume_size = volume_size
        self.volume_depth = volume_depth
        self.hidden = hidden
        self.steps = steps
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.alpha = alpha
        self.use_hem = use_hem
        self.use_2d = use_2d
        self.sigma = sigma
        self.epsilon_scale = epsilon_scale
        self.depth_window = depth_window
        self.seed = seed

    def fit(self, X, y=None):
        skeleton = canonical_skeleton()
        config = CodecConfig(
            heatmap_resolution=(self.heatmap_size, self.heatmap_size),
            sigma=self.sigma,
            epsilon_scale=self.epsilon_scale,
            depth_window=self.depth_window,
        )
        descs, targets = prepare_targets(X, skeleton, config, "hemlets")
        self.model_ = ToyPoseNet(
            skeleton,
            heatmap_size=self.heatmap_size,
            volume_depth=self.volume_depth,
            hidden=self.hidden,
            n_states=3,
            seed=self.seed,
            volume_size=self.volume_size,
        )
        optimizer = Adam(self.model_.params, learning_rate=self.learning_rate)
        rng = np.random.default_rng(self.seed + 2)
        self.history_ = []
        n = len(targets)
        for step in range(self.steps):
            idx = rng.integers(0, n, size=min(self.batch_size, n))
            report = train_step(
                self.model_,
                optimizer,
                descs[idx],
                [targets[i] for i in idx],
                alpha=self.alpha,
                use_hem=self.use_hem,
                use_2d=self.use_2d,
            )
            self.history_.append(report.total)
        return self

    def predict(self, X):
        return predict_poses(self.model_, X, self.depth_window)

    def score(self, X, y=None):
        e1, _ = evaluate_model(self.model_, X, self.depth_window)
        return -e1
