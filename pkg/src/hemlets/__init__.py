"""Part-centric heatmap supervision for 3D human pose.

The package encodes annotated poses into per-part heatmap stacks that carry
relative-depth polarity, decodes them back, turns score volumes into
coordinates through a differentiable soft-argmax, scores predictions with
the usual pose metrics, and ships a small self-contained training demo.
"""

__version__ = "0.1.0"

from .codec import (
    FIVE_STATE_EDGES,
    VARIANTS,
    CodecConfig,
    HemletsEncoder,
    TrainingTarget,
    adaptive_epsilon,
    augment,
    decode_hemlets,
    derive_ordinal_labels,
    elevation_angle,
    encode_2d_heatmaps,
    encode_2s,
    encode_5s,
    encode_hemlets,
    encode_targets,
    five_state_bin,
    polarity,
    render_gaussian,
    transform_sample,
)
from .errors import (
    AnnotationError,
    DegenerateGeometryError,
    DivergenceError,
    FormatError,
    HemletsError,
    InvalidJointError,
    ValidationError,
)
from .losses import (
    LossReport,
    heatmap2d_loss,
    hemlets_loss,
    intermediate_loss,
    joint3d_l1_loss,
    total_loss,
)
from .metrics import (
    MetricSummary,
    SimilarityTransform,
    auc,
    mpjpe,
    pa_mpjpe,
    pck3d,
    procrustes_align,
    summarize,
)
from .samples import (
    AnnotatedSample,
    AnnotationKind,
    format_sample,
    read_samples,
    write_samples,
)
from .skeleton import (
    FLIP_PAIRS,
    JOINT_NAMES,
    PART_TABLE,
    Pose2D,
    Pose3D,
    Skeleton,
    canonical_skeleton,
    part_length,
)
from .tensorio import read_tensor, write_tensor
from .trainer import (
    BONE_MM,
    Adam,
    DemoConfig,
    DemoReport,
    PoseRegressor,
    SynthSample,
    ToyPoseNet,
    evaluate_model,
    finite_difference_check,
    gradient_audit,
    predict_poses,
    prepare_targets,
    project_orthographic,
    synth_dataset,
    synth_pose,
    train_demo,
    train_step,
)
from .volumetric import (
    CoordFrame,
    SoftArgmaxDecoder,
    soft_argmax,
    soft_argmax_gradient,
)

__all__ = [
    "__version__",
    "FIVE_STATE_EDGES",
    "VARIANTS",
    "CodecConfig",
    "HemletsEncoder",
    "TrainingTarget",
    "adaptive_epsilon",
    "augment",
    "decode_hemlets",
    "derive_ordinal_labels",
    "elevation_angle",
    "encode_2d_heatmaps",
    "encode_2s",
    "encode_5s",
    "encode_hemlets",
    "encode_targets",
    "five_state_bin",
    "polarity",
    "render_gaussian",
    "transform_sample",
    "AnnotationError",
    "DegenerateGeometryError",
    "DivergenceError",
    "FormatError",
    "HemletsError",
    "InvalidJointError",
    "ValidationError",
    "LossReport",
    "heatmap2d_loss",
    "hemlets_loss",
    "intermediate_loss",
    "joint3d_l1_loss",
    "total_loss",
    "MetricSummary",
    "SimilarityTransform",
    "auc",
    "mpjpe",
    "pa_mpjpe",
    "pck3d",
    "procrustes_align",
    "summarize",
    "AnnotatedSample",
    "AnnotationKind",
    "format_sample",
    "read_samples",
    "write_samples",
    "FLIP_PAIRS",
    "JOINT_NAMES",
    "PART_TABLE",
    "Pose2D",
    "Pose3D",
    "Skeleton",
    "canonical_skeleton",
    "part_length",
    "read_tensor",
    "write_tensor",
    "BONE_MM",
    "Adam",
    "DemoConfig",
    "DemoReport",
    "PoseRegressor",
    "SynthSample",
    "ToyPoseNet",
    "evaluate_model",
    "finite_difference_check",
    "gradient_audit",
    "predict_poses",
    "prepare_targets",
    "project_orthographic",
    "synth_dataset",
    "synth_pose",
    "train_demo",
    "train_step",
    "CoordFrame",
    "SoftArgmaxDecoder",
    "soft_argmax",
    "soft_argmax_gradient",
]
