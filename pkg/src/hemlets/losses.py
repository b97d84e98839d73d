"""Loss stack with hand-derived gradients.

Every loss is a per-sample sum (not a mean); batch averaging is the
trainer's job. Each function returns (value, gradient-with-respect-to-the-
prediction) so the training loop can backpropagate without an autograd
framework.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ValidationError
from .validation import check_finite, check_same_shape


def _pair(name, pred, target):
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    check_same_shape(f"predicted {name}", p, f"target {name}", t)
    check_finite(f"predicted {name}", p)
    check_finite(f"target {name}", t)
    return p, t


def hemlets_loss(pred, target, mask):
    """Masked squared error over the part-state stacks.

    value = sum((target - pred)^2 * mask), gradient = 2 * (pred - target) * mask.
    mask is binary, shaped (n_parts, n_states) and broadcast over pixels, or
    already expanded to the full tensor shape.
    """
    p, t = _pair("hemlets", pred, target)
    m = np.asarray(mask, dtype=np.float64)
    if m.shape == p.shape[:2]:
        m = m[:, :, None, None]
    elif m.shape != p.shape:
        raise ValidationError(
            f"mask shape {m.shape} fits neither {p.shape[:2]} nor {p.shape}"
        )
    if not np.all((m == 0.0) | (m == 1.0)):
        raise ValidationError("mask entries must be 0 or 1")
    diff = p - t
    value = float(np.sum(diff * diff * m))
    return value, 2.0 * diff * m


def heatmap2d_loss(pred, target):
    """Plain squared error summed over all joints and pixels."""
    p, t = _pair("heatmaps", pred, target)
    diff = p - t
    return float(np.sum(diff * diff)), 2.0 * diff


def joint3d_l1_loss(pred, target, lambda_z=1.0):
    """Per-axis absolute error, summed over joints, with the z term scaled by
    lambda_z (0 when no metric depth supervision exists).

    The subgradient at zero is taken as 0 (np.sign convention).
    """
    p, t = _pair("coords", pred, target)
    if p.ndim != 2 or p.shape[1] != 3:
        raise ValidationError(f"coords must be (n, 3), got {p.shape}")
    lam = float(lambda_z)
    if lam not in (0.0, 1.0):
        raise ValidationError("lambda_z must be 0 or 1")
    diff = p - t
    weights = np.array([1.0, 1.0, lam])
    value = float(np.sum(np.abs(diff) * weights))
    return value, np.sign(diff) * weights


def intermediate_loss(pred_hemlets, target_hemlets, mask, pred_heatmaps, target_heatmaps):
    """Sum of the part-state loss and the 2D heatmap loss (value only)."""
    hem, _ = hemlets_loss(pred_hemlets, target_hemlets, mask)
    heat, _ = heatmap2d_loss(pred_heatmaps, target_heatmaps)
    return hem + heat


@dataclass
class LossReport:
    """One evaluation of the total objective, with its components.

    total must equal alpha * (hem + heat2d) + joint3d; check() enforces this
    to one part in 1e9. gradients, when present, maps 'hemlets', 'heatmaps2d'
    and 'coords3d' to arrays shaped like the corresponding predictions.
    """

    total: float
    hem: float
    heat2d: float
    joint3d: float
    alpha: float = 0.05
    gradients: dict | None = field(default=None, repr=False)

    @property
    def components(self):
        return {"hem": self.hem, "heat2d": self.heat2d, "joint3d": self.joint3d}

    def check(self):
        expected = self.alpha * (self.hem + self.heat2d) + self.joint3d
        scale = max(abs(expected), abs(self.total), 1.0)
        if abs(self.total - expected) > 1e-9 * scale:
            raise ValidationError("loss report components do not add up")
        return self

    def to_line(self):
        return (
            f"total={self.total!r} hem={self.hem!r} heat2d={self.heat2d!r} "
            f"joint3d={self.joint3d!r} alpha={self.alpha!r}"
        )

    @classmethod
    def from_line(cls, line):
        fields = {}
        for token in line.split():
            if "=" not in token:
                raise FormatError(f"bad loss report token {token!r}")
            key, _, value = token.partition("=")
            try:
                fields[key] = float(value)
            except ValueError as exc:
                raise FormatError(f"bad loss report value {token!r}") from exc
        try:
            return cls(
                total=fields["total"],
                hem=fields["hem"],
                heat2d=fields["heat2d"],
                joint3d=fields["joint3d"],
                alpha=fields.get("alpha", 0.05),
            ).check()
        except KeyError as exc:
            raise FormatError(f"loss report line missing {exc}") from None
        except ValidationError as exc:
            raise FormatError(str(exc)) from exc


def total_loss(
    pred_hemlets,
    target_hemlets,
    mask,
    pred_heatmaps,
    target_heatmaps,
    pred_coords,
    target_coords,
    lambda_z=1.0,
    alpha=0.05,
):
    """Full objective: alpha-weighted intermediate supervision plus the
    coordinate loss. Returns a LossReport carrying gradients for all three
    prediction tensors."""
    if alpha < 0.0:
        raise ValidationError("alpha must be non-negative")
    hem, g_hem = hemlets_loss(pred_hemlets, target_hemlets, mask)
    heat, g_heat = heatmap2d_loss(pred_heatmaps, target_heatmaps)
    joint, g_joint = joint3d_l1_loss(pred_coords, target_coords, lambda_z)
    report = LossReport(
        total=alpha * (hem + heat) + joint,
        hem=hem,
        heat2d=heat,
        joint3d=joint,
        alpha=alpha,
        gradients={
            "hemlets": alpha * g_hem,
            "heatmaps2d": alpha * g_heat,
            "coords3d": g_joint,
        },
    )
    return report.check()
