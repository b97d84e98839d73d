"""Differentiable volumetric decoding.

A joint's score volume is indexed [row, column, depth] = [y, x, z]. The
softmax over all h*w*d entries turns scores into a probability field; the
decoded coordinate is the probability-weighted mean of voxel centers, where
voxel i along an axis of extent n has center (i + 0.5) / n, so outputs live
in (0, 1)^3. The analytic derivative of this expectation is

    d(u . coords)/d(score_v) = p_v * (u . (x_v - coords))

for an upstream row vector u, implemented in soft_argmax_gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ValidationError
from .validation import as_float_array, check_finite, check_positive


def _check_volume(volume):
    vol = np.asarray(volume, dtype=np.float64)
    if vol.ndim != 3:
        raise ValidationError(f"expected a (h, w, d) volume, got shape {vol.shape}")
    if 0 in vol.shape:
        raise ValidationError("volume has an empty dimension")
    if not np.all(np.isfinite(vol)):
        raise ValidationError("volume scores must be finite")
    return vol


def _axis_centers(n):
    return (np.arange(n, dtype=np.float64) + 0.5) / n


def _softmax_field(vol):
    e = np.exp(vol - vol.max())
    return e / e.sum()


def soft_argmax(volume):
    """Expected (x, y, z) of the softmax field, in normalized coordinates."""
    vol = _check_volume(volume)
    h, w, d = vol.shape
    p = _softmax_field(vol)
    x = float(p.sum(axis=(0, 2)) @ _axis_centers(w))
    y = float(p.sum(axis=(1, 2)) @ _axis_centers(h))
    z = float(p.sum(axis=(0, 1)) @ _axis_centers(d))
    return np.array([x, y, z])


def soft_argmax_gradient(volume, upstream):
    """Gradient of (upstream . soft_argmax(volume)) with respect to the scores.

    Rows sum to zero along every axis: shifting all scores by a constant
    cannot move the expectation.
    """
    vol = _check_volume(volume)
    up = as_float_array("upstream", upstream, shape=(3,))
    check_finite("upstream", up)
    h, w, d = vol.shape
    p = _softmax_field(vol)
    sx = _axis_centers(w) * up[0]
    sy = _axis_centers(h) * up[1]
    sz = _axis_centers(d) * up[2]
    # s[v] = upstream . coords(v), assembled by broadcasting the three axes.
    s = sy[:, None, None] + sx[None, :, None] + sz[None, None, :]
    coords = soft_argmax(vol)
    return p * (s - float(up @ coords))


@dataclass(frozen=True)
class CoordFrame:
    """Affine bridge between normalized volume coordinates and metric ones.

    crop_box is (x0, y0, width, height) in image pixels; depth_window is the
    metric z span in millimeters, centered on the root joint's depth, so
    normalized z = 0.5 maps to metric z = 0.
    """

    crop_box: tuple = (0.0, 0.0, 256.0, 256.0)
    depth_window: float = 2000.0

    def __post_init__(self):
        if len(self.crop_box) != 4:
            raise ValidationError("crop_box must be (x0, y0, width, height)")
        check_positive("crop width", self.crop_box[2])
        check_positive("crop height", self.crop_box[3])
        check_positive("depth_window", self.depth_window)

    def to_metric(self, coords):
        """Normalized (x, y, z) -> (pixel x, pixel y, millimeter z)."""
        arr = np.asarray(coords, dtype=np.float64)
        if arr.shape[-1] != 3:
            raise ValidationError("coords must have a trailing axis of size 3")
        x0, y0, cw, ch = (float(v) for v in self.crop_box)
        out = np.empty_like(arr)
        out[..., 0] = x0 + arr[..., 0] * cw
        out[..., 1] = y0 + arr[..., 1] * ch
        out[..., 2] = (arr[..., 2] - 0.5) * self.depth_window
        return out

    def to_normalized(self, coords):
        """Inverse of to_metric."""
        arr = np.asarray(coords, dtype=np.float64)
        if arr.shape[-1] != 3:
            raise ValidationError("coords must have a trailing axis of size 3")
        x0, y0, cw, ch = (float(v) for v in self.crop_box)
        out = np.empty_like(arr)
        out[..., 0] = (arr[..., 0] - x0) / cw
        out[..., 1] = (arr[..., 1] - y0) / ch
        out[..., 2] = arr[..., 2] / self.depth_window + 0.5
        return out


class SoftArgmaxDecoder(TransformerMixin, BaseEstimator):
    """Batch soft-argmax as a transformer.

    transform takes (n, h, w, d) stacked volumes (or a sequence of volumes)
    and returns (n, 3) coordinates, normalized by default or metric when a
    CoordFrame is supplied.
    """

    def __init__(self, frame=None):
        self.frame = frame

    def fit(self, X=None, y=None):
        if self.frame is not None and not isinstance(self.frame, CoordFrame):
            raise ValidationError("frame must be a CoordFrame or None")
        return self

    def transform(self, X):
        self.fit()
        coords = np.stack([soft_argmax(vol) for vol in X])
        if self.frame is not None:
            coords = self.frame.to_metric(coords)
        return coords
