"""Annotated pose samples and their line-oriented text format.

A sample couples a 2D pose (normalized crop coordinates) with whatever extra
supervision the source provides: full 3D joints, per-part ordinal depth
labels, or nothing beyond the 2D points. The on-disk format is documented in
FORMATS.md; floats are written with ``repr`` so files round-trip bit-exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import AnnotationError, FormatError
from .skeleton import Pose2D, Pose3D, canonical_skeleton


class AnnotationKind(enum.Enum):
    FULL_3D = "full3d"
    ORDINAL_ONLY = "ordinal"
    TWO_D_ONLY = "2d"


# Ordinal depth label of a part: +1 parent deeper than child beyond epsilon,
# -1 child deeper beyond epsilon, 0 within epsilon, None unknown.
ORDINAL_VALUES = (-1, 0, 1)


@dataclass
class AnnotatedSample:
    kind: AnnotationKind
    pose2d: Pose2D
    pose3d: Pose3D | None = None
    ordinal: list | None = None  # per-part labels, entries in {-1, 0, 1, None}
    action: str = ""

    def validate(self, skeleton=None):
        """Check the annotations against the declared kind."""
        skeleton = skeleton or canonical_skeleton()
        n, k = skeleton.n_joints, skeleton.n_parts
        if self.pose2d.n_joints != n:
            raise AnnotationError("pose2d joint count does not match the skeleton")
        if self.kind is AnnotationKind.FULL_3D:
            if self.pose3d is None:
                raise AnnotationError("full3d sample without 3D joints")
            if self.pose3d.n_joints != n:
                raise AnnotationError("pose3d joint count does not match the skeleton")
            if not np.all(self.pose3d.valid):
                raise AnnotationError("full3d sample must annotate every 3D joint")
        elif self.kind is AnnotationKind.ORDINAL_ONLY:
            if self.ordinal is None:
                raise AnnotationError("ordinal sample without part labels")
        if self.ordinal is not None:
            if len(self.ordinal) != k:
                raise AnnotationError("ordinal labels must cover every part")
            for r in self.ordinal:
                if r is not None and r not in ORDINAL_VALUES:
                    raise AnnotationError(f"bad ordinal label {r!r}")
        return self


def _fmt(x):
    return repr(float(x))


def format_sample(sample, index=0):
    """Render one sample as text lines (without trailing newline)."""
    lines = [f"sample {index}", f"kind {sample.kind.value}"]
    if sample.action:
        lines.append(f"action {sample.action}")
    for i in range(sample.pose2d.n_joints):
        x, y = sample.pose2d.coords[i]
        v = int(sample.pose2d.valid[i])
        lines.append(f"joint2d {i} {_fmt(x)} {_fmt(y)} {v}")
    if sample.pose3d is not None:
        for i in range(sample.pose3d.n_joints):
            x, y, z = sample.pose3d.coords[i]
            v = int(sample.pose3d.valid[i])
            lines.append(f"joint3d {i} {_fmt(x)} {_fmt(y)} {_fmt(z)} {v}")
    if sample.ordinal is not None:
        for k, r in enumerate(sample.ordinal):
            lines.append(f"ordinal {k} {'?' if r is None else r}")
    lines.append("end")
    return lines


def write_samples(path, samples):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("pose samples v1\n")
        for i, sample in enumerate(samples):
            fh.write("\n".join(format_sample(sample, i)))
            fh.write("\n")


def _parse_record(lines, n_joints, n_parts):
    kind = None
    action = ""
    c2 = np.zeros((n_joints, 2))
    v2 = np.zeros(n_joints, dtype=bool)
    c3 = np.zeros((n_joints, 3))
    v3 = np.zeros(n_joints, dtype=bool)
    saw3d = False
    ordinal = None
    for ln in lines:
        fields = ln.split()
        tag = fields[0]
        try:
            if tag == "kind":
                kind = AnnotationKind(fields[1])
            elif tag == "action":
                action = ln.split(None, 1)[1]
            elif tag == "joint2d":
                i = int(fields[1])
                if not 0 <= i < n_joints:
                    raise FormatError(f"joint index {i} out of range")
                c2[i] = (float(fields[2]), float(fields[3]))
                v2[i] = bool(int(fields[4]))
            elif tag == "joint3d":
                saw3d = True
                i = int(fields[1])
                if not 0 <= i < n_joints:
                    raise FormatError(f"joint index {i} out of range")
                c3[i] = (float(fields[2]), float(fields[3]), float(fields[4]))
                v3[i] = bool(int(fields[5]))
            elif tag == "ordinal":
                if ordinal is None:
                    ordinal = {}
                ordinal[int(fields[1])] = None if fields[2] == "?" else int(fields[2])
            else:
                raise FormatError(f"unknown sample record {tag!r}")
        except FormatError:
            raise
        except (IndexError, ValueError) as exc:
            raise FormatError(f"bad sample line {ln!r}") from exc
    if kind is None:
        raise FormatError("sample record without a kind line")
    pose3d = Pose3D(c3, v3) if saw3d else None
    labels = None
    if ordinal is not None:
        if max(ordinal) >= n_parts or min(ordinal) < 0:
            raise FormatError("ordinal part index out of range")
        labels = [ordinal.get(k) for k in range(n_parts)]
    return AnnotatedSample(kind, Pose2D(c2, v2), pose3d, labels, action)


def read_samples(path, skeleton=None):
    skeleton = skeleton or canonical_skeleton()
    with open(path, "r", encoding="ascii") as fh:
        raw = fh.read()
    lines = [ln.strip() for ln in raw.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != "pose samples v1":
        raise FormatError("missing 'pose samples v1' header")
    samples = []
    record = None
    for ln in lines[1:]:
        if ln.startswith("sample "):
            if record:
                raise FormatError("sample record without 'end'")
            record = []
        elif ln == "end":
            if record is None:
                raise FormatError("'end' outside a sample record")
            samples.append(_parse_record(record, skeleton.n_joints, skeleton.n_parts))
            record = None
        else:
            if record is None:
                raise FormatError(f"line outside a sample record: {ln!r}")
            record.append(ln)
    if record is not None:
        raise FormatError("unterminated sample record")
    for sample in samples:
        try:
            sample.validate(skeleton)
        except AnnotationError:
            raise
    return samples
