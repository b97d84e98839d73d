"""Canonical human skeleton: joint roster, kinematic parts, pose containers.

The tables below are the single source of truth for joint indices. Every
array in the package (poses, heatmaps, masks) is ordered by this roster.

The skeleton has 18 joints and 14 parts. A part is a directed (parent, child)
pair, parent being the end closer to the root. The 14 parts form a tree over
15 joints rooted at the pelvis; ``spine``, ``thorax`` and ``head_top`` are
not endpoints of any part (they are still annotated and get 2D heatmaps).
Parts are listed root-outward, so the parent joint of each part is either the
root or the child of an earlier part; decoding relies on that order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FormatError, InvalidJointError, ValidationError

JOINT_NAMES = (
    "pelvis",
    "spine",
    "thorax",
    "neck",
    "head",
    "head_top",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "left_hip",
    "left_knee",
    "left_ankle",
    "right_hip",
    "right_knee",
    "right_ankle",
)

# (name, parent joint, child joint), root-outward.
PART_TABLE = (
    ("torso", 0, 3),
    ("neck_head", 3, 4),
    ("left_clavicle", 3, 6),
    ("left_upper_arm", 6, 7),
    ("left_forearm", 7, 8),
    ("right_clavicle", 3, 9),
    ("right_upper_arm", 9, 10),
    ("right_forearm", 10, 11),
    ("left_hip_link", 0, 12),
    ("left_thigh", 12, 13),
    ("left_shin", 13, 14),
    ("right_hip_link", 0, 15),
    ("right_thigh", 15, 16),
    ("right_shin", 16, 17),
)

FLIP_PAIRS = ((6, 9), (7, 10), (8, 11), (12, 15), (13, 16), (14, 17))

ROOT_INDEX = 0


@dataclass(frozen=True)
class Skeleton:
    """Immutable joint/part topology.

    All tuples are positional: ``parts[k] = (parent, child)`` and
    ``part_names[k]`` belong together.
    """

    joint_names: tuple
    parts: tuple
    part_names: tuple
    flip_pairs: tuple
    root_index: int = 0

    @property
    def n_joints(self):
        return len(self.joint_names)

    @property
    def n_parts(self):
        return len(self.parts)

    def __post_init__(self):
        self._validate()

    def _validate(self):
        n = self.n_joints
        if len(set(self.joint_names)) != n:
            raise ValidationError("duplicate joint names")
        if not 0 <= self.root_index < n:
            raise ValidationError("root_index out of range")
        if len(self.part_names) != len(self.parts):
            raise ValidationError("part_names and parts must align")
        seen_children = set()
        known = {self.root_index}
        touched = set()
        for name, (p, c) in zip(self.part_names, self.parts):
            if not (0 <= p < n and 0 <= c < n):
                raise ValidationError(f"part {name!r} references a missing joint")
            if p == c:
                raise ValidationError(f"part {name!r} is degenerate")
            if c in seen_children or c == self.root_index:
                raise ValidationError(f"part {name!r} re-parents joint {c}")
            if p not in known:
                raise ValidationError(
                    f"part {name!r} appears before its parent joint is reachable; "
                    "parts must be listed root-outward"
                )
            seen_children.add(c)
            known.add(c)
            touched.update((p, c))
        # |edges| == |touched joints| - 1 plus the reachability check above
        # makes the part graph a tree rooted at root_index.
        if len(self.parts) != len(touched) - 1:
            raise ValidationError("part graph is not a tree")
        perm = {}
        for a, b in self.flip_pairs:
            if not (0 <= a < n and 0 <= b < n) or a == b:
                raise ValidationError("bad flip pair")
            if a in perm or b in perm:
                raise ValidationError("joint appears in two flip pairs")
            perm[a] = b
            perm[b] = a

    def flip_permutation(self):
        """Joint permutation under a horizontal mirror (an involution)."""
        perm = np.arange(self.n_joints)
        for a, b in self.flip_pairs:
            perm[a], perm[b] = b, a
        return perm

    def part_flip_permutation(self):
        """Part permutation under a horizontal mirror.

        Raises ValidationError if the part set is not closed under the joint
        flip (encoding a flipped sample would then be undefined).
        """
        perm = self.flip_permutation()
        index = {pc: k for k, pc in enumerate(self.parts)}
        out = np.empty(self.n_parts, dtype=int)
        for k, (p, c) in enumerate(self.parts):
            key = (int(perm[p]), int(perm[c]))
            if key not in index:
                raise ValidationError(f"part {self.part_names[k]!r} has no mirror part")
            out[k] = index[key]
        return out

    def part_index(self, name):
        try:
            return self.part_names.index(name)
        except ValueError:
            raise ValidationError(f"unknown part {name!r}") from None

    def joint_index(self, name):
        try:
            return self.joint_names.index(name)
        except ValueError:
            raise ValidationError(f"unknown joint {name!r}") from None

    def to_text(self):
        lines = ["skeleton v1", f"joints {self.n_joints}"]
        for i, name in enumerate(self.joint_names):
            lines.append(f"joint {i} {name}")
        lines.append(f"root {self.root_index}")
        lines.append(f"parts {self.n_parts}")
        for k, (name, (p, c)) in enumerate(zip(self.part_names, self.parts)):
            lines.append(f"part {k} {name} {p} {c}")
        for a, b in self.flip_pairs:
            lines.append(f"flip {a} {b}")
        lines.append("end")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        joints = {}
        parts = []
        part_names = []
        flips = []
        root = None
        lines = [ln.strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln and not ln.startswith("#")]
        if not lines or lines[0] != "skeleton v1":
            raise FormatError("missing 'skeleton v1' header")
        if lines[-1] != "end":
            raise FormatError("missing 'end' terminator")
        try:
            for ln in lines[1:-1]:
                fields = ln.split()
                if fields[0] == "joints" or fields[0] == "parts":
                    continue  # counts are redundant; entries are authoritative
                elif fields[0] == "joint":
                    joints[int(fields[1])] = fields[2]
                elif fields[0] == "root":
                    root = int(fields[1])
                elif fields[0] == "part":
                    part_names.append(fields[2])
                    parts.append((int(fields[3]), int(fields[4])))
                elif fields[0] == "flip":
                    flips.append((int(fields[1]), int(fields[2])))
                else:
                    raise FormatError(f"unknown skeleton record {fields[0]!r}")
        except (IndexError, ValueError) as exc:
            raise FormatError(f"bad skeleton line {ln!r}") from exc
        if root is None:
            raise FormatError("skeleton text has no root record")
        if sorted(joints) != list(range(len(joints))):
            raise FormatError("joint indices must be 0..n-1")
        names = tuple(joints[i] for i in range(len(joints)))
        try:
            return cls(names, tuple(parts), tuple(part_names), tuple(flips), root)
        except ValidationError as exc:
            raise FormatError(f"inconsistent skeleton: {exc}") from exc


_CANONICAL = None


def canonical_skeleton():
    """The fixed 18-joint / 14-part skeleton used throughout the package."""
    global _CANONICAL
    if _CANONICAL is None:
        _CANONICAL = Skeleton(
            joint_names=JOINT_NAMES,
            parts=tuple((p, c) for _, p, c in PART_TABLE),
            part_names=tuple(name for name, _, _ in PART_TABLE),
            flip_pairs=FLIP_PAIRS,
            root_index=ROOT_INDEX,
        )
    return _CANONICAL


@dataclass
class Pose2D:
    """Per-joint normalized crop coordinates in [0, 1]^2 plus validity flags.

    Invalid joints carry no information; their coordinates are kept finite
    (zeros by convention) but must not be read.
    """

    coords: np.ndarray  # (n_joints, 2) float64
    valid: np.ndarray  # (n_joints,) bool

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.coords.ndim != 2 or self.coords.shape[1] != 2:
            raise ValidationError("Pose2D coords must have shape (n, 2)")
        if self.valid.shape != (self.coords.shape[0],):
            raise ValidationError("Pose2D valid flags must match the joint count")
        if not np.all(np.isfinite(self.coords)):
            raise ValidationError("Pose2D coords must be finite")

    @property
    def n_joints(self):
        return self.coords.shape[0]

    @classmethod
    def full(cls, coords):
        coords = np.asarray(coords, dtype=np.float64)
        return cls(coords, np.ones(coords.shape[0], dtype=bool))

    def copy(self):
        return Pose2D(self.coords.copy(), self.valid.copy())


@dataclass
class Pose3D:
    """Per-joint metric coordinates (millimeters, root-relative) plus flags."""

    coords: np.ndarray  # (n_joints, 3) float64
    valid: np.ndarray  # (n_joints,) bool

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.coords.ndim != 2 or self.coords.shape[1] != 3:
            raise ValidationError("Pose3D coords must have shape (n, 3)")
        if self.valid.shape != (self.coords.shape[0],):
            raise ValidationError("Pose3D valid flags must match the joint count")
        if not np.all(np.isfinite(self.coords)):
            raise ValidationError("Pose3D coords must be finite")

    @property
    def n_joints(self):
        return self.coords.shape[0]

    @classmethod
    def full(cls, coords):
        coords = np.asarray(coords, dtype=np.float64)
        return cls(coords, np.ones(coords.shape[0], dtype=bool))

    def copy(self):
        return Pose3D(self.coords.copy(), self.valid.copy())


def part_length(pose, part_index, skeleton=None):
    """Euclidean length of a part in millimeters.

    Both endpoints must be valid; otherwise the length is undefined and
    InvalidJointError is raised.
    """
    skeleton = skeleton or canonical_skeleton()
    if not 0 <= part_index < skeleton.n_parts:
        raise ValidationError(f"part index {part_index} out of range")
    p, c = skeleton.parts[part_index]
    if not (pose.valid[p] and pose.valid[c]):
        raise InvalidJointError(
            f"part {skeleton.part_names[part_index]!r} has an unannotated endpoint"
        )
    return float(np.linalg.norm(pose.coords[p] - pose.coords[c]))
