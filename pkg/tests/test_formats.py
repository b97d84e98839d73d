import struct

import numpy as np
import pytest

from hemlets import read_samples, read_tensor, write_samples, write_tensor
from hemlets.errors import AnnotationError, FormatError, ValidationError
from hemlets.samples import AnnotatedSample, AnnotationKind
from hemlets.skeleton import Pose2D, Pose3D

from conftest import make_samples


# ---------------------------------------------------------------------------
# binary tensors
# ---------------------------------------------------------------------------

def test_tensor_round_trip_many_shapes(tmp_path):
    rng = np.random.default_rng(90)
    for shape in ((7,), (3, 5), (14, 3, 8, 8), (2, 2, 2, 2, 2)):
        arr = rng.normal(0.0, 1.0, shape).astype(np.float32)
        path = tmp_path / "t.bin"
        write_tensor(path, arr)
        back = read_tensor(path)
        assert back.dtype == np.float32
        assert back.shape == shape
        assert np.array_equal(back, arr)


def test_tensor_layout_is_as_documented(tmp_path):
    # parse the file with nothing but struct, independently of the reader
    arr = np.arange(6, dtype=np.float32).reshape(2, 3) + 0.5
    path = tmp_path / "t.bin"
    write_tensor(path, arr)
    blob = path.read_bytes()
    assert blob[:4] == b"HMLT"
    version, ndim = struct.unpack_from("<II", blob, 4)
    assert version == 1
    assert ndim == 2
    dims = struct.unpack_from("<2Q", blob, 12)
    assert dims == (2, 3)
    payload = np.frombuffer(blob, dtype="<f4", offset=12 + 16)
    assert np.array_equal(payload.reshape(2, 3), arr)
    assert len(blob) == 12 + 16 + 4 * 6


def test_tensor_write_casts_to_float32(tmp_path):
    arr = np.random.default_rng(91).normal(0.0, 1.0, (4, 4))
    path = tmp_path / "t.bin"
    write_tensor(path, arr)
    assert np.array_equal(read_tensor(path), arr.astype(np.float32))


def test_tensor_write_rejects_bad_input(tmp_path):
    path = tmp_path / "t.bin"
    with pytest.raises(ValidationError):
        write_tensor(path, np.float32(1.0))
    with pytest.raises(ValidationError):
        write_tensor(path, np.array([1.0, np.inf]))


def test_tensor_read_rejects_corruption(tmp_path):
    path = tmp_path / "t.bin"
    arr = np.ones((3, 3), dtype=np.float32)
    write_tensor(path, arr)
    good = path.read_bytes()

    def expect_error(blob):
        path.write_bytes(blob)
        with pytest.raises(FormatError):
            read_tensor(path)

    expect_error(good[:8])                      # truncated header
    expect_error(b"XXXX" + good[4:])            # wrong magic
    expect_error(good[:4] + struct.pack("<II", 99, 2) + good[12:])  # version
    expect_error(good[:4] + struct.pack("<II", 1, 0) + good[12:])   # rank 0
    expect_error(good[:-4])                     # payload short
    expect_error(good + b"\x00\x00\x00\x00")    # payload long


# ---------------------------------------------------------------------------
# sample text files
# ---------------------------------------------------------------------------

def test_samples_round_trip_all_kinds(tmp_path, skel):
    originals = []
    originals += make_samples(92, 4, kind_mix=(1.0, 0.0, 0.0))
    originals += make_samples(93, 4, kind_mix=(0.0, 1.0, 0.0))
    originals += make_samples(94, 4, kind_mix=(0.0, 0.0, 1.0))
    path = tmp_path / "poses.txt"
    write_samples(path, originals)
    back = read_samples(path, skel)
    assert len(back) == len(originals)
    for a, b in zip(originals, back):
        assert b.kind == a.kind
        assert b.action == a.action
        assert np.array_equal(b.pose2d.coords, a.pose2d.coords)
        assert np.array_equal(b.pose2d.valid, a.pose2d.valid)
        if a.pose3d is None:
            assert b.pose3d is None
        else:
            assert np.array_equal(b.pose3d.coords, a.pose3d.coords)
            assert np.array_equal(b.pose3d.valid, a.pose3d.valid)
        assert b.ordinal == a.ordinal


def test_samples_write_is_byte_stable(tmp_path):
    originals = make_samples(95, 6)
    p1 = tmp_path / "a.txt"
    p2 = tmp_path / "b.txt"
    write_samples(p1, originals)
    write_samples(p2, originals)
    assert p1.read_bytes() == p2.read_bytes()


def test_samples_unknown_ordinal_survives(tmp_path, skel):
    sample = make_samples(96, 1, kind_mix=(0.0, 1.0, 0.0))[0]
    sample.ordinal[3] = None
    path = tmp_path / "poses.txt"
    write_samples(path, [sample])
    assert "ordinal 3 ?" in path.read_text()
    back = read_samples(path, skel)[0]
    assert back.ordinal[3] is None


def test_samples_comments_and_blanks_ignored(tmp_path, skel):
    sample = make_samples(97, 1)[0]
    path = tmp_path / "poses.txt"
    write_samples(path, [sample])
    noisy = tmp_path / "noisy.txt"
    lines = path.read_text().splitlines()
    lines.insert(1, "# a comment")
    lines.insert(3, "")
    noisy.write_text("\n".join(lines) + "\n")
    assert len(read_samples(noisy, skel)) == 1


def test_samples_reader_rejects_structural_damage(tmp_path, skel):
    sample = make_samples(98, 1)[0]
    path = tmp_path / "poses.txt"
    write_samples(path, [sample])
    text = path.read_text()

    def expect_error(content, error=FormatError):
        bad = tmp_path / "bad.txt"
        bad.write_text(content)
        with pytest.raises(error):
            read_samples(bad, skel)

    expect_error(text.replace("pose samples v1", "pose samples v9"))
    expect_error(text.replace("\nend\n", "\n"))          # record never closed
    expect_error(text + "end\n")                          # stray end
    expect_error(text.replace("sample 0\n", ""))          # body outside record
    expect_error(text.replace("kind full3d\n", ""))       # kind missing
    expect_error(text.replace("joint2d 0 ", "joint2d 99 "))
    expect_error(text.replace("joint2d 1 ", "wat 1 "))


def test_samples_reader_rejects_bad_values(tmp_path, skel):
    sample = make_samples(99, 1, kind_mix=(0.0, 1.0, 0.0))[0]
    path = tmp_path / "poses.txt"
    write_samples(path, [sample])
    text = path.read_text()

    bad = tmp_path / "bad.txt"
    bad.write_text(text.replace("ordinal 0 ", "ordinal 77 "))
    with pytest.raises(FormatError):
        read_samples(bad, skel)

    first_label = next(
        ln for ln in text.splitlines() if ln.startswith("ordinal 0 ")
    )
    bad.write_text(text.replace(first_label, "ordinal 0 5"))
    with pytest.raises(AnnotationError):
        read_samples(bad, skel)


def test_samples_validation_enforces_kind_contract(tmp_path, skel):
    # a full3d record whose 3D block is missing must not parse
    n = skel.n_joints
    lines = ["pose samples v1", "sample 0", "kind full3d"]
    for i in range(n):
        lines.append(f"joint2d {i} 0.5 0.5 1")
    lines.append("end")
    path = tmp_path / "bad.txt"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(AnnotationError):
        read_samples(path, skel)


def test_sample_validate_direct(skel):
    coords2 = np.full((skel.n_joints, 2), 0.5)
    pose2d = Pose2D.full(coords2)
    with pytest.raises(AnnotationError):
        AnnotatedSample(AnnotationKind.FULL_3D, pose2d).validate(skel)
    with pytest.raises(AnnotationError):
        AnnotatedSample(AnnotationKind.ORDINAL_ONLY, pose2d).validate(skel)
    with pytest.raises(AnnotationError):
        AnnotatedSample(
            AnnotationKind.ORDINAL_ONLY, pose2d, ordinal=[0] * (skel.n_parts - 1)
        ).validate(skel)
    partial = Pose3D(np.zeros((skel.n_joints, 3)), np.zeros(skel.n_joints, bool))
    with pytest.raises(AnnotationError):
        AnnotatedSample(
            AnnotationKind.FULL_3D, pose2d, pose3d=partial
        ).validate(skel)
