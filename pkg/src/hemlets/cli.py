"""Command line front end.

Subcommands cover the whole pipeline: encode samples to supervision tensors,
decode a part-stack tensor back to joints, run soft-argmax on a stored
volume, score predictions against references, audit gradients, and run the
synthetic training demo. All outputs are deterministic: floats are written
with repr and nothing embeds timestamps, so re-running a command reproduces
files byte for byte.

Exit codes: 0 success, 2 malformed input file or arguments, 3 validation
failure, 4 numeric divergence, 5 I/O trouble.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from . import __version__
from .codec import VARIANTS, CodecConfig, decode_hemlets, encode_targets
from .errors import DivergenceError, FormatError, ValidationError
from .metrics import summarize
from .samples import read_samples
from .skeleton import Skeleton, canonical_skeleton
from .tensorio import read_tensor, write_tensor
from .trainer import DemoConfig, gradient_audit, train_demo
from .volumetric import soft_argmax, soft_argmax_gradient


def _parse_resolution(text):
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise FormatError(f"resolution must look like 64x64, got {text!r}")
    try:
        h, w = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise FormatError(f"resolution must look like 64x64, got {text!r}") from exc
    return h, w


def _load_skeleton(path):
    if path is None:
        return canonical_skeleton()
    with open(path, "r", encoding="ascii") as fh:
        return Skeleton.from_text(fh.read())


def _emit(lines, out_path):
    text = "\n".join(lines) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)


def cmd_encode(args):
    skeleton = _load_skeleton(args.skeleton)
    samples = read_samples(args.samples, skeleton)
    h, w = _parse_resolution(args.resolution)
    config = CodecConfig(
        heatmap_resolution=(h, w),
        sigma=args.sigma,
        epsilon_scale=args.epsilon_scale,
        truncation_radius=args.truncation,
        depth_window=args.depth_window,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    lines = [
        "manifest v1",
        f"variant {args.variant}",
        f"resolution {h} {w}",
        f"count {len(samples)}",
    ]
    for i, sample in enumerate(samples):
        target = encode_targets(sample, skeleton, config, args.variant)
        prefix = f"sample_{i:04d}"
        write_tensor(os.path.join(args.out_dir, f"{prefix}.hemlets.bin"), target.hemlets)
        write_tensor(os.path.join(args.out_dir, f"{prefix}.mask.bin"), target.mask_hem)
        write_tensor(os.path.join(args.out_dir, f"{prefix}.heatmaps.bin"), target.heatmaps2d)
        write_tensor(os.path.join(args.out_dir, f"{prefix}.coords.bin"), target.coords3d)
        lines.append(
            f"sample {i} kind {sample.kind.value} lambda_z {target.lambda_z} files {prefix}"
        )
    lines.append("end")
    with open(
        os.path.join(args.out_dir, "manifest.txt"), "w", encoding="ascii", newline="\n"
    ) as fh:
        fh.write("\n".join(lines) + "\n")
    return 0


def cmd_decode(args):
    skeleton = _load_skeleton(args.skeleton)
    tensor = read_tensor(args.tensor)
    if tensor.ndim != 4:
        raise ValidationError(f"expected a 4-dimensional part stack, got {tensor.ndim}")
    config = CodecConfig(
        heatmap_resolution=(tensor.shape[2], tensor.shape[3]),
        sigma=args.sigma,
        truncation_radius=args.truncation,
    )
    pose, labels = decode_hemlets(tensor, skeleton, config)
    lines = ["decoded pose v1"]
    for i in range(skeleton.n_joints):
        x, y = (float(v) for v in pose.coords[i])
        lines.append(f"joint {i} {x!r} {y!r} {int(pose.valid[i])}")
    for k, r in enumerate(labels):
        lines.append(f"part {k} r {'?' if r is None else r}")
    lines.append("end")
    _emit(lines, args.out)
    return 0


def cmd_softargmax(args):
    volume = read_tensor(args.volume)
    coords = soft_argmax(volume)
    write_tensor(args.out, coords)
    if args.upstream is not None:
        if args.grad_out is None:
            raise ValidationError("--upstream requires --grad-out")
        upstream = read_tensor(args.upstream)
        write_tensor(args.grad_out, soft_argmax_gradient(volume, upstream))
    return 0


def cmd_eval(args):
    skeleton = _load_skeleton(args.skeleton)
    pred = read_samples(args.pred, skeleton)
    gt = read_samples(args.gt, skeleton)
    if len(pred) != len(gt):
        raise ValidationError(
            f"prediction and reference counts differ: {len(pred)} vs {len(gt)}"
        )
    pairs = []
    for i, (sp, sg) in enumerate(zip(pred, gt)):
        if sp.pose3d is None or sg.pose3d is None:
            raise ValidationError(f"sample {i} has no 3D annotation to score")
        pairs.append((sp.pose3d, sg.pose3d, sg.action))
    table = summarize(pairs, skeleton, args.threshold)
    lines = ["metrics v1", table["ALL"].to_line("ALL")]
    for label in sorted(k for k in table if k != "ALL"):
        lines.append(table[label].to_line(label))
    lines.append("end")
    _emit(lines, args.out)
    return 0


def cmd_gradcheck(args):
    rows = gradient_audit(seed=args.seed, step=args.step)
    lines = ["gradcheck v1"]
    failed = []
    for name, n, worst in rows:
        ok = worst <= args.tolerance
        if not ok:
            failed.append(name)
        lines.append(f"op {name} entries {n} max_rel_error {worst!r} {'ok' if ok else 'fail'}")
    lines.append(f"tolerance {args.tolerance!r}")
    lines.append(f"status {'fail' if failed else 'ok'}")
    lines.append("end")
    _emit(lines, args.out)
    if failed:
        raise DivergenceError(
            f"analytic and numeric gradients disagree for: {', '.join(failed)}"
        )
    return 0


def cmd_train_demo(args):
    config = DemoConfig.from_file(args.config) if args.config else DemoConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.steps is not None:
        overrides["steps"] = args.steps
    if args.no_variant_curves:
        overrides["variant_curves"] = False
    if overrides:
        config = dataclasses.replace(config, **overrides)
    report = train_demo(config)
    report.write(args.out_dir)
    sys.stdout.write("\n".join(report.to_lines()) + "\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hemlets",
        description="Part-stack heatmap codec, volumetric decoding, metrics and a training demo.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode annotated samples into supervision tensors")
    p.add_argument("--samples", required=True, help="pose samples v1 file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--variant", default="hemlets", choices=VARIANTS)
    p.add_argument("--resolution", default="64x64")
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--epsilon-scale", type=float, default=0.5)
    p.add_argument("--truncation", type=float, default=3.0)
    p.add_argument("--depth-window", type=float, default=2000.0)
    p.add_argument("--skeleton", default=None, help="skeleton v1 file (default: built in)")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="recover joints and depth labels from a part stack")
    p.add_argument("--tensor", required=True, help="binary tensor file (n_parts, 3, h, w)")
    p.add_argument("--out", default=None, help="write here instead of stdout")
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--truncation", type=float, default=3.0)
    p.add_argument("--skeleton", default=None)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("softargmax", help="expected coordinates of a score volume")
    p.add_argument("--volume", required=True, help="binary tensor file (h, w, d)")
    p.add_argument("--out", required=True, help="coordinates go here as a (3,) tensor")
    p.add_argument("--upstream", default=None, help="optional (3,) upstream gradient tensor")
    p.add_argument("--grad-out", default=None, help="where the volume gradient is written")
    p.set_defaults(func=cmd_softargmax)

    p = sub.add_parser("eval", help="score predicted poses against references")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--threshold", type=float, default=150.0)
    p.add_argument("--out", default=None)
    p.add_argument("--skeleton", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference audit of every differentiable op")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("train-demo", help="run the synthetic supervision ablation")
    p.add_argument("--config", default=None, help="key = value override file")
    p.add_argument("--out-dir", default="demo_out")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--no-variant-curves", action="store_true")
    p.set_defaults(func=cmd_train_demo)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
