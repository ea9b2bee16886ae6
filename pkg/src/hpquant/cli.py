"""Command line interface.

Subcommands: ``validate`` a descriptor, ``calibrate`` formats from float
weights and samples, ``quantize`` weights under a descriptor, ``run`` the
integer engine, ``compare`` the three schemes, and ``gen-fixture`` for demo
data.  Exit codes: 0 success, 1 user or input error, 2 internal error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import fixtures, tensorio
from .calibration import Precisions, calibrate_network
from .compare import compare_schemes, render_table
from .descriptor import parse_network, serialize_network, try_parse_network
from .engine import run_network
from .fixedpoint import RoundingMode
from .model import Activation, NetworkSpec, Padding, QTensor, QuantScheme, \
    quantize_weights, validate_network


def _add_precision_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--coeff-bits", type=int, default=8, help="coefficient precision")
    p.add_argument("--data-bits", type=int, default=8, help="feature map precision")
    p.add_argument("--acc-bits", type=int, default=16, help="accumulator precision")
    p.add_argument("--out-bits", type=int, default=8, help="output precision")


def _add_layer_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--padding", choices=["valid", "same"], default="valid")
    p.add_argument("--activation", choices=["none", "relu"], default="none")
    p.add_argument("--names", help="comma-separated layer names (default conv1, conv2, ...)")


def _add_rounding_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rounding", choices=["even", "away", "trunc"], default="even",
                   help="rounding mode (default: round half to even)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hpquant",
        description="Hybrid fixed-point quantization of convolutional layers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and validate a descriptor file")
    p.add_argument("descriptor")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("calibrate", help="choose formats from weights and samples")
    p.add_argument("--weights", nargs="+", required=True,
                   help="HPFT weight tensors, one per layer in order")
    p.add_argument("--samples", nargs="+", required=True,
                   help="HPFT sample maps, rank 3 or batched rank 4")
    p.add_argument("--scheme", choices=["2d", "3d", "4d"], required=True)
    _add_precision_flags(p)
    _add_layer_flags(p)
    _add_rounding_flag(p)
    p.add_argument("-o", "--output", help="descriptor path (default stdout)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("quantize", help="quantize float weights under a descriptor")
    p.add_argument("descriptor")
    p.add_argument("--weights", nargs="+", required=True,
                   help="HPFT weight tensors, one per layer in order")
    p.add_argument("--out-dir", default=".", help="directory for HPQT files")
    _add_rounding_flag(p)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("run", help="run the integer engine on one input map")
    p.add_argument("descriptor")
    p.add_argument("--weights", nargs="+", required=True,
                   help="HPQT code tensors, one per layer in order")
    p.add_argument("--input", required=True, help="HPFT input map, rank 3")
    p.add_argument("--output", required=True, help="HPQT output path")
    p.add_argument("--threads", type=int, default=1)
    _add_rounding_flag(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="evaluate 2D, 3D and 4D side by side")
    p.add_argument("--weights", nargs="+", required=True)
    p.add_argument("--samples", nargs="+", required=True)
    p.add_argument("--labels", help="text file with one integer label per sample")
    _add_precision_flags(p)
    _add_layer_flags(p)
    _add_rounding_flag(p)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen-fixture", help="write demo weight/sample tensors")
    p.add_argument("--kind", choices=["spread", "uniform", "zero", "labeled"],
                   default="spread")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--in-channels", type=int, default=4)
    p.add_argument("--out-channels", type=int, default=4)
    p.add_argument("--kernel", type=int, default=5)
    p.add_argument("--height", type=int, default=8)
    p.add_argument("--width", type=int, default=8)
    p.add_argument("--num-samples", type=int, default=2)
    p.set_defaults(func=cmd_gen_fixture)
    return parser


def _read_descriptor(path: str) -> NetworkSpec:
    return parse_network(Path(path).read_text(encoding="utf-8"))


def _load_weight_files(paths: list[str]) -> list[np.ndarray]:
    out = []
    for p in paths:
        w = tensorio.read_floats(p)
        if w.ndim != 4:
            raise ValueError(f"{p}: weights must be rank 4, got rank {w.ndim}")
        out.append(w)
    return out


def _load_samples(paths: list[str]) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for p in paths:
        arr = tensorio.read_floats(p)
        if arr.ndim == 3:
            out.append(arr)
        elif arr.ndim == 4:
            out.extend(arr)
        else:
            raise ValueError(f"{p}: samples must be rank 3 or 4, got rank {arr.ndim}")
    return out


def _layer_args(args, n: int) -> dict:
    names = args.names.split(",") if args.names else None
    if names and len(names) != n:
        raise ValueError(f"{len(names)} names for {n} layers")
    return {
        "names": names,
        "strides": [args.stride] * n,
        "paddings": [Padding(args.padding)] * n,
        "activations": [Activation(args.activation)] * n,
    }


def cmd_validate(args) -> int:
    text = Path(args.descriptor).read_text(encoding="utf-8")
    spec, errors = try_parse_network(text)
    count = len(errors)
    for e in errors:
        print(f"{args.descriptor}:{e.render()}", file=sys.stderr)
    if spec is not None:
        problems = validate_network(spec)
        count += len(problems)
        for problem in problems:
            print(f"{args.descriptor}: {problem}", file=sys.stderr)
    if count:
        return 1
    print(f"{args.descriptor}: ok "
          f"({len(spec.layers)} layer{'s' if len(spec.layers) != 1 else ''})")
    return 0


def cmd_calibrate(args) -> int:
    weights = _load_weight_files(args.weights)
    samples = _load_samples(args.samples)
    net = calibrate_network(
        weights, samples, QuantScheme.from_label(args.scheme),
        Precisions(coeff=args.coeff_bits, data=args.data_bits,
                   acc=args.acc_bits, out=args.out_bits),
        mode=RoundingMode(args.rounding), **_layer_args(args, len(weights)))
    text = serialize_network(net)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_quantize(args) -> int:
    net = _read_descriptor(args.descriptor)
    weights = _load_weight_files(args.weights)
    if len(weights) != len(net.layers):
        raise ValueError(f"{len(weights)} weight files for {len(net.layers)} layers")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mode = RoundingMode(args.rounding)
    for w, layer in zip(weights, net.layers):
        qw = quantize_weights(w, layer, mode)
        path = out_dir / f"{layer.name}.hpqt"
        tensorio.write_tensor(path, qw.codes)
        print(f"wrote {path}")
    return 0


def _check_weight_codes(codes: np.ndarray, layer) -> QTensor:
    expected = (layer.out_channels, layer.in_channels, layer.kernel_h, layer.kernel_w)
    if codes.shape != expected:
        raise ValueError(
            f"weight codes for layer '{layer.name}' have shape {codes.shape}, "
            f"expected {expected}")
    for oc in range(layer.out_channels):
        for ic in range(layer.in_channels):
            fmt = layer.coeff_formats.lookup(ic, oc)
            block = codes[oc, ic]
            if block.size and (block.min() < fmt.min_code or block.max() > fmt.max_code):
                raise ValueError(
                    f"layer '{layer.name}' kernel ({ic}, {oc}): codes exceed "
                    f"the {fmt} code range")
    return QTensor(codes=codes, formats=layer.coeff_formats)


def cmd_run(args) -> int:
    net = _read_descriptor(args.descriptor)
    if len(args.weights) != len(net.layers):
        raise ValueError(f"{len(args.weights)} weight files for {len(net.layers)} layers")
    qweights = [_check_weight_codes(tensorio.read_codes(p), layer)
                for p, layer in zip(args.weights, net.layers)]
    inp = tensorio.read_floats(args.input)
    if inp.ndim != 3:
        raise ValueError(f"{args.input}: input must be rank 3, got rank {inp.ndim}")
    outputs, reports = run_network(net, qweights, inp,
                                   RoundingMode(args.rounding), args.threads)
    tensorio.write_tensor(args.output, outputs[-1].codes)
    for report in reports:
        print(report.render(), file=sys.stderr)
    return 0


def cmd_compare(args) -> int:
    weights = _load_weight_files(args.weights)
    samples = _load_samples(args.samples)
    labels = None
    if args.labels:
        text = Path(args.labels).read_text(encoding="utf-8").split()
        labels = [int(t) for t in text]
    report = compare_schemes(
        weights, samples,
        Precisions(coeff=args.coeff_bits, data=args.data_bits,
                   acc=args.acc_bits, out=args.out_bits),
        labels=labels, mode=RoundingMode(args.rounding), threads=args.threads,
        **_layer_args(args, len(weights)))
    sys.stdout.write(render_table(report))
    return 0


def cmd_gen_fixture(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ci, co, k = args.in_channels, args.out_channels, args.kernel
    if args.kind == "spread":
        w = fixtures.spread_weights(ci, co, k, k, seed=args.seed)
    elif args.kind == "uniform":
        w = fixtures.uniform_weights(ci, co, k, k, seed=args.seed)
    elif args.kind == "zero":
        w = fixtures.zero_weights(ci, co, k, k)
    else:
        w = fixtures.identity_weights(ci)
    if args.kind == "labeled":
        x, labels = fixtures.labeled_samples(args.num_samples, ci, args.height,
                                             args.width, seed=args.seed)
        labels_path = out_dir / "labels.txt"
        labels_path.write_text("".join(f"{v}\n" for v in labels), encoding="utf-8")
        print(f"wrote {labels_path}")
    else:
        x = fixtures.sample_inputs(args.num_samples, ci, args.height, args.width,
                                   seed=args.seed)
    weights_path = out_dir / "weights.hpft"
    samples_path = out_dir / "samples.hpft"
    tensorio.write_tensor(weights_path, w)
    tensorio.write_tensor(samples_path, x)
    print(f"wrote {weights_path}")
    print(f"wrote {samples_path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints its own message
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - surface as internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())
