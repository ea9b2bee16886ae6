"""Bit-exact quantized convolution, a float reference, and error metrics.

The quantized path works on Python integers end to end: per output pixel the
code products of one input channel are summed exactly at the product format,
rounded and saturated into the accumulator format, and folded into a running
accumulator with saturating addition, one input channel at a time in ascending
order.  The activation and the final requantization act on the accumulator
value.  Nothing in this path touches floating point, so results are identical
across platforms and thread counts.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .fixedpoint import QFormat, RoundingMode, align_code, float_to_code, product_format, saturate
from .model import Activation, LayerSpec, NetworkSpec, Padding, QTensor, validate, validate_network


@dataclass(frozen=True)
class ConvGeometry:
    """Stride and padding policy of a convolution."""

    stride: int = 1
    padding: Padding = Padding.VALID

    def __post_init__(self) -> None:
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    def out_shape(self, in_h: int, in_w: int, kh: int, kw: int) -> tuple[int, int]:
        if self.padding is Padding.VALID:
            out_h = (in_h - kh) // self.stride + 1
            out_w = (in_w - kw) // self.stride + 1
        else:
            out_h = -(-in_h // self.stride)
            out_w = -(-in_w // self.stride)
        if out_h < 1 or out_w < 1:
            raise ValueError(f"kernel {kh}x{kw} does not fit input {in_h}x{in_w}")
        return out_h, out_w

    def pad_before(self, in_h: int, in_w: int, kh: int, kw: int) -> tuple[int, int]:
        """Zero rows/columns added above and left of the input."""
        if self.padding is Padding.VALID:
            return 0, 0
        out_h, out_w = self.out_shape(in_h, in_w, kh, kw)
        pad_h = max((out_h - 1) * self.stride + kh - in_h, 0)
        pad_w = max((out_w - 1) * self.stride + kw - in_w, 0)
        return pad_h // 2, pad_w // 2


def geometry_of(spec: LayerSpec) -> ConvGeometry:
    return ConvGeometry(stride=spec.stride, padding=spec.padding)


def channel_contributions(inp: np.ndarray, weights: np.ndarray,
                          geom: ConvGeometry) -> np.ndarray:
    """Per-input-channel partial outputs, shape (ci, co, out_h, out_w).

    Summing over the first axis gives the pre-activation convolution; the
    cumulative sums along it are the values a running accumulator holds.
    """
    co, ci, kh, kw = weights.shape
    if inp.ndim != 3 or inp.shape[0] != ci:
        raise ValueError(f"input shape {inp.shape} does not match {ci} input channels")
    in_h, in_w = inp.shape[1], inp.shape[2]
    out_h, out_w = geom.out_shape(in_h, in_w, kh, kw)
    pad_t, pad_l = geom.pad_before(in_h, in_w, kh, kw)
    if geom.padding is Padding.SAME_ZERO:
        full_h = (out_h - 1) * geom.stride + kh
        full_w = (out_w - 1) * geom.stride + kw
        padded = np.zeros((ci, max(full_h, in_h + pad_t), max(full_w, in_w + pad_l)),
                          dtype=inp.dtype)
        padded[:, pad_t:pad_t + in_h, pad_l:pad_l + in_w] = inp
    else:
        padded = inp
    out = np.zeros((ci, co, out_h, out_w), dtype=np.float64)
    for y in range(out_h):
        sy = y * geom.stride
        for x in range(out_w):
            sx = x * geom.stride
            patch = padded[:, sy:sy + kh, sx:sx + kw]
            # (co,ci,kh,kw) * (ci,kh,kw) summed over the kernel window
            out[:, :, y, x] = np.einsum("oihw,ihw->io", weights, patch)
    return out


def conv2d_float(inp: np.ndarray, weights: np.ndarray, geom: ConvGeometry,
                 activation: Activation = Activation.NONE) -> np.ndarray:
    """Float reference convolution, (ci,h,w) -> (co,out_h,out_w)."""
    out = channel_contributions(inp, weights, geom).sum(axis=0)
    if activation is Activation.RELU:
        out = np.maximum(out, 0.0)
    return out


def _check_operands(qin: QTensor, qweights: QTensor, spec: LayerSpec) -> None:
    problems = validate(spec)
    if problems:
        raise ValueError("invalid layer: " + "; ".join(problems))
    if qin.codes.ndim != 3 or qin.codes.shape[0] != spec.in_channels:
        raise ValueError(f"input codes shape {qin.codes.shape} does not match layer")
    if tuple(qin.formats) != spec.input_formats:
        raise ValueError("input tensor formats differ from layer input formats")
    expected_w = (spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w)
    if qweights.codes.shape != expected_w:
        raise ValueError(f"weight codes shape {qweights.codes.shape} != {expected_w}")
    if qweights.formats != spec.coeff_formats:
        raise ValueError("weight tensor formats differ from layer coefficient formats")


def conv2d_quantized(qin: QTensor, qweights: QTensor, spec: LayerSpec,
                     mode: RoundingMode = RoundingMode.NEAREST_EVEN,
                     threads: int = 1) -> QTensor:
    """Run one layer on integer codes; returns codes in the output formats."""
    _check_operands(qin, qweights, spec)
    geom = geometry_of(spec)
    in_h, in_w = qin.codes.shape[1], qin.codes.shape[2]
    kh, kw = spec.kernel_h, spec.kernel_w
    out_h, out_w = geom.out_shape(in_h, in_w, kh, kw)
    pad_t, pad_l = geom.pad_before(in_h, in_w, kh, kw)

    # plain Python ints from here on; zero-pad once so the window loop is branch-free
    padded_h = max((out_h - 1) * geom.stride + kh, in_h + pad_t)
    padded_w = max((out_w - 1) * geom.stride + kw, in_w + pad_l)
    inp = [[[0] * padded_w for _ in range(padded_h)] for _ in range(spec.in_channels)]
    raw = qin.codes.tolist()
    for ic in range(spec.in_channels):
        for y in range(in_h):
            row = inp[ic][y + pad_t]
            src = raw[ic][y]
            row[pad_l:pad_l + in_w] = src
    wcodes = qweights.codes.tolist()
    acc_fmt = spec.accumulator_format
    relu = spec.activation is Activation.RELU

    def run_channel(oc: int) -> list[list[int]]:
        out_fmt = spec.output_formats[oc]
        kernels = wcodes[oc]
        pfmts = [product_format(spec.coeff_formats.lookup(ic, oc), spec.input_formats[ic])
                 for ic in range(spec.in_channels)]
        plane = [[0] * out_w for _ in range(out_h)]
        for y in range(out_h):
            sy = y * geom.stride
            for x in range(out_w):
                sx = x * geom.stride
                acc = 0
                for ic in range(spec.in_channels):
                    kernel = kernels[ic]
                    chan = inp[ic]
                    psum = 0
                    for ky in range(kh):
                        krow = kernel[ky]
                        irow = chan[sy + ky]
                        for kx in range(kw):
                            psum += krow[kx] * irow[sx + kx]
                    part = align_code(psum, pfmts[ic], acc_fmt, mode)
                    acc = saturate(acc + part, acc_fmt)
                if relu and acc < 0:
                    acc = 0
                plane[y][x] = align_code(acc, acc_fmt, out_fmt, mode)
        return plane

    if threads < 1:
        raise ValueError("threads must be >= 1")
    if threads == 1 or spec.out_channels == 1:
        planes = [run_channel(oc) for oc in range(spec.out_channels)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            planes = list(pool.map(run_channel, range(spec.out_channels)))
    codes = np.array(planes, dtype=np.int64)
    return QTensor(codes=codes, formats=spec.output_formats)


@dataclass(frozen=True)
class LayerErrorReport:
    """Quantized output quality against a float reference."""

    name: str
    sqnr_db: float
    max_abs_error: float
    mismatches: int
    total: int

    def render(self) -> str:
        return (f"{self.name}: sqnr {self.sqnr_db:.4f} dB, "
                f"max |err| {self.max_abs_error:.4f}, "
                f"{self.mismatches}/{self.total} values differ")


def sqnr_db(ref: np.ndarray, test: np.ndarray) -> float:
    err = ref - test
    err_energy = float(np.sum(err * err))
    if err_energy == 0.0:
        return float("inf")
    sig_energy = float(np.sum(ref * ref))
    if sig_energy == 0.0:
        return float("-inf")
    return 10.0 * np.log10(sig_energy / err_energy)


def error_report(name: str, ref: np.ndarray, qout: QTensor) -> LayerErrorReport:
    test = qout.dequantize()
    if ref.shape != test.shape:
        raise ValueError(f"reference shape {ref.shape} != output shape {test.shape}")
    err = np.abs(ref - test)
    return LayerErrorReport(
        name=name,
        sqnr_db=sqnr_db(ref, test),
        max_abs_error=float(err.max()) if err.size else 0.0,
        mismatches=int(np.count_nonzero(err)),
        total=int(err.size),
    )


def quantize_input(inp: np.ndarray, formats: tuple[QFormat, ...],
                   mode: RoundingMode = RoundingMode.NEAREST_EVEN) -> QTensor:
    """Quantize a float (c,h,w) map with one format per channel."""
    if inp.ndim != 3 or inp.shape[0] != len(formats):
        raise ValueError(f"input shape {inp.shape} does not match {len(formats)} formats")
    codes = np.empty(inp.shape, dtype=np.int64)
    for c, fmt in enumerate(formats):
        plane = inp[c]
        codes[c] = np.reshape(
            [float_to_code(float(v), fmt, mode) for v in plane.ravel()], plane.shape)
    return QTensor(codes=codes, formats=tuple(formats))


def run_network(net: NetworkSpec, qweights: list[QTensor], inp: np.ndarray,
                mode: RoundingMode = RoundingMode.NEAREST_EVEN,
                threads: int = 1) -> tuple[list[QTensor], list[LayerErrorReport]]:
    """Run all layers on one input map.

    Returns the quantized output of every layer plus a per-layer report
    against a float chain that starts from the dequantized quantized input
    and uses the dequantized weights: the numbers the integer path
    approximates, so the reports isolate arithmetic error rather than input
    or weight quantization error.
    """
    problems = validate_network(net)
    if problems:
        raise ValueError("invalid network: " + "; ".join(problems))
    if len(qweights) != len(net.layers):
        raise ValueError(f"{len(qweights)} weight tensors for {len(net.layers)} layers")

    outputs: list[QTensor] = []
    reports: list[LayerErrorReport] = []
    q = quantize_input(inp, net.layers[0].input_formats, mode)
    ref = q.dequantize()
    for i, layer in enumerate(net.layers):
        qout = conv2d_quantized(q, qweights[i], layer, mode, threads)
        ref = conv2d_float(ref, qweights[i].dequantize(), geometry_of(layer),
                           layer.activation)
        outputs.append(qout)
        reports.append(error_report(layer.name, ref, qout))
        if i + 1 < len(net.layers):
            nxt = net.layers[i + 1].input_formats
            codes = np.empty(qout.codes.shape, dtype=np.int64)
            for c in range(qout.codes.shape[0]):
                src, dst = layer.output_formats[c], nxt[c]
                codes[c] = np.reshape(
                    [align_code(int(v), src, dst, mode) for v in qout.codes[c].ravel()],
                    qout.codes[c].shape)
            q = QTensor(codes=codes, formats=tuple(nxt))
    return outputs, reports
