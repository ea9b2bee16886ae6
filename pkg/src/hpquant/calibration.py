"""Min/max range calibration: pick formats from observed value ranges.

A format of a given bit width is fully determined by its msb, so calibration
reduces to finding, per partition or per channel, the smallest msb whose
format represents the observed extremes with at most half an ulp of error.
The accumulator format is calibrated from every value the accumulator ever
holds: each input channel's kernel sum and each running total, at every
output pixel of every sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .engine import ConvGeometry, channel_contributions
from .fixedpoint import QFormat, RoundingMode, float_to_code
from .model import (Activation, FormatTable, LayerSpec, NetworkSpec, Padding,
                    QuantScheme, _partition_key)


@dataclass(frozen=True)
class RangeStats:
    """Exact extrema of a set of finite values."""

    min: float = 0.0
    max: float = 0.0
    max_abs: float = 0.0
    count: int = 0

    def merge(self, other: "RangeStats") -> "RangeStats":
        if self.count == 0:
            return other
        if other.count == 0:
            return self
        return RangeStats(min(self.min, other.min), max(self.max, other.max),
                          max(self.max_abs, other.max_abs),
                          self.count + other.count)


def collect_stats(values: Iterable[float] | np.ndarray) -> RangeStats:
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        return RangeStats()
    if not np.all(np.isfinite(arr)):
        raise ValueError("calibration values must be finite")
    lo = float(arr.min())
    hi = float(arr.max())
    return RangeStats(lo, hi, max(abs(lo), abs(hi)), int(arr.size))


def _covers(lo: float, hi: float, fmt: QFormat) -> bool:
    """Do both extremes land within half an ulp of the format's grid?  Exact.

    The probe quantizes round-to-nearest: the criterion measures how far an
    extreme saturates past the representable range, not the error of whatever
    rounding the caller will later apply.  Truncation errors of up to a full
    ulp inside the range are deliberate rounding, not a reason to widen.
    """
    tol = Fraction(2) ** (fmt.lsb - 1)
    step = Fraction(2) ** fmt.lsb
    for v in (lo, hi):
        code = float_to_code(v, fmt, RoundingMode.NEAREST_EVEN)
        if abs(code * step - Fraction(v)) > tol:
            return False
    return True


def choose_format(stats: RangeStats, precision: int,
                  mode: RoundingMode = RoundingMode.NEAREST_EVEN) -> QFormat:
    """Smallest-msb format of the given width covering the observed range.

    The result does not depend on ``mode``; the parameter is accepted so
    calibration entry points can thread one rounding choice everywhere.
    """
    if precision < 2:
        raise ValueError("precision must be at least 2 bits")
    if stats.count == 0 or stats.max_abs == 0.0:
        return QFormat(0, -(precision - 2))
    frac_width = precision - 2
    m, e = math.frexp(stats.max_abs)  # max_abs = m * 2^e with 0.5 <= m < 1
    msb = (e - 1 if m == 0.5 else e) - 1
    # the negative extreme -2^(msb+1) is representable exactly, so the search
    # may terminate one step below the magnitude-derived start
    while _covers(stats.min, stats.max, QFormat(msb - 1, msb - 1 - frac_width)):
        msb -= 1
    while not _covers(stats.min, stats.max, QFormat(msb, msb - frac_width)):
        msb += 1
    return QFormat(msb, msb - frac_width)


def calibrate_weights(weights: np.ndarray, scheme: QuantScheme, precision: int,
                      mode: RoundingMode = RoundingMode.NEAREST_EVEN) -> FormatTable:
    """One format per partition of a (co,ci,kh,kw) weight tensor."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 4:
        raise ValueError(f"weights must be 4-dimensional, got shape {w.shape}")
    co, ci = w.shape[0], w.shape[1]
    slices: dict[tuple[int, ...], list[np.ndarray]] = {}
    for oc in range(co):
        for ic in range(ci):
            slices.setdefault(_partition_key(scheme, ic, oc), []).append(w[oc, ic])
    entries = {key: choose_format(collect_stats(np.stack(parts)), precision, mode)
               for key, parts in slices.items()}
    return FormatTable(scheme=scheme, entries=entries)


@dataclass(frozen=True)
class LayerSkeleton:
    """A layer with weights and coefficient formats but uncalibrated data paths."""

    name: str
    weights: np.ndarray
    coeff_precision: int
    coeff_formats: FormatTable
    stride: int = 1
    padding: Padding = Padding.VALID
    activation: Activation = Activation.NONE

    @property
    def geometry(self) -> ConvGeometry:
        return ConvGeometry(stride=self.stride, padding=self.padding)


def calibrate_activations(skeletons: Sequence[LayerSkeleton],
                          samples: Sequence[np.ndarray],
                          data_bits: int, acc_bits: int, out_bits: int,
                          mode: RoundingMode = RoundingMode.NEAREST_EVEN) -> NetworkSpec:
    """Complete a network by running the float reference over the samples.

    Per layer, per-channel input and output stats feed ``choose_format`` at
    the data and output precisions; the accumulator format is chosen from
    the per-input-channel kernel sums and their running totals.
    """
    if not skeletons:
        raise ValueError("at least one layer is required")
    if not samples:
        raise ValueError("at least one calibration sample is required")
    n_layers = len(skeletons)
    in_stats = [[RangeStats() for _ in range(sk.weights.shape[1])] for sk in skeletons]
    out_stats = [[RangeStats() for _ in range(sk.weights.shape[0])] for sk in skeletons]
    acc_stats = [RangeStats() for _ in skeletons]

    for sample in samples:
        x = np.asarray(sample, dtype=np.float64)
        for li, sk in enumerate(skeletons):
            ci = sk.weights.shape[1]
            if x.ndim != 3 or x.shape[0] != ci:
                raise ValueError(
                    f"sample shape {x.shape} does not match layer '{sk.name}' "
                    f"with {ci} input channels")
            for c in range(ci):
                in_stats[li][c] = in_stats[li][c].merge(collect_stats(x[c]))
            contribs = channel_contributions(x, sk.weights, sk.geometry)
            running = np.cumsum(contribs, axis=0)
            acc_stats[li] = acc_stats[li].merge(collect_stats(contribs))
            acc_stats[li] = acc_stats[li].merge(collect_stats(running))
            x = running[-1]
            if sk.activation is Activation.RELU:
                x = np.maximum(x, 0.0)
            for c in range(x.shape[0]):
                out_stats[li][c] = out_stats[li][c].merge(collect_stats(x[c]))

    layers = []
    for li, sk in enumerate(skeletons):
        co, ci, kh, kw = sk.weights.shape
        layers.append(LayerSpec(
            name=sk.name,
            in_channels=ci,
            out_channels=co,
            kernel_h=kh,
            kernel_w=kw,
            coeff_precision=sk.coeff_precision,
            coeff_formats=sk.coeff_formats,
            input_data_precision=data_bits,
            input_formats=tuple(choose_format(s, data_bits, mode) for s in in_stats[li]),
            accumulator_precision=acc_bits,
            accumulator_format=choose_format(acc_stats[li], acc_bits, mode),
            output_data_precision=out_bits,
            output_formats=tuple(choose_format(s, out_bits, mode) for s in out_stats[li]),
            stride=sk.stride,
            padding=sk.padding,
            activation=sk.activation,
        ))
    return NetworkSpec(layers=tuple(layers))


@dataclass(frozen=True)
class Precisions:
    """Bit widths for the four value populations of a layer."""

    coeff: int = 8
    data: int = 8
    acc: int = 16
    out: int = 8


def calibrate_network(weights: Sequence[np.ndarray],
                      samples: Sequence[np.ndarray],
                      scheme: QuantScheme,
                      precisions: Precisions = Precisions(),
                      names: Sequence[str] | None = None,
                      strides: Sequence[int] | None = None,
                      paddings: Sequence[Padding] | None = None,
                      activations: Sequence[Activation] | None = None,
                      mode: RoundingMode = RoundingMode.NEAREST_EVEN) -> NetworkSpec:
    """Calibrate coefficient formats and data paths in one pass."""
    n = len(weights)
    names = list(names) if names else [f"conv{i + 1}" for i in range(n)]
    strides = list(strides) if strides else [1] * n
    paddings = list(paddings) if paddings else [Padding.VALID] * n
    activations = list(activations) if activations else [Activation.NONE] * n
    if not (len(names) == len(strides) == len(paddings) == len(activations) == n):
        raise ValueError("per-layer argument lists must match the number of layers")
    skeletons = [LayerSkeleton(
        name=names[i],
        weights=np.asarray(weights[i], dtype=np.float64),
        coeff_precision=precisions.coeff,
        coeff_formats=calibrate_weights(weights[i], scheme, precisions.coeff, mode),
        stride=strides[i],
        padding=paddings[i],
        activation=activations[i],
    ) for i in range(n)]
    return calibrate_activations(skeletons, samples, precisions.data,
                                 precisions.acc, precisions.out, mode)
