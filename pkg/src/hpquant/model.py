"""Domain model: schemes, layers, format tables, and weight quantization.

Weight tensors are laid out (out_channels, in_channels, kh, kw) row-major;
data tensors (channels, height, width).  Coefficient formats are partitioned
by scheme: ``2D`` keeps one format per (input channel, output channel) kernel,
``3D`` one per output channel, ``4D`` a single format for the whole layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .fixedpoint import QFormat, RoundingMode, float_to_code

__all__ = [
    "QuantScheme",
    "Padding",
    "Activation",
    "FormatTable",
    "LayerSpec",
    "NetworkSpec",
    "QTensor",
    "format_for",
    "validate",
    "validate_network",
    "quantize_weights",
]


class QuantScheme(Enum):
    """Partition granularity of coefficient formats within one layer."""

    TWO_D = "2D"
    THREE_D = "3D"
    FOUR_D = "4D"

    @property
    def label(self) -> str:
        return self.value

    @classmethod
    def from_label(cls, text: str) -> "QuantScheme":
        for member in cls:
            if member.value == text.upper():
                return member
        raise ValueError(f"unknown quantization structure {text!r}")


class Padding(Enum):
    VALID = "valid"
    SAME_ZERO = "same"


class Activation(Enum):
    NONE = "none"
    RELU = "relu"


def _partition_key(scheme: QuantScheme, ic: int, oc: int) -> tuple[int, ...]:
    if scheme is QuantScheme.TWO_D:
        return (ic, oc)
    if scheme is QuantScheme.THREE_D:
        return (oc,)
    return ()


@dataclass(frozen=True)
class FormatTable:
    """Coefficient formats keyed by partition: (ic, oc) / (oc,) / ()."""

    scheme: QuantScheme
    entries: dict[tuple[int, ...], QFormat] = field(default_factory=dict)

    def lookup(self, ic: int, oc: int) -> QFormat:
        return self.entries[_partition_key(self.scheme, ic, oc)]

    def expected_keys(self, in_channels: int, out_channels: int) -> set[tuple[int, ...]]:
        if self.scheme is QuantScheme.TWO_D:
            return {(ic, oc) for ic in range(in_channels) for oc in range(out_channels)}
        if self.scheme is QuantScheme.THREE_D:
            return {(oc,) for oc in range(out_channels)}
        return {()}


@dataclass(frozen=True)
class LayerSpec:
    """Complete description of one quantized convolutional layer."""

    name: str
    in_channels: int
    out_channels: int
    kernel_h: int
    kernel_w: int
    coeff_precision: int
    coeff_formats: FormatTable
    input_data_precision: int
    input_formats: tuple[QFormat, ...]
    accumulator_precision: int
    accumulator_format: QFormat
    output_data_precision: int
    output_formats: tuple[QFormat, ...]
    stride: int = 1
    padding: Padding = Padding.VALID
    activation: Activation = Activation.NONE

    @property
    def scheme(self) -> QuantScheme:
        return self.coeff_formats.scheme


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layers; each layer consumes the previous one's output channels."""

    layers: tuple[LayerSpec, ...]

    def __len__(self) -> int:
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)

    def __getitem__(self, i: int) -> LayerSpec:
        return self.layers[i]


@dataclass(frozen=True)
class QTensor:
    """Integer codes plus the formats needed to interpret them.

    ``formats`` is a per-channel tuple for data tensors (codes shaped
    (channels, h, w)) or a FormatTable for weight tensors (codes shaped
    (out, in, kh, kw)).
    """

    codes: np.ndarray
    formats: tuple[QFormat, ...] | FormatTable

    def dequantize(self) -> np.ndarray:
        out = np.empty(self.codes.shape, dtype=np.float64)
        if isinstance(self.formats, FormatTable):
            co, ci = self.codes.shape[:2]
            for oc in range(co):
                for ic in range(ci):
                    f = self.formats.lookup(ic, oc)
                    out[oc, ic] = self.codes[oc, ic].astype(np.float64) * f.ulp
        else:
            for c, f in enumerate(self.formats):
                out[c] = self.codes[c].astype(np.float64) * f.ulp
        return out


def format_for(spec: LayerSpec, ic: int, oc: int) -> QFormat:
    """Coefficient format of the (ic, oc) kernel under the layer's scheme."""
    if not 0 <= ic < spec.in_channels:
        raise ValueError(f"input channel {ic} out of range [0, {spec.in_channels})")
    if not 0 <= oc < spec.out_channels:
        raise ValueError(f"output channel {oc} out of range [0, {spec.out_channels})")
    return spec.coeff_formats.lookup(ic, oc)


def validate(spec: LayerSpec) -> list[str]:
    """All invariant violations of one layer (empty list when consistent)."""
    problems: list[str] = []
    if not spec.name:
        problems.append("layer name is empty")
    for label, n in (("in_channels", spec.in_channels), ("out_channels", spec.out_channels),
                     ("kernel_h", spec.kernel_h), ("kernel_w", spec.kernel_w),
                     ("stride", spec.stride)):
        if n < 1:
            problems.append(f"{label} must be positive, got {n}")

    expected = spec.coeff_formats.expected_keys(spec.in_channels, spec.out_channels)
    actual = set(spec.coeff_formats.entries)
    for key in sorted(expected - actual):
        problems.append(f"incomplete coeff_formats: missing partition {key}")
    for key in sorted(actual - expected):
        problems.append(f"coeff_formats has stray partition key {key}")
    for key, fmt in sorted(spec.coeff_formats.entries.items()):
        if fmt.precision != spec.coeff_precision:
            problems.append(
                f"precision mismatch: coeff format {fmt} at {key} is "
                f"{fmt.precision}b, declared {spec.coeff_precision}b")

    if len(spec.input_formats) != spec.in_channels:
        problems.append(
            f"input_formats has {len(spec.input_formats)} entries, expected {spec.in_channels}")
    for c, fmt in enumerate(spec.input_formats):
        if fmt.precision != spec.input_data_precision:
            problems.append(
                f"precision mismatch: input format {fmt} for channel {c} is "
                f"{fmt.precision}b, declared {spec.input_data_precision}b")

    if spec.accumulator_format.precision != spec.accumulator_precision:
        problems.append(
            f"precision mismatch: accumulator format {spec.accumulator_format} is "
            f"{spec.accumulator_format.precision}b, declared {spec.accumulator_precision}b")

    if len(spec.output_formats) != spec.out_channels:
        problems.append(
            f"output_formats has {len(spec.output_formats)} entries, expected {spec.out_channels}")
    for c, fmt in enumerate(spec.output_formats):
        if fmt.precision != spec.output_data_precision:
            problems.append(
                f"precision mismatch: output format {fmt} for channel {c} is "
                f"{fmt.precision}b, declared {spec.output_data_precision}b")
    return problems


def validate_network(net: NetworkSpec) -> list[str]:
    """Violations across the network: per-layer checks plus channel chaining."""
    problems: list[str] = []
    if not net.layers:
        problems.append("network has no layers")
    for i, layer in enumerate(net.layers):
        problems.extend(f"layer {i} ({layer.name!r}): {p}" for p in validate(layer))
    for i in range(1, len(net.layers)):
        prev, cur = net.layers[i - 1], net.layers[i]
        if cur.in_channels != prev.out_channels:
            problems.append(
                f"layer {i} ({cur.name!r}) expects {cur.in_channels} input channels "
                f"but layer {i - 1} ({prev.name!r}) produces {prev.out_channels}")
    return problems


def quantize_weights(weights: np.ndarray, spec: LayerSpec,
                     mode: RoundingMode = RoundingMode.NEAREST_EVEN) -> QTensor:
    """Quantize a float weight tensor kernel-by-kernel under the layer's formats."""
    weights = np.asarray(weights, dtype=np.float64)
    expected = (spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w)
    if weights.shape != expected:
        raise ValueError(f"weight shape {weights.shape} does not match layer {expected}")
    problems = validate(spec)
    if problems:
        raise ValueError("invalid layer spec: " + "; ".join(problems))

    codes = np.empty(expected, dtype=np.int64)
    for oc in range(spec.out_channels):
        for ic in range(spec.in_channels):
            fmt = spec.coeff_formats.lookup(ic, oc)
            kernel = weights[oc, ic]
            codes[oc, ic] = [
                [float_to_code(float(kernel[y, x]), fmt, mode) for x in range(spec.kernel_w)]
                for y in range(spec.kernel_h)
            ]
    return QTensor(codes, spec.coeff_formats)


def with_activation(spec: LayerSpec, activation: Activation) -> LayerSpec:
    return replace(spec, activation=activation)
