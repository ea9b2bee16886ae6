"""Side-by-side evaluation of the three partition granularities.

For each scheme the network is calibrated, its weights quantized, and every
sample pushed through the integer engine.  Weight SQNR measures the weights
against their dequantized codes; output SQNR measures the final feature maps
against a float chain run with the original weights; classification error is
the argmax-over-channel-sums disagreement with given labels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .calibration import Precisions, calibrate_network
from .engine import conv2d_float, geometry_of, run_network, sqnr_db
from .fixedpoint import RoundingMode
from .model import Activation, Padding, QuantScheme, quantize_weights

SCHEMES = (QuantScheme.TWO_D, QuantScheme.THREE_D, QuantScheme.FOUR_D)


@dataclass(frozen=True)
class SchemeResult:
    weight_sqnr_db: float
    output_sqnr_db: float
    class_error_pct: float | None = None


@dataclass(frozen=True)
class CompareReport:
    results: dict[QuantScheme, SchemeResult]

    @property
    def has_labels(self) -> bool:
        return any(r.class_error_pct is not None for r in self.results.values())


def classify(feature_map: np.ndarray) -> int:
    """Class = channel with the largest global sum of the final feature map."""
    return int(np.argmax(feature_map.reshape(feature_map.shape[0], -1).sum(axis=1)))


def compare_schemes(weights: Sequence[np.ndarray],
                    samples: Sequence[np.ndarray],
                    precisions: Precisions = Precisions(),
                    labels: Sequence[int] | None = None,
                    mode: RoundingMode = RoundingMode.NEAREST_EVEN,
                    threads: int = 1,
                    names: Sequence[str] | None = None,
                    strides: Sequence[int] | None = None,
                    paddings: Sequence[Padding] | None = None,
                    activations: Sequence[Activation] | None = None) -> CompareReport:
    weights = [np.asarray(w, dtype=np.float64) for w in weights]
    samples = [np.asarray(s, dtype=np.float64) for s in samples]
    if labels is not None and len(labels) != len(samples):
        raise ValueError(f"{len(labels)} labels for {len(samples)} samples")

    results: dict[QuantScheme, SchemeResult] = {}
    for scheme in SCHEMES:
        net = calibrate_network(weights, samples, scheme, precisions,
                                names=names, strides=strides, paddings=paddings,
                                activations=activations, mode=mode)
        qweights = [quantize_weights(w, layer, mode)
                    for w, layer in zip(weights, net.layers)]

        ref_w = np.concatenate([w.ravel() for w in weights])
        deq_w = np.concatenate([q.dequantize().ravel() for q in qweights])
        weight_sqnr = sqnr_db(ref_w, deq_w)

        sig = 0.0
        err = 0.0
        wrong = 0
        for i, sample in enumerate(samples):
            ref = sample
            for w, layer in zip(weights, net.layers):
                ref = conv2d_float(ref, w, geometry_of(layer), layer.activation)
            outputs, _ = run_network(net, qweights, sample, mode, threads)
            test = outputs[-1].dequantize()
            diff = ref - test
            sig += float(np.sum(ref * ref))
            err += float(np.sum(diff * diff))
            if labels is not None and classify(test) != int(labels[i]):
                wrong += 1
        if err == 0.0:
            output_sqnr = float("inf")
        elif sig == 0.0:
            output_sqnr = float("-inf")
        else:
            output_sqnr = 10.0 * np.log10(sig / err)
        class_error = 100.0 * wrong / len(samples) if labels is not None else None
        results[scheme] = SchemeResult(weight_sqnr, output_sqnr, class_error)
    return CompareReport(results=results)


def render_table(report: CompareReport) -> str:
    """Aligned text table, one row per scheme, 4-decimal values."""
    headers = ["Scheme", "Weight SQNR (dB)", "Output SQNR (dB)"]
    if report.has_labels:
        headers.append("Class error (%)")
    rows = []
    for scheme in SCHEMES:
        r = report.results[scheme]
        row = [scheme.label, f"{r.weight_sqnr_db:.4f}", f"{r.output_sqnr_db:.4f}"]
        if report.has_labels:
            row.append(f"{r.class_error_pct:.4f}")
        rows.append(row)
    widths = [max(len(h), *(len(row[i]) for row in rows))
              for i, h in enumerate(headers)]
    lines = ["  ".join(h.rjust(widths[i]) for i, h in enumerate(headers))]
    for row in rows:
        lines.append("  ".join(cell.rjust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines) + "\n"
