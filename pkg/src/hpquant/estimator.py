"""scikit-learn style front door for calibrate / quantize / run.

``fit`` calibrates formats on sample feature maps, ``transform`` returns the
dequantized feature maps the integer engine produces, and ``predict`` labels
each sample with the output channel carrying the largest global sum.  All
constructor arguments are plain strings and ints so ``get_params`` /
``set_params`` round-trip cleanly.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .calibration import Precisions, calibrate_network
from .compare import classify
from .descriptor import serialize_network
from .engine import run_network
from .fixedpoint import RoundingMode
from .model import Activation, Padding, QuantScheme, quantize_weights


class HybridPrecisionQuantizer(BaseEstimator, TransformerMixin):
    """Quantize a fixed convolutional stack and run it bit-exactly.

    Parameters
    ----------
    weights : list of ndarray
        One (out_channels, in_channels, kh, kw) float tensor per layer.
    scheme : {"2d", "3d", "4d"}
        Coefficient format granularity.
    coeff_bits, data_bits, acc_bits, out_bits : int
        Precision budgets for coefficients, feature maps, the accumulator,
        and outputs.
    rounding : {"even", "away", "trunc"}
    stride : int, applied to every layer.
    padding : {"valid", "same"}
    activation : {"none", "relu"}
    threads : int, engine worker threads (never changes results).
    """

    def __init__(self, weights=None, scheme="2d", coeff_bits=8, data_bits=8,
                 acc_bits=16, out_bits=8, rounding="even", stride=1,
                 padding="valid", activation="none", threads=1):
        self.weights = weights
        self.scheme = scheme
        self.coeff_bits = coeff_bits
        self.data_bits = data_bits
        self.acc_bits = acc_bits
        self.out_bits = out_bits
        self.rounding = rounding
        self.stride = stride
        self.padding = padding
        self.activation = activation
        self.threads = threads

    def _check_X(self, X) -> np.ndarray:
        X = check_array(X, allow_nd=True, dtype=np.float64)
        if X.ndim == 3:
            X = X[np.newaxis]
        if X.ndim != 4:
            raise ValueError(
                f"X must be (n_samples, channels, height, width), got shape {X.shape}")
        return X

    def fit(self, X, y=None):
        """Calibrate all formats on the sample maps in X."""
        if not self.weights:
            raise ValueError("weights must be a non-empty list of 4-d float tensors")
        X = self._check_X(X)
        weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        n = len(weights)
        mode = RoundingMode(self.rounding)
        self.network_ = calibrate_network(
            weights, list(X), QuantScheme.from_label(self.scheme),
            Precisions(coeff=self.coeff_bits, data=self.data_bits,
                       acc=self.acc_bits, out=self.out_bits),
            strides=[self.stride] * n,
            paddings=[Padding(self.padding)] * n,
            activations=[Activation(self.activation)] * n,
            mode=mode)
        self.qweights_ = [quantize_weights(w, layer, mode)
                          for w, layer in zip(weights, self.network_.layers)]
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        return self

    def transform(self, X) -> np.ndarray:
        """Dequantized final feature maps, shape (n, out_channels, oh, ow)."""
        check_is_fitted(self, "network_")
        X = self._check_X(X)
        mode = RoundingMode(self.rounding)
        maps = []
        for sample in X:
            outputs, _ = run_network(self.network_, self.qweights_, sample,
                                     mode, self.threads)
            maps.append(outputs[-1].dequantize())
        return np.stack(maps)

    def predict(self, X) -> np.ndarray:
        """Per-sample argmax over the output channels' global sums."""
        maps = self.transform(X)
        return np.array([classify(m) for m in maps], dtype=np.int64)

    def score(self, X, y) -> float:
        """Classification accuracy against integer labels y."""
        y = np.asarray(y, dtype=np.int64)
        pred = self.predict(X)
        if y.shape != pred.shape:
            raise ValueError(f"y has shape {y.shape}, expected {pred.shape}")
        return float(np.mean(pred == y))

    def describe(self) -> str:
        """The calibrated network as descriptor text."""
        check_is_fitted(self, "network_")
        return serialize_network(self.network_)
