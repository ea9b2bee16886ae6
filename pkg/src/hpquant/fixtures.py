"""Deterministic demo fixtures for the evaluation harness and tests.

``spread_weights`` builds a layer whose per-kernel magnitudes span a factor
of 2^6 or more: one dominant kernel sits exactly on a coarse 8-bit grid while
the rest are orders of magnitude smaller, so per-kernel formats pay off and a
single whole-layer format visibly does not.  ``uniform_weights`` pins every
kernel to the same magnitude so that all partition granularities calibrate to
identical formats.
"""

from __future__ import annotations

import numpy as np


def spread_weights(in_channels: int = 4, out_channels: int = 4,
                   kernel_h: int = 5, kernel_w: int = 5, seed: int = 0) -> np.ndarray:
    """Weights with one grid-aligned dominant kernel and graded small kernels."""
    rng = np.random.default_rng(seed)
    w = np.zeros((out_channels, in_channels, kernel_h, kernel_w), dtype=np.float64)
    # dominant kernel: multiples of 2^-3, peak forced to +/-3.875
    top = rng.integers(-31, 32, size=(kernel_h, kernel_w)).astype(np.float64) * 0.125
    top[0, 0] = 3.875
    top[-1, -1] = -3.875
    w[0, 0] = top
    for oc in range(out_channels):
        # remaining kernels are 2^6 .. 2^3 below the dominant one
        scale = 3.875 * 2.0 ** (oc - 6)
        for ic in range(in_channels):
            if oc == 0 and ic == 0:
                continue
            w[oc, ic] = rng.uniform(-scale, scale, size=(kernel_h, kernel_w))
    return w


def uniform_weights(in_channels: int = 4, out_channels: int = 4,
                    kernel_h: int = 5, kernel_w: int = 5, seed: int = 0,
                    scale: float = 3.2) -> np.ndarray:
    """Weights whose kernels all share one magnitude (schemes degenerate)."""
    rng = np.random.default_rng(seed)
    w = rng.uniform(-scale, scale, size=(out_channels, in_channels, kernel_h, kernel_w))
    w[:, :, 0, 0] = scale  # pin each kernel's peak so every partition calibrates alike
    return w


def zero_weights(in_channels: int = 4, out_channels: int = 4,
                 kernel_h: int = 5, kernel_w: int = 5) -> np.ndarray:
    return np.zeros((out_channels, in_channels, kernel_h, kernel_w), dtype=np.float64)


def identity_weights(channels: int) -> np.ndarray:
    """1x1 kernels passing each input channel straight through."""
    w = np.zeros((channels, channels, 1, 1), dtype=np.float64)
    for c in range(channels):
        w[c, c, 0, 0] = 1.0
    return w


def sample_inputs(n: int, channels: int, height: int, width: int,
                  seed: int = 0, scale: float = 4.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-scale, scale, size=(n, channels, height, width))


def labeled_samples(n: int, channels: int, height: int, width: int,
                    seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Samples with one hot channel each; the hot index is the class label."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 0.2, size=(n, channels, height, width))
    labels = np.arange(n) % channels
    for i, c in enumerate(labels):
        x[i, c] = rng.uniform(2.0, 4.0, size=(height, width))
    return x, labels.astype(np.int64)
