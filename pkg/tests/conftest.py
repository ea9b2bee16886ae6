"""Shared helpers: repo paths and a random small-layer generator."""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np

from hpquant.calibration import Precisions, calibrate_network
from hpquant.fixedpoint import QFormat
from hpquant.model import Activation, NetworkSpec, Padding, QuantScheme

REPO = Path(__file__).resolve().parent.parent
GOLDEN = REPO / "fixtures" / "fig1.hpq"

SCHEMES = (QuantScheme.TWO_D, QuantScheme.THREE_D, QuantScheme.FOUR_D)


def make_random_layer(seed: int) -> tuple[NetworkSpec, np.ndarray, np.ndarray]:
    """A calibrated single-layer network plus float weights and one sample.

    Shapes stay small (channels <= 4, kernels <= 5, spatial <= 8) and kernel
    magnitudes vary over several octaves so all partition schemes, paddings,
    strides and occasional saturation get exercised.
    """
    rng = np.random.default_rng(seed)
    ci = int(rng.integers(1, 5))
    co = int(rng.integers(1, 5))
    kh = int(rng.choice([1, 3, 5]))
    kw = int(rng.choice([1, 3, 5]))
    h = int(rng.integers(kh, 9))
    w = int(rng.integers(kw, 9))
    stride = 1 + seed % 2
    padding = Padding.SAME_ZERO if (seed // 2) % 2 else Padding.VALID
    activation = Activation.RELU if (seed // 4) % 2 else Activation.NONE
    scheme = SCHEMES[seed % 3]

    weights = np.empty((co, ci, kh, kw))
    for oc in range(co):
        for ic in range(ci):
            scale = 2.0 ** int(rng.integers(-5, 4))
            weights[oc, ic] = rng.uniform(-scale, scale, (kh, kw))
    x = rng.uniform(-4.0, 4.0, (ci, h, w)) * 2.0 ** int(rng.integers(-2, 3))

    precisions = Precisions(coeff=int(rng.integers(6, 10)),
                            data=int(rng.integers(6, 10)),
                            acc=int(rng.integers(12, 18)),
                            out=int(rng.integers(6, 10)))
    net = calibrate_network([weights], [x], scheme, precisions,
                            strides=[stride], paddings=[padding],
                            activations=[activation])
    if seed % 5 == 0:
        # shift the accumulator window down a few positions to force
        # saturation through the sat_add path
        layer = net.layers[0]
        drop = int(rng.integers(1, 4))
        acc = layer.accumulator_format
        squeezed = QFormat(acc.msb - drop, acc.lsb - drop)
        net = NetworkSpec(layers=(replace(layer, accumulator_format=squeezed),))
    return net, weights, x
