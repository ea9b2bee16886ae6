"""Hybrid fixed-point quantization for convolutional layers.

Coefficients, feature maps, and accumulators each carry a two's-complement
``<msb:lsb>`` format; coefficient formats can be assigned per kernel (2D),
per output channel (3D), or per layer (4D).  The package calibrates formats
from data, serializes them as text descriptors, and runs convolutions
bit-exactly on integer codes.
"""

from .calibration import (Precisions, RangeStats, calibrate_activations,
                          calibrate_network, calibrate_weights, choose_format,
                          collect_stats)
from .compare import CompareReport, SchemeResult, compare_schemes, render_table
from .descriptor import (DescriptorParseError, ParseError, ParseErrorKind,
                         SourceSpan, parse_network, serialize_network,
                         try_parse_network)
from .engine import (ConvGeometry, LayerErrorReport, conv2d_float,
                     conv2d_quantized, error_report, quantize_input,
                     run_network, sqnr_db)
from .estimator import HybridPrecisionQuantizer
from .fixedpoint import (MAX_PRECISION, QCode, QFormat, RoundingMode, align,
                         align_code, dequantize, float_to_code, precision,
                         product_format, quantize, round_ratio, sat_add,
                         saturate, shift_round, value_range)
from .model import (Activation, FormatTable, LayerSpec, NetworkSpec, Padding,
                    QTensor, QuantScheme, format_for, quantize_weights,
                    validate, validate_network)
from .tensorio import read_codes, read_floats, read_tensor, write_tensor

__version__ = "0.1.0"
