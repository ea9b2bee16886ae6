"""Exact arithmetic on signed fixed-point formats.

A format ``<msb:lsb>`` has an implicit sign bit followed by magnitude bits
weighted 2^msb down to 2^lsb, so its width is ``msb - lsb + 2`` bits and a
stored two's-complement code ``c`` represents the value ``c * 2**lsb``.
``<2:-4>`` is the 8-bit format ``<sgn b2 b1 b0 . b-1 b-2 b-3 b-4>``.

Everything here is computed on Python integers (exact shifts and rounding;
no float in the data path), because bit-exactness is the contract.  Overflow
always saturates to the extreme codes, never wraps.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum

MAX_PRECISION = 32  # keeps any code (and 2x headroom) inside a 64-bit word

_LITERAL_RE = re.compile(r"^<\s*(-?\d+)\s*:\s*(-?\d+)\s*>$")


class RoundingMode(Enum):
    """Tie-breaking rule applied whenever a value falls between grid points."""

    NEAREST_EVEN = "even"        # ties to the even code (default everywhere)
    NEAREST_AWAY = "away"        # ties away from zero
    TRUNCATE = "trunc"           # toward negative infinity


@dataclass(frozen=True)
class QFormat:
    """Signed fixed-point format ``<msb:lsb>`` (sign bit implicit)."""

    msb: int
    lsb: int

    def __post_init__(self) -> None:
        if self.msb < self.lsb:
            raise ValueError(f"msb {self.msb} must be >= lsb {self.lsb}")
        p = self.msb - self.lsb + 2
        if not 2 <= p <= MAX_PRECISION:
            raise ValueError(f"precision {p} outside [2, {MAX_PRECISION}] for <{self.msb}:{self.lsb}>")

    @property
    def precision(self) -> int:
        """Total width in bits, sign included."""
        return self.msb - self.lsb + 2

    @property
    def min_code(self) -> int:
        return -(1 << (self.precision - 1))

    @property
    def max_code(self) -> int:
        return (1 << (self.precision - 1)) - 1

    @property
    def min_value(self) -> float:
        return -math.ldexp(1.0, self.msb + 1)

    @property
    def max_value(self) -> float:
        return math.ldexp(self.max_code, self.lsb)

    @property
    def ulp(self) -> float:
        return math.ldexp(1.0, self.lsb)

    def __str__(self) -> str:
        return f"<{self.msb}:{self.lsb}>"

    @classmethod
    def from_literal(cls, text: str) -> "QFormat":
        m = _LITERAL_RE.match(text.strip())
        if m is None:
            raise ValueError(f"not a format literal: {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))


@dataclass(frozen=True)
class QCode:
    """A two's-complement code together with the format interpreting it."""

    code: int
    fmt: QFormat

    def __post_init__(self) -> None:
        if not self.fmt.min_code <= self.code <= self.fmt.max_code:
            raise ValueError(f"code {self.code} outside range of {self.fmt}")

    @property
    def value(self) -> float:
        return math.ldexp(self.code, self.fmt.lsb)


def precision(fmt: QFormat) -> int:
    """Width of ``fmt`` in bits, sign bit included."""
    return fmt.precision


def value_range(fmt: QFormat) -> tuple[float, float]:
    """(min, max) representable values: -2^(msb+1) and 2^(msb+1) - 2^lsb."""
    return fmt.min_value, fmt.max_value


def saturate(code: int, fmt: QFormat) -> int:
    """Clamp an unbounded integer code into the code range of ``fmt``."""
    if code > fmt.max_code:
        return fmt.max_code
    if code < fmt.min_code:
        return fmt.min_code
    return code


def round_ratio(num: int, den: int, mode: RoundingMode = RoundingMode.NEAREST_EVEN) -> int:
    """Round the exact rational num/den (den > 0) to an integer per ``mode``."""
    q, r = divmod(num, den)
    if mode is RoundingMode.TRUNCATE or r == 0:
        return q
    twice = 2 * r
    if twice > den:
        return q + 1
    if twice < den:
        return q
    if mode is RoundingMode.NEAREST_EVEN:
        return q + (q & 1)
    # NEAREST_AWAY: floor already points away from zero for negative values
    return q + 1 if num > 0 else q


def shift_round(code: int, shift: int, mode: RoundingMode = RoundingMode.NEAREST_EVEN) -> int:
    """Exact code * 2^shift, rounding per ``mode`` when shift < 0."""
    if shift >= 0:
        return code << shift
    return round_ratio(code, 1 << -shift, mode)


def float_to_code(x: float, fmt: QFormat, mode: RoundingMode = RoundingMode.NEAREST_EVEN) -> int:
    """Quantize a finite real to a saturated integer code of ``fmt``.

    The ratio x / 2^lsb is formed exactly from the binary expansion of x, so
    rounding decisions (ties included) are never corrupted by float error.
    """
    if not math.isfinite(x):
        raise ValueError(f"cannot quantize non-finite value {x!r}")
    num, den = float(x).as_integer_ratio()
    if fmt.lsb <= 0:
        num <<= -fmt.lsb
    else:
        den <<= fmt.lsb
    return saturate(round_ratio(num, den, mode), fmt)


def quantize(x: float, fmt: QFormat, mode: RoundingMode = RoundingMode.NEAREST_EVEN) -> QCode:
    """Round a real onto the grid of ``fmt``, saturating at the range ends."""
    return QCode(float_to_code(x, fmt, mode), fmt)


def dequantize(qc: QCode) -> float:
    """Exact represented value code * 2^lsb."""
    return qc.value


def align_code(code: int, src: QFormat, dst: QFormat, mode: RoundingMode = RoundingMode.NEAREST_EVEN) -> int:
    """Re-express a raw (possibly out-of-range) code of ``src`` in ``dst``.

    Pure shift/round/saturate; bit-exactly equals quantizing the represented
    value into ``dst``.  ``code`` need not fit ``src`` (partial sums don't).
    """
    return saturate(shift_round(code, src.lsb - dst.lsb, mode), dst)


def align(qc: QCode, target: QFormat, mode: RoundingMode = RoundingMode.NEAREST_EVEN) -> QCode:
    """Convert a code between formats with rounding and saturation."""
    return QCode(align_code(qc.code, qc.fmt, target, mode), target)


def sat_add(a: QCode, b: QCode) -> QCode:
    """Saturating add of two codes sharing one format."""
    if a.fmt != b.fmt:
        raise ValueError(f"sat_add format mismatch: {a.fmt} vs {b.fmt}")
    return QCode(saturate(a.code + b.code, a.fmt), a.fmt)


def product_format(f1: QFormat, f2: QFormat) -> QFormat:
    """Exact container format for products of codes from ``f1`` and ``f2``.

    Every product c1*c2 lands on the 2^(lsb1+lsb2) grid with magnitude at
    most 2^(msb1+msb2+2), so <msb1+msb2+1 : lsb1+lsb2> holds it without
    rounding.
    """
    return QFormat(f1.msb + f2.msb + 1, f1.lsb + f2.lsb)
