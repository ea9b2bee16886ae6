"""Layer descriptor text format: parse and serialize.

The format is line oriented.  A file holds one or more ``layer { ... }``
blocks whose fields assign scalars (``name``, channel counts, precisions) or
indexed format literals (``coeff_format[1:5, 1:5, 0, 1]: <2:-4>``).  ``%``
starts a comment; free text after a complete ``<msb:lsb>`` literal is also
ignored, matching how published listings annotate their format lines.

Parsing collects every diagnostic it can instead of stopping at the first:
each problem becomes a :class:`ParseError` with a 1-based source span.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .fixedpoint import QFormat
from .model import (Activation, FormatTable, LayerSpec, NetworkSpec, Padding,
                    QuantScheme, validate_network)


class ParseErrorKind(Enum):
    SYNTAX = "syntax"
    UNKNOWN_FIELD = "unknown field"
    DUPLICATE_ASSIGNMENT = "duplicate assignment"
    INCOMPLETE_COVERAGE = "incomplete coverage"
    PRECISION_MISMATCH = "precision mismatch"
    BAD_INDEX_RANGE = "bad index range"


@dataclass(frozen=True)
class SourceSpan:
    """1-based line and column of a diagnostic."""

    line: int
    column: int


@dataclass(frozen=True)
class ParseError:
    span: SourceSpan
    kind: ParseErrorKind
    message: str

    def render(self) -> str:
        return f"{self.span.line}:{self.span.column}: {self.kind.value}: {self.message}"


class DescriptorParseError(ValueError):
    """Raised by :func:`parse_network` when the text has any diagnostics."""

    def __init__(self, errors: list[ParseError]):
        self.errors = list(errors)
        lines = [e.render() for e in self.errors[:8]]
        if len(self.errors) > 8:
            lines.append(f"... and {len(self.errors) - 8} more")
        super().__init__("descriptor has errors:\n" + "\n".join(lines))


_SCALAR_KEYS = {
    "name", "number of input channels", "number of output channels",
    "kernel size", "quantization structure", "coeff_precision",
    "input_data_precision", "accumulator_precision", "accumulator_format",
    "output_data_precision", "stride", "padding", "activation",
}
_INDEXED_KEYS = {"coeff_format", "input_data_format", "output_data_format"}
_KEYS = _SCALAR_KEYS | _INDEXED_KEYS
_BIT_KEYS = {"coeff_precision", "input_data_precision",
             "accumulator_precision", "output_data_precision"}


def _strip_comment(line: str) -> str:
    in_quotes = False
    for i, ch in enumerate(line):
        if ch == '"':
            in_quotes = not in_quotes
        elif ch == "%" and not in_quotes:
            return line[:i]
    return line


class _Cursor:
    """Single-line scanner tracking 1-based columns."""

    def __init__(self, text: str, line_no: int):
        self.s = text
        self.i = 0
        self.line = line_no

    def span(self) -> SourceSpan:
        return SourceSpan(self.line, self.i + 1)

    def peek(self) -> str:
        return self.s[self.i] if self.i < len(self.s) else ""

    def advance(self) -> str:
        ch = self.peek()
        self.i += 1
        return ch

    def skip_ws(self) -> None:
        while self.peek() in (" ", "\t"):
            self.i += 1

    def at_end(self) -> bool:
        self.skip_ws()
        return self.i >= len(self.s)

    def eat(self, ch: str) -> bool:
        self.skip_ws()
        if self.peek() == ch:
            self.i += 1
            return True
        return False

    def read_int(self) -> int | None:
        self.skip_ws()
        start = self.i
        if self.peek() == "-":
            self.i += 1
        if not self.peek().isdigit():
            self.i = start
            return None
        while self.peek().isdigit():
            self.i += 1
        return int(self.s[start:self.i])

    def read_word(self) -> str:
        self.skip_ws()
        start = self.i
        while self.peek().isalnum() or self.peek() == "_":
            self.i += 1
        return self.s[start:self.i]


@dataclass
class _Assignment:
    key: str
    indices: list[tuple[int, int]] | None  # normalized inclusive (lo, hi)
    value: object
    span: SourceSpan


class _Parser:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.errors: list[ParseError] = []

    def fail(self, span: SourceSpan, kind: ParseErrorKind, message: str) -> None:
        self.errors.append(ParseError(span, kind, message))

    def parse(self) -> NetworkSpec | None:
        layers: list[LayerSpec] = []
        saw_layer = False
        i = 0
        n = len(self.lines)
        while i < n:
            raw = _strip_comment(self.lines[i])
            if not raw.strip():
                i += 1
                continue
            cur = _Cursor(raw, i + 1)
            cur.skip_ws()
            header_span = cur.span()
            word = cur.read_word()
            if word == "layer" and cur.eat("{") and cur.at_end():
                saw_layer = True
                layer, i = self._parse_layer(header_span, i + 1)
                if layer is not None:
                    layers.append(layer)
                continue
            self.fail(header_span, ParseErrorKind.SYNTAX,
                      f"expected 'layer {{', found '{raw.strip()}'")
            i += 1
        if not saw_layer and not self.errors:
            self.fail(SourceSpan(1, 1), ParseErrorKind.SYNTAX,
                      "descriptor contains no layers")
        if self.errors:
            return None
        return NetworkSpec(layers=tuple(layers))

    def _parse_layer(self, header_span: SourceSpan,
                     start: int) -> tuple[LayerSpec | None, int]:
        assignments: list[_Assignment] = []
        i = start
        n = len(self.lines)
        closed = False
        while i < n:
            raw = _strip_comment(self.lines[i])
            if not raw.strip():
                i += 1
                continue
            cur = _Cursor(raw, i + 1)
            if cur.eat("}"):
                if not cur.at_end():
                    self.fail(cur.span(), ParseErrorKind.SYNTAX,
                              "unexpected text after '}'")
                closed = True
                i += 1
                break
            if raw.strip().startswith("layer"):
                # a new block opened before this one closed; recover there
                self.fail(header_span, ParseErrorKind.SYNTAX,
                          "layer block is not closed before the next 'layer'")
                break
            asn = self._parse_field(cur)
            if asn is not None:
                assignments.append(asn)
            i += 1
        if not closed and i >= n:
            self.fail(header_span, ParseErrorKind.SYNTAX,
                      "layer block is missing its closing '}'")
        return self._build_layer(header_span, assignments), i

    def _parse_field(self, cur: _Cursor) -> _Assignment | None:
        cur.skip_ws()
        key_span = cur.span()
        start = cur.i
        while cur.peek().isalpha() or cur.peek() in ("_", " "):
            cur.i += 1
        key = cur.s[start:cur.i].rstrip()
        if not key:
            self.fail(key_span, ParseErrorKind.SYNTAX,
                      f"expected a field name, found '{cur.s.strip()}'")
            return None
        if key not in _KEYS:
            self.fail(key_span, ParseErrorKind.UNKNOWN_FIELD,
                      f"unknown field '{key}'")
            return None
        indices: list[tuple[int, int]] | None = None
        if cur.eat("["):
            indices = self._parse_indices(cur, key)
            if indices is None:
                return None
        if not cur.eat(":"):
            self.fail(cur.span(), ParseErrorKind.SYNTAX,
                      f"expected ':' after '{key}'")
            return None
        value = self._parse_value(cur, key)
        if value is None:
            return None
        return _Assignment(key=key, indices=indices, value=value, span=key_span)

    def _parse_indices(self, cur: _Cursor,
                       key: str) -> list[tuple[int, int]] | None:
        out: list[tuple[int, int]] = []
        while True:
            lo = cur.read_int()
            if lo is None:
                self.fail(cur.span(), ParseErrorKind.SYNTAX,
                          f"expected an index in '{key}[...]'")
                return None
            hi = lo
            if cur.eat(":"):
                hi = cur.read_int()
                if hi is None:
                    self.fail(cur.span(), ParseErrorKind.SYNTAX,
                              f"expected an index after ':' in '{key}[...]'")
                    return None
            if hi < lo:
                self.fail(cur.span(), ParseErrorKind.BAD_INDEX_RANGE,
                          f"empty index range {lo}:{hi} in '{key}[...]'")
                return None
            out.append((lo, hi))
            if cur.eat("]"):
                return out
            if not cur.eat(","):
                self.fail(cur.span(), ParseErrorKind.SYNTAX,
                          f"expected ',' or ']' in '{key}[...]'")
                return None

    def _parse_value(self, cur: _Cursor, key: str) -> object | None:
        cur.skip_ws()
        span = cur.span()
        if key == "name":
            return self._finish(cur, key, self._parse_string(cur))
        if key in ("number of input channels", "number of output channels", "stride"):
            v = cur.read_int()
            if v is None:
                self.fail(span, ParseErrorKind.SYNTAX, f"expected an integer for '{key}'")
                return None
            if v < 1:
                self.fail(span, ParseErrorKind.SYNTAX, f"'{key}' must be at least 1")
                return None
            return self._finish(cur, key, v)
        if key == "kernel size":
            return self._parse_kernel(cur, span)
        if key == "quantization structure":
            word = cur.read_word()
            try:
                scheme = QuantScheme.from_label(word)
            except ValueError:
                self.fail(span, ParseErrorKind.SYNTAX,
                          f"quantization structure must be 2D, 3D or 4D, found '{word}'")
                return None
            return self._finish(cur, key, scheme)
        if key in _BIT_KEYS:
            v = cur.read_int()
            if v is None or not cur.s[cur.i:cur.i + 1] == "b":
                self.fail(span, ParseErrorKind.SYNTAX,
                          f"expected a bit width like '8b' for '{key}'")
                return None
            cur.i += 1
            return self._finish(cur, key, v)
        if key == "padding":
            word = cur.read_word()
            if word not in ("valid", "same"):
                self.fail(span, ParseErrorKind.SYNTAX,
                          f"padding must be 'valid' or 'same', found '{word}'")
                return None
            return self._finish(cur, key, Padding(word))
        if key == "activation":
            word = cur.read_word()
            if word not in ("none", "relu"):
                self.fail(span, ParseErrorKind.SYNTAX,
                          f"activation must be 'none' or 'relu', found '{word}'")
                return None
            return self._finish(cur, key, Activation(word))
        # remaining keys carry a format literal; trailing prose is a comment
        return self._parse_format(cur, span)

    def _finish(self, cur: _Cursor, key: str, value: object) -> object | None:
        if value is None:
            return None
        if key == "kernel size":
            rest = cur.s[cur.i:].strip()
            if rest in ("", "spatial kernels"):
                return value
            self.fail(cur.span(), ParseErrorKind.SYNTAX,
                      f"unexpected text after kernel size: '{rest}'")
            return None
        if not cur.at_end():
            self.fail(cur.span(), ParseErrorKind.SYNTAX,
                      f"unexpected text after value: '{cur.s[cur.i:].strip()}'")
            return None
        return value

    def _parse_string(self, cur: _Cursor) -> str | None:
        if not cur.eat('"'):
            self.fail(cur.span(), ParseErrorKind.SYNTAX, "expected a quoted string")
            return None
        start = cur.i
        while cur.peek() not in ('"', ""):
            cur.i += 1
        if cur.peek() != '"':
            self.fail(cur.span(), ParseErrorKind.SYNTAX, "unterminated string")
            return None
        value = cur.s[start:cur.i]
        cur.i += 1
        return value

    def _parse_kernel(self, cur: _Cursor, span: SourceSpan) -> object | None:
        h = cur.read_int()
        if h is None or cur.peek() != "x":
            self.fail(span, ParseErrorKind.SYNTAX,
                      "expected a kernel size like '5x5'")
            return None
        cur.i += 1
        w = cur.read_int()
        if w is None:
            self.fail(span, ParseErrorKind.SYNTAX,
                      "expected a kernel size like '5x5'")
            return None
        if h < 1 or w < 1:
            self.fail(span, ParseErrorKind.SYNTAX, "kernel dimensions must be at least 1")
            return None
        return self._finish(cur, "kernel size", (h, w))

    def _parse_format(self, cur: _Cursor, span: SourceSpan) -> QFormat | None:
        if not cur.eat("<"):
            self.fail(span, ParseErrorKind.SYNTAX, "expected a format literal like <2:-4>")
            return None
        msb = cur.read_int()
        if msb is None or not cur.eat(":"):
            self.fail(span, ParseErrorKind.SYNTAX, "expected a format literal like <2:-4>")
            return None
        lsb = cur.read_int()
        if lsb is None or not cur.eat(">"):
            self.fail(span, ParseErrorKind.SYNTAX, "expected a format literal like <2:-4>")
            return None
        try:
            return QFormat(msb, lsb)
        except ValueError as exc:
            self.fail(span, ParseErrorKind.SYNTAX, str(exc))
            return None

    # ------------------------------------------------------------------
    # semantic assembly

    def _build_layer(self, header_span: SourceSpan,
                     assignments: list[_Assignment]) -> LayerSpec | None:
        before = len(self.errors)
        scalars: dict[str, _Assignment] = {}
        indexed: dict[str, list[_Assignment]] = {k: [] for k in _INDEXED_KEYS}
        for asn in assignments:
            if asn.key in _INDEXED_KEYS:
                if asn.indices is None:
                    self.fail(asn.span, ParseErrorKind.SYNTAX,
                              f"'{asn.key}' requires an index list")
                    continue
                indexed[asn.key].append(asn)
                continue
            if asn.indices is not None:
                self.fail(asn.span, ParseErrorKind.SYNTAX,
                          f"'{asn.key}' does not take indices")
                continue
            if asn.key in scalars:
                self.fail(asn.span, ParseErrorKind.DUPLICATE_ASSIGNMENT,
                          f"'{asn.key}' is assigned more than once")
                continue
            scalars[asn.key] = asn

        required = ["name", "number of input channels", "number of output channels",
                    "kernel size", "quantization structure", "coeff_precision",
                    "input_data_precision", "accumulator_precision",
                    "accumulator_format", "output_data_precision"]
        for key in required:
            if key not in scalars:
                self.fail(header_span, ParseErrorKind.INCOMPLETE_COVERAGE,
                          f"layer is missing required field '{key}'")
        shape_keys = ("number of input channels", "number of output channels",
                      "kernel size", "quantization structure")
        if all(k in scalars for k in shape_keys):
            ci = scalars["number of input channels"].value
            co = scalars["number of output channels"].value
            kh, kw = scalars["kernel size"].value
            scheme = scalars["quantization structure"].value
            entries = None
            if "coeff_precision" in scalars:
                entries = self._build_coeff_table(
                    indexed["coeff_format"], scheme, ci, co, kh, kw,
                    scalars["coeff_precision"].value, header_span)
            in_fmts = None
            if "input_data_precision" in scalars:
                in_fmts = self._build_channel_formats(
                    indexed["input_data_format"], "input_data_format", ci,
                    scalars["input_data_precision"].value, header_span)
            out_fmts = None
            if "output_data_precision" in scalars:
                out_fmts = self._build_channel_formats(
                    indexed["output_data_format"], "output_data_format", co,
                    scalars["output_data_precision"].value, header_span)
        if "accumulator_format" in scalars and "accumulator_precision" in scalars:
            acc = scalars["accumulator_format"]
            acc_bits = scalars["accumulator_precision"].value
            if acc.value.precision != acc_bits:
                self.fail(acc.span, ParseErrorKind.PRECISION_MISMATCH,
                          f"accumulator_format {acc.value} has precision "
                          f"{acc.value.precision}b, expected {acc_bits}b")

        if len(self.errors) > before:
            return None
        return LayerSpec(
            name=scalars["name"].value,
            in_channels=ci,
            out_channels=co,
            kernel_h=kh,
            kernel_w=kw,
            coeff_precision=scalars["coeff_precision"].value,
            coeff_formats=FormatTable(scheme=scheme, entries=entries),
            input_data_precision=scalars["input_data_precision"].value,
            input_formats=in_fmts,
            accumulator_precision=scalars["accumulator_precision"].value,
            accumulator_format=scalars["accumulator_format"].value,
            output_data_precision=scalars["output_data_precision"].value,
            output_formats=out_fmts,
            stride=scalars["stride"].value if "stride" in scalars else 1,
            padding=scalars["padding"].value if "padding" in scalars else Padding.VALID,
            activation=(scalars["activation"].value
                        if "activation" in scalars else Activation.NONE),
        )

    def _build_coeff_table(self, lines: list[_Assignment], scheme: QuantScheme,
                           ci: int, co: int, kh: int, kw: int, bits: int,
                           header_span: SourceSpan) -> dict[tuple[int, ...], QFormat]:
        entries: dict[tuple[int, ...], QFormat] = {}
        for asn in lines:
            idx = asn.indices
            if len(idx) != 4:
                self.fail(asn.span, ParseErrorKind.BAD_INDEX_RANGE,
                          "coeff_format takes [x, y, input channel, output channel]")
                continue
            x, y, icr, ocr = idx
            if x != (1, kw) or y != (1, kh):
                self.fail(asn.span, ParseErrorKind.BAD_INDEX_RANGE,
                          f"spatial indices must cover the full kernel "
                          f"[1:{kw}, 1:{kh}], found [{x[0]}:{x[1]}, {y[0]}:{y[1]}]")
                continue
            key = self._channel_key(asn, scheme, icr, ocr, ci, co)
            if key is None:
                continue
            if key in entries:
                self.fail(asn.span, ParseErrorKind.DUPLICATE_ASSIGNMENT,
                          f"coeff_format already assigned for {self._cell(scheme, key)}")
                continue
            fmt: QFormat = asn.value
            if fmt.precision != bits:
                self.fail(asn.span, ParseErrorKind.PRECISION_MISMATCH,
                          f"coeff_format {fmt} has precision {fmt.precision}b, "
                          f"expected {bits}b")
                continue
            entries[key] = fmt
        missing = [k for k in sorted(FormatTable(scheme=scheme, entries={})
                                     .expected_keys(ci, co)) if k not in entries]
        if missing:
            shown = ", ".join(self._cell(scheme, k) for k in missing[:8])
            if len(missing) > 8:
                shown += f" and {len(missing) - 8} more"
            self.fail(header_span, ParseErrorKind.INCOMPLETE_COVERAGE,
                      f"coeff_format is missing assignments for {shown}")
        return entries

    def _channel_key(self, asn: _Assignment, scheme: QuantScheme,
                     icr: tuple[int, int], ocr: tuple[int, int],
                     ci: int, co: int) -> tuple[int, ...] | None:
        full_ic = (0, ci - 1)
        full_oc = (0, co - 1)
        if scheme is QuantScheme.TWO_D:
            wanted = "a single input channel and a single output channel"
            ok = icr[0] == icr[1] and ocr[0] == ocr[1]
        elif scheme is QuantScheme.THREE_D:
            wanted = f"the full input range 0:{ci - 1} and a single output channel"
            ok = icr == full_ic and ocr[0] == ocr[1]
        else:
            wanted = f"the full ranges 0:{ci - 1} and 0:{co - 1}"
            ok = icr == full_ic and ocr == full_oc
        if not ok:
            self.fail(asn.span, ParseErrorKind.BAD_INDEX_RANGE,
                      f"{scheme.label} coeff_format requires {wanted}, found "
                      f"[{icr[0]}:{icr[1]}, {ocr[0]}:{ocr[1]}]")
            return None
        if not (0 <= icr[0] <= icr[1] < ci and 0 <= ocr[0] <= ocr[1] < co):
            self.fail(asn.span, ParseErrorKind.BAD_INDEX_RANGE,
                      f"channel indices [{icr[0]}:{icr[1]}, {ocr[0]}:{ocr[1]}] are "
                      f"outside {ci} input / {co} output channels")
            return None
        if scheme is QuantScheme.TWO_D:
            return (icr[0], ocr[0])
        if scheme is QuantScheme.THREE_D:
            return (ocr[0],)
        return ()

    @staticmethod
    def _cell(scheme: QuantScheme, key: tuple[int, ...]) -> str:
        if scheme is QuantScheme.TWO_D:
            return f"(input channel {key[0]}, output channel {key[1]})"
        if scheme is QuantScheme.THREE_D:
            return f"output channel {key[0]}"
        return "the layer-wide entry"

    def _build_channel_formats(self, lines: list[_Assignment], key: str,
                               count: int, bits: int,
                               header_span: SourceSpan) -> tuple[QFormat, ...] | None:
        fmts: dict[int, QFormat] = {}
        for asn in lines:
            idx = asn.indices
            if len(idx) != 1 or idx[0][0] != idx[0][1]:
                self.fail(asn.span, ParseErrorKind.BAD_INDEX_RANGE,
                          f"'{key}' takes a single channel index")
                continue
            c = idx[0][0]
            if not 0 <= c < count:
                self.fail(asn.span, ParseErrorKind.BAD_INDEX_RANGE,
                          f"channel index {c} is outside 0..{count - 1}")
                continue
            if c in fmts:
                self.fail(asn.span, ParseErrorKind.DUPLICATE_ASSIGNMENT,
                          f"'{key}[{c}]' is assigned more than once")
                continue
            fmt: QFormat = asn.value
            if fmt.precision != bits:
                self.fail(asn.span, ParseErrorKind.PRECISION_MISMATCH,
                          f"{key}[{c}] {fmt} has precision {fmt.precision}b, "
                          f"expected {bits}b")
                continue
            fmts[c] = fmt
        missing = [c for c in range(count) if c not in fmts]
        if missing:
            shown = ", ".join(str(c) for c in missing[:8])
            if len(missing) > 8:
                shown += f" and {len(missing) - 8} more"
            self.fail(header_span, ParseErrorKind.INCOMPLETE_COVERAGE,
                      f"'{key}' is missing channels {shown}")
            return None
        return tuple(fmts[c] for c in range(count))


def try_parse_network(text: str) -> tuple[NetworkSpec | None, list[ParseError]]:
    """Parse descriptor text, collecting every diagnostic."""
    parser = _Parser(text)
    spec = parser.parse()
    return spec, parser.errors


def parse_network(text: str) -> NetworkSpec:
    spec, errors = try_parse_network(text)
    if errors or spec is None:
        raise DescriptorParseError(errors)
    return spec


def serialize_network(net: NetworkSpec) -> str:
    """Canonical text for a valid network: one assignment per line, no comments."""
    if not net.layers:
        return ""
    problems = validate_network(net)
    if problems:
        raise ValueError("cannot serialize an invalid network: " + "; ".join(problems))
    out: list[str] = []
    for layer in net.layers:
        if '"' in layer.name or "\n" in layer.name:
            raise ValueError(f"layer name {layer.name!r} cannot be serialized")
        ci, co = layer.in_channels, layer.out_channels
        spatial = f"1:{layer.kernel_w}, 1:{layer.kernel_h}"
        out.append("layer {")
        out.append(f'  name: "{layer.name}"')
        out.append(f"  number of input channels: {ci}")
        out.append(f"  number of output channels: {co}")
        out.append(f"  kernel size: {layer.kernel_h}x{layer.kernel_w}")
        out.append(f"  quantization structure: {layer.scheme.label}")
        out.append(f"  coeff_precision: {layer.coeff_precision}b")
        scheme = layer.scheme
        if scheme is QuantScheme.TWO_D:
            for ic in range(ci):
                for oc in range(co):
                    fmt = layer.coeff_formats.lookup(ic, oc)
                    out.append(f"  coeff_format[{spatial}, {ic}, {oc}]: {fmt}")
        elif scheme is QuantScheme.THREE_D:
            for oc in range(co):
                fmt = layer.coeff_formats.lookup(0, oc)
                out.append(f"  coeff_format[{spatial}, 0:{ci - 1}, {oc}]: {fmt}")
        else:
            fmt = layer.coeff_formats.lookup(0, 0)
            out.append(f"  coeff_format[{spatial}, 0:{ci - 1}, 0:{co - 1}]: {fmt}")
        out.append(f"  input_data_precision: {layer.input_data_precision}b")
        for c in range(ci):
            out.append(f"  input_data_format[{c}]: {layer.input_formats[c]}")
        out.append(f"  accumulator_precision: {layer.accumulator_precision}b")
        out.append(f"  accumulator_format: {layer.accumulator_format}")
        out.append(f"  output_data_precision: {layer.output_data_precision}b")
        for c in range(co):
            out.append(f"  output_data_format[{c}]: {layer.output_formats[c]}")
        out.append(f"  stride: {layer.stride}")
        out.append(f"  padding: {layer.padding.value}")
        out.append(f"  activation: {layer.activation.value}")
        out.append("}")
    return "\n".join(out) + "\n"
