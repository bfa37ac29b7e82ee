"""
Model specification files: tokenizer, recursive-descent parser, printer and
validator.

Grammar (one-token lookahead)::

    document := item* EOF
    item     := ident ( "{" item* "}" | "=" value )
    value    := atom ( "+" atom )*
    atom     := number | string | ident [ "(" args ")" ]
    args     := [ ident "=" value ( "," ident "=" value )* [","] ]

Comments run from ``#`` to the end of the line. A document is first parsed
into a position-carrying AST (``parse_document``) and then interpreted as a
``ModelSpec`` (``parse``). Both stages report failures as ``ParseError`` with
the line and column of the offending token.

Example::

    version = 1
    levy { kind = brownian  b = 0.0  c = 1.0 }
    volatility {
      term {
        phi = constant(value = 1.0)
        lambda = exp_poly(rho = 0.01, theta = 1.0)
      }
    }
    space { beta = 0.5  beta_prime = 1.0 }
"""

import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator
from scipy.special import expit

from levyhjmm.core.config import numerics_config
from levyhjmm.core.curve_space import (
    CurveSpaceConfig,
    ForwardCurve,
    in_H0,
    integral_values,
    read_curve_table,
)
from levyhjmm.core.errors import ParseError
from levyhjmm.core.levy_models import (
    JumpDistribution,
    LevyKind,
    LevyModel,
    domain_bounds,
    domain_contains,
    to_dsl_pairs,
)
from levyhjmm.core.quasi_exp import ExpPoly, Term, decay_check

logger = logging.getLogger(__name__)

MAX_DEPTH = 32


# ---------------------------------------------------------------------------
# Tokens
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Position:
    line: int
    column: int


@dataclass(frozen=True)
class Token:
    kind: str  # ident | number | string | { | } | ( | ) | = | , | + | eof
    text: str
    pos: Position


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>-?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>")
  | (?P<punct>[{}()=,+])
    """,
    re.VERBOSE,
)

_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t"}

TOKEN_NAMES = {
    "ident": "identifier",
    "number": "number",
    "string": "string",
    "eof": "end of input",
}


def _describe(kind: str) -> str:
    return TOKEN_NAMES.get(kind, f"'{kind}'")


class _Lexer:
    def __init__(self, text: str) -> None:
        self.text = text
        self.index = 0
        self.line = 1
        self.column = 1

    def _advance(self, chunk: str) -> None:
        newlines = chunk.count("\n")
        if newlines:
            self.line += newlines
            self.column = len(chunk) - chunk.rfind("\n")
        else:
            self.column += len(chunk)
        self.index += len(chunk)

    def _string(self, pos: Position) -> Token:
        chars: List[str] = []
        i = self.index + 1
        while True:
            if i >= len(self.text) or self.text[i] == "\n":
                raise ParseError("unterminated string", pos.line, pos.column, {'"'})
            ch = self.text[i]
            if ch == '"':
                break
            if ch == "\\":
                nxt = self.text[i + 1] if i + 1 < len(self.text) else ""
                if nxt not in _ESCAPES:
                    col = pos.column + (i - self.index)
                    raise ParseError(f"invalid escape '\\{nxt}'", pos.line, col, {'\\"', "\\\\", "\\n", "\\t"})
                chars.append(_ESCAPES[nxt])
                i += 2
                continue
            chars.append(ch)
            i += 1
        raw = self.text[self.index : i + 1]
        self._advance(raw)
        return Token("string", "".join(chars), pos)

    def tokens(self) -> List[Token]:
        out: List[Token] = []
        while self.index < len(self.text):
            pos = Position(self.line, self.column)
            match = _TOKEN_RE.match(self.text, self.index)
            if match is None:
                raise ParseError(
                    f"unexpected character {self.text[self.index]!r}",
                    pos.line,
                    pos.column,
                    {"identifier", "number", "string", "punctuation"},
                )
            group = match.lastgroup
            if group == "string":
                out.append(self._string(pos))
                continue
            chunk = match.group(0)
            if group == "number":
                # identifiers may not start right after a number (e.g. "1abc")
                end = match.end()
                if end < len(self.text) and (self.text[end].isalnum() or self.text[end] == "_"):
                    raise ParseError(f"malformed number {chunk + self.text[end]!r}", pos.line, pos.column, {"number"})
                out.append(Token("number", chunk, pos))
            elif group == "ident":
                out.append(Token("ident", chunk, pos))
            elif group == "punct":
                out.append(Token(chunk, chunk, pos))
            self._advance(chunk)
        out.append(Token("eof", "", Position(self.line, self.column)))
        return out


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

_NOWHERE = Position(0, 0)


@dataclass(frozen=True)
class Number:
    value: float
    pos: Position = field(default=_NOWHERE, compare=False)


@dataclass(frozen=True)
class String:
    value: str
    pos: Position = field(default=_NOWHERE, compare=False)


@dataclass(frozen=True)
class Ident:
    name: str
    pos: Position = field(default=_NOWHERE, compare=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: Tuple[Tuple[str, "Value"], ...]
    pos: Position = field(default=_NOWHERE, compare=False)


@dataclass(frozen=True)
class Sum:
    terms: Tuple["Value", ...]
    pos: Position = field(default=_NOWHERE, compare=False)


Value = Union[Number, String, Ident, Call, Sum]


@dataclass(frozen=True)
class Pair:
    key: str
    value: Value
    pos: Position = field(default=_NOWHERE, compare=False)


@dataclass(frozen=True)
class Block:
    name: str
    items: Tuple[Union[Pair, "Block"], ...]
    pos: Position = field(default=_NOWHERE, compare=False)


@dataclass(frozen=True)
class Document:
    items: Tuple[Union[Pair, Block], ...]
    end: Position = field(default=_NOWHERE, compare=False)


class _Parser:
    def __init__(self, tokens: List[Token]) -> None:
        self.tokens = tokens
        self.index = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def _fail(self, expected: Sequence[str], message: Optional[str] = None) -> ParseError:
        tok = self.current
        found = _describe(tok.kind) if tok.kind != "ident" else f"identifier '{tok.text}'"
        return ParseError(message or f"unexpected {found}", tok.pos.line, tok.pos.column, expected)

    def _take(self, kind: str) -> Token:
        tok = self.current
        if tok.kind != kind:
            raise self._fail({_describe(kind)})
        self.index += 1
        return tok

    def document(self) -> Document:
        items = []
        while self.current.kind != "eof":
            if self.current.kind != "ident":
                raise self._fail({"identifier", "end of input"})
            items.append(self.item(depth=0))
        if not items:
            raise self._fail({"identifier"}, "empty specification")
        return Document(tuple(items), self.current.pos)

    def item(self, depth: int) -> Union[Pair, Block]:
        name = self._take("ident")
        if self.current.kind == "{":
            if depth >= MAX_DEPTH:
                raise self._fail({"="}, f"blocks nested deeper than {MAX_DEPTH}")
            self.index += 1
            items = []
            while self.current.kind != "}":
                if self.current.kind != "ident":
                    raise self._fail({"identifier", "'}'"})
                items.append(self.item(depth + 1))
            self.index += 1
            return Block(name.text, tuple(items), name.pos)
        if self.current.kind == "=":
            self.index += 1
            return Pair(name.text, self.value(depth), name.pos)
        raise self._fail({"'{'", "'='"})

    def value(self, depth: int) -> Value:
        start = self.current.pos
        terms = [self.atom(depth)]
        while self.current.kind == "+":
            self.index += 1
            terms.append(self.atom(depth))
        return terms[0] if len(terms) == 1 else Sum(tuple(terms), start)

    def atom(self, depth: int) -> Value:
        tok = self.current
        if tok.kind == "number":
            self.index += 1
            value = float(tok.text)
            if not math.isfinite(value):
                raise ParseError(f"number {tok.text} out of range", tok.pos.line, tok.pos.column, {"number"})
            return Number(value, tok.pos)
        if tok.kind == "string":
            self.index += 1
            return String(tok.text, tok.pos)
        if tok.kind == "ident":
            self.index += 1
            if self.current.kind != "(":
                return Ident(tok.text, tok.pos)
            if depth >= MAX_DEPTH:
                raise self._fail({")"}, f"calls nested deeper than {MAX_DEPTH}")
            self.index += 1
            args = []
            while self.current.kind != ")":
                key = self._take("ident")
                self._take("=")
                args.append((key.text, self.value(depth + 1)))
                if self.current.kind == ",":
                    self.index += 1
                elif self.current.kind != ")":
                    raise self._fail({"','", "')'"})
            self.index += 1
            return Call(tok.text, tuple(args), tok.pos)
        raise self._fail({"number", "string", "identifier"})


def parse_document(text: str) -> Document:
    """Parse text into a Document AST."""
    return _Parser(_Lexer(text).tokens()).document()


def parse_bytes(data: bytes, base_dir: Optional[Union[str, Path]] = None) -> "ModelSpec":
    """Decode UTF-8 and parse; invalid bytes become a positioned ParseError."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        prefix = data[: e.start].decode("utf-8", errors="replace")
        line = prefix.count("\n") + 1
        column = len(prefix) - (prefix.rfind("\n") + 1) + 1
        raise ParseError("invalid UTF-8 byte", line, column, {"UTF-8 text"}) from None
    return parse(text, base_dir=base_dir)


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------


def _format_string(value: str) -> str:
    escaped = value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
    return f'"{escaped}"'


def format_value(value: Value) -> str:
    if isinstance(value, Number):
        return repr(float(value.value))
    if isinstance(value, String):
        return _format_string(value.value)
    if isinstance(value, Ident):
        return value.name
    if isinstance(value, Call):
        args = ", ".join(f"{k} = {format_value(v)}" for k, v in value.args)
        return f"{value.name}({args})"
    return " + ".join(format_value(t) for t in value.terms)


def _format_items(items, indent: int, lines: List[str]) -> None:
    pad = "  " * indent
    for item in items:
        if isinstance(item, Pair):
            lines.append(f"{pad}{item.key} = {format_value(item.value)}")
        else:
            lines.append(f"{pad}{item.name} {{")
            _format_items(item.items, indent + 1, lines)
            lines.append(f"{pad}}}")


def format_document(doc: Document) -> str:
    """Canonical text of a Document."""
    lines: List[str] = []
    _format_items(doc.items, 0, lines)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Model types
# ---------------------------------------------------------------------------


class ConstantPhi(BaseModel):
    """Phi(h) = value."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["constant"] = "constant"
    value: float

    @model_validator(mode="after")
    def _finite(self) -> "ConstantPhi":
        if not math.isfinite(self.value):
            raise ValueError("constant Phi must be finite")
        return self

    def __call__(self, short_rate):
        return np.full_like(np.asarray(short_rate, dtype=float), self.value)

    def bounds(self) -> Tuple[float, float]:
        return self.value, self.value

    def lipschitz(self) -> float:
        return 0.0

    def to_call(self) -> Call:
        return Call("constant", (("value", Number(self.value)),))


class SigmoidShortRatePhi(BaseModel):
    """Phi(h) = lo + (hi - lo) / (1 + exp(-slope (h(0) - center)))."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["sigmoid_short_rate"] = "sigmoid_short_rate"
    lo: float
    hi: float
    center: float
    slope: float

    @model_validator(mode="after")
    def _finite(self) -> "SigmoidShortRatePhi":
        if not all(math.isfinite(v) for v in (self.lo, self.hi, self.center, self.slope)):
            raise ValueError("sigmoid Phi parameters must be finite")
        return self

    def __call__(self, short_rate):
        r = np.asarray(short_rate, dtype=float)
        return self.lo + (self.hi - self.lo) * expit(self.slope * (r - self.center))

    def bounds(self) -> Tuple[float, float]:
        return min(self.lo, self.hi), max(self.lo, self.hi)

    def lipschitz(self) -> float:
        """Lipschitz constant in h, using |h(0)| <= ||h||_beta."""
        return abs(self.hi - self.lo) * abs(self.slope) / 4.0

    def to_call(self) -> Call:
        args = tuple((k, Number(getattr(self, k))) for k in ("lo", "hi", "center", "slope"))
        return Call("sigmoid_short_rate", args)


Phi = Union[ConstantPhi, SigmoidShortRatePhi]


@dataclass(frozen=True)
class TabulatedCurve:
    """Curve given by a CSV table, resampled onto grids by interpolation.

    ``kind`` is "tabulated" for volatility directions and "file" for initial
    curves; it only matters for printing.
    """

    source: str
    xs: Tuple[float, ...]
    values: Tuple[float, ...]
    kind: str = "tabulated"

    def on_grid(self, config: CurveSpaceConfig) -> ForwardCurve:
        return ForwardCurve(np.interp(config.grid, self.xs, self.values), config)

    def evaluate(self, x) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=float), self.xs, self.values)

    def to_call(self) -> Call:
        key = "file" if self.kind == "tabulated" else "path"
        return Call(self.kind, ((key, String(self.source)),))


Direction = Union[ExpPoly, TabulatedCurve]


def curve_on_grid(f: Direction, config: CurveSpaceConfig) -> ForwardCurve:
    if isinstance(f, TabulatedCurve):
        return f.on_grid(config)
    return ForwardCurve(f.evaluate(config.grid), config)


class KInterval(BaseModel):
    """Compact interval K with 0 in its interior."""

    model_config = ConfigDict(frozen=True)

    lo: float
    hi: float

    @model_validator(mode="after")
    def _contains_zero(self) -> "KInterval":
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < 0.0 < self.hi):
            raise ValueError(f"K = [{self.lo}, {self.hi}] must be finite with 0 in its interior")
        return self

    def as_tuple(self) -> Tuple[float, float]:
        return self.lo, self.hi


class SpaceSettings(BaseModel):
    """Raw ``space`` block; ordering of the weights is checked by validate()."""

    model_config = ConfigDict(frozen=True)

    beta: float
    beta_prime: float
    x_max: float = numerics_config.default_x_max
    n_grid: int = numerics_config.default_n_grid

    def config(self) -> CurveSpaceConfig:
        return CurveSpaceConfig(beta=self.beta, beta_prime=self.beta_prime, x_max=self.x_max, n_grid=self.n_grid)


@dataclass(frozen=True)
class VolatilityTerm:
    phi: Phi
    lam: Direction


@dataclass(frozen=True)
class ModelSpec:
    """A full model: Lévy driver, volatility sum, curve space, K, initial curve."""

    levy: LevyModel
    terms: Tuple[VolatilityTerm, ...]
    space: SpaceSettings
    k_interval: KInterval = field(default_factory=lambda: KInterval(lo=numerics_config.default_k[0], hi=numerics_config.default_k[1]))
    initial_curve: Direction = field(default_factory=ExpPoly)
    version: int = 1

    @property
    def p(self) -> int:
        return len(self.terms)

    def curve_config(self) -> CurveSpaceConfig:
        return self.space.config()

    def initial_forward_curve(self, config: Optional[CurveSpaceConfig] = None) -> ForwardCurve:
        return curve_on_grid(self.initial_curve, config or self.curve_config())

    def with_grid(self, x_max: Optional[float] = None, n_grid: Optional[int] = None) -> "ModelSpec":
        update: Dict[str, float] = {}
        if x_max is not None:
            update["x_max"] = x_max
        if n_grid is not None:
            update["n_grid"] = n_grid
        return replace(self, space=self.space.model_copy(update=update))


# ---------------------------------------------------------------------------
# AST -> ModelSpec
# ---------------------------------------------------------------------------


def _error_at(node, message: str, expected: Sequence[str] = ()) -> ParseError:
    pos = getattr(node, "pos", _NOWHERE)
    return ParseError(message, pos.line, pos.column, expected)


def _validation_message(exc: Exception) -> str:
    if isinstance(exc, ValidationError):
        first = exc.errors()[0]
        return str(first.get("msg", exc)).removeprefix("Value error, ")
    return str(exc)


def _number(value: Value, what: str) -> float:
    if not isinstance(value, Number):
        raise _error_at(value, f"{what} must be a number", {"number"})
    return value.value


def _integer(value: Value, what: str) -> int:
    number = _number(value, what)
    if number != int(number):
        raise _error_at(value, f"{what} must be an integer", {"integer"})
    return int(number)


def _string(value: Value, what: str) -> str:
    if not isinstance(value, String):
        raise _error_at(value, f"{what} must be a string", {"string"})
    return value.value


def _ident(value: Value, choices: Sequence[str], what: str) -> str:
    if not isinstance(value, Ident) or value.name not in choices:
        raise _error_at(value, f"{what} must be one of {', '.join(choices)}", set(choices))
    return value.name


def _pairs(block: Block, allowed: Sequence[str]) -> Dict[str, Pair]:
    out: Dict[str, Pair] = {}
    for item in block.items:
        if isinstance(item, Block):
            raise _error_at(item, f"unexpected block '{item.name}' inside '{block.name}'", set(allowed))
        if item.key not in allowed:
            raise _error_at(item, f"unknown key '{item.key}' in '{block.name}'", set(allowed))
        if item.key in out:
            raise _error_at(item, f"duplicate key '{item.key}' in '{block.name}'")
        out[item.key] = item
    return out


def _required(pairs: Dict[str, Pair], key: str, block: Block) -> Pair:
    if key not in pairs:
        raise _error_at(block, f"block '{block.name}' needs '{key}'", {key})
    return pairs[key]


def _call_args(call: Call, allowed: Sequence[str], required: Sequence[str]) -> Dict[str, Value]:
    args: Dict[str, Value] = {}
    for key, value in call.args:
        if key not in allowed:
            raise _error_at(value, f"unknown argument '{key}' to {call.name}()", set(allowed))
        if key in args:
            raise _error_at(value, f"duplicate argument '{key}' to {call.name}()")
        args[key] = value
    for key in required:
        if key not in args:
            raise _error_at(call, f"{call.name}() needs argument '{key}'", {key})
    return args


def _jumps(value: Value) -> JumpDistribution:
    kinds = ("point_mass", "exponential", "normal")
    if not isinstance(value, Call) or value.name not in kinds:
        raise _error_at(value, "jumps must be point_mass(...), exponential(...) or normal(...)", set(kinds))
    try:
        if value.name == "point_mass":
            args = _call_args(value, ("x0",), ("x0",))
            return JumpDistribution.point_mass(_number(args["x0"], "x0"))
        if value.name == "exponential":
            args = _call_args(value, ("rate",), ("rate",))
            return JumpDistribution.exponential(_number(args["rate"], "rate"))
        args = _call_args(value, ("mu", "s"), ("mu", "s"))
        return JumpDistribution.normal(_number(args["mu"], "mu"), _number(args["s"], "s"))
    except (ValidationError, ValueError) as e:
        if isinstance(e, ParseError):
            raise
        raise _error_at(value, _validation_message(e)) from None


_LEVY_KEYS = {
    LevyKind.BROWNIAN: ("kind", "b", "c"),
    LevyKind.COMPOUND_POISSON: ("kind", "b", "c", "intensity", "jumps"),
    LevyKind.MERTON: ("kind", "b", "c", "intensity", "jumps"),
    LevyKind.GAMMA: ("kind", "b", "c", "shape", "rate"),
    LevyKind.BILATERAL_GAMMA: ("kind", "b", "c", "shape_plus", "rate_plus", "shape_minus", "rate_minus"),
}


def _levy(block: Block) -> LevyModel:
    all_keys = sorted({k for keys in _LEVY_KEYS.values() for k in keys})
    pairs = _pairs(block, all_keys)
    kind_name = _ident(_required(pairs, "kind", block).value, [k.value for k in LevyKind], "kind")
    kind = LevyKind(kind_name)
    for key, pair in pairs.items():
        if key not in _LEVY_KEYS[kind]:
            raise _error_at(pair, f"key '{key}' does not apply to {kind_name} models", set(_LEVY_KEYS[kind]))

    fields: Dict[str, object] = {"kind": kind}
    renames = {"shape_plus": "shape", "rate_plus": "rate"}
    for key, pair in pairs.items():
        if key == "kind":
            continue
        if key == "jumps":
            fields["jumps"] = _jumps(pair.value)
        else:
            fields[renames.get(key, key)] = _number(pair.value, key)
    try:
        return LevyModel(**fields)
    except ValidationError as e:
        raise _error_at(block, _validation_message(e)) from None


def _phi(value: Value) -> Phi:
    kinds = ("constant", "sigmoid_short_rate")
    if not isinstance(value, Call) or value.name not in kinds:
        raise _error_at(value, "phi must be constant(...) or sigmoid_short_rate(...)", set(kinds))
    try:
        if value.name == "constant":
            args = _call_args(value, ("value",), ("value",))
            return ConstantPhi(value=_number(args["value"], "value"))
        names = ("lo", "hi", "center", "slope")
        args = _call_args(value, names, names)
        return SigmoidShortRatePhi(**{k: _number(args[k], k) for k in names})
    except ValidationError as e:
        raise _error_at(value, _validation_message(e)) from None


def _exp_poly_atom(value: Value, allow_flat: bool) -> ExpPoly:
    if isinstance(value, Call) and value.name == "exp_poly":
        args = _call_args(value, ("rho", "theta", "degree", "omega", "phase"), ("rho",))
        phase = _ident(args["phase"], ("cos", "sin"), "phase") if "phase" in args else "cos"
        degree = _integer(args["degree"], "degree") if "degree" in args else 0
        if degree < 0:
            raise _error_at(args["degree"], "degree must be >= 0", {"integer"})
        try:
            return ExpPoly.from_terms(
                [
                    Term(
                        coeff=_number(args["rho"], "rho"),
                        rate=_number(args["theta"], "theta") if "theta" in args else 0.0,
                        degree=degree,
                        omega=_number(args["omega"], "omega") if "omega" in args else 0.0,
                        phase=phase,
                    )
                ]
            )
        except ValueError as e:
            if isinstance(e, ParseError):
                raise
            raise _error_at(value, str(e)) from None
    if allow_flat and isinstance(value, Call) and value.name == "flat":
        args = _call_args(value, ("kappa",), ("kappa",))
        return ExpPoly.constant(_number(args["kappa"], "kappa"))
    expected = {"exp_poly", "flat"} if allow_flat else {"exp_poly"}
    raise _error_at(value, f"expected {' or '.join(sorted(expected))}(...)", expected)


def _exp_poly_expr(value: Value, allow_flat: bool) -> ExpPoly:
    atoms = value.terms if isinstance(value, Sum) else (value,)
    total = ExpPoly()
    for atom in atoms:
        term = _exp_poly_atom(atom, allow_flat)
        try:
            total = total + term
        except ValueError as e:
            raise _error_at(atom, str(e)) from None
    return total


def _table(call: Call, key: str, kind: str, base_dir: Optional[Path]) -> TabulatedCurve:
    args = _call_args(call, (key,), (key,))
    source = _string(args[key], key)
    path = Path(source)
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    try:
        xs, values = read_curve_table(path)
    except (OSError, ValueError) as e:
        raise _error_at(args[key], f"cannot read curve table {source!r}: {e}") from None
    return TabulatedCurve(source, tuple(float(x) for x in xs), tuple(float(v) for v in values), kind)


def _direction(value: Value, base_dir: Optional[Path]) -> Direction:
    if isinstance(value, Call) and value.name == "tabulated":
        return _table(value, "file", "tabulated", base_dir)
    return _exp_poly_expr(value, allow_flat=False)


def _initial_curve(block: Block, base_dir: Optional[Path]) -> Direction:
    pairs = _pairs(block, ("curve",))
    value = _required(pairs, "curve", block).value
    if isinstance(value, Call) and value.name == "file":
        return _table(value, "path", "file", base_dir)
    return _exp_poly_expr(value, allow_flat=True)


def _volatility(block: Block, base_dir: Optional[Path]) -> Tuple[VolatilityTerm, ...]:
    terms = []
    for item in block.items:
        if not isinstance(item, Block) or item.name != "term":
            raise _error_at(item, "volatility may only contain 'term' blocks", {"term"})
        pairs = _pairs(item, ("phi", "lambda"))
        lam = _direction(_required(pairs, "lambda", item).value, base_dir)
        phi = _phi(pairs["phi"].value) if "phi" in pairs else ConstantPhi(value=1.0)
        terms.append(VolatilityTerm(phi=phi, lam=lam))
    if not terms:
        raise _error_at(block, "volatility needs at least one 'term' block", {"term"})
    return tuple(terms)


def _space(block: Block) -> SpaceSettings:
    pairs = _pairs(block, ("beta", "beta_prime", "x_max", "n_grid"))
    fields: Dict[str, object] = {
        "beta": _number(_required(pairs, "beta", block).value, "beta"),
        "beta_prime": _number(_required(pairs, "beta_prime", block).value, "beta_prime"),
    }
    if "x_max" in pairs:
        fields["x_max"] = _number(pairs["x_max"].value, "x_max")
    if "n_grid" in pairs:
        fields["n_grid"] = _integer(pairs["n_grid"].value, "n_grid")
    return SpaceSettings(**fields)


def _k_interval(block: Block) -> KInterval:
    pairs = _pairs(block, ("lo", "hi"))
    lo = _number(_required(pairs, "lo", block).value, "lo")
    hi = _number(_required(pairs, "hi", block).value, "hi")
    try:
        return KInterval(lo=lo, hi=hi)
    except ValidationError as e:
        raise _error_at(block, _validation_message(e)) from None


_BLOCKS = ("levy", "volatility", "space", "k_interval", "initial_curve")


def build_spec(doc: Document, base_dir: Optional[Union[str, Path]] = None) -> ModelSpec:
    """Interpret a Document as a ModelSpec."""
    base = Path(base_dir) if base_dir is not None else None
    blocks: Dict[str, Block] = {}
    version = 1
    for item in doc.items:
        if isinstance(item, Pair):
            if item.key != "version":
                raise _error_at(item, f"unknown top-level key '{item.key}'", {"version"})
            version = _integer(item.value, "version")
            if version != 1:
                raise _error_at(item.value, f"unsupported version {version}", {"1"})
            continue
        if item.name not in _BLOCKS:
            raise _error_at(item, f"unknown block '{item.name}'", set(_BLOCKS))
        if item.name in blocks:
            raise _error_at(item, f"duplicate block '{item.name}'")
        blocks[item.name] = item

    for required in ("levy", "volatility", "space"):
        if required not in blocks:
            raise ParseError(f"missing required block '{required}'", doc.end.line, doc.end.column, {required})

    kwargs: Dict[str, object] = {
        "levy": _levy(blocks["levy"]),
        "terms": _volatility(blocks["volatility"], base),
        "space": _space(blocks["space"]),
        "version": version,
    }
    if "k_interval" in blocks:
        kwargs["k_interval"] = _k_interval(blocks["k_interval"])
    if "initial_curve" in blocks:
        kwargs["initial_curve"] = _initial_curve(blocks["initial_curve"], base)
    return ModelSpec(**kwargs)


def parse(text: str, base_dir: Optional[Union[str, Path]] = None) -> ModelSpec:
    """Parse spec text into a ModelSpec; file references resolve against base_dir."""
    return build_spec(parse_document(text), base_dir=base_dir)


def load_spec(path: Union[str, Path]) -> ModelSpec:
    path = Path(path)
    spec = parse_bytes(path.read_bytes(), base_dir=path.parent)
    logger.debug(f"Loaded spec {path} with {spec.p} volatility terms", extra={"spec": str(path)})
    return spec


# ---------------------------------------------------------------------------
# ModelSpec -> Document
# ---------------------------------------------------------------------------


def _exp_poly_value(f: ExpPoly) -> Value:
    if f.is_zero:
        return Call("exp_poly", (("rho", Number(0.0)),))
    calls = tuple(
        Call(
            "exp_poly",
            (
                ("rho", Number(t.coeff)),
                ("theta", Number(t.rate)),
                ("degree", Number(float(t.degree))),
                ("omega", Number(t.omega)),
                ("phase", Ident(t.phase)),
            ),
        )
        for t in f.terms
    )
    return calls[0] if len(calls) == 1 else Sum(calls)


def _curve_value(f: Direction) -> Value:
    return f.to_call() if isinstance(f, TabulatedCurve) else _exp_poly_value(f)


def _levy_pair(key: str, text: str) -> Pair:
    if key == "kind":
        return Pair(key, Ident(text))
    if key == "jumps":
        return Pair(key, parse_document(f"x = {text}").items[0].value)
    return Pair(key, Number(float(text)))


def to_document(spec: ModelSpec) -> Document:
    terms = tuple(
        Block("term", (Pair("phi", term.phi.to_call()), Pair("lambda", _curve_value(term.lam))))
        for term in spec.terms
    )
    space = spec.space
    items = (
        Pair("version", Number(float(spec.version))),
        Block("levy", tuple(_levy_pair(k, v) for k, v in to_dsl_pairs(spec.levy))),
        Block("volatility", terms),
        Block(
            "space",
            (
                Pair("beta", Number(space.beta)),
                Pair("beta_prime", Number(space.beta_prime)),
                Pair("x_max", Number(space.x_max)),
                Pair("n_grid", Number(float(space.n_grid))),
            ),
        ),
        Block("k_interval", (Pair("lo", Number(spec.k_interval.lo)), Pair("hi", Number(spec.k_interval.hi)))),
        Block("initial_curve", (Pair("curve", _curve_value(spec.initial_curve)),)),
    )
    return Document(items)


def format_spec(spec: ModelSpec) -> str:
    return format_document(to_document(spec))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


class Diagnostic(BaseModel):
    model_config = ConfigDict(frozen=True)

    severity: Literal["error", "warning", "info"]
    code: str
    message: str


def has_errors(diagnostics: Sequence[Diagnostic]) -> bool:
    return any(d.severity == "error" for d in diagnostics)


def worst_case_range(spec: ModelSpec, config: CurveSpaceConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Pointwise bounds of -int_0^x sigma(h) over all h, from the Phi bounds."""
    lower = np.zeros(config.n_grid)
    upper = np.zeros(config.n_grid)
    for term in spec.terms:
        t_lam = integral_values(curve_on_grid(term.lam, config).values, config.dx)
        lo, hi = term.phi.bounds()
        lower += np.minimum(lo * t_lam, hi * t_lam)
        upper += np.maximum(lo * t_lam, hi * t_lam)
    return lower, upper


def validate(spec: ModelSpec) -> List[Diagnostic]:
    """Check the admissibility conditions of a parsed spec."""
    diagnostics: List[Diagnostic] = []
    k_lo, k_hi = spec.k_interval.as_tuple()

    if not domain_contains(spec.levy, (k_lo, k_hi)):
        lower, upper = domain_bounds(spec.levy)
        diagnostics.append(
            Diagnostic(
                severity="error",
                code="k_outside_domain",
                message=f"K = [{k_lo}, {k_hi}] is not inside the cumulant domain ({lower}, {upper})",
            )
        )

    space = spec.space
    try:
        config = space.config()
    except (ValidationError, ValueError) as e:
        code = "space_ordering" if not 0 < space.beta < space.beta_prime else "space_invalid"
        diagnostics.append(Diagnostic(severity="error", code=code, message=_validation_message(e)))
        return diagnostics

    for i, term in enumerate(spec.terms):
        if isinstance(term.phi, SigmoidShortRatePhi):
            lo, hi = term.phi.bounds()
            diagnostics.append(
                Diagnostic(
                    severity="info",
                    code="phi_lipschitz",
                    message=f"term {i}: Phi bounded in [{lo}, {hi}] with Lipschitz constant {term.phi.lipschitz():.6g}",
                )
            )
        lam = term.lam
        if isinstance(lam, TabulatedCurve):
            if not in_H0(lam.on_grid(config)):
                diagnostics.append(
                    Diagnostic(
                        severity="error",
                        code="not_in_H0",
                        message=f"term {i}: tabulated direction {lam.source!r} does not decay in H0 (beta'={space.beta_prime})",
                    )
                )
            else:
                diagnostics.append(
                    Diagnostic(
                        severity="warning",
                        code="unverifiable_beyond_grid",
                        message=f"term {i}: decay of tabulated direction {lam.source!r} checked only up to x_max={space.x_max}",
                    )
                )
        elif not lam.is_zero:
            slowest = min(t.rate for t in lam.terms)
            if slowest <= 0.0:
                diagnostics.append(
                    Diagnostic(
                        severity="error",
                        code="no_decay",
                        message=f"term {i}: direction has rate {slowest} <= 0 and never decays (flat volatility is not in H0)",
                    )
                )
            elif not decay_check(lam, space.beta_prime):
                diagnostics.append(
                    Diagnostic(
                        severity="error",
                        code="not_in_H0",
                        message=f"term {i}: slowest rate {slowest} <= beta'/2 = {space.beta_prime / 2}",
                    )
                )

    lower, upper = worst_case_range(spec, config)
    slack = 1e-12 * max(1.0, k_hi - k_lo)
    if lower.min() < k_lo - slack or upper.max() > k_hi + slack:
        diagnostics.append(
            Diagnostic(
                severity="error",
                code="volatility_exits_k",
                message=(
                    f"-int sigma ranges over [{lower.min():.6g}, {upper.max():.6g}] on the grid, "
                    f"outside K = [{k_lo}, {k_hi}]"
                ),
            )
        )

    for d in diagnostics:
        logger.debug(f"validate: {d.severity} {d.code}: {d.message}")
    return diagnostics
