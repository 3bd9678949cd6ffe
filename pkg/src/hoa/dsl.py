"""Interaction Hamiltonians: the three builtin systems and a small text format.

Grammar (EBNF)::

    program   = { statement ";" } [ statement ] ;
    statement = "system" IDENT
              | "mode" IDENT ( "vacuum" | "coherent" "(" IDENT ")" ) [ "freq" IDENT ]
              | "symbol" IDENT { "," IDENT }
              | "H" "=" sum ;
    sum       = term { ( "+" | "-" ) term } ;
    term      = "hc" | [ "+" | "-" ] factor { ( "*" | "/" ) factor } ;
    factor    = atom [ "^" INT ] ;
    atom      = INT | IDENT | "(" sum ")" ;

Inside ``H`` an identifier ``X`` naming a declared mode is its annihilation
operator and ``Xd`` its creation operator.  ``i`` is the imaginary unit,
``g`` and ``hbar`` are predeclared (``hbar`` is fixed to 1), further symbols
come from ``symbol`` statements.  ``hc`` stands for the Hermitian conjugate
of every term before it in the same sum, and may only appear once per sum,
after a ``+``.  Newlines are whitespace; ``#`` starts a comment.

Only the interaction part of the Hamiltonian is written down.  The free
``omega_m N_m`` terms are removed by the interaction picture and the
frequencies survive only as metadata on each mode.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction

from .algebra import OperatorPoly
from .errors import DslError, HoaError, NonHermitianError, UndeclaredModeError
from .scalars import GaussianRational

__all__ = [
    "Mode",
    "InitialState",
    "SystemDef",
    "parse_system",
    "parse_operator",
    "render_system",
    "builtin",
    "BUILTIN_NAMES",
]

MAX_EXPONENT = 24
MAX_NESTING = 64
PREDECLARED = ("g", "hbar")
RESERVED = {"mode", "system", "symbol", "vacuum", "coherent", "freq", "hc", "H", "i", "t"}


@dataclass(frozen=True)
class Mode:
    index: int
    label: str
    frequency: str


@dataclass(frozen=True)
class InitialState:
    kind: str  # "vacuum" | "coherent"
    amplitude: str | None = None

    def __str__(self):
        return f"coherent({self.amplitude})" if self.kind == "coherent" else "vacuum"


VACUUM = InitialState("vacuum")


@dataclass(frozen=True)
class SystemDef:
    """A named interaction Hamiltonian over declared modes."""

    name: str
    modes: tuple[Mode, ...]
    h_int: OperatorPoly
    initial: tuple[InitialState, ...] = field(default=())

    def __post_init__(self):
        if not self.initial:
            object.__setattr__(self, "initial", tuple(VACUUM for _ in self.modes))
        labels = [m.label for m in self.modes]
        if len(set(labels)) != len(labels):
            raise HoaError(f"duplicate mode labels in {labels}")
        if [m.index for m in self.modes] != list(range(len(self.modes))):
            raise HoaError("mode indices must be 0..n-1 in declaration order")
        if len(self.initial) != len(self.modes):
            raise HoaError("one initial state per mode is required")
        stray = self.h_int.modes() - set(range(len(self.modes)))
        if stray:
            raise UndeclaredModeError(f"h_int references undeclared mode indices {sorted(stray)}")

    @property
    def labels(self) -> list[str]:
        return [m.label for m in self.modes]

    @property
    def frequencies(self) -> dict[str, str]:
        return {m.label: m.frequency for m in self.modes}

    def mode_index(self, label: str | int) -> int:
        if isinstance(label, int):
            if 0 <= label < len(self.modes):
                return label
            raise UndeclaredModeError(f"no mode with index {label}")
        for m in self.modes:
            if m.label == label:
                return m.index
        raise UndeclaredModeError(f"no mode labelled {label!r} in system {self.name!r}")

    @property
    def pump_mode(self) -> int:
        pumps = [i for i, s in enumerate(self.initial) if s.kind == "coherent"]
        if len(pumps) != 1:
            raise HoaError(f"system {self.name!r} needs exactly one coherent pump mode, has {len(pumps)}")
        return pumps[0]

    @property
    def parameters(self) -> list[str]:
        return sorted(self.h_int.symbols())

    def is_hermitian(self) -> bool:
        return self.h_int.is_hermitian()

    def same_physics(self, other: "SystemDef") -> bool:
        """Equal Hamiltonian and initial states, ignoring names and labels."""
        return (
            len(self.modes) == len(other.modes)
            and self.h_int == other.h_int
            and [s.kind for s in self.initial] == [s.kind for s in other.initial]
        )

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "modes": [
                {"index": m.index, "label": m.label, "frequency": m.frequency, "initial": str(s)}
                for m, s in zip(self.modes, self.initial)
            ],
            "h_int": self.h_int.to_json(self.labels),
        }

    @classmethod
    def from_json(cls, data: dict) -> "SystemDef":
        modes, initial = [], []
        for row in data["modes"]:
            modes.append(Mode(int(row["index"]), row["label"], row["frequency"]))
            initial.append(_initial_from_text(row["initial"]))
        labels = [m.label for m in modes]
        return cls(data["name"], tuple(modes), OperatorPoly.from_json(data["h_int"], labels), tuple(initial))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _initial_from_text(text: str) -> InitialState:
    m = re.fullmatch(r"coherent\((\w+)\)", text)
    if m:
        return InitialState("coherent", m.group(1))
    if text == "vacuum":
        return VACUUM
    raise HoaError(f"unrecognised initial state {text!r}")


# -- builtins -----------------------------------------------------------------

BUILTIN_NAMES = ("six_wave", "four_wave", "shg")


def _pair(powers: dict) -> OperatorPoly:
    term = OperatorPoly.monomial(powers, 1, {"g": 1})
    return term + term.dagger()


def builtin(name: str) -> SystemDef:
    """One of the builtin wave-mixing systems, with a coherent pump in the first mode."""
    pump = InitialState("coherent", "alpha")
    if name == "six_wave":
        # g (A^dag2 B^3 C + h.c.)
        h = _pair({0: (2, 0), 1: (0, 3), 2: (0, 1)})
        labels = ("A", "B", "C")
    elif name == "four_wave":
        # g (A^dag2 B C + h.c.)
        h = _pair({0: (2, 0), 1: (0, 1), 2: (0, 1)})
        labels = ("A", "B", "C")
    elif name == "shg":
        # g (A2^dag A1^2 + h.c.)
        h = _pair({0: (0, 2), 1: (1, 0)})
        labels = ("A1", "A2")
    else:
        raise HoaError(f"unknown builtin system {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
    modes = tuple(Mode(i, lab, f"w{i + 1}") for i, lab in enumerate(labels))
    initial = (pump,) + tuple(VACUUM for _ in labels[1:])
    return SystemDef(name, modes, h, initial)


# -- lexer --------------------------------------------------------------------

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r\f\v]+)|(?P<nl>\n)|(?P<comment>\#[^\n]*)"
    r"|(?P<int>\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[;()*+\-^/=,])"
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _lex(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise DslError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


# -- parser -------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.pos = 0
        self.name = "custom"
        self.modes: list[Mode] = []
        self.initial: list[InitialState] = []
        self.symbols = set(PREDECLARED)
        self.h: OperatorPoly | None = None
        self.depth = 0
        self.allow_time = False

    @property
    def tok(self) -> _Tok:
        return self.toks[self.pos]

    def error(self, msg, tok=None, cls=DslError):
        tok = tok or self.tok
        return cls(msg, tok.line, tok.col)

    def advance(self) -> _Tok:
        t = self.tok
        if t.kind != "eof":
            self.pos += 1
        return t

    def accept(self, text) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "ident"):
            self.pos += 1
            return True
        return False

    def expect(self, text) -> _Tok:
        if self.tok.text != text or self.tok.kind not in ("op", "ident"):
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        return self.advance()

    def ident(self, what) -> _Tok:
        if self.tok.kind != "ident":
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {what}, found {shown!r}")
        return self.advance()

    # statements

    def program(self):
        while self.tok.kind != "eof":
            if self.accept(";"):
                continue
            self.statement()
            if self.tok.kind != "eof":
                self.expect(";")
        if self.h is None:
            raise DslError("no Hamiltonian given (expected 'H = ...')", self.tok.line, self.tok.col)
        return self.h

    def statement(self):
        t = self.tok
        if self.accept("system"):
            self.name = self.ident("system name").text
        elif self.accept("mode"):
            self.mode_decl()
        elif self.accept("symbol"):
            while True:
                s = self.ident("symbol name")
                if s.text in RESERVED or self._is_operator_name(s.text):
                    raise self.error(f"{s.text!r} cannot be used as a symbol name", s)
                self.symbols.add(s.text)
                if not self.accept(","):
                    break
        elif t.kind == "ident" and t.text == "H":
            self.advance()
            if self.h is not None:
                raise self.error("Hamiltonian defined twice", t)
            self.expect("=")
            start = self.tok
            h = self.sum()
            if self.tok.kind != "eof" and self.tok.text != ";":
                raise self.error(f"unexpected {self.tok.text!r}")
            h = h.subs("hbar", 1)
            if h.symbols() & {"t"}:
                raise self.error("the time symbol 't' cannot appear in the Hamiltonian", start)
            if not h.is_hermitian():
                raise self.error(
                    "Hamiltonian is not Hermitian; add '+ hc' or the conjugate terms", start, NonHermitianError
                )
            self.h = h
        else:
            shown = t.text or "end of input"
            raise self.error(f"expected a statement, found {shown!r}")

    def mode_decl(self):
        lab = self.ident("mode label")
        text = lab.text
        if text in RESERVED or text in PREDECLARED:
            raise self.error(f"{text!r} is reserved and cannot label a mode", lab)
        if self.h is not None:
            raise self.error("modes must be declared before the Hamiltonian", lab)
        existing = {m.label for m in self.modes}
        if text in existing:
            raise self.error(f"mode {text!r} declared twice", lab)
        if text + "d" in existing or (text.endswith("d") and text[:-1] in existing):
            raise self.error(f"mode label {text!r} collides with a creation-operator name", lab)
        if text in self.symbols:
            raise self.error(f"{text!r} is already a symbol", lab)
        if self.accept("vacuum"):
            init = VACUUM
        elif self.accept("coherent"):
            self.expect("(")
            amp = self.ident("amplitude name").text
            self.expect(")")
            if any(s.kind == "coherent" for s in self.initial):
                raise self.error("only one mode may start in a coherent state", lab)
            init = InitialState("coherent", amp)
        else:
            raise self.error("expected 'vacuum' or 'coherent(...)'")
        freq = f"w{len(self.modes) + 1}"
        if self.accept("freq"):
            freq = self.ident("frequency symbol").text
        self.modes.append(Mode(len(self.modes), text, freq))
        self.initial.append(init)

    # expressions

    def _is_operator_name(self, name):
        labels = {m.label for m in self.modes}
        return name in labels or (name.endswith("d") and name[:-1] in labels)

    def sum(self) -> OperatorPoly:
        self.depth += 1
        if self.depth > MAX_NESTING:
            raise self.error("expression nested too deeply")
        total = OperatorPoly.zero()
        seen_hc = False
        first = True
        while True:
            sign = 1
            op_tok = self.tok
            if self.accept("+"):
                pass
            elif self.accept("-"):
                sign = -1
            elif not first:
                break
            if self.tok.kind == "ident" and self.tok.text == "hc":
                hc_tok = self.advance()
                if sign < 0 or first:
                    raise self.error("'hc' must follow a '+'", hc_tok)
                if seen_hc:
                    raise self.error("'hc' may appear only once per sum", hc_tok)
                seen_hc = True
                total = total + total.dagger()
            else:
                if seen_hc:
                    raise self.error("terms after 'hc' are not allowed", op_tok)
                term = self.term()
                total = total + term if sign > 0 else total - term
            first = False
        self.depth -= 1
        return total

    def term(self) -> OperatorPoly:
        value = self.factor()
        while True:
            if self.accept("*"):
                value = value * self.factor()
            elif self.tok.text == "/" and self.tok.kind == "op":
                tok = self.advance()
                divisor = self.factor()
                const = _as_constant(divisor)
                if const is None:
                    raise self.error("can only divide by a numeric constant", tok)
                if not const:
                    raise self.error("division by zero", tok)
                value = value.scale(GaussianRational(1) / const)
            else:
                return value

    def factor(self) -> OperatorPoly:
        base = self.atom()
        if self.accept("^"):
            t = self.tok
            if t.kind != "int":
                raise self.error("exponent must be a non-negative integer literal")
            self.advance()
            n = int(t.text)
            if n > MAX_EXPONENT:
                raise self.error(f"exponent {n} exceeds the maximum {MAX_EXPONENT}", t)
            if len(base) == 1:
                (mono, syms), v = next(iter(base.raw_terms.items()))
                if len(mono) <= 1 and not any(c and a for _, c, a in mono):
                    # single ladder power or scalar: no reordering needed
                    return OperatorPoly(
                        {(tuple((m, c * n, a * n) for m, c, a in mono) if n else (),
                          tuple((k, e * n) for k, e in syms) if n else ()): v**n}
                    )
            return base**n
        return base

    def atom(self) -> OperatorPoly:
        t = self.tok
        if t.kind == "int":
            self.advance()
            return OperatorPoly.scalar(int(t.text))
        if t.kind == "op" and t.text == "(":
            self.advance()
            inner = self.sum()
            self.expect(")")
            return inner
        if t.kind == "ident":
            self.advance()
            name = t.text
            if name == "i":
                return OperatorPoly.scalar(GaussianRational(0, 1))
            for m in self.modes:
                if name == m.label:
                    return OperatorPoly.annihilation(m.index)
                if name == m.label + "d":
                    return OperatorPoly.creation(m.index)
            if name in self.symbols:
                return OperatorPoly.scalar(1, {name: 1})
            if name == "t" and not self.allow_time:
                raise self.error("the time symbol 't' cannot appear in the Hamiltonian", t)
            if name in RESERVED:
                raise self.error(f"unexpected keyword {name!r}", t)
            raise self.error(f"undeclared mode or symbol {name!r}", t, UndeclaredModeError)
        shown = t.text or "end of input"
        raise self.error(f"expected an operand, found {shown!r}")


def _as_constant(p: OperatorPoly):
    if not p:
        return GaussianRational(0)
    if len(p) == 1:
        (mono, syms), v = next(iter(p.raw_terms.items()))
        if not mono and not syms:
            return v
    return None


def parse_system(src: str | bytes) -> SystemDef:
    """Parse Hamiltonian source text into a validated :class:`SystemDef`.

    Every failure is reported as a :class:`~hoa.errors.DslError` subclass
    carrying line and column where a position is meaningful.
    """
    if isinstance(src, (bytes, bytearray)):
        try:
            src = bytes(src).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DslError(f"source is not valid UTF-8: {exc.reason}") from None
    p = _Parser(src)
    h = p.program()
    if not p.modes:
        raise UndeclaredModeError("no modes declared")
    return SystemDef(p.name, tuple(p.modes), h, tuple(p.initial))


def parse_operator(text: str, labels, symbols=("g", "t")) -> OperatorPoly:
    """Parse a bare operator expression over the given mode labels.

    Uses the ``H`` expression grammar but skips the Hermiticity check and
    accepts ``t``, so observables and transcribed solutions can be written as
    text, e.g. ``parse_operator("A - 2*i*g*t*Ad*B^3*C", ["A", "B", "C"])``.
    """
    p = _Parser(text)
    for i, lab in enumerate(labels):
        p.modes.append(Mode(i, lab, f"w{i + 1}"))
        p.initial.append(VACUUM)
    p.symbols.update(symbols)
    p.allow_time = "t" in symbols
    out = p.sum()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r}")
    return out.subs("hbar", 1)


# -- rendering ----------------------------------------------------------------


def _render_rational(q: Fraction) -> str:
    return str(abs(q.numerator)) if q.denominator == 1 else f"{abs(q.numerator)}/{q.denominator}"


def _render_term(value: GaussianRational, syms, mono, labels) -> tuple[str, str]:
    factors = []
    sign = "+"
    if value.re and value.im:
        im = f"{'+' if value.im > 0 else '-'}{_render_rational(value.im)}*i"
        re_ = ("-" if value.re < 0 else "") + _render_rational(value.re)
        factors.append(f"({re_}{im})")
    else:
        q = value.im or value.re
        sign = "-" if q < 0 else "+"
        if abs(q) != 1:
            factors.append(_render_rational(q))
        if value.im:
            factors.append("i")
    for k, e in syms:
        factors.append(k if e == 1 else f"{k}^{e}")
    for m, c, a in mono:
        lab = labels[m]
        if c:
            factors.append(f"{lab}d" + (f"^{c}" if c > 1 else ""))
        if a:
            factors.append(lab + (f"^{a}" if a > 1 else ""))
    return sign, "*".join(factors) or "1"


def render_system(sys: SystemDef) -> str:
    """Source text that :func:`parse_system` turns back into ``sys``."""
    lines = [f"system {sys.name};"]
    extra = [s for s in sys.parameters if s not in PREDECLARED]
    if extra:
        lines.append(f"symbol {', '.join(extra)};")
    for m, s in zip(sys.modes, sys.initial):
        lines.append(f"mode {m.label} {s} freq {m.frequency};")
    body = ""
    for i, ((mono, syms), value) in enumerate(sys.h_int.sorted_items()):
        sign, text = _render_term(value, syms, mono, sys.labels)
        if i == 0:
            body = text if sign == "+" else f"-{text}"
        else:
            body += f" {sign} {text}"
    lines.append(f"H = {body or '0'};")
    return "\n".join(lines) + "\n"
