"""Tokenizer, parser and printer for the text form of terms and templates."""
from __future__ import annotations

import re
from dataclasses import dataclass

from . import templates as T
from .terms import (AMB_NAME, BULLET, EPSILON, NIL, Action, Bang, In, Message,
                    Name, Nil, Nu, Out, Par, Prefix, Process, RESERVED)


class ParseError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.line, self.col = line, col


@dataclass
class Token:
    kind: str  # ident, num, sym, eof
    text: str
    line: int
    col: int


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<num>\d+)
  | (?P<ident>(?:[A-Za-z_][A-Za-z0-9_]*|•|ε)'?)
  | (?P<sym>~active~|=>|:=|[.|!()\[\]<>,^:*{};×⟨⟩])
""", re.VERBOSE)

_ALIASES = {"⟨": "<", "⟩": ">", "×": "x"}


def tokenize(text: str) -> list:
    out, pos, line, start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind != "ws":
            tok = m.group()
            if kind == "sym" and tok in _ALIASES:
                tok = _ALIASES[tok]
                kind = "ident" if tok == "x" else kind
            out.append(Token(kind, tok, line, pos - start + 1))
        nl = m.group().count("\n")
        if nl:
            line += nl
            start = m.start() + m.group().rindex("\n") + 1
        pos = m.end()
    out.append(Token("eof", "", line, pos - start + 1))
    return out


class TokenStream:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind != "eof"

    def next(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}")
        return self.next()

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def fail(self, msg: str):
        t = self.tok
        found = t.text or "end of input"
        raise ParseError(f"{msg}, found {found!r}", t.line, t.col)

    def ident(self) -> str:
        if self.tok.kind != "ident":
            self.fail("expected an identifier")
        return self.next().text

    def done(self):
        if self.tok.kind != "eof":
            self.fail("unexpected trailing input")


def _is_meta(s: str) -> bool:
    return s.endswith("'")


class TermParser:
    """Recursive-descent parser for processes; with meta=True for templates."""

    def __init__(self, ts: TokenStream, meta: bool = False):
        self.ts = ts
        self.meta = meta

    def process(self):
        parts = [self.unary()]
        while self.ts.accept("|"):
            parts.append(self.unary())
        if self.meta:
            return T.par_t(*parts) if len(parts) > 1 else parts[0]
        out = parts[-1]
        for p in reversed(parts[:-1]):
            out = Par(p, out)
        return out

    def unary(self):
        ts = self.ts
        if ts.tok.kind == "num":
            if ts.tok.text != "0":
                ts.fail("expected a process")
            ts.next()
            return T.NILT if self.meta else NIL
        if ts.accept("!"):
            if self.meta:
                ts.fail("replication is not allowed in rule templates")
            return Bang(self.unary())
        if ts.accept("("):
            p = self.process()
            ts.expect(")")
            return p
        if ts.at("new") and ts.peek().kind == "ident":
            if self.meta:
                ts.fail("restriction is not allowed in rule templates")
            ts.next()
            names = [self.name()]
            while ts.accept(","):
                names.append(self.name())
            ts.expect(".")
            body = self.unary()
            for x in reversed(names):
                self._check_binder(x)
                body = Nu(x, body)
            return body
        if ts.at("[") and self.meta:
            return self.subst_form()
        return self.prefix()

    def subst_form(self):
        ts = self.ts
        ts.expect("[")
        binds = []
        while True:
            a = ts.ident()
            ts.expect(":=")
            s = ts.ident()
            if not (_is_meta(a) and _is_meta(s)):
                ts.fail("substitution forms bind metavariables only")
            binds.append((a, s))
            if not ts.accept(","):
                break
        ts.expect("]")
        v = ts.ident()
        if not _is_meta(v):
            ts.fail("a substitution form applies to a process variable")
        return T.SubstT(tuple(binds), v)

    def _starts_element(self) -> bool:
        t = self.ts.tok
        if t.kind == "sym":
            return t.text == "<"
        return t.kind == "ident" and not (t.text == "new" and self.ts.peek().kind == "ident")

    def prefix(self):
        ts = self.ts
        if not self._starts_element():
            ts.fail("expected a process")
        start = ts.i
        els = []
        while self._starts_element():
            els.extend(self.element())
        if self.meta and len(els) == 1 and isinstance(els[0], T.NameVar) \
                and ts.i == start + 1 and not (ts.at(".") or ts.at("[")):
            return T.PVar(els[0].var)
        if ts.accept("["):
            els.append(AMB_NAME)
            body = (T.NILT if self.meta else NIL) if ts.at("]") else self.process()
            ts.expect("]")
        elif ts.accept("."):
            body = self.unary()
        else:
            body = T.NILT if self.meta else NIL
        if self.meta:
            return T.PrefixT(T.ActionT(tuple(els)), body)
        return Prefix(Action(tuple(els)), body)

    def element(self) -> list:
        ts = self.ts
        text = ts.tok.text
        if ts.accept("<"):
            return [self.message_list(">")]
        if text in ("in", "out") and ts.peek().text == "<":
            ts.next()
            ts.next()
            if text == "in":
                return [self.binder_list(">")]
            return [self.message_list(">")]
        head = self.name_or_var()
        if ts.at("<"):
            ts.next()
            return [head, self.message_list(">")]
        if ts.at("("):
            ts.next()
            return [head, self.binder_list(")")]
        return [head]

    def binder_list(self, close: str):
        ts = self.ts
        names = []
        if not ts.at(close):
            names.append(self.name_or_var())
            while ts.accept(","):
                names.append(self.name_or_var())
        ts.expect(close)
        if self.meta:
            if not all(isinstance(x, T.NameVar) for x in names):
                ts.fail("input binders in templates must be name variables")
            return T.InT(tuple(names))
        for x in names:
            self._check_binder(x)
        return In(tuple(names))

    def message_list(self, close: str):
        ts = self.ts
        msgs = []
        if not ts.at(close):
            msgs.append(self.message())
            while ts.accept(","):
                msgs.append(self.message())
        ts.expect(close)
        if self.meta:
            return T.OutT(tuple(msgs))
        return Out(tuple(msgs))

    def message(self):
        ts = self.ts
        if self.meta:
            v = ts.ident()
            if not _is_meta(v):
                ts.fail("output slots in templates hold message variables")
            return T.MsgVar(v)
        parts = [self.message_part()]
        while ts.accept("."):
            parts.append(self.message_part())
        return Message.compose(*parts)

    def message_part(self) -> Message:
        ts = self.ts
        if ts.accept("("):
            m = self.message()
            ts.expect(")")
            return m
        if ts.at("ε") or ts.at("eps"):
            ts.next()
            return EPSILON
        names = [self.name()]
        while ts.tok.kind == "ident":
            names.append(self.name())
        return Message((tuple(names),))

    def name(self) -> Name:
        ts = self.ts
        base = ts.ident()
        if _is_meta(base):
            ts.i -= 1
            ts.fail("metavariables are only allowed in rules")
        idx = 0
        if ts.accept("^"):
            if ts.tok.kind != "num":
                ts.fail("expected an index")
            idx = int(ts.next().text)
        return Name(base, idx)

    def name_or_var(self):
        if self.meta and _is_meta(self.ts.tok.text):
            return T.NameVar(self.ts.next().text)
        x = self.name()
        if self.meta and x.base == BULLET:
            self.ts.i -= 1
            self.ts.fail("the error name cannot appear in a rule")
        return x

    def _check_binder(self, x):
        if isinstance(x, Name) and x.base in RESERVED:
            self.ts.i -= 1
            self.ts.fail(f"reserved name {x.base!r} cannot be bound")


def parse_process(text: str) -> Process:
    ts = TokenStream(text)
    p = TermParser(ts).process()
    ts.done()
    return p


def parse_template(text: str) -> T.ProcessT:
    ts = TokenStream(text)
    t = TermParser(ts, meta=True).process()
    ts.done()
    return t


def show_process(p: Process) -> str:
    if isinstance(p, Nil):
        return "0"
    if isinstance(p, Par):
        return f"{_show_unary(p.left)} | {show_process(p.right)}"
    return _show_unary(p)


def _show_unary(p: Process) -> str:
    if isinstance(p, Par):
        return f"({show_process(p)})"
    if isinstance(p, Nil):
        return "0"
    if isinstance(p, Bang):
        return "!" + _show_unary(p.body)
    if isinstance(p, Nu):
        return f"new {p.name}.{_show_unary(p.body)}"
    a = p.action
    if a.is_ambient:
        head = " ".join(map(str, a.elements[:-1]))
        body = "" if isinstance(p.cont, Nil) else show_process(p.cont)
        return f"{head}[{body}]"
    return f"{a}.{_show_unary(p.cont)}"
