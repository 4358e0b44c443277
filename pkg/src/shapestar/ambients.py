"""Mobile ambients with typed exchange: syntax, encoding, rule preset and
safety checks, plus a direct reference reducer for cross-validation."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import count
from typing import Iterator, Optional

from .inference import active_nodes, is_type
from .pi import Finding, SafetyVerdict, _bullet_findings
from .rules import RuleSet, parse_ruleset
from .shapes import ActionType, InType, OutType, ShapePredicate
from .syntax import ParseError, TokenStream
from .terms import (AMB_NAME, BULLET_NAME, EPSILON, NIL, RESERVED, Action,
                    Bang, In, Message, Name, Nu, Out, Par, Prefix, Process,
                    fresh_name, well_scoped)


# -- exchange types -----------------------------------------------------------

class ExType:
    __slots__ = ()


@dataclass(frozen=True)
class AmbT(ExType):
    inner: ExType

    def __str__(self) -> str:
        return f"Amb[{self.inner}]"


@dataclass(frozen=True)
class CapT(ExType):
    inner: ExType

    def __str__(self) -> str:
        return f"Cap[{self.inner}]"


@dataclass(frozen=True)
class ShhT(ExType):
    def __str__(self) -> str:
        return "Shh"


@dataclass(frozen=True)
class Prod(ExType):
    parts: tuple

    def __str__(self) -> str:
        return " x ".join(map(str, self.parts)) if self.parts else "1"


@dataclass(frozen=True, eq=False)
class Hole(ExType):
    """An omitted annotation (`_`); every occurrence is a distinct unknown."""
    kind: str = "W"

    def __str__(self) -> str:
        return "_"


SHH = ShhT()
ONE = Prod(())


def is_ground(t: ExType) -> bool:
    if isinstance(t, Hole):
        return False
    if isinstance(t, (AmbT, CapT)):
        return is_ground(t.inner)
    if isinstance(t, Prod):
        return all(map(is_ground, t.parts))
    return True


# -- capabilities and processes -------------------------------------------------

class Capability:
    __slots__ = ()

    def __str__(self) -> str:
        return show_cap(self)


@dataclass(frozen=True)
class CEps(Capability):
    pass


@dataclass(frozen=True)
class CName(Capability):
    name: Name


@dataclass(frozen=True)
class CIn(Capability):
    arg: Capability


@dataclass(frozen=True)
class COut(Capability):
    arg: Capability


@dataclass(frozen=True)
class COpen(Capability):
    arg: Capability


@dataclass(frozen=True)
class CSeq(Capability):
    first: Capability
    second: Capability


_OPS = {CIn: "in", COut: "out", COpen: "open"}
_OP_CLASSES = {v: k for k, v in _OPS.items()}


class MaProcess:
    __slots__ = ()

    def __str__(self) -> str:
        return show_ma(self)


@dataclass(frozen=True)
class MNil(MaProcess):
    pass


@dataclass(frozen=True)
class MPar(MaProcess):
    left: MaProcess
    right: MaProcess


@dataclass(frozen=True)
class MAmb(MaProcess):
    cap: Capability
    body: MaProcess


@dataclass(frozen=True)
class MPre(MaProcess):
    cap: Capability
    cont: MaProcess


@dataclass(frozen=True)
class MBang(MaProcess):
    body: MaProcess


@dataclass(frozen=True)
class MNu(MaProcess):
    name: Name
    ann: Optional[ExType]
    body: MaProcess


@dataclass(frozen=True)
class MOutput(MaProcess):
    msgs: tuple


@dataclass(frozen=True)
class MInput(MaProcess):
    params: tuple   # of (Name, ExType | None)
    cont: MaProcess


MNIL = MNil()


# -- parsing ---------------------------------------------------------------------

class _MaParser:
    def __init__(self, text: str):
        self.ts = TokenStream(text)

    # types
    def exchange(self) -> ExType:
        ts = self.ts
        if ts.accept("Shh"):
            return SHH
        if ts.tok.kind == "num":
            if ts.tok.text != "1":
                ts.fail("expected an exchange type")
            ts.next()
            return ONE
        if ts.at("_") and not ts.peek().text == "x":
            ts.next()
            return Hole("T")
        if ts.accept("("):
            t = self.exchange()
            ts.expect(")")
            return t
        parts = [self.message_type()]
        while ts.accept("x"):
            parts.append(self.message_type())
        return Prod(tuple(parts))

    def message_type(self) -> ExType:
        ts = self.ts
        if ts.accept("_"):
            return Hole("W")
        if ts.at("Amb") or ts.at("Cap"):
            kind = ts.next().text
            ts.expect("[")
            t = self.exchange()
            ts.expect("]")
            return AmbT(t) if kind == "Amb" else CapT(t)
        ts.fail("expected Amb[..], Cap[..] or _")

    # capabilities
    def _atom_start(self, k: int = 0) -> bool:
        t = self.ts.peek(k) if k else self.ts.tok
        return t.kind == "ident" and t.text != "new"

    def atom(self) -> Capability:
        ts = self.ts
        if ts.at("ε") or ts.at("eps"):
            ts.next()
            return CEps()
        if ts.tok.text in _OP_CLASSES:
            op = _OP_CLASSES[ts.next().text]
            return op(self.arg())
        return CName(self.name())

    def arg(self) -> Capability:
        if self.ts.accept("("):
            c = self.capability()
            self.ts.expect(")")
            return c
        return self.atom()

    def capability(self) -> Capability:
        c = self.atom()
        while self.ts.at(".") and self._atom_start(1):
            self.ts.next()
            c = CSeq(c, self.atom())
        return c

    def name(self) -> Name:
        ts = self.ts
        base = ts.ident()
        if base in RESERVED or base.endswith("'") or base in ("ε", "eps"):
            ts.i -= 1
            ts.fail(f"{base!r} cannot be used as an ambient name")
        idx = 0
        if ts.accept("^"):
            idx = int(ts.next().text)
        return Name(base, idx)

    # processes
    def process(self) -> MaProcess:
        parts = [self.unary()]
        while self.ts.accept("|"):
            parts.append(self.unary())
        out = parts[-1]
        for p in reversed(parts[:-1]):
            out = MPar(p, out)
        return out

    def unary(self) -> MaProcess:
        ts = self.ts
        if ts.tok.kind == "num" and ts.tok.text == "0":
            ts.next()
            return MNIL
        if ts.accept("!"):
            return MBang(self.unary())
        if ts.at("("):
            inp = self.try_input()
            if inp is not None:
                return inp
            amb = self.try_cap_ambient()
            if amb is not None:
                return amb
            ts.next()
            p = self.process()
            ts.expect(")")
            return p
        if ts.at("new"):
            ts.next()
            paren = ts.accept("(")
            binds = self.params()
            if paren:
                ts.expect(")")
            ts.expect(".")
            body = self.unary()
            for x, w in reversed(binds):
                body = MNu(x, w, body)
            return body
        if ts.accept("<"):
            msgs = []
            if not ts.at(">"):
                msgs.append(self.capability())
                while ts.accept(","):
                    msgs.append(self.capability())
            ts.expect(">")
            if ts.accept("."):
                if not (ts.tok.kind == "num" and ts.tok.text == "0"):
                    ts.fail("an output has no continuation")
                ts.next()
            return MOutput(tuple(msgs))
        if not self._atom_start():
            ts.fail("expected a process")
        atoms = [self.atom()]
        while ts.at(".") and self._atom_start(1):
            ts.next()
            atoms.append(self.atom())
        if ts.accept("["):
            body = MNIL if ts.at("]") else self.process()
            ts.expect("]")
            out: MaProcess = MAmb(atoms.pop(), body)
        elif ts.accept("."):
            out = self.unary()
        else:
            out = MNIL
        if atoms:
            cap = atoms[0]
            for a in atoms[1:]:
                cap = CSeq(cap, a)
            out = MPre(cap, out)
        return out

    def params(self) -> list:
        out = []
        while True:
            x = self.name()
            w = self.message_type() if self.ts.accept(":") else None
            out.append((x, w))
            if not self.ts.accept(","):
                return out

    def try_input(self) -> Optional[MaProcess]:
        ts = self.ts
        save = ts.i
        try:
            ts.expect("(")
            binds = [] if ts.at(")") else self.params()
            ts.expect(")")
            ts.expect(".")
        except ParseError:
            ts.i = save
            return None
        return MInput(tuple(binds), self.unary())

    def try_cap_ambient(self) -> Optional[MaProcess]:
        # `(in a)[P]`: an ambient whose head is not a plain name
        ts = self.ts
        save = ts.i
        try:
            ts.expect("(")
            cap = self.capability()
            ts.expect(")")
            ts.expect("[")
        except ParseError:
            ts.i = save
            return None
        body = MNIL if ts.at("]") else self.process()
        ts.expect("]")
        return MAmb(cap, body)


def parse_ma(text: str) -> MaProcess:
    p = _MaParser(text)
    out = p.process()
    p.ts.done()
    return out


def parse_exchange(text: str) -> ExType:
    """An exchange type: `Shh`, `1`, or a product of message types."""
    p = _MaParser(text)
    out = p.exchange()
    p.ts.done()
    return out


def parse_message_type(text: str) -> ExType:
    p = _MaParser(text)
    out = p.message_type()
    p.ts.done()
    return out


def parse_env(text: str) -> dict:
    """`a: Amb[1], b: Cap[Shh]` -> {'a': AmbT(ONE), ...} keyed by base."""
    p = _MaParser(text)
    env = {}
    if p.ts.tok.kind != "eof":
        for x, w in p.params():
            if w is None:
                p.ts.fail(f"missing type for {x}")
            env[x.base] = w
    p.ts.done()
    return env


# -- printing ------------------------------------------------------------------

def show_cap(c: Capability) -> str:
    if isinstance(c, CEps):
        return "ε"
    if isinstance(c, CName):
        return str(c.name)
    if isinstance(c, CSeq):
        return f"{show_cap(c.first)}.{show_cap(c.second)}"
    arg = c.arg
    inner = show_cap(arg) if isinstance(arg, CName) else f"({show_cap(arg)})"
    return f"{_OPS[type(c)]} {inner}"


def _ann(x: Name, w) -> str:
    return f"{x}:{w}" if w is not None else str(x)


def show_ma(p: MaProcess) -> str:
    if isinstance(p, MPar):
        return f"{_show_unary(p.left)} | {show_ma(p.right)}"
    return _show_unary(p)


def _show_unary(p: MaProcess) -> str:
    if isinstance(p, MNil):
        return "0"
    if isinstance(p, MPar):
        return f"({show_ma(p)})"
    if isinstance(p, MBang):
        return "!" + _show_unary(p.body)
    if isinstance(p, MNu):
        if p.ann is None:
            return f"new {p.name}.{_show_unary(p.body)}"
        return f"new ({_ann(p.name, p.ann)}).{_show_unary(p.body)}"
    if isinstance(p, MOutput):
        return "<" + ", ".join(map(show_cap, p.msgs)) + ">"
    if isinstance(p, MInput):
        return "(" + ", ".join(_ann(x, w) for x, w in p.params) + ")." + _show_unary(p.cont)
    if isinstance(p, MAmb):
        head = show_cap(p.cap) if isinstance(p.cap, CName) else f"({show_cap(p.cap)})"
        body = "" if isinstance(p.body, MNil) else show_ma(p.body)
        return f"{head}[{body}]"
    return f"{show_cap(p.cap)}.{_show_unary(p.cont)}"


# -- encoding ----------------------------------------------------------------

def cap_name(c: Capability) -> Name:
    """The name a capability denotes in a name slot; ε is a unit for paths."""
    atoms = _atoms(c)
    if len(atoms) == 1 and isinstance(atoms[0], CName):
        return atoms[0].name
    return BULLET_NAME


def cap_message(c: Capability) -> Message:
    if isinstance(c, CEps):
        return EPSILON
    if isinstance(c, CName):
        return Message.of_name(c.name)
    if isinstance(c, CSeq):
        return Message.compose(cap_message(c.first), cap_message(c.second))
    return Message(((Name(_OPS[type(c)]), cap_name(c.arg)),))


def _encode(p: MaProcess) -> Process:
    if isinstance(p, MNil):
        return NIL
    if isinstance(p, MPar):
        return Par(_encode(p.left), _encode(p.right))
    if isinstance(p, MBang):
        return Bang(_encode(p.body))
    if isinstance(p, MNu):
        return Nu(p.name, _encode(p.body))
    if isinstance(p, MAmb):
        return Prefix(Action((cap_name(p.cap), AMB_NAME)), _encode(p.body))
    if isinstance(p, MOutput):
        return Prefix(Action((Out(tuple(map(cap_message, p.msgs))),)), NIL)
    if isinstance(p, MInput):
        return Prefix(Action((In(tuple(x for x, _ in p.params)),)), _encode(p.cont))
    out = _encode(p.cont)
    for form in reversed(cap_message(p.cap).forms):
        out = Prefix(Action(form), out)
    return out


def binder_annotations(p: MaProcess) -> dict:
    """Binder annotations keyed by (kind, base), kind being 'nu' or 'in'.
    Raises ValueError when two binders of one base disagree."""
    table: dict = {}

    def put(kind, x, w):
        key = (kind, x.base)
        if key in table and table[key] != w:
            raise ValueError(f"conflicting annotations for {x.base}: {table[key]} and {w}")
        table[key] = w

    def go(q):
        if isinstance(q, (MPar,)):
            go(q.left)
            go(q.right)
        elif isinstance(q, MBang):
            go(q.body)
        elif isinstance(q, MNu):
            put("nu", q.name, q.ann)
            go(q.body)
        elif isinstance(q, MInput):
            for x, w in q.params:
                put("in", x, w)
            go(q.cont)
        elif isinstance(q, (MAmb,)):
            go(q.body)
        elif isinstance(q, MPre):
            go(q.cont)

    go(p)
    return table


def ma_well_scoped(p: MaProcess) -> bool:
    if not well_scoped(_encode(p)):
        return False
    try:
        binder_annotations(p)
    except ValueError:
        return False
    return True


def encode_ma(p: MaProcess, with_annotations: bool = False):
    """The encoded process; with `with_annotations` also the erased binder
    annotations as returned by `annotations`."""
    if not well_scoped(_encode(p)):
        raise ValueError("ambient process is not well scoped")
    table = binder_annotations(p)
    q = _encode(p)
    return (q, table) if with_annotations else q


def max_arity(p: MaProcess) -> int:
    if isinstance(p, MPar):
        return max(max_arity(p.left), max_arity(p.right))
    if isinstance(p, (MBang, MNu, MAmb)):
        return max_arity(p.body)
    if isinstance(p, MPre):
        return max_arity(p.cont)
    if isinstance(p, MInput):
        return max(len(p.params), max_arity(p.cont))
    if isinstance(p, MOutput):
        return len(p.msgs)
    return 0


_MOBILITY = """
P' ~active~ a'[P']
a'[in b'.P' | Q'] | b'[R'] => b'[a'[P' | Q'] | R']
a'[b'[out a'.P' | Q'] | R'] => a'[R'] | b'[P' | Q']
open a'.P' | a'[R'] => P' | R'
"""


def ruleset_ma(k_max: int) -> RuleSet:
    lines = [_MOBILITY]
    for k in range(k_max + 1):
        ms = ",".join(f"M{i}'" for i in range(1, k + 1))
        xs = ",".join(f"x{i}'" for i in range(1, k + 1))
        subst = ", ".join(f"x{i}':=M{i}'" for i in range(1, k + 1))
        rhs = f"P' | [{subst}]Q'" if k else "P' | Q'"
        lines.append(f"out<{ms}>.P' | in<{xs}>.Q' => {rhs}")
    return parse_ruleset("\n".join(lines))


# -- safety ------------------------------------------------------------------------

def ma_safety(s: ShapePredicate, r: RuleSet, ibn=frozenset(), check: bool = True) -> SafetyVerdict:
    """Arity mismatches at active nodes, error-name labels anywhere, and
    bare-name capabilities at active nodes whose name is not input-bound."""
    if check and not is_type(r, s):
        raise ValueError("predicate is not closed under the rule set")
    ibn = {x.base if isinstance(x, Name) else x for x in ibn}
    findings = []
    for x in sorted(active_nodes(r, s)):
        edges = sorted(s.out_edges(x), key=lambda e: str(e.label))
        ins = [e.label for e in edges if _single(e.label, InType)]
        outs = [e.label for e in edges if _single(e.label, OutType)]
        for l1 in ins:
            for l2 in outs:
                if len(l1.elements[0].bases) != len(l2.elements[0].mts):
                    findings.append(Finding("arity-mismatch", x, (l1, l2)))
        for e in edges:
            els = e.label.elements
            if len(els) == 1 and isinstance(els[0], str) and els[0] not in ibn \
                    and els[0] != BULLET_NAME.base:
                findings.append(Finding("bare-name-capability", x, (e.label,)))
    findings += _bullet_findings(s)
    return SafetyVerdict(tuple(findings))


def _single(label: ActionType, cls) -> bool:
    return len(label.elements) == 1 and isinstance(label.elements[0], cls)


def input_bound(p: MaProcess) -> frozenset:
    """Bases bound by input prefixes."""
    return frozenset(b for kind, b in binder_annotations(p) if kind == "in")


# -- reference semantics --------------------------------------------------------------

def cap_names(c: Capability) -> set:
    if isinstance(c, CName):
        return {c.name}
    if isinstance(c, CSeq):
        return cap_names(c.first) | cap_names(c.second)
    if isinstance(c, CEps):
        return set()
    return cap_names(c.arg)


def ma_names(p: MaProcess) -> set:
    if isinstance(p, MPar):
        return ma_names(p.left) | ma_names(p.right)
    if isinstance(p, MBang):
        return ma_names(p.body)
    if isinstance(p, MNu):
        return {p.name} | ma_names(p.body)
    if isinstance(p, MAmb):
        return cap_names(p.cap) | ma_names(p.body)
    if isinstance(p, MPre):
        return cap_names(p.cap) | ma_names(p.cont)
    if isinstance(p, MOutput):
        return set().union(*map(cap_names, p.msgs))
    if isinstance(p, MInput):
        return {x for x, _ in p.params} | ma_names(p.cont)
    return set()


def cap_subst(c: Capability, sigma: dict) -> Capability:
    if isinstance(c, CName):
        return sigma.get(c.name, c)
    if isinstance(c, CEps):
        return c
    if isinstance(c, CSeq):
        return CSeq(cap_subst(c.first, sigma), cap_subst(c.second, sigma))
    return type(c)(cap_subst(c.arg, sigma))


def ma_subst(p: MaProcess, sigma: dict, avoid: set) -> MaProcess:
    """Capture-avoiding substitution of capabilities for names."""
    if not sigma or isinstance(p, MNil):
        return p
    if isinstance(p, MPar):
        return MPar(ma_subst(p.left, sigma, avoid), ma_subst(p.right, sigma, avoid))
    if isinstance(p, MBang):
        return MBang(ma_subst(p.body, sigma, avoid))
    if isinstance(p, MAmb):
        return MAmb(cap_subst(p.cap, sigma), ma_subst(p.body, sigma, avoid))
    if isinstance(p, MPre):
        return MPre(cap_subst(p.cap, sigma), ma_subst(p.cont, sigma, avoid))
    if isinstance(p, MOutput):
        return MOutput(tuple(cap_subst(m, sigma) for m in p.msgs))
    rng = set().union(*(cap_names(m) for m in sigma.values()))
    if isinstance(p, MNu):
        inner = {k: v for k, v in sigma.items() if k != p.name}
        x, body = p.name, p.body
        if x in rng:
            x2 = fresh_name(x.base, avoid | ma_names(p) | rng)
            avoid.add(x2)
            body = ma_subst(body, {x: CName(x2)}, avoid)
            x = x2
        return MNu(x, p.ann, ma_subst(body, inner, avoid))
    bound = {x for x, _ in p.params}
    inner = {k: v for k, v in sigma.items() if k not in bound}
    params, cont = list(p.params), p.cont
    for i, (x, w) in enumerate(params):
        if x in rng:
            x2 = fresh_name(x.base, avoid | ma_names(p) | rng)
            avoid.add(x2)
            cont = ma_subst(cont, {x: CName(x2)}, avoid)
            params[i] = (x2, w)
    return MInput(tuple(params), ma_subst(cont, inner, avoid))


def _atoms(c: Capability) -> list:
    if isinstance(c, CEps):
        return []
    if isinstance(c, CSeq):
        return _atoms(c.first) + _atoms(c.second)
    return [c]


@dataclass
class _Amb:
    name: Capability
    soup: list


@dataclass
class _Copies:
    """Scratch state while collecting one redex level."""
    avoid: set
    binders: list = field(default_factory=list)


def _soup(p: MaProcess, st: _Copies) -> list:
    """Flatten into components; restrictions are renamed apart and hoisted
    to the top-level binder list; ambient bodies become nested soups."""
    if isinstance(p, MNil):
        return []
    if isinstance(p, MPar):
        return _soup(p.left, st) + _soup(p.right, st)
    if isinstance(p, MNu):
        x2 = fresh_name(p.name.base, st.avoid)
        st.avoid.add(x2)
        st.binders.append((x2, p.ann))
        return _soup(ma_subst(p.body, {p.name: CName(x2)}, st.avoid), st)
    if isinstance(p, MAmb):
        return [_Amb(name_slot(p.cap), _soup(p.body, st))]
    if isinstance(p, MPre):
        atoms = _atoms(p.cap)
        if not atoms:
            return _soup(p.cont, st)
        out = p.cont
        for a in reversed(atoms[1:]):
            out = MPre(a, out)
        head = atoms[0]
        if not isinstance(head, CName):
            head = type(head)(name_slot(head.arg))
        return [MPre(head, out)]
    return [p]


def name_slot(c: Capability) -> Capability:
    # a path like ε.a stands for the name a
    atoms = _atoms(c)
    return atoms[0] if len(atoms) == 1 and isinstance(atoms[0], CName) else c


def _unsoup(items: list) -> MaProcess:
    procs = [MAmb(i.name, _unsoup(i.soup)) if isinstance(i, _Amb) else i for i in items]
    if not procs:
        return MNIL
    out = procs[-1]
    for q in reversed(procs[:-1]):
        out = MPar(q, out)
    return out


def _expand(items: list, st: _Copies, unfold: int) -> list:
    """Pair each item with its owner: its index, or a bang copy id."""
    pool = []
    ids = count()
    for i, it in enumerate(items):
        if isinstance(it, MBang):
            for _ in range(unfold):
                cid = ("copy", i, next(ids))
                pool.extend((cid, x) for x in _soup(it.body, st))
        else:
            pool.append((i, it))
    return pool


def _rebuild(items: list, pool: list, used_idx: set, new: list) -> list:
    """Untouched items, leftovers of every bang copy that was used, then `new`."""
    owners = {pool[j][0] for j in used_idx}
    out = [it for i, it in enumerate(items) if i not in owners]
    for j, (o, it) in enumerate(pool):
        if isinstance(o, tuple) and o in owners and j not in used_idx:
            out.append(it)
    return out + new


def _is_cap(it, cls, name=None) -> bool:
    return isinstance(it, MPre) and isinstance(it.cap, cls) and isinstance(it.cap.arg, CName) \
        and (name is None or it.cap.arg.name == name)


def _level(items: list, st: _Copies, unfold: int) -> Iterator[list]:
    pool = _expand(items, st, unfold)
    for i, (_, it) in enumerate(pool):
        if isinstance(it, _Amb) and isinstance(it.name, CName):
            a = it.name.name
            inner = _expand(it.soup, st, unfold)
            for k, (_, q) in enumerate(inner):
                # enter a sibling
                if _is_cap(q, CIn):
                    b = q.cap.arg.name
                    for j, (_, sib) in enumerate(pool):
                        if j != i and isinstance(sib, _Amb) and sib.name == CName(b):
                            moved = _Amb(CName(a), _rebuild(it.soup, inner, {k}, _soup(q.cont, st)))
                            host = _Amb(sib.name, sib.soup + [moved])
                            yield _rebuild(items, pool, {i, j}, [host])
                # a child leaves
                if isinstance(q, _Amb) and isinstance(q.name, CName):
                    child = _expand(q.soup, st, unfold)
                    for m, (_, c) in enumerate(child):
                        if _is_cap(c, COut, a):
                            left = _Amb(CName(a), _rebuild(it.soup, inner, {k}, []))
                            out = _Amb(q.name, _rebuild(q.soup, child, {m}, _soup(c.cont, st)))
                            yield _rebuild(items, pool, {i}, [left, out])
            # reduce inside
            for new_soup in _level(it.soup, st, unfold):
                yield _rebuild(items, pool, {i}, [_Amb(it.name, new_soup)])
        if _is_cap(it, COpen):
            a = it.cap.arg.name
            for j, (_, sib) in enumerate(pool):
                if isinstance(sib, _Amb) and sib.name == CName(a):
                    yield _rebuild(items, pool, {i, j}, _soup(it.cont, st) + sib.soup)
        if isinstance(it, MInput):
            for j, (_, o) in enumerate(pool):
                if isinstance(o, MOutput) and len(o.msgs) == len(it.params):
                    sigma = {x: m for (x, _), m in zip(it.params, o.msgs)}
                    body = ma_subst(it.cont, sigma, st.avoid)
                    yield _rebuild(items, pool, {i, j}, _soup(body, st))


def ma_reducts(p: MaProcess, unfold: int = 2) -> Iterator[MaProcess]:
    """One-step reducts computed directly on ambient syntax.  Replicated
    components are unfolded up to `unfold` times at every level."""
    st = _Copies(set(ma_names(p)))
    items = _soup(p, st)
    top = list(st.binders)
    for result in _level(items, st, unfold):
        out = _unsoup(result)
        # every restriction created so far is wrapped; unused ones are garbage
        for x, w in reversed(top + st.binders[len(top):]):
            out = MNu(x, w, out)
        yield out


def _form_cap(form: tuple) -> Capability:
    if len(form) == 2 and form[0].base in _OP_CLASSES and form[0].index == 0:
        return _OP_CLASSES[form[0].base](CName(form[1]))
    if len(form) == 1:
        return CName(form[0])
    raise ValueError(f"not a capability form: {' '.join(map(str, form))}")


def _message_cap(m: Message) -> Capability:
    caps = [_form_cap(f) for f in m.forms]
    if not caps:
        return CEps()
    out = caps[0]
    for c in caps[1:]:
        out = CSeq(out, c)
    return out


def decode_ma(p: Process) -> MaProcess:
    """Read an encoded process back as ambient syntax (annotations are lost)."""
    from .terms import Nil
    if isinstance(p, Nil):
        return MNIL
    if isinstance(p, Par):
        return MPar(decode_ma(p.left), decode_ma(p.right))
    if isinstance(p, Bang):
        return MBang(decode_ma(p.body))
    if isinstance(p, Nu):
        return MNu(p.name, None, decode_ma(p.body))
    els = p.action.elements
    if len(els) == 1 and isinstance(els[0], Out) and isinstance(p.cont, Nil):
        return MOutput(tuple(_message_cap(m) for m in els[0].messages))
    if len(els) == 1 and isinstance(els[0], In):
        return MInput(tuple((x, None) for x in els[0].names), decode_ma(p.cont))
    if len(els) == 2 and els[1] == AMB_NAME:
        return MAmb(CName(els[0]), decode_ma(p.cont))
    if all(isinstance(e, Name) for e in els):
        return MPre(_form_cap(els), decode_ma(p.cont))
    raise ValueError(f"not an ambient action: {p.action}")
