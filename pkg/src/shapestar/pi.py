"""Polyadic pi-calculus: surface syntax, encoding, rule preset and safety."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import count
from typing import Iterator

from .inference import active_nodes, is_type
from .rules import RuleSet, parse_ruleset
from .shapes import ActionType, InType, OutType, ShapePredicate
from .syntax import TokenStream
from .terms import (NIL, RESERVED, Action, Bang, In, Message, Name,
                    Nu, Out, Par, Prefix, Process, fresh_name, well_scoped)


class PiProcess:
    __slots__ = ()

    def __str__(self) -> str:
        return show_pi(self)


@dataclass(frozen=True, repr=False)
class PNil(PiProcess):
    def __repr__(self) -> str:
        return "PNil()"


@dataclass(frozen=True)
class PPar(PiProcess):
    left: PiProcess
    right: PiProcess


@dataclass(frozen=True)
class PIn(PiProcess):
    chan: Name
    params: tuple
    cont: PiProcess


@dataclass(frozen=True)
class POut(PiProcess):
    chan: Name
    args: tuple
    cont: PiProcess


@dataclass(frozen=True)
class PBang(PiProcess):
    body: PiProcess


@dataclass(frozen=True)
class PNu(PiProcess):
    name: Name
    body: PiProcess


PNIL = PNil()


# -- parsing and printing -----------------------------------------------------

class _PiParser:
    def __init__(self, text: str):
        self.ts = TokenStream(text)

    def process(self) -> PiProcess:
        parts = [self.unary()]
        while self.ts.accept("|"):
            parts.append(self.unary())
        out = parts[-1]
        for p in reversed(parts[:-1]):
            out = PPar(p, out)
        return out

    def unary(self) -> PiProcess:
        ts = self.ts
        if ts.tok.kind == "num" and ts.tok.text == "0":
            ts.next()
            return PNIL
        if ts.accept("!"):
            return PBang(self.unary())
        if ts.accept("("):
            p = self.process()
            ts.expect(")")
            return p
        if ts.at("new"):
            ts.next()
            names = [self.name()]
            while ts.accept(","):
                names.append(self.name())
            ts.expect(".")
            body = self.unary()
            for x in reversed(names):
                body = PNu(x, body)
            return body
        c = self.name()
        if ts.accept("("):
            params = self.names(")")
            cont = self.cont()
            return PIn(c, params, cont)
        if ts.accept("<"):
            args = self.names(">")
            return POut(c, args, self.cont())
        ts.fail("expected an input or output prefix")

    def cont(self) -> PiProcess:
        return self.unary() if self.ts.accept(".") else PNIL

    def names(self, close: str) -> tuple:
        out = []
        if not self.ts.at(close):
            out.append(self.name())
            while self.ts.accept(","):
                out.append(self.name())
        self.ts.expect(close)
        return tuple(out)

    def name(self) -> Name:
        ts = self.ts
        base = ts.ident()
        if base in RESERVED or base.endswith("'"):
            ts.i -= 1
            ts.fail(f"{base!r} cannot be used as a channel name")
        idx = 0
        if ts.accept("^"):
            idx = int(ts.next().text)
        return Name(base, idx)


def parse_pi(text: str) -> PiProcess:
    p = _PiParser(text)
    out = p.process()
    p.ts.done()
    return out


def show_pi(p: PiProcess) -> str:
    if isinstance(p, PPar):
        return f"{_show_unary(p.left)} | {show_pi(p.right)}"
    return _show_unary(p)


def _show_unary(p: PiProcess) -> str:
    if isinstance(p, PNil):
        return "0"
    if isinstance(p, PPar):
        return f"({show_pi(p)})"
    if isinstance(p, PBang):
        return "!" + _show_unary(p.body)
    if isinstance(p, PNu):
        return f"new {p.name}.{_show_unary(p.body)}"
    if isinstance(p, PIn):
        return f"{p.chan}({','.join(map(str, p.params))}).{_show_unary(p.cont)}"
    return f"{p.chan}<{','.join(map(str, p.args))}>.{_show_unary(p.cont)}"


# -- encoding ---------------------------------------------------------------

def _encode(p: PiProcess) -> Process:
    if isinstance(p, PNil):
        return NIL
    if isinstance(p, PPar):
        return Par(_encode(p.left), _encode(p.right))
    if isinstance(p, PBang):
        return Bang(_encode(p.body))
    if isinstance(p, PNu):
        return Nu(p.name, _encode(p.body))
    if isinstance(p, PIn):
        return Prefix(Action((p.chan, In(p.params))), _encode(p.cont))
    msgs = tuple(Message.of_name(y) for y in p.args)
    return Prefix(Action((p.chan, Out(msgs))), _encode(p.cont))


def pi_well_scoped(p: PiProcess) -> bool:
    return well_scoped(_encode(p))


def encode_pi(p: PiProcess) -> Process:
    if not pi_well_scoped(p):
        raise ValueError("pi process is not well scoped")
    return _encode(p)


def max_arity(p: PiProcess) -> int:
    if isinstance(p, PPar):
        return max(max_arity(p.left), max_arity(p.right))
    if isinstance(p, (PBang, PNu)):
        return max_arity(p.body)
    if isinstance(p, PIn):
        return max(len(p.params), max_arity(p.cont))
    if isinstance(p, POut):
        return max(len(p.args), max_arity(p.cont))
    return 0


def ruleset_pi(k_max: int) -> RuleSet:
    lines = []
    for k in range(k_max + 1):
        ns = ",".join(f"n{i}'" for i in range(1, k + 1))
        xs = ",".join(f"x{i}'" for i in range(1, k + 1))
        subst = ", ".join(f"x{i}':=n{i}'" for i in range(1, k + 1))
        rhs = f"P' | [{subst}]Q'" if k else "P' | Q'"
        lines.append(f"c'<{ns}>.P' | c'({xs}).Q' => {rhs}")
    return parse_ruleset("\n".join(lines))


# -- safety -----------------------------------------------------------------

@dataclass(frozen=True)
class Finding:
    kind: str   # arity-mismatch | bullet-label | bare-name-capability
    node: str
    labels: tuple

    def __str__(self) -> str:
        return f"{self.kind} at {self.node}: " + "; ".join(map(str, self.labels))


@dataclass(frozen=True)
class SafetyVerdict:
    findings: tuple = ()

    @property
    def safe(self) -> bool:
        return not self.findings

    def __str__(self) -> str:
        if self.safe:
            return "safe"
        return "unsafe\n" + "\n".join(f"  {f}" for f in self.findings)


def _bullet_findings(s: ShapePredicate) -> list:
    return [Finding("bullet-label", e.src, (e.label,))
            for e in sorted(s.edges, key=lambda e: (e.src, str(e.label)))
            if e.label.has_bullet]


def _channel_io(label: ActionType):
    els = label.elements
    if len(els) == 2 and isinstance(els[0], str):
        if isinstance(els[1], InType):
            return els[0], "in", len(els[1].bases)
        if isinstance(els[1], OutType):
            return els[0], "out", len(els[1].mts)
    return None


def pi_safety(s: ShapePredicate, r: RuleSet, check: bool = True) -> SafetyVerdict:
    if check and not is_type(r, s):
        raise ValueError("predicate is not closed under the rule set")
    findings = []
    for x in sorted(active_nodes(r, s)):
        ins, outs = [], []
        for e in s.out_edges(x):
            io = _channel_io(e.label)
            if io:
                (ins if io[1] == "in" else outs).append((io[0], io[2], e.label))
        for c1, k, l1 in ins:
            for c2, j, l2 in outs:
                if c1 == c2 and k != j:
                    findings.append(Finding("arity-mismatch", x, (l1, l2)))
    findings += _bullet_findings(s)
    return SafetyVerdict(tuple(findings))


# -- reference semantics ------------------------------------------------------

def pi_names(p: PiProcess) -> set:
    if isinstance(p, PPar):
        return pi_names(p.left) | pi_names(p.right)
    if isinstance(p, PBang):
        return pi_names(p.body)
    if isinstance(p, PNu):
        return {p.name} | pi_names(p.body)
    if isinstance(p, PIn):
        return {p.chan, *p.params} | pi_names(p.cont)
    if isinstance(p, POut):
        return {p.chan, *p.args} | pi_names(p.cont)
    return set()


def pi_subst(p: PiProcess, sigma: dict, avoid: set) -> PiProcess:
    """Capture-avoiding name-for-name substitution."""
    if not sigma or isinstance(p, PNil):
        return p
    s = lambda x: sigma.get(x, x)
    if isinstance(p, PPar):
        return PPar(pi_subst(p.left, sigma, avoid), pi_subst(p.right, sigma, avoid))
    if isinstance(p, PBang):
        return PBang(pi_subst(p.body, sigma, avoid))
    rng = set(sigma.values())
    if isinstance(p, PNu):
        inner = {k: v for k, v in sigma.items() if k != p.name}
        x, body = p.name, p.body
        if x in rng:
            x2 = fresh_name(x.base, avoid | pi_names(p) | rng)
            avoid.add(x2)
            body = pi_subst(body, {x: x2}, avoid)
            x = x2
        return PNu(x, pi_subst(body, inner, avoid))
    if isinstance(p, POut):
        return POut(s(p.chan), tuple(map(s, p.args)), pi_subst(p.cont, sigma, avoid))
    inner = {k: v for k, v in sigma.items() if k not in p.params}
    params, cont = list(p.params), p.cont
    for i, x in enumerate(params):
        if x in set(inner.values()):
            x2 = fresh_name(x.base, avoid | pi_names(p) | rng)
            avoid.add(x2)
            cont = pi_subst(cont, {x: x2}, avoid)
            params[i] = x2
    return PIn(s(p.chan), tuple(params), pi_subst(cont, inner, avoid))


def _flatten(p: PiProcess, avoid: set, binders: list) -> list:
    """Top-level components with restrictions pulled out under fresh names."""
    if isinstance(p, PNil):
        return []
    if isinstance(p, PPar):
        return _flatten(p.left, avoid, binders) + _flatten(p.right, avoid, binders)
    if isinstance(p, PNu):
        x2 = fresh_name(p.name.base, avoid)
        avoid.add(x2)
        binders.append(x2)
        return _flatten(pi_subst(p.body, {p.name: x2}, avoid), avoid, binders)
    return [p]


def pi_reducts(p: PiProcess, unfold: int = 2) -> Iterator[PiProcess]:
    """One-step reducts by direct pairing of top-level prefixes; each
    replicated component is unfolded up to `unfold` times."""
    avoid = set(pi_names(p))
    binders: list = []
    comps = _flatten(p, avoid, binders)
    # pool entries: (owner, process); owner is a component index or a copy id
    pool, copies = [], {}
    ids = count()
    for i, c in enumerate(comps):
        if isinstance(c, PBang):
            for _ in range(unfold):
                cid, bs = ("copy", next(ids)), []
                parts = _flatten(c.body, avoid, bs)
                copies[cid] = bs
                pool.extend((cid, cc) for cc in parts)
        else:
            pool.append((i, c))
    for a, (oa, pa) in enumerate(pool):
        if not isinstance(pa, PIn):
            continue
        for b, (ob, pb) in enumerate(pool):
            if a == b or not isinstance(pb, POut):
                continue
            if pa.chan != pb.chan or len(pa.params) != len(pb.args):
                continue
            sigma = dict(zip(pa.params, pb.args))
            out = PPar(pi_subst(pa.cont, sigma, set(avoid)), pb.cont)
            used = {oa, ob}
            for i, c in enumerate(comps):
                if i not in used:
                    out = PPar(out, c)
            extra = []
            for cid in sorted(o for o in used if isinstance(o, tuple)):
                extra += copies[cid]
                for j, (oj, pj) in enumerate(pool):
                    if oj == cid and j not in (a, b):
                        out = PPar(out, pj)
            for x in reversed(binders + extra):
                out = PNu(x, out)
            yield out


def decode_pi(p: Process) -> PiProcess:
    """Read an encoded process back as pi syntax."""
    from .terms import Nil
    if isinstance(p, Nil):
        return PNIL
    if isinstance(p, Par):
        return PPar(decode_pi(p.left), decode_pi(p.right))
    if isinstance(p, Bang):
        return PBang(decode_pi(p.body))
    if isinstance(p, Nu):
        return PNu(p.name, decode_pi(p.body))
    els = p.action.elements
    if len(els) == 2 and isinstance(els[0], Name):
        if isinstance(els[1], In):
            return PIn(els[0], els[1].names, decode_pi(p.cont))
        if isinstance(els[1], Out) and all(m.is_name for m in els[1].messages):
            return POut(els[0], tuple(m.name for m in els[1].messages), decode_pi(p.cont))
    raise ValueError(f"not a pi action: {p.action}")
