"""Simple channel types for the polyadic pi-calculus, checked directly by
unification and indirectly through shape types."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import count
from typing import Optional

from . import pi as P
from .inference import infer_principal
from .shapes import InType, OutType, ShapeGraph, ShapePredicate, Single
from .syntax import TokenStream
from .terms import Name


class PiType:
    __slots__ = ()


@dataclass(frozen=True)
class TyVar(PiType):
    """A rigid type variable supplied by the caller."""
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Ch(PiType):
    args: tuple

    def __str__(self) -> str:
        return "ch[" + ", ".join(map(str, self.args)) + "]"


@dataclass(frozen=True)
class UVar(PiType):
    """A unification variable."""
    id: int

    def __str__(self) -> str:
        return f"?{self.id}"


def parse_pi_type(text: str) -> PiType:
    ts = TokenStream(text)
    t = _pi_type(ts)
    ts.done()
    return t


def _pi_type(ts: TokenStream) -> PiType:
    if ts.at("ch") and ts.peek().text == "[":
        ts.next()
        ts.next()
        args = []
        if not ts.at("]"):
            args.append(_pi_type(ts))
            while ts.accept(","):
                args.append(_pi_type(ts))
        ts.expect("]")
        return Ch(tuple(args))
    return TyVar(ts.ident())


def parse_context(text: str) -> dict:
    """`a: ch[i], b: i` -> {'a': Ch((TyVar('i'),)), 'b': TyVar('i')}."""
    ts = TokenStream(text)
    ctx = {}
    while ts.tok.kind != "eof":
        a = ts.ident()
        ts.expect(":")
        ctx[a] = _pi_type(ts)
        if not ts.accept(","):
            break
    ts.done()
    return ctx


class Unifier:
    def __init__(self):
        self.bound: dict = {}
        self._ids = count()

    def fresh(self) -> UVar:
        return UVar(next(self._ids))

    def walk(self, t: PiType) -> PiType:
        while isinstance(t, UVar) and t in self.bound:
            t = self.bound[t]
        return t

    def occurs(self, v: UVar, t: PiType) -> bool:
        t = self.walk(t)
        if t == v:
            return True
        return isinstance(t, Ch) and any(self.occurs(v, a) for a in t.args)

    def unify(self, s: PiType, t: PiType) -> bool:
        stack = [(s, t)]
        while stack:
            a, b = stack.pop()
            a, b = self.walk(a), self.walk(b)
            if a == b:
                continue
            if isinstance(a, UVar) or isinstance(b, UVar):
                v, t2 = (a, b) if isinstance(a, UVar) else (b, a)
                if self.occurs(v, t2):
                    return False
                self.bound[v] = t2
            elif isinstance(a, Ch) and isinstance(b, Ch) and len(a.args) == len(b.args):
                stack.extend(zip(a.args, b.args))
            else:
                return False
        return True

    def resolve(self, t: PiType) -> PiType:
        t = self.walk(t)
        if isinstance(t, Ch):
            return Ch(tuple(self.resolve(a) for a in t.args))
        return t


def _check(ctx: dict, p: P.PiProcess, u: Unifier) -> bool:
    if isinstance(p, P.PNil):
        return True
    if isinstance(p, P.PPar):
        return _check(ctx, p.left, u) and _check(ctx, p.right, u)
    if isinstance(p, P.PBang):
        return _check(ctx, p.body, u)
    if isinstance(p, P.PNu):
        return _check({**ctx, p.name.base: u.fresh()}, p.body, u)
    chan = ctx.get(p.chan.base)
    if chan is None:
        return False
    if isinstance(p, P.PIn):
        vs = [u.fresh() for _ in p.params]
        if not u.unify(chan, Ch(tuple(vs))):
            return False
        inner = dict(ctx)
        for x, v in zip(p.params, vs):
            inner[x.base] = v
        return _check(inner, p.cont, u)
    args = [ctx.get(y.base) for y in p.args]
    if any(a is None for a in args):
        return False
    return u.unify(chan, Ch(tuple(args))) and _check(ctx, p.cont, u)


def tpi_check(ctx: dict, p: P.PiProcess) -> bool:
    return _check(dict(ctx), p, Unifier())


def tpi_typable(p: P.PiProcess) -> Optional[dict]:
    """A most general context for the free names of `p`, or None."""
    u = Unifier()
    ctx = {x.base: u.fresh() for x in _free(p)}
    if not _check(ctx, p, u):
        return None
    return {a: u.resolve(t) for a, t in ctx.items()}


def _free(p: P.PiProcess, bound: frozenset = frozenset()) -> set:
    if isinstance(p, P.PPar):
        return _free(p.left, bound) | _free(p.right, bound)
    if isinstance(p, P.PBang):
        return _free(p.body, bound)
    if isinstance(p, P.PNu):
        return _free(p.body, bound | {p.name})
    if isinstance(p, P.PIn):
        return ({p.chan} - bound) | _free(p.cont, bound | set(p.params))
    if isinstance(p, P.POut):
        return ({p.chan, *p.args} - bound) | _free(p.cont, bound)
    return set()


def pi_free_names(p: P.PiProcess) -> set:
    return _free(p)


def chtypes(ctx: dict, g: ShapeGraph) -> Optional[set]:
    """Expected/actual channel type pairs, one per communication edge; None
    when the context lacks a base the graph needs."""
    pairs = set()
    for e in g.edges:
        els = e.label.elements
        if len(els) != 2 or not isinstance(els[0], str):
            continue
        if isinstance(els[1], InType):
            bases = els[1].bases
        elif isinstance(els[1], OutType):
            if not all(isinstance(m, Single) for m in els[1].mts):
                return None
            bases = tuple(m.base for m in els[1].mts)
        else:
            continue
        if els[0] not in ctx or any(b not in ctx for b in bases):
            return None
        pairs.add((ctx[els[0]], Ch(tuple(ctx[b] for b in bases))))
    return pairs


def _comm_bases(g: ShapeGraph) -> set:
    out = set()
    for e in g.edges:
        els = e.label.elements
        if len(els) == 2 and isinstance(els[0], str):
            if isinstance(els[1], InType):
                out |= {els[0], *els[1].bases}
            elif isinstance(els[1], OutType):
                out.add(els[0])
                out |= {m.base for m in els[1].mts if isinstance(m, Single)}
    return out


def agrees(ctx: dict, s) -> bool:
    """Whether some extension of `ctx` to the graph's other bases makes every
    expected channel type equal its actual one."""
    g = s.graph if isinstance(s, ShapePredicate) else s
    u = Unifier()
    full = dict(ctx)
    for b in _comm_bases(g):
        full.setdefault(b, u.fresh())
    pairs = chtypes(full, g)
    if pairs is None:
        return False
    return all(u.unify(a, b) for a, b in sorted(pairs, key=str))


def distinct_binders(p: P.PiProcess, avoid: set = frozenset()) -> P.PiProcess:
    """Rename every binder to its own base, keeping free names."""
    used = {x.base for x in P.pi_names(p)} | set(avoid)

    def fresh(x: Name) -> Name:
        n = 1
        while f"{x.base}{n}" in used:
            n += 1
        used.add(f"{x.base}{n}")
        return Name(f"{x.base}{n}")

    def go(q: P.PiProcess, sigma: dict) -> P.PiProcess:
        s = lambda x: sigma.get(x, x)
        if isinstance(q, P.PNil):
            return q
        if isinstance(q, P.PPar):
            return P.PPar(go(q.left, sigma), go(q.right, sigma))
        if isinstance(q, P.PBang):
            return P.PBang(go(q.body, sigma))
        if isinstance(q, P.PNu):
            x2 = fresh(q.name)
            return P.PNu(x2, go(q.body, {**sigma, q.name: x2}))
        if isinstance(q, P.PIn):
            xs = tuple(fresh(x) for x in q.params)
            return P.PIn(s(q.chan), xs, go(q.cont, {**sigma, **dict(zip(q.params, xs))}))
        return P.POut(s(q.chan), tuple(map(s, q.args)), go(q.cont, sigma))

    return go(p, {})


def _binders_distinct(p: P.PiProcess) -> bool:
    seen: list = []

    def go(q):
        if isinstance(q, P.PPar):
            go(q.left)
            go(q.right)
        elif isinstance(q, P.PBang):
            go(q.body)
        elif isinstance(q, P.PNu):
            seen.append(q.name.base)
            go(q.body)
        elif isinstance(q, P.PIn):
            seen.extend(x.base for x in q.params)
            go(q.cont)
        elif isinstance(q, P.POut):
            go(q.cont)

    go(p)
    return len(seen) == len(set(seen))


def open_context(ctx: dict, p: P.PiProcess) -> dict:
    """`ctx` plus an unknown for every free base it does not mention."""
    out = dict(ctx)
    for i, b in enumerate(sorted({x.base for x in _free(p)} - set(ctx))):
        out[b] = UVar(-1 - i)
    return out


def tpi_decide(ctx: dict, p: P.PiProcess, k_max: Optional[int] = None) -> bool:
    """Typability through the principal shape type.  Free names missing
    from `ctx` are left unknown, as are all bound names."""
    bound = {x.base for x in P.pi_names(p)} - {x.base for x in _free(p)}
    if set(ctx) & bound:
        raise ValueError("context mentions names bound in the process")
    if not _binders_distinct(p):
        p = distinct_binders(p, set(ctx))
    k = P.max_arity(p) if k_max is None else k_max
    s = infer_principal(P.ruleset_pi(k), P.encode_pi(p))
    return agrees(ctx, s)


def rigidify(t: PiType) -> PiType:
    """Replace unification variables by rigid ones of the same number."""
    if isinstance(t, UVar):
        return TyVar(f"i{t.id}")
    if isinstance(t, Ch):
        return Ch(tuple(map(rigidify, t.args)))
    return t
