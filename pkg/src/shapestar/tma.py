"""Exchange types for mobile ambients: a direct checker and the compilation
of type information into a shape predicate."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import count, product
from typing import Optional

from . import ambients as A
from .ambients import AmbT, CapT, ExType, Hole, Prod, SHH, ShhT
from .shapes import ActionType, Edge, InType, OutType, ShapePredicate, Single, Star, matches
from .terms import AMB


@dataclass(frozen=True)
class MVar(ExType):
    id: int
    kind: str = "W"

    def __str__(self) -> str:
        return f"?{self.id}"


class _Unifier:
    def __init__(self):
        self.bound: dict = {}
        self._ids = count()
        self._holes: dict = {}

    def fresh(self, kind: str = "W") -> MVar:
        return MVar(next(self._ids), kind)

    def open(self, t: Optional[ExType], kind: str = "W") -> ExType:
        """Replace holes (and a missing annotation) by unification variables."""
        if t is None:
            return self.fresh(kind)
        if isinstance(t, Hole):
            if id(t) not in self._holes:
                self._holes[id(t)] = (t, self.fresh(t.kind))
            return self._holes[id(t)][1]
        if isinstance(t, AmbT):
            return AmbT(self.open(t.inner, "T"))
        if isinstance(t, CapT):
            return CapT(self.open(t.inner, "T"))
        if isinstance(t, Prod):
            return Prod(tuple(self.open(w) for w in t.parts))
        return t

    def walk(self, t: ExType) -> ExType:
        while isinstance(t, MVar) and t in self.bound:
            t = self.bound[t]
        return t

    def occurs(self, v: MVar, t: ExType) -> bool:
        t = self.walk(t)
        if t == v:
            return True
        if isinstance(t, (AmbT, CapT)):
            return self.occurs(v, t.inner)
        if isinstance(t, Prod):
            return any(self.occurs(v, w) for w in t.parts)
        return False

    def unify(self, s: ExType, t: ExType) -> bool:
        stack = [(s, t)]
        while stack:
            a, b = stack.pop()
            a, b = self.walk(a), self.walk(b)
            if a == b:
                continue
            if isinstance(a, MVar) or isinstance(b, MVar):
                v, other = (a, b) if isinstance(a, MVar) else (b, a)
                if self.occurs(v, other):
                    return False
                self.bound[v] = other
            elif type(a) is type(b) and isinstance(a, (AmbT, CapT)):
                stack.append((a.inner, b.inner))
            elif isinstance(a, Prod) and isinstance(b, Prod) and len(a.parts) == len(b.parts):
                stack.extend(zip(a.parts, b.parts))
            else:
                return False
        return True

    def resolve(self, t: ExType, ground: bool = False) -> ExType:
        t = self.walk(t)
        if isinstance(t, MVar):
            if not ground:
                return t
            return SHH if t.kind == "T" else AmbT(SHH)
        if isinstance(t, AmbT):
            return AmbT(self.resolve(t.inner, ground))
        if isinstance(t, CapT):
            return CapT(self.resolve(t.inner, ground))
        if isinstance(t, Prod):
            return Prod(tuple(self.resolve(w, ground) for w in t.parts))
        return t


def _cap(env: dict, m: A.Capability, w: ExType, u: _Unifier) -> bool:
    m = A.name_slot(m)
    if isinstance(m, A.CName):
        known = env.get(m.name.base)
        return known is not None and u.unify(known, w)
    if isinstance(m, A.CEps):
        return u.unify(w, CapT(u.fresh("T")))
    if isinstance(m, A.CSeq):
        t = u.fresh("T")
        return u.unify(w, CapT(t)) and _cap(env, m.first, CapT(t), u) \
            and _cap(env, m.second, CapT(t), u)
    if isinstance(m, A.COpen):
        t = u.fresh("T")
        return u.unify(w, CapT(t)) and _cap(env, m.arg, AmbT(t), u)
    # in / out: any ambient, any exchange
    return u.unify(w, CapT(u.fresh("T"))) and _cap(env, m.arg, AmbT(u.fresh("T")), u)


def _proc(env: dict, p: A.MaProcess, t: ExType, u: _Unifier) -> bool:
    if isinstance(p, A.MNil):
        return True
    if isinstance(p, A.MPar):
        return _proc(env, p.left, t, u) and _proc(env, p.right, t, u)
    if isinstance(p, A.MBang):
        return _proc(env, p.body, t, u)
    if isinstance(p, A.MPre):
        return _cap(env, p.cap, CapT(t), u) and _proc(env, p.cont, t, u)
    if isinstance(p, A.MAmb):
        inner = u.fresh("T")
        return _cap(env, p.cap, AmbT(inner), u) and _proc(env, p.body, inner, u)
    if isinstance(p, A.MNu):
        w = u.open(p.ann)
        if not u.unify(w, AmbT(u.fresh("T"))):
            return False
        return _proc({**env, p.name.base: w}, p.body, t, u)
    if isinstance(p, A.MOutput):
        ws = [u.fresh() for _ in p.msgs]
        return u.unify(t, Prod(tuple(ws))) and \
            all(_cap(env, m, w, u) for m, w in zip(p.msgs, ws))
    ws = [u.open(w) for _, w in p.params]
    if not u.unify(t, Prod(tuple(ws))):
        return False
    inner = dict(env)
    for (x, _), w in zip(p.params, ws):
        inner[x.base] = w
    return _proc(inner, p.cont, t, u)


def tma_check(env: dict, p: A.MaProcess, t: ExType) -> bool:
    """Whether `p` has exchange type `t` under `env`.  Missing or `_`
    annotations are solved by unification."""
    u = _Unifier()
    env = {a: u.open(w) for a, w in env.items()}
    return _proc(env, p, u.open(t, "T"), u)


@dataclass(frozen=True)
class Typing:
    env: dict
    top: ExType
    annotations: dict   # (kind, base) -> type, for every binder


def tma_typable(p: A.MaProcess, env: Optional[dict] = None, t: Optional[ExType] = None,
                ground: bool = True) -> Optional[Typing]:
    """Search for an environment of the free names and an exchange type by
    unification; with `ground`, leftover unknowns become Shh-based types."""
    u = _Unifier()
    free = {x.base for x in A.ma_names(p)} - {b for _, b in A.binder_annotations(p)}
    full = {a: u.open(w) for a, w in (env or {}).items()}
    for a in sorted(free - set(full)):
        full[a] = u.fresh()
    top = u.open(t, "T")
    # binder annotations must be shared per base, so open them once
    opened = {}

    def fix(q):
        if isinstance(q, A.MPar):
            return A.MPar(fix(q.left), fix(q.right))
        if isinstance(q, A.MBang):
            return A.MBang(fix(q.body))
        if isinstance(q, A.MAmb):
            return A.MAmb(q.cap, fix(q.body))
        if isinstance(q, A.MPre):
            return A.MPre(q.cap, fix(q.cont))
        if isinstance(q, A.MNu):
            key = ("nu", q.name.base)
            opened.setdefault(key, u.open(q.ann))
            return A.MNu(q.name, opened[key], fix(q.body))
        if isinstance(q, A.MInput):
            ps = []
            for x, w in q.params:
                key = ("in", x.base)
                opened.setdefault(key, u.open(w))
                ps.append((x, opened[key]))
            return A.MInput(tuple(ps), fix(q.cont))
        return q

    if not _proc(full, fix(p), top, u):
        return None
    return Typing({a: u.resolve(w, ground) for a, w in full.items()},
                  u.resolve(top, ground),
                  {k: u.resolve(w, ground) for k, w in opened.items()})


def annotate(p: A.MaProcess, table: dict) -> A.MaProcess:
    """Replace binder annotations using a (kind, base) -> type table."""
    if isinstance(p, A.MPar):
        return A.MPar(annotate(p.left, table), annotate(p.right, table))
    if isinstance(p, A.MBang):
        return A.MBang(annotate(p.body, table))
    if isinstance(p, A.MAmb):
        return A.MAmb(p.cap, annotate(p.body, table))
    if isinstance(p, A.MPre):
        return A.MPre(p.cap, annotate(p.cont, table))
    if isinstance(p, A.MNu):
        return A.MNu(p.name, table.get(("nu", p.name.base), p.ann), annotate(p.body, table))
    if isinstance(p, A.MInput):
        ps = tuple((x, table.get(("in", x.base), w)) for x, w in p.params)
        return A.MInput(ps, annotate(p.cont, table))
    return p


# -- shape-type encoding ------------------------------------------------------------

def extract_envs(p: A.MaProcess) -> tuple:
    """(restriction env, input env) from binder annotations, keyed by base."""
    nu_env, in_env = {}, {}
    for (kind, base), w in A.binder_annotations(p).items():
        if w is None or not A.is_ground(w):
            raise ValueError(f"binder {base} has no complete type annotation")
        if kind == "nu":
            if not isinstance(w, AmbT):
                raise ValueError(f"restricted name {base} must have an ambient type, not {w}")
            nu_env[base] = w
        else:
            in_env[base] = w
    for b in set(nu_env) & set(in_env):
        if nu_env[b] != in_env[b]:
            raise ValueError(f"conflicting types for {b}")
    return nu_env, in_env


@dataclass(frozen=True)
class TypeInfo:
    all: dict
    com: dict
    top: ExType

    def __post_init__(self):
        for a, w in self.com.items():
            if self.all.get(a) != w:
                raise ValueError(f"input-bound {a} must have the same type in both maps")


def _type_key(t: ExType) -> tuple:
    """Structural total order on exchange types."""
    if isinstance(t, ShhT):
        return (0,)
    if isinstance(t, Prod):
        return (1, len(t.parts), tuple(_type_key(w) for w in t.parts))
    if isinstance(t, AmbT):
        return (2, _type_key(t.inner))
    return (3, _type_key(t.inner))


def node_ids(info: TypeInfo) -> dict:
    """Exchange type -> node id.  The top type is 'R'; others are named by
    their printed form, listed in structural order."""
    types = {info.top} | {w.inner for w in info.all.values() if isinstance(w, AmbT)}
    out = {}
    for t in sorted(types, key=_type_key):
        out[t] = "R" if t == info.top else str(t)
    return out


def typenc(info: TypeInfo) -> ShapePredicate:
    env, com = info.all, info.com

    def namesof(w: ExType) -> list:
        return sorted(a for a, v in env.items() if v == w)

    ambient_names = sorted(a for a, v in env.items() if isinstance(v, AmbT))
    moves = [(op, a) for a in ambient_names for op in ("in", "out")]

    def opens(t: ExType) -> list:
        return [("open", a) for a in namesof(AmbT(t))] + [(a,) for a in namesof(CapT(t))]

    def msg(w: ExType) -> list:
        out = [Single(a) for a in namesof(w)]
        if isinstance(w, CapT):
            out.append(Star(frozenset(moves + opens(w.inner))))
        return out

    def comm(t: ExType) -> list:
        if not isinstance(t, Prod):
            return []
        ws = t.parts
        outs = [ActionType((OutType(mts),)) for mts in product(*(msg(w) for w in ws))]
        cands = [[a for a, v in com.items() if v == w] for w in ws]
        ins = [ActionType((InType(names),)) for names in product(*cands)
               if len(set(names)) == len(names)]
        return outs + ins

    def allowed(t: ExType) -> list:
        return [ActionType(f) for f in moves + opens(t)] + comm(t)

    ids = node_ids(info)
    edges = set()
    for t, x in ids.items():
        edges |= {Edge(x, at, x) for at in allowed(t)}
    for t, y in ids.items():
        for a in namesof(AmbT(t)):
            for x in ids.values():
                edges.add(Edge(x, ActionType((a, AMB)), y))
    return ShapePredicate.build(ids[info.top], edges, ids.values())


def tma_decide(env: dict, p: A.MaProcess, t: ExType) -> bool:
    nu_env, in_env = extract_envs(p)
    if set(env) & set(nu_env):
        raise ValueError("environment must not mention restricted names")
    info = TypeInfo({**env, **nu_env, **in_env}, in_env, t)
    return matches(A.encode_ma(p), typenc(info))
