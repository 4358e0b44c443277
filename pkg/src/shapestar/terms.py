"""Meta-calculus terms: names, messages, actions and processes.

Messages are kept flat: a message is a tuple of forms, each form a tuple of
names.  Composition is concatenation and the empty message is the empty
tuple, so associativity and the unit law hold by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

BULLET = "•"
AMB = "amb"
RESERVED = frozenset({"in", "out", "open", AMB, BULLET})


@dataclass(frozen=True, order=True)
class Name:
    base: str
    index: int = 0

    @property
    def reserved(self) -> bool:
        return self.base in RESERVED

    def __str__(self) -> str:
        return self.base if self.index == 0 else f"{self.base}^{self.index}"


BULLET_NAME = Name(BULLET)
AMB_NAME = Name(AMB)

Form = tuple  # tuple[Name, ...], nonempty


@dataclass(frozen=True)
class Message:
    forms: tuple = ()

    @classmethod
    def of_name(cls, x: Name) -> "Message":
        return cls(((x,),))

    @classmethod
    def compose(cls, *parts: "Message") -> "Message":
        return cls(tuple(f for m in parts for f in m.forms))

    @property
    def is_name(self) -> bool:
        return len(self.forms) == 1 and len(self.forms[0]) == 1

    @property
    def name(self) -> Name:
        assert self.is_name
        return self.forms[0][0]

    def names(self) -> Iterator[Name]:
        for f in self.forms:
            yield from f

    def __str__(self) -> str:
        if not self.forms:
            return "ε"
        return ".".join(" ".join(map(str, f)) for f in self.forms)


EPSILON = Message(())


@dataclass(frozen=True)
class In:
    names: tuple = ()

    def __str__(self) -> str:
        return "in<" + ",".join(map(str, self.names)) + ">"


@dataclass(frozen=True)
class Out:
    messages: tuple = ()

    def __str__(self) -> str:
        return "out<" + ",".join(map(str, self.messages)) + ">"


Element = Union[Name, In, Out]


@dataclass(frozen=True)
class Action:
    elements: tuple

    def __post_init__(self):
        if not self.elements:
            raise ValueError("an action needs at least one element")

    def binders(self) -> tuple:
        return tuple(x for e in self.elements if isinstance(e, In) for x in e.names)

    def names(self) -> Iterator[Name]:
        for e in self.elements:
            if isinstance(e, Name):
                yield e
            elif isinstance(e, In):
                yield from e.names
            else:
                for m in e.messages:
                    yield from m.names()

    def free_names(self) -> set:
        bound = set(self.binders())
        return {x for x in self.names() if x not in bound}

    @property
    def is_single_name(self) -> bool:
        return len(self.elements) == 1 and isinstance(self.elements[0], Name)

    @property
    def is_ambient(self) -> bool:
        last = self.elements[-1]
        return len(self.elements) >= 2 and last == AMB_NAME

    def __str__(self) -> str:
        return " ".join(map(str, self.elements))


class Process:
    __slots__ = ()

    def __str__(self) -> str:
        from .syntax import show_process
        return show_process(self)


@dataclass(frozen=True, repr=False)
class Nil(Process):
    def __repr__(self) -> str:
        return "Nil()"


@dataclass(frozen=True)
class Prefix(Process):
    action: Action
    cont: Process


@dataclass(frozen=True)
class Par(Process):
    left: Process
    right: Process


@dataclass(frozen=True)
class Nu(Process):
    name: Name
    body: Process


@dataclass(frozen=True)
class Bang(Process):
    body: Process


NIL = Nil()


def par(*ps: Process) -> Process:
    ps = [p for p in ps if not isinstance(p, Nil)]
    if not ps:
        return NIL
    out = ps[-1]
    for p in reversed(ps[:-1]):
        out = Par(p, out)
    return out


def nus(names: Iterable[Name], body: Process) -> Process:
    for x in reversed(list(names)):
        body = Nu(x, body)
    return body


def prefix(elements, cont: Process = NIL) -> Process:
    return Prefix(Action(tuple(elements)), cont)


def components(p: Process) -> list:
    """Parallel components of p, with 0 dropped."""
    if isinstance(p, Par):
        return components(p.left) + components(p.right)
    if isinstance(p, Nil):
        return []
    return [p]


# -- name sets --------------------------------------------------------------

@dataclass(frozen=True)
class NameSets:
    fn: frozenset
    fbn: frozenset
    ibn: frozenset
    nbn: frozenset
    bn_actions: tuple = field(default=())


def free_names(p: Process) -> frozenset:
    return frozenset(_fn(p))


def _fn(p: Process) -> set:
    if isinstance(p, Nil):
        return set()
    if isinstance(p, Prefix):
        rest = _fn(p.cont) - set(p.action.binders())
        return p.action.free_names() | rest
    if isinstance(p, Par):
        return _fn(p.left) | _fn(p.right)
    if isinstance(p, Nu):
        return _fn(p.body) - {p.name}
    if isinstance(p, Bang):
        return _fn(p.body)
    raise TypeError(p)


def all_names(p: Process) -> set:
    out = set()
    for q in subterms(p):
        if isinstance(q, Prefix):
            out.update(q.action.names())
        elif isinstance(q, Nu):
            out.add(q.name)
    return out


def subterms(p: Process) -> Iterator[Process]:
    stack = [p]
    while stack:
        q = stack.pop()
        yield q
        if isinstance(q, Prefix):
            stack.append(q.cont)
        elif isinstance(q, Par):
            stack += [q.right, q.left]
        elif isinstance(q, (Nu, Bang)):
            stack.append(q.body)


def name_sets(p: Process) -> NameSets:
    fn = free_names(p)
    ibn, nbn, bns = set(), set(), []
    for q in subterms(p):
        if isinstance(q, Prefix):
            b = q.action.binders()
            bns.append(frozenset(b))
            ibn.update(x.base for x in b)
        elif isinstance(q, Nu):
            nbn.add(q.name.base)
    return NameSets(fn, frozenset(x.base for x in fn), frozenset(ibn),
                    frozenset(nbn), tuple(bns))


def well_scoped(p: Process) -> bool:
    ns = name_sets(p)
    fbn = ns.fbn - RESERVED
    if fbn & ns.ibn or fbn & ns.nbn or ns.ibn & ns.nbn:
        return False
    if (ns.ibn | ns.nbn) & RESERVED:
        return False
    return _nested_ok(p, frozenset())


def _nested_ok(p: Process, enclosing: frozenset) -> bool:
    if isinstance(p, Prefix):
        bases = [x.base for x in p.action.binders()]
        if len(set(bases)) != len(bases) or enclosing.intersection(bases):
            return False
        return _nested_ok(p.cont, enclosing.union(bases))
    if isinstance(p, Par):
        return _nested_ok(p.left, enclosing) and _nested_ok(p.right, enclosing)
    if isinstance(p, (Nu, Bang)):
        return _nested_ok(p.body, enclosing)
    return True


# -- renaming and substitution ----------------------------------------------

def fresh_name(base: str, avoid: Iterable[Name]) -> Name:
    top = max((x.index for x in avoid if x.base == base), default=-1)
    return Name(base, top + 1)


def rename_action(a: Action, ren: dict) -> Action:
    if not ren:
        return a
    r = lambda x: ren.get(x, x)
    els = []
    for e in a.elements:
        if isinstance(e, Name):
            els.append(r(e))
        elif isinstance(e, In):
            els.append(In(tuple(map(r, e.names))))
        else:
            els.append(Out(tuple(Message(tuple(tuple(map(r, f)) for f in m.forms))
                                 for m in e.messages)))
    return Action(tuple(els))


def rename(p: Process, ren: dict) -> Process:
    """Rename names by a name-to-name map; the caller avoids capture."""
    if not ren:
        return p
    if isinstance(p, Nil):
        return p
    if isinstance(p, Prefix):
        return Prefix(rename_action(p.action, ren), rename(p.cont, ren))
    if isinstance(p, Par):
        return Par(rename(p.left, ren), rename(p.right, ren))
    if isinstance(p, Nu):
        return Nu(ren.get(p.name, p.name), rename(p.body, ren))
    return Bang(rename(p.body, ren))


def apply_subst(sigma: dict, p: Process) -> Process:
    """Capture-avoiding substitution of messages for names.

    A message that does not fit a name slot leaves the error name there; a
    single-name action replaced by a composite message is unfolded into one
    prefix per form.
    """
    sigma = {x: m for x, m in sigma.items() if not (m.is_name and m.name == x)}
    if not sigma:
        return p
    return _subst(p, sigma)


def _range_names(sigma: dict) -> set:
    return {y for m in sigma.values() for y in m.names()}


def _subst_name(x: Name, sigma: dict) -> Name:
    m = sigma.get(x)
    if m is None:
        return x
    return m.name if m.is_name else BULLET_NAME


def _subst_message(m: Message, sigma: dict) -> Message:
    forms = []
    for f in m.forms:
        if len(f) == 1 and f[0] in sigma:
            forms.extend(sigma[f[0]].forms)
        else:
            forms.append(tuple(_subst_name(x, sigma) for x in f))
    return Message(tuple(forms))


def _subst(p: Process, sigma: dict) -> Process:
    if not sigma or isinstance(p, Nil):
        return p
    if isinstance(p, Par):
        return Par(_subst(p.left, sigma), _subst(p.right, sigma))
    if isinstance(p, Bang):
        return Bang(_subst(p.body, sigma))
    if isinstance(p, Nu):
        inner = {k: v for k, v in sigma.items() if k != p.name}
        x, body = p.name, p.body
        if x in _range_names(inner):
            x2 = fresh_name(x.base, all_names(body) | _range_names(inner) | set(inner) | {x})
            body = rename(body, {x: x2})
            x = x2
        return Nu(x, _subst(body, inner))
    # prefix: binders scope over the whole action and the continuation
    a, cont = p.action, p.cont
    binders = a.binders()
    inner = {k: v for k, v in sigma.items() if k not in binders}
    if not inner:
        return p
    clash = set(binders) & _range_names(inner)
    if clash:
        avoid = all_names(p) | _range_names(inner) | set(inner)
        ren = {}
        for b in clash:
            ren[b] = fresh_name(b.base, avoid | set(ren.values()))
        a, cont = rename_action(a, ren), rename(cont, ren)
    new_cont = _subst(cont, inner)
    if a.is_single_name and a.elements[0] in inner:
        for f in reversed(inner[a.elements[0]].forms):
            new_cont = Prefix(Action(tuple(f)), new_cont)
        return new_cont
    els = []
    for e in a.elements:
        if isinstance(e, Name):
            els.append(_subst_name(e, inner))
        elif isinstance(e, In):
            els.append(e)
        else:
            els.append(Out(tuple(_subst_message(m, inner) for m in e.messages)))
    return Prefix(Action(tuple(els)), new_cont)


# -- structural normalization -----------------------------------------------

def _uniquify(p: Process, avoid: Iterable[Name] = ()) -> Process:
    """Give every binder a distinct index, clear of all free names."""
    counters: dict = {}
    for x in free_names(p) | set(avoid):
        counters[x.base] = max(counters.get(x.base, -1), x.index)

    def fresh(x: Name) -> Name:
        i = counters.get(x.base, -1) + 1
        counters[x.base] = i
        return Name(x.base, i)

    def go(q: Process, env: dict) -> Process:
        if isinstance(q, Nil):
            return q
        if isinstance(q, Par):
            return Par(go(q.left, env), go(q.right, env))
        if isinstance(q, Bang):
            return Bang(go(q.body, env))
        if isinstance(q, Nu):
            y = fresh(q.name)
            return Nu(y, go(q.body, {**env, q.name: y}))
        b = q.action.binders()
        if b:
            env = {**env, **{x: fresh(x) for x in b}}
        return Prefix(rename_action(q.action, env), go(q.cont, env))

    return go(p, {})


def _name_key(x: Name, bound) -> tuple:
    return (x.base, -1) if bound is not None and x in bound else (x.base, x.index)


def _action_key(a: Action, bound) -> tuple:
    out = []
    for e in a.elements:
        if isinstance(e, Name):
            out.append((0, _name_key(e, bound)))
        elif isinstance(e, In):
            out.append((1, tuple(_name_key(x, bound) for x in e.names)))
        else:
            out.append((2, tuple(tuple(tuple(_name_key(x, bound) for x in f)
                                       for f in m.forms) for m in e.messages)))
    return tuple(out)


def _key(p: Process, bound) -> tuple:
    if isinstance(p, Nil):
        return (0,)
    if isinstance(p, Prefix):
        return (1, _action_key(p.action, bound), _key(p.cont, bound))
    if isinstance(p, Bang):
        return (2, _key(p.body, bound))
    if isinstance(p, Nu):
        return (3, _name_key(p.name, bound), _key(p.body, bound))
    return (4, tuple(_key(c, bound) for c in components(p)))


def _first_occurrences(comps: list) -> list:
    seen, order = set(), []
    for c in comps:
        for q in subterms(c):
            names = q.action.names() if isinstance(q, Prefix) else ()
            for x in names:
                if x not in seen:
                    seen.add(x)
                    order.append(x)
    return order


def _build(binders: list, comps: list, bound) -> Process:
    comps = sorted(comps, key=lambda c: _key(c, bound))
    rank = {x: i for i, x in enumerate(_first_occurrences(comps))}
    binders = sorted(binders, key=lambda x: (x.base, rank.get(x, len(rank))))
    return nus(binders, par(*comps))


def _lift(p: Process, bound) -> tuple:
    """Return (restricted names, components) with ν lifted as far as allowed."""
    if isinstance(p, Nil):
        return [], []
    if isinstance(p, Par):
        b1, c1 = _lift(p.left, bound)
        b2, c2 = _lift(p.right, bound)
        return b1 + b2, c1 + c2
    if isinstance(p, Nu):
        b, c = _lift(p.body, bound)
        if any(p.name in _fn(q) for q in c):
            return [p.name] + b, c
        return b, c
    if isinstance(p, Bang):
        b, c = _lift(p.body, bound)
        if not c:
            return [], []
        return [], [Bang(_build(b, c, bound))]
    b, c = _lift(p.cont, bound)
    return b, [Prefix(p.action, _build([], c, bound))]


def open_scope(p: Process, avoid: Iterable[Name] = ()) -> tuple:
    """Freshen p's binders away from `avoid` and split it into lifted
    restrictions and parallel components."""
    q = _uniquify(p, avoid)
    return _lift(q, frozenset(all_names(q) - free_names(q)))


def _canonical_rename(p: Process) -> Process:
    counters: dict = {}
    for x in free_names(p):
        counters[x.base] = max(counters.get(x.base, -1), x.index)

    def fresh(x: Name) -> Name:
        i = counters.get(x.base, -1) + 1
        counters[x.base] = i
        return Name(x.base, i)

    def go(q: Process, env: dict) -> Process:
        if isinstance(q, Nil):
            return q
        if isinstance(q, Par):
            left = go(q.left, env)
            return Par(left, go(q.right, env))
        if isinstance(q, Bang):
            return Bang(go(q.body, env))
        if isinstance(q, Nu):
            y = fresh(q.name)
            return Nu(y, go(q.body, {**env, q.name: y}))
        b = q.action.binders()
        if b:
            env = {**env, **{x: fresh(x) for x in b}}
        return Prefix(rename_action(q.action, env), go(q.cont, env))

    return go(p, {})


def _resort(p: Process) -> Process:
    """Re-sort parallel components and binders using concrete names."""
    if isinstance(p, Nil):
        return p
    binders = []
    while isinstance(p, Nu):
        binders.append(p.name)
        p = p.body
    comps = []
    for c in components(p):
        if isinstance(c, Prefix):
            comps.append(Prefix(c.action, _resort(c.cont)))
        elif isinstance(c, Bang):
            comps.append(Bang(_resort(c.body)))
        else:
            comps.append(c)
    return _build(binders, comps, None)


def struct_normalize(p: Process) -> Process:
    q = _uniquify(p)
    bound = frozenset(all_names(q) - free_names(q))
    b, c = _lift(q, bound)
    r = _canonical_rename(_build(b, c, bound))
    for _ in range(4):
        r2 = _canonical_rename(_resort(r))
        if r2 == r:
            break
        r = r2
    return r


def alpha_eq(p: Process, q: Process) -> bool:
    return _canonical_rename(p) == _canonical_rename(q)


def struct_eq(p: Process, q: Process) -> bool:
    return struct_normalize(p) == struct_normalize(q)


def size(p: Process) -> int:
    return sum(1 for q in subterms(p) if not isinstance(q, Par))
