"""Shape predicates: rooted graphs labelled by action types, and matching."""
from __future__ import annotations

import json
import random
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Union

import networkx as nx
from networkx.algorithms.isomorphism import DiGraphMatcher

from .syntax import ParseError, TokenStream
from .terms import (AMB, BULLET, NIL, Action, Bang, In, Message, Name, Nil, Nu,
                    Out, Par, Prefix, Process, well_scoped)


# -- action types -----------------------------------------------------------

@dataclass(frozen=True)
class Star:
    forms: frozenset  # of tuple[str, ...]

    def __str__(self) -> str:
        return "*{" + ", ".join(" ".join(f) for f in sorted(self.forms)) + "}"


@dataclass(frozen=True)
class Single:
    base: str

    def __str__(self) -> str:
        return self.base


MessageType = Union[Star, Single]


@dataclass(frozen=True)
class InType:
    bases: tuple

    def __str__(self) -> str:
        return "in<" + ",".join(self.bases) + ">"


@dataclass(frozen=True)
class OutType:
    mts: tuple

    def __str__(self) -> str:
        return "out<" + ",".join(map(str, self.mts)) + ">"


@dataclass(frozen=True, order=False)
class ActionType:
    elements: tuple  # str | InType | OutType

    def __str__(self) -> str:
        els = self.elements
        if len(els) >= 2 and els[-1] == AMB:
            return " ".join(map(str, els[:-1])) + "[]"
        return " ".join(map(str, els))

    @cached_property
    def skeleton(self) -> tuple:
        """The label with Star sets forgotten; equal skeletons may be joined."""
        out = []
        for e in self.elements:
            if isinstance(e, OutType):
                out.append(("out", tuple(m if isinstance(m, Single) else "*" for m in e.mts)))
            else:
                out.append(e)
        return tuple(out)

    def bases(self) -> set:
        out = set()
        for e in self.elements:
            if isinstance(e, str):
                out.add(e)
            elif isinstance(e, InType):
                out.update(e.bases)
            else:
                for m in e.mts:
                    if isinstance(m, Single):
                        out.add(m.base)
                    else:
                        for f in m.forms:
                            out.update(f)
        return out

    def binders(self) -> tuple:
        return tuple(b for e in self.elements if isinstance(e, InType) for b in e.bases)

    @property
    def has_bullet(self) -> bool:
        return BULLET in self.bases()

    def sort_key(self) -> str:
        return str(self)


def label_leq(small: ActionType, big: ActionType) -> bool:
    """True if every action matching `small` also matches `big`."""
    if small == big:
        return True
    if small.skeleton != big.skeleton:
        return False
    for e1, e2 in zip(small.elements, big.elements):
        if isinstance(e1, OutType):
            for m1, m2 in zip(e1.mts, e2.mts):
                if isinstance(m1, Star) and not m1.forms <= m2.forms:
                    return False
    return True


def label_join(a: ActionType, b: ActionType) -> ActionType:
    assert a.skeleton == b.skeleton
    if a == b:
        return a
    els = []
    for e1, e2 in zip(a.elements, b.elements):
        if isinstance(e1, OutType):
            els.append(OutType(tuple(
                Star(m1.forms | m2.forms) if isinstance(m1, Star) else m1
                for m1, m2 in zip(e1.mts, e2.mts))))
        else:
            els.append(e1)
    return ActionType(tuple(els))


def message_type(m: Message) -> MessageType:
    if m.is_name:
        return Single(m.name.base)
    return Star(frozenset(tuple(x.base for x in f) for f in m.forms))


def abstract_action(a: Action) -> ActionType:
    """The most specific action type an action matches."""
    els = []
    for e in a.elements:
        if isinstance(e, Name):
            els.append(e.base)
        elif isinstance(e, In):
            els.append(InType(tuple(x.base for x in e.names)))
        else:
            els.append(OutType(tuple(message_type(m) for m in e.messages)))
    return ActionType(tuple(els))


# -- matching ---------------------------------------------------------------

def match_message(m: Message, mt: MessageType) -> bool:
    if isinstance(mt, Single):
        return m.is_name and m.name.base == mt.base
    if m.is_name:
        return False
    return all(tuple(x.base for x in f) in mt.forms for f in m.forms)


def match_action(a: Action, at: ActionType) -> bool:
    if len(a.elements) != len(at.elements):
        return False
    for e, et in zip(a.elements, at.elements):
        if isinstance(e, Name):
            if not (isinstance(et, str) and e.base == et):
                return False
        elif isinstance(e, In):
            if not (isinstance(et, InType) and tuple(x.base for x in e.names) == et.bases):
                return False
        else:
            if not (isinstance(et, OutType) and len(et.mts) == len(e.messages)):
                return False
            if not all(match_message(m, mt) for m, mt in zip(e.messages, et.mts)):
                return False
    return True


# -- graphs -----------------------------------------------------------------

@dataclass(frozen=True)
class Edge:
    src: str
    label: ActionType
    dst: str


@dataclass(frozen=True)
class ShapeGraph:
    nodes: frozenset
    edges: frozenset

    @cached_property
    def out(self) -> dict:
        out = defaultdict(list)
        for e in sorted(self.edges, key=lambda e: (e.src, e.label.sort_key(), e.dst)):
            out[e.src].append(e)
        return dict(out)

    def out_edges(self, node) -> list:
        return self.out.get(node, [])


@dataclass(frozen=True)
class ShapePredicate:
    graph: ShapeGraph
    root: str

    def __post_init__(self):
        if self.root not in self.graph.nodes:
            raise ValueError("root must be a node of the graph")
        for e in self.graph.edges:
            if e.src not in self.graph.nodes or e.dst not in self.graph.nodes:
                raise ValueError(f"edge {e} leaves the node set")

    @classmethod
    def build(cls, root, edges: Iterable, nodes: Iterable = ()) -> "ShapePredicate":
        es = []
        for e in edges:
            if not isinstance(e, Edge):
                src, label, dst = e
                if isinstance(label, str):
                    label = parse_action_type(label)
                e = Edge(src, label, dst)
            es.append(e)
        ns = {root, *nodes} | {e.src for e in es} | {e.dst for e in es}
        return cls(ShapeGraph(frozenset(ns), frozenset(es)), root)

    @property
    def nodes(self) -> frozenset:
        return self.graph.nodes

    @property
    def edges(self) -> frozenset:
        return self.graph.edges

    def out_edges(self, node) -> list:
        return self.graph.out_edges(node)

    def at(self, node) -> "ShapePredicate":
        return ShapePredicate(self.graph, node)

    def __str__(self) -> str:
        lines = [f"root {self.root}"]
        for e in sorted(self.edges, key=lambda e: (e.src, e.label.sort_key(), e.dst)):
            lines.append(f"{e.src} -[{e.label}]-> {e.dst}")
        return "\n".join(lines)


def matches(p: Process, s: ShapePredicate) -> bool:
    memo: dict = {}

    def m(q: Process, node) -> bool:
        key = (id(q), node)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if isinstance(q, Nil):
            r = True
        elif isinstance(q, (Nu, Bang)):
            r = m(q.body, node)
        elif isinstance(q, Par):
            r = m(q.left, node) and m(q.right, node)
        else:
            r = any(match_action(q.action, e.label) and m(q.cont, e.dst)
                    for e in s.out_edges(node))
        memo[key] = r
        return r

    return m(p, s.root)


def reachable_nodes(s: ShapePredicate) -> set:
    seen, stack = {s.root}, [s.root]
    while stack:
        for e in s.out_edges(stack.pop()):
            if e.dst not in seen:
                seen.add(e.dst)
                stack.append(e.dst)
    return seen


# -- sampling ---------------------------------------------------------------

def _sample_message(mt: MessageType, rng: random.Random, pool: dict) -> Message:
    if isinstance(mt, Single):
        return Message.of_name(_pick_name(mt.base, rng, pool))
    forms = sorted(mt.forms)
    if not forms:
        return Message(())
    n = rng.choice([0, 1, 2, 2, 3])
    if n == 1 and len(forms) == 1 and len(forms[0]) == 1:
        n = 2  # a lone one-name form would be a single name
    chosen = [rng.choice(forms) for _ in range(n)]
    if len(chosen) == 1 and len(chosen[0]) == 1:
        chosen.append(chosen[0])
    return Message(tuple(tuple(_pick_name(b, rng, pool) for b in f) for f in chosen))


def _pick_name(base: str, rng: random.Random, pool: dict) -> Name:
    return Name(base, rng.choice(pool.get(base, [0])))


def _sample_action(at: ActionType, rng: random.Random, pool: dict) -> Action:
    els = []
    for et in at.elements:
        if isinstance(et, str):
            els.append(_pick_name(et, rng, pool) if et not in (AMB, BULLET) else Name(et))
        elif isinstance(et, InType):
            els.append(In(tuple(Name(b, rng.choice(pool.get(b, [0]))) for b in et.bases)))
        else:
            els.append(Out(tuple(_sample_message(m, rng, pool) for m in et.mts)))
    return Action(tuple(els))


def _walk(s: ShapePredicate, node, depth: int, rng: random.Random, pool: dict) -> Process:
    edges = s.out_edges(node)
    if depth <= 0 or not edges or rng.random() < 0.15:
        return NIL
    k = rng.choice([1, 2, 2, 3, 3, 4])
    parts = []
    for _ in range(k):
        e = rng.choice(edges)
        a = _sample_action(e.label, rng, pool)
        q = Prefix(a, _walk(s, e.dst, depth - 1, rng, pool))
        if rng.random() < 0.1:
            q = Bang(q)
        parts.append(q)
    out = parts[-1]
    for q in reversed(parts[:-1]):
        out = Par(q, out)
    return out


def meaning_sample(s: ShapePredicate, depth: int, count: int, seed: int = 0,
                   attempts: int = 0) -> set:
    """Sample well-scoped processes matching s by random walks from the root."""
    rng = random.Random(seed)
    out = {NIL}
    attempts = attempts or count * 20
    for _ in range(attempts):
        if len(out) >= count:
            break
        pool = defaultdict(lambda: [0])
        p = _walk(s, s.root, depth, rng, pool)
        if well_scoped(p) and matches(p, s):
            out.add(p)
    return out


# -- text and export ----------------------------------------------------------

def parse_action_type(text: str) -> ActionType:
    ts = TokenStream(text)
    els = []
    while ts.tok.kind != "eof":
        t = ts.tok.text
        if t in ("in", "out") and ts.peek().text == "<":
            ts.next()
            ts.next()
            if t == "in":
                bases = []
                if not ts.at(">"):
                    bases.append(ts.ident())
                    while ts.accept(","):
                        bases.append(ts.ident())
                ts.expect(">")
                els.append(InType(tuple(bases)))
            else:
                mts = []
                if not ts.at(">"):
                    mts.append(_parse_mt(ts))
                    while ts.accept(","):
                        mts.append(_parse_mt(ts))
                ts.expect(">")
                els.append(OutType(tuple(mts)))
        else:
            els.append(ts.ident())
            if ts.accept("["):
                ts.expect("]")
                els.append(AMB)
    if not els:
        raise ParseError("empty action type")
    return ActionType(tuple(els))


def _parse_mt(ts: TokenStream) -> MessageType:
    if ts.accept("*"):
        ts.expect("{")
        forms = []
        while not ts.at("}"):
            f = [ts.ident()]
            while ts.tok.kind == "ident":
                f.append(ts.ident())
            forms.append(tuple(f))
            if not ts.accept(","):
                break
        ts.expect("}")
        return Star(frozenset(forms))
    return Single(ts.ident())


def to_json(s: ShapePredicate) -> dict:
    return {
        "nodes": sorted(s.nodes),
        "root": s.root,
        "edges": [{"src": e.src, "label": str(e.label), "dst": e.dst}
                  for e in sorted(s.edges, key=lambda e: (e.src, e.label.sort_key(), e.dst))],
    }


def from_json(data) -> ShapePredicate:
    if isinstance(data, str):
        data = json.loads(data)
    edges = [(e["src"], parse_action_type(e["label"]), e["dst"]) for e in data["edges"]]
    return ShapePredicate.build(data["root"], edges, data["nodes"])


def _dot_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def graph_dot(s: ShapePredicate) -> str:
    def lines():
        yield "digraph shape {"
        yield "  node [shape=circle];"
        for n in sorted(s.nodes):
            shape = "doublecircle" if n == s.root else "circle"
            yield f"  {_dot_quote(n)} [shape={shape}];"
        grouped = defaultdict(list)
        for e in s.edges:
            grouped[(e.src, e.dst)].append(str(e.label))
        for (a, b), labels in sorted(grouped.items()):
            yield f"  {_dot_quote(a)} -> {_dot_quote(b)} [label={_dot_quote(' | '.join(sorted(labels)))}];"
        yield "}"
    return "\n".join(lines()) + "\n"


# -- comparison ---------------------------------------------------------------

def _nx(s: ShapePredicate) -> nx.DiGraph:
    g = nx.DiGraph()
    for n in s.nodes:
        g.add_node(n, root=(n == s.root))
    labels = defaultdict(set)
    for e in s.edges:
        labels[(e.src, e.dst)].add(e.label)
    for (a, b), ls in labels.items():
        g.add_edge(a, b, labels=frozenset(ls))
    return g


def isomorphic(s1: ShapePredicate, s2: ShapePredicate) -> bool:
    if len(s1.nodes) != len(s2.nodes) or len(s1.edges) != len(s2.edges):
        return False
    gm = DiGraphMatcher(_nx(s1), _nx(s2),
                        node_match=lambda a, b: a["root"] == b["root"],
                        edge_match=lambda a, b: a["labels"] == b["labels"])
    return gm.is_isomorphic()


def collapse_leaves(s: ShapePredicate, name: str = "⊥") -> ShapePredicate:
    """Merge every node without outgoing edges into a single node."""
    leaves = {n for n in s.nodes if not s.out_edges(n) and n != s.root}
    if not leaves:
        return s
    f = lambda n: name if n in leaves else n
    edges = {Edge(f(e.src), e.label, f(e.dst)) for e in s.edges}
    return ShapePredicate.build(s.root, edges, {f(n) for n in s.nodes})


def restrict_reachable(s: ShapePredicate) -> ShapePredicate:
    keep = reachable_nodes(s)
    return ShapePredicate(ShapeGraph(frozenset(keep),
                                     frozenset(e for e in s.edges if e.src in keep)), s.root)


def simulation(s1: ShapePredicate, s2: ShapePredicate) -> set:
    """Greatest relation R with (x, y) in R iff every edge of x is covered
    by an edge of y with a larger label and related targets."""
    rel = {(x, y) for x in s1.nodes for y in s2.nodes}
    changed = True
    while changed:
        changed = False
        for x, y in list(rel):
            for e in s1.out_edges(x):
                if not any(label_leq(e.label, f.label) and (e.dst, f.dst) in rel
                           for f in s2.out_edges(y)):
                    rel.discard((x, y))
                    changed = True
                    break
    return rel


def subsumed(s1: ShapePredicate, s2: ShapePredicate) -> bool:
    """Sufficient check that everything matching s1 matches s2."""
    return (s1.root, s2.root) in simulation(s1, s2)
