"""Closure checking and principal shape-type inference.

Rule templates are matched symbolically against graph edges: name variables
bind basic names, message variables bind message types and process variables
bind nodes.  The closure check asks whether every rule instance found at an
active node is already covered by the graph; inference instead adds whatever
is missing until nothing changes.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

from .rules import Reduce, RuleSet
from .shapes import (ActionType, Edge, InType, OutType, ShapeGraph,
                     ShapePredicate, Single, Star, abstract_action, label_join,
                     label_leq)
from .templates import (ActionT, InT, NameVar, NilT, ParT, PrefixT,
                        ProcessT, PVar, SubstT, flatten_t)
from .terms import (BULLET, Bang, Name, Nil, Nu, Par, Process,
                    well_scoped)

log = logging.getLogger(__name__)

EdgesFn = Callable[[object], list]  # node -> [(label, dst)]


class IllScoped(ValueError):
    pass


# -- symbolic matching --------------------------------------------------------

def _bind(env: dict, var: str, value) -> Optional[dict]:
    old = env.get(var)
    if old is None:
        env = dict(env)
        env[var] = value
        return env
    return env if old == value else None


def sym_match_action(at: ActionT, label: ActionType, env: dict) -> Optional[dict]:
    if len(at.elements) != len(label.elements):
        return None
    for te, et in zip(at.elements, label.elements):
        if isinstance(te, Name):
            if et != te.base:
                return None
        elif isinstance(te, NameVar):
            if not isinstance(et, str) or et == BULLET:
                return None
            env = _bind(env, te.var, et)
        elif isinstance(te, InT):
            if not isinstance(et, InType) or len(et.bases) != len(te.vars):
                return None
            for v, b in zip(te.vars, et.bases):
                env = _bind(env, v.var, b)
                if env is None:
                    return None
        else:
            if not isinstance(et, OutType) or len(et.mts) != len(te.vars):
                return None
            for v, mt in zip(te.vars, et.mts):
                env = _bind(env, v.var, mt)
                if env is None:
                    return None
        if env is None:
            return None
    return env


def sym_match(ts: list, node, env: dict, edges: EdgesFn) -> Iterator[dict]:
    """Match parallel templates at a node.  Several templates may use the
    same edge; process variables at this level bind the node itself."""
    prefixes = [t for t in ts if isinstance(t, PrefixT)]
    pvars = [t.var for t in ts if isinstance(t, PVar)]

    def go(k: int, env: dict):
        if k == len(prefixes):
            for v in pvars:
                env = _bind(env, v, node)
                if env is None:
                    return
            yield env
            return
        t = prefixes[k]
        for label, dst in edges(node):
            env1 = sym_match_action(t.action, label, env)
            if env1 is None:
                continue
            if isinstance(t.cont, PVar):
                env2 = _bind(env1, t.cont.var, dst)
                if env2 is not None:
                    yield from go(k + 1, env2)
            elif isinstance(t.cont, NilT):
                yield from go(k + 1, env1)
            else:
                for env2 in sym_match(flatten_t(t.cont), dst, env1, edges):
                    yield from go(k + 1, env2)

    yield from go(0, env)


def sym_action(at: ActionT, env: dict) -> ActionType:
    els = []
    for e in at.elements:
        if isinstance(e, Name):
            els.append(e.base)
        elif isinstance(e, NameVar):
            els.append(env[e.var])
        elif isinstance(e, InT):
            els.append(InType(tuple(env[v.var] for v in e.vars)))
        else:
            els.append(OutType(tuple(env[v.var] for v in e.vars)))
    return ActionType(tuple(els))


def _as_mt(v):
    return Single(v) if isinstance(v, str) else v


def sym_subst(t: SubstT, env: dict) -> dict:
    sigma = {}
    for a, s in t.bindings:
        mt = _as_mt(env[s])
        if mt != Single(env[a]):
            sigma[env[a]] = mt
    return sigma


def _active_path(body: ProcessT, var: str) -> Optional[list]:
    for t in flatten_t(body):
        if isinstance(t, PVar) and t.var == var:
            return []
        if isinstance(t, PrefixT):
            rest = _active_path(t.cont, var)
            if rest is not None:
                return [t.action] + rest
    return None


def _active_nodes(rules: RuleSet, root, edges: EdgesFn) -> set:
    paths = [_active_path(r.body, r.var) for r in rules.active_rules]
    paths = [p for p in paths if p]
    active, stack = {root}, [root]
    while stack:
        x = stack.pop()
        for path in paths:
            frontier = [(x, {})]
            for at in path:
                nxt = []
                for node, env in frontier:
                    for label, dst in edges(node):
                        env1 = sym_match_action(at, label, env)
                        if env1 is not None:
                            nxt.append((dst, env1))
                frontier = nxt
            for node, _ in frontier:
                if node not in active:
                    active.add(node)
                    stack.append(node)
    return active


def _pred_edges(s: ShapePredicate) -> EdgesFn:
    return lambda n: [(e.label, e.dst) for e in s.out_edges(n)]


def active_nodes(rules: RuleSet, s: ShapePredicate) -> frozenset:
    return frozenset(_active_nodes(rules, s.root, _pred_edges(s)))


# -- symbolic substitution on labels ----------------------------------------

def _subst_base(b: str, sigma: dict) -> str:
    mt = sigma.get(b)
    if mt is None:
        return b
    return mt.base if isinstance(mt, Single) else BULLET


def relabel(label: ActionType, sigma: dict) -> ActionType:
    """Apply a basic-name substitution to an action type outside the
    single-name-action case."""
    els = []
    for e in label.elements:
        if isinstance(e, str):
            els.append(_subst_base(e, sigma))
        elif isinstance(e, InType):
            els.append(e)
        else:
            mts = []
            for m in e.mts:
                if isinstance(m, Single):
                    mts.append(sigma.get(m.base, m))
                    continue
                forms = set()
                for f in m.forms:
                    if len(f) == 1 and f[0] in sigma:
                        mt = sigma[f[0]]
                        forms |= {(mt.base,)} if isinstance(mt, Single) else mt.forms
                    else:
                        forms.add(tuple(_subst_base(b, sigma) for b in f))
                mts.append(Star(frozenset(forms)))
            els.append(OutType(tuple(mts)))
    return ActionType(tuple(els))


def _splice_var(label: ActionType, sigma: dict) -> Optional[str]:
    els = label.elements
    if len(els) == 1 and isinstance(els[0], str) and els[0] in sigma:
        return els[0]
    return None


def _restrict(sigma: dict, bases: set) -> dict:
    return {b: m for b, m in sigma.items() if b in bases}


def _without(sigma: dict, binders: tuple) -> dict:
    if not binders:
        return sigma
    return {b: m for b, m in sigma.items() if b not in binders}


class _ReachBases:
    """Bases occurring on labels reachable from a node."""

    def __init__(self, edges: EdgesFn):
        self.edges = edges
        self.cache: dict = {}

    def __call__(self, node) -> frozenset:
        hit = self.cache.get(node)
        if hit is not None:
            return hit
        seen, stack, out = {node}, [node], set()
        while stack:
            for label, dst in self.edges(stack.pop()):
                out |= label.bases()
                if dst not in seen:
                    seen.add(dst)
                    stack.append(dst)
        res = frozenset(out)
        self.cache[node] = res
        return res


# -- closure checking ---------------------------------------------------------

@dataclass(frozen=True)
class ClosureViolation:
    rule: Reduce
    site: object
    missing: frozenset = frozenset()   # of (node, ActionType)
    widened: frozenset = frozenset()   # of (node, present label, needed label)

    def __str__(self) -> str:
        parts = [f"rule {self.rule} at {self.site}:"]
        parts += [f"  missing {n} -[{l}]->" for n, l in sorted(self.missing, key=str)]
        parts += [f"  widen {n} -[{a}]-> to {b}" for n, a, b in sorted(self.widened, key=str)]
        return "\n".join(parts)


class _GfpSolver:
    """Greatest fixpoint over goals.  A goal holds if each of its
    obligations has an option whose goals all hold."""

    def __init__(self, expand):
        self.expand = expand
        self.obligations: dict = {}

    def explore(self, roots):
        stack = list(roots)
        while stack:
            g = stack.pop()
            if g in self.obligations:
                continue
            obs = self.expand(g)
            self.obligations[g] = obs
            for options, _ in obs:
                for opt in options:
                    for h in opt:
                        if h not in self.obligations:
                            stack.append(h)

    def solve(self, roots) -> set:
        self.explore(roots)
        alive = set(self.obligations)
        rdeps = defaultdict(set)
        for g, obs in self.obligations.items():
            for options, _ in obs:
                for opt in options:
                    for h in opt:
                        rdeps[h].add(g)
        queue = list(self.obligations)
        while queue:
            g = queue.pop()
            if g not in alive:
                continue
            for options, _ in self.obligations[g]:
                if not any(all(h in alive for h in opt) for opt in options):
                    alive.discard(g)
                    queue.extend(rdeps[g])
                    break
        self.alive = alive
        return alive


class _Checker:
    def __init__(self, rules: RuleSet, s: ShapePredicate):
        self.rules = rules
        self.s = s
        self.edges = _pred_edges(s)
        self._edges = {n: self.edges(n) for n in s.nodes}
        self.reach = _ReachBases(lambda n: self._edges[n])
        self.solver = _GfpSolver(self.expand)

    def covering(self, w, label: ActionType) -> list:
        return [dst for l2, dst in self._edges[w] if label_leq(label, l2)]

    def expand(self, g) -> list:
        kind = g[0]
        if kind == "sub":
            _, t, sigma, w = g
            sigma = dict(sigma)
            if not sigma and t == w:
                return []
            obs = []
            for label, t2 in self._edges[t]:
                s2 = _without(sigma, label.binders())
                v = _splice_var(label, s2)
                if v is not None and isinstance(s2[v], Star):
                    obs.append(([(("splice", t2, self._key(s2, t2), s2[v].forms, w),)], None))
                    continue
                need = ActionType((s2[v].base,)) if v is not None else relabel(label, s2)
                key = self._key(s2, t2)
                obs.append(([(("sub", t2, key, w2),) for w2 in self.covering(w, need)], (w, need)))
            return obs
        if kind == "splice":
            _, t2, sigma, forms, w = g
            obs = [([(("sub", t2, sigma, w),)], None)]
            for f in sorted(forms):
                need = ActionType(f)
                obs.append(([(("splice", t2, sigma, forms, w2),) for w2 in self.covering(w, need)], (w, need)))
            return obs
        _, t, env, w = g
        env = dict(env)
        if isinstance(t, NilT):
            return []
        if isinstance(t, ParT):
            return [([(("tmpl", c, g[2], w),)], None) for c in flatten_t(t)]
        if isinstance(t, PVar):
            return [([(("sub", env[t.var], frozenset(), w),)], None)]
        if isinstance(t, SubstT):
            sigma = sym_subst(t, env)
            node = env[t.var]
            return [([(("sub", node, self._key(sigma, node), w),)], None)]
        need = sym_action(t.action, env)
        return [([(("tmpl", t.cont, g[2], w2),) for w2 in self.covering(w, need)], (w, need))]

    def _key(self, sigma: dict, node) -> frozenset:
        return frozenset(_restrict(sigma, self.reach(node)).items())

    def instances(self) -> list:
        out = []
        for x in sorted(_active_nodes(self.rules, self.s.root, self.edges), key=str):
            for rule in self.rules.reduce_rules:
                for env in sym_match(flatten_t(rule.lhs), x, {}, self.edges):
                    out.append((rule, x, ("tmpl", rule.rhs, frozenset(env.items()), x)))
        return out

    def violations(self) -> set:
        inst = self.instances()
        alive = self.solver.solve([g for _, _, g in inst])
        out = set()
        for rule, x, g in inst:
            if g in alive:
                continue
            missing, widened = set(), set()
            self._explain(g, alive, missing, widened, set())
            out.add(ClosureViolation(rule, x, frozenset(missing), frozenset(widened)))
        return out

    def _explain(self, g, alive, missing, widened, seen):
        if g in seen or g in alive:
            return
        seen.add(g)
        for options, meta in self.solver.obligations[g]:
            if any(all(h in alive for h in opt) for opt in options):
                continue
            if not options and meta is not None:
                w, need = meta
                same = [l2 for l2, _ in self._edges[w] if l2.skeleton == need.skeleton]
                if same:
                    widened.add((w, same[0], label_join(same[0], need)))
                else:
                    missing.add((w, need))
            for opt in options[:1]:
                for h in opt:
                    self._explain(h, alive, missing, widened, seen)


def closure_violations(rules: RuleSet, s: ShapePredicate) -> set:
    return _Checker(rules, s).violations()


def is_type(rules: RuleSet, s: ShapePredicate) -> bool:
    return not closure_violations(rules, s)


# -- inference ----------------------------------------------------------------

class _Work:
    """Mutable graph under saturation.  At most one edge per label skeleton
    leaves a node; adding a second widens the label and merges targets."""

    def __init__(self):
        self.parent: dict = {}
        self.out: dict = {}
        self.addrs: dict = {}
        self.by_addr: dict = {}
        self.count = 0
        self.version = 0

    def new_node(self, addr: tuple) -> int:
        n = self.count
        self.count += 1
        self.parent[n] = n
        self.out[n] = {}
        self.addrs[n] = {addr}
        self.by_addr[addr] = n
        self.version += 1
        return n

    def find(self, n: int) -> int:
        root = n
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[n] != root:
            self.parent[n], n = root, self.parent[n]
        return root

    def edges(self, n) -> list:
        return [(l, self.find(d)) for l, d in self.out[self.find(n)].values()]

    def add_edge(self, src, label: ActionType, dst):
        src, dst = self.find(src), self.find(dst)
        sk = label.skeleton
        cur = self.out[src].get(sk)
        if cur is None:
            self.out[src][sk] = (label, dst)
            self.version += 1
            log.debug("edge %s -[%s]-> %s", src, label, dst)
            return
        old, d0 = cur
        new = label_join(old, label)
        if new != old:
            self.out[src][sk] = (new, d0)
            self.version += 1
            log.debug("widen %s -[%s]->", src, new)
        self.merge(d0, dst)

    def merge(self, a, b):
        a, b = self.find(a), self.find(b)
        if a == b:
            return
        if b < a:
            a, b = b, a
        self.parent[b] = a
        self.version += 1
        log.debug("merge %s into %s", b, a)
        self.addrs[a] |= self.addrs.pop(b)
        moved = self.out.pop(b)
        for label, d in moved.values():
            self.add_edge(a, label, d)

    def target_for(self, z, label: ActionType):
        z = self.find(z)
        sk = label.skeleton
        cur = self.out[z].get(sk)
        if cur is not None:
            return self.find(cur[1])
        addrs = sorted(self.addrs[z], key=lambda a: (len(a), repr(a)))
        for a in addrs:
            if sk in a:
                i = len(a) - 1 - a[::-1].index(sk)
                return self.find(self.by_addr[a[:i + 1]])
        na = addrs[0] + (sk,)
        if na in self.by_addr:
            return self.find(self.by_addr[na])
        return self.new_node(na)

    def seed(self, p: Process, node, addr: tuple):
        if isinstance(p, Nil):
            return
        if isinstance(p, Par):
            self.seed(p.left, node, addr)
            self.seed(p.right, node, addr)
        elif isinstance(p, (Nu, Bang)):
            self.seed(p.body, node, addr)
        else:
            label = abstract_action(p.action)
            a2 = addr + (label.skeleton,)
            cur = self.out[self.find(node)].get(label.skeleton)
            if cur is not None:
                child = self.find(cur[1])
            elif a2 in self.by_addr:
                child = self.find(self.by_addr[a2])
            else:
                child = self.new_node(a2)
            self.add_edge(node, label, child)
            self.seed(p.cont, child, a2)


class _Saturator:
    def __init__(self, rules: RuleSet, work: _Work, root):
        self.rules = rules
        self.w = work
        self.root = root

    def reach(self, node) -> frozenset:
        return _ReachBases(self.w.edges)(node)

    def copy_edges(self, n, z):
        n, z = self.w.find(n), self.w.find(z)
        if n == z:
            return
        for label, d in self.w.edges(n):
            self.w.add_edge(z, label, d)

    def materialize(self, t: ProcessT, env: dict, z):
        if isinstance(t, NilT):
            return
        if isinstance(t, ParT):
            self.materialize(t.left, env, z)
            self.materialize(t.right, env, z)
        elif isinstance(t, PVar):
            self.copy_edges(env[t.var], z)
        elif isinstance(t, SubstT):
            self.subst_copy(env[t.var], sym_subst(t, env), z, set())
        else:
            label = sym_action(t.action, env)
            w = self.w.target_for(z, label)
            self.w.add_edge(z, label, w)
            self.materialize(t.cont, env, self.w.find(w))

    def subst_copy(self, n, sigma: dict, z, seen: set):
        w = self.w
        n, z = w.find(n), w.find(z)
        sigma = _restrict(sigma, self.reach(n))
        if not sigma:
            self.copy_edges(n, z)
            return
        key = (n, frozenset(sigma.items()), z)
        if key in seen:
            return
        seen.add(key)
        for label, t in w.edges(n):
            s2 = _without(sigma, label.binders())
            v = _splice_var(label, s2)
            if v is not None and isinstance(s2[v], Star):
                for f in sorted(s2[v].forms):
                    w.add_edge(z, ActionType(f), z)
                self.subst_copy(t, s2, w.find(z), seen)
                continue
            new = ActionType((s2[v].base,)) if v is not None else relabel(label, s2)
            s3 = _restrict(s2, self.reach(t))
            z = w.find(z)
            if not s3:
                w.add_edge(z, new, t)
            else:
                dst = w.target_for(z, new)
                w.add_edge(z, new, dst)
                self.subst_copy(t, s3, w.find(dst), seen)

    def round(self):
        w = self.w
        active = sorted(_active_nodes(self.rules, w.find(self.root), w.edges))
        for x in active:
            for rule in self.rules.reduce_rules:
                x = w.find(x)
                envs = list(sym_match(flatten_t(rule.lhs), x, {}, w.edges))
                for env in envs:
                    env = {k: (w.find(v) if isinstance(v, int) else v) for k, v in env.items()}
                    self.materialize(rule.rhs, env, w.find(x))

    def run(self, limit: int = 10000):
        for _ in range(limit):
            before = self.w.version
            self.round()
            if self.w.version == before:
                return
        raise RuntimeError("saturation did not converge")


def _freeze(w: _Work, root) -> ShapePredicate:
    root = w.find(root)
    names = {root: "R"}
    order = [root]
    for n in order:
        for label, d in sorted(w.edges(n), key=lambda e: str(e[0])):
            if d not in names:
                names[d] = f"n{len(names)}"
                order.append(d)
    edges = {Edge(names[n], label, names[d]) for n in order for label, d in w.edges(n)}
    return ShapePredicate(ShapeGraph(frozenset(names.values()), frozenset(edges)), "R")


def seed_graph(p: Process) -> ShapePredicate:
    """The syntax tree of p as a shape predicate, one edge per label."""
    w = _Work()
    root = w.new_node(())
    w.seed(p, root, ())
    return _freeze(w, root)


def infer_principal(rules: RuleSet, p: Process, check: bool = False) -> ShapePredicate:
    if not well_scoped(p):
        raise IllScoped("process is not well scoped")
    w = _Work()
    root = w.new_node(())
    w.seed(p, root, ())
    _Saturator(rules, w, root).run()
    s = _freeze(w, root)
    if check and not is_type(rules, s):
        raise AssertionError("inferred predicate is not closed")
    return s
