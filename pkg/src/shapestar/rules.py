"""Rewriting-rule sets: parsing, template matching and the reduction relation."""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from itertools import product
from typing import Iterator, Optional

from .syntax import ParseError, TermParser, TokenStream
from .templates import (ActionT, InT, NameVar, NilT, OutT, ParT,
                        PrefixT, ProcessT, PVar, SubstT, flatten_t,
                        show_template)
from .terms import (BULLET, NIL, Action, Bang, In, Message, Name, Nu, Out,
                    Prefix, Process, all_names, apply_subst, components, nus,
                    open_scope, par, struct_normalize)


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class Reduce:
    lhs: ProcessT
    rhs: ProcessT

    def __str__(self) -> str:
        return f"{show_template(self.lhs)} => {show_template(self.rhs)}"


@dataclass(frozen=True)
class Active:
    var: str
    body: ProcessT

    def __str__(self) -> str:
        return f"{self.var} ~active~ {show_template(self.body)}"


@dataclass(frozen=True)
class RuleSet:
    rules: tuple

    @property
    def reduce_rules(self) -> tuple:
        return tuple(r for r in self.rules if isinstance(r, Reduce))

    @property
    def active_rules(self) -> tuple:
        return tuple(r for r in self.rules if isinstance(r, Active))

    def __len__(self) -> int:
        return len(self.rules)

    def __str__(self) -> str:
        return "\n".join(map(str, self.rules))


@dataclass(frozen=True)
class TemplateMatch:
    name_env: dict = field(default_factory=dict)
    msg_env: dict = field(default_factory=dict)
    proc_env: dict = field(default_factory=dict)

    def as_env(self) -> dict:
        return {**self.name_env, **self.msg_env, **self.proc_env}


# -- parsing ----------------------------------------------------------------

def template_vars(t: ProcessT) -> dict:
    """Map each metavariable of t to its kind: 'name', 'msg' or 'proc'."""
    kinds: dict = {}

    def note(v, k):
        if kinds.setdefault(v, k) != k:
            raise RuleError(f"metavariable {v} used both as {kinds[v]} and {k}")

    def action(a: ActionT):
        for e in a.elements:
            if isinstance(e, NameVar):
                note(e.var, "name")
            elif isinstance(e, InT):
                for v in e.vars:
                    note(v.var, "name")
            elif isinstance(e, OutT):
                for v in e.vars:
                    note(v.var, "msg")

    def go(t):
        if isinstance(t, PVar):
            note(t.var, "proc")
        elif isinstance(t, PrefixT):
            action(t.action)
            go(t.cont)
        elif isinstance(t, ParT):
            go(t.left)
            go(t.right)
        elif isinstance(t, SubstT):
            note(t.var, "proc")
            for a, s in t.bindings:
                note(a, "name")
                kinds.setdefault(s, "subst")

    go(t)
    return kinds


def _contains_subst(t: ProcessT) -> bool:
    if isinstance(t, SubstT):
        return True
    if isinstance(t, PrefixT):
        return _contains_subst(t.cont)
    if isinstance(t, ParT):
        return _contains_subst(t.left) or _contains_subst(t.right)
    return False


def _pvar_count(t: ProcessT, var: str) -> int:
    if isinstance(t, PVar):
        return int(t.var == var)
    if isinstance(t, PrefixT):
        return _pvar_count(t.cont, var)
    if isinstance(t, ParT):
        return _pvar_count(t.left, var) + _pvar_count(t.right, var)
    return 0


def _lhs_linear(t: ProcessT):
    seen = set()

    def go(t):
        if isinstance(t, PVar):
            if t.var in seen:
                raise RuleError(f"process variable {t.var} occurs twice on a left-hand side")
            seen.add(t.var)
        elif isinstance(t, PrefixT):
            go(t.cont)
        elif isinstance(t, ParT):
            go(t.left)
            go(t.right)

    go(t)


def make_reduce(lhs: ProcessT, rhs: ProcessT) -> Reduce:
    if _contains_subst(lhs):
        raise RuleError("substitution forms are not allowed on a left-hand side")
    _lhs_linear(lhs)
    lk, rk = template_vars(lhs), template_vars(rhs)
    for v, k in rk.items():
        if v not in lk:
            raise RuleError(f"metavariable {v} on the right-hand side does not occur on the left")
        if k == "subst":
            if lk[v] == "proc":
                raise RuleError(f"{v} is a process variable and cannot be substituted")
        elif k != lk[v]:
            raise RuleError(f"metavariable {v} is a {lk[v]} variable on the left but a {k} variable on the right")
    return Reduce(lhs, rhs)


def make_active(var: str, body: ProcessT) -> Active:
    if _contains_subst(body):
        raise RuleError("substitution forms are not allowed in an active context")
    if _pvar_count(body, var) != 1:
        raise RuleError(f"active context must contain {var} exactly once")
    _lhs_linear(body)
    template_vars(body)
    return Active(var, body)


def parse_rule(text: str, line: int = 1) -> Reduce | Active:
    ts = TokenStream(text)
    for t in ts.toks:
        t.line = line
    try:
        if ts.peek().text == "~active~":
            var = ts.ident()
            if not var.endswith("'"):
                ts.i -= 1
                ts.fail("an active rule names a process variable")
            ts.next()
            body = TermParser(ts, meta=True).process()
            ts.done()
            return make_active(var, body)
        lhs = TermParser(ts, meta=True).process()
        ts.expect("=>")
        rhs = TermParser(ts, meta=True).process()
        ts.done()
        return make_reduce(lhs, rhs)
    except RuleError as e:
        raise ParseError(str(e), line, 1) from None


def parse_ruleset(text: str) -> RuleSet:
    rules = []
    for n, raw in enumerate(text.splitlines(), 1):
        for chunk in raw.split("#", 1)[0].split(";"):
            if chunk.strip():
                rules.append(parse_rule(chunk, n))
    return RuleSet(tuple(rules))


# -- matching ---------------------------------------------------------------

def _bind(env: dict, var: str, value) -> Optional[dict]:
    old = env.get(var)
    if old is None:
        env = dict(env)
        env[var] = value
        return env
    return env if old == value else None


def match_action(at: ActionT, a: Action, env: dict) -> Optional[dict]:
    if len(at.elements) != len(a.elements):
        return None
    for te, e in zip(at.elements, a.elements):
        if isinstance(te, Name):
            if e != te:
                return None
        elif isinstance(te, NameVar):
            if not isinstance(e, Name) or e.base == BULLET:
                return None
            env = _bind(env, te.var, e)
        elif isinstance(te, InT):
            if not isinstance(e, In) or len(e.names) != len(te.vars):
                return None
            for v, x in zip(te.vars, e.names):
                env = _bind(env, v.var, x)
                if env is None:
                    return None
        else:
            if not isinstance(e, Out) or len(e.messages) != len(te.vars):
                return None
            for v, m in zip(te.vars, e.messages):
                env = _bind(env, v.var, m)
                if env is None:
                    return None
        if env is None:
            return None
    return env


class _Pool:
    """Components available to a parallel match, with lazily unfolded
    replication copies."""

    def __init__(self, comps: list, copies: int, avoid: set):
        self.items = []     # (process, group); group None for plain comps
        self.groups = []    # (bang index, restricted names, comps)
        self.bangs = []
        for c in comps:
            if isinstance(c, Bang):
                self.bangs.append(c)
            else:
                self.items.append((c, None))
        avoid = set(avoid)
        for bi, b in enumerate(self.bangs):
            for _ in range(copies):
                binders, cs = open_scope(b.body, avoid)
                for c in cs:
                    avoid |= all_names(c)
                avoid |= set(binders)
                g = len(self.groups)
                self.groups.append((bi, binders, cs))
                for c in cs:
                    if isinstance(c, Bang):
                        continue  # nested replication stays under its copy
                    self.items.append((c, g))

    def residual(self, used: frozenset) -> tuple:
        opened = {self.items[i][1] for i in used} - {None}
        rest = [c for i, (c, g) in enumerate(self.items)
                if i not in used and (g is None or g in opened)]
        for g in sorted(opened):
            rest += [c for c in self.groups[g][2] if isinstance(c, Bang)]
        rest += self.bangs
        extra = [x for g in sorted(opened) for x in self.groups[g][1]]
        return rest, extra

    def group_ok(self, used: frozenset) -> bool:
        # copies of the same replication are interchangeable: open them in order
        opened = {self.items[i][1] for i in used} - {None}
        for g in opened:
            bi = self.groups[g][0]
            if g > 0 and self.groups[g - 1][0] == bi and g - 1 not in opened:
                return False
        return True


def _match_par(ts: list, comps: list, env: dict, context: bool, avoid: set) -> Iterator[tuple]:
    """Yield (env, residual, extra restricted names) for parallel templates
    ts against comps.  With context=True leftover components may remain."""
    prefixes = [t for t in ts if isinstance(t, PrefixT)]
    pvars = [t.var for t in ts if isinstance(t, PVar)]
    copies = len(prefixes) if any(isinstance(c, Bang) for c in comps) else 0
    pool = _Pool(comps, copies, avoid | _env_names(env))

    def assign(k: int, used: frozenset, env: dict, extra: list):
        if k == len(prefixes):
            yield env, used, extra
            return
        t = prefixes[k]
        for i, (c, _) in enumerate(pool.items):
            if i in used or not isinstance(c, Prefix):
                continue
            env1 = match_action(t.action, c.action, env)
            if env1 is None:
                continue
            for env2, ex2 in _match_cont(t.cont, c.cont, env1, avoid):
                yield from assign(k + 1, used | {i}, env2, extra + ex2)

    for env1, used, extra in assign(0, frozenset(), env, []):
        if not pool.group_ok(used):
            continue
        rest, opened = pool.residual(used)
        extra = extra + opened
        slots = pvars + (["<context>"] if context else [])
        if not slots:
            if not rest:
                yield env1, [], extra
            continue
        for choice in product(range(len(slots)), repeat=len(rest)):
            env2 = env1
            leftovers = []
            for s, var in enumerate(slots):
                part = par(*[c for c, j in zip(rest, choice) if j == s])
                if var == "<context>":
                    leftovers = components(part)
                else:
                    env2 = _bind(env2, var, part)
                    if env2 is None:
                        break
            else:
                yield env2, leftovers, extra


def _match_cont(t: ProcessT, p: Process, env: dict, avoid: set) -> Iterator[tuple]:
    if isinstance(t, PVar):
        env = _bind(env, t.var, p)
        if env is not None:
            yield env, []
        return
    binders = []
    while isinstance(p, Nu):
        binders.append(p.name)
        p = p.body
    for env1, rest, extra in _match_par(flatten_t(t), components(p), env, False, avoid):
        yield env1, binders + extra


def _env_names(env: dict) -> set:
    out = set()
    for v in env.values():
        if isinstance(v, Name):
            out.add(v)
        elif isinstance(v, Message):
            out.update(v.names())
        elif isinstance(v, Process):
            out |= all_names(v)
    return out


def _split(p: Process) -> tuple:
    binders = []
    while isinstance(p, Nu):
        binders.append(p.name)
        p = p.body
    return binders, components(p)


def _to_match(env: dict, t: ProcessT) -> TemplateMatch:
    kinds = template_vars(t)
    ne = {v: x for v, x in env.items() if kinds.get(v) == "name"}
    me = {v: x for v, x in env.items() if kinds.get(v) == "msg"}
    pe = {v: x for v, x in env.items() if kinds.get(v) == "proc"}
    return TemplateMatch(ne, me, pe)


def match_template(t: ProcessT, p: Process) -> list:
    """All matches of an LHS template against the whole of p, modulo ≡."""
    if _contains_subst(t):
        raise RuleError("cannot match a template containing substitution forms")
    q = struct_normalize(p)
    binders, comps = _split(q)
    if binders:
        return []
    ts = flatten_t(t)
    seen, out = set(), []
    for env, _, extra in _match_par(ts, comps, {}, False, all_names(q)):
        if extra:
            continue
        m = _to_match(env, t)
        key = tuple(sorted((k, repr(v)) for k, v in m.as_env().items()))
        if key not in seen:
            seen.add(key)
            out.append(m)
    return out


# -- instantiation ----------------------------------------------------------

def _inst_action(at: ActionT, env: dict) -> Action:
    els = []
    for e in at.elements:
        if isinstance(e, Name):
            els.append(e)
        elif isinstance(e, NameVar):
            els.append(env[e.var])
        elif isinstance(e, InT):
            els.append(In(tuple(env[v.var] for v in e.vars)))
        else:
            els.append(Out(tuple(env[v.var] for v in e.vars)))
    return Action(tuple(els))


def _as_message(v) -> Message:
    return Message.of_name(v) if isinstance(v, Name) else v


def instantiate(t: ProcessT, m) -> Process:
    env = m.as_env() if isinstance(m, TemplateMatch) else m
    if isinstance(t, NilT):
        return NIL
    if isinstance(t, PVar):
        return env[t.var]
    if isinstance(t, ParT):
        return par(instantiate(t.left, env), instantiate(t.right, env))
    if isinstance(t, PrefixT):
        return Prefix(_inst_action(t.action, env), instantiate(t.cont, env))
    sigma = {env[a]: _as_message(env[s]) for a, s in t.bindings}
    return apply_subst(sigma, env[t.var])


# -- reduction --------------------------------------------------------------

def _reducts(rules: RuleSet, q: Process) -> Iterator[Process]:
    binders, comps = _split(q)
    avoid = all_names(q)
    for rule in rules.reduce_rules:
        for env, rest, extra in _match_par(flatten_t(rule.lhs), comps, {}, True, avoid):
            yield nus(binders + extra, par(instantiate(rule.rhs, env), *rest))
    for rule in rules.active_rules:
        for env, rest, extra in _match_par(flatten_t(rule.body), comps, {}, True, avoid):
            inner = struct_normalize(env[rule.var])
            for r in set(_reducts(rules, inner)):
                env2 = dict(env)
                env2[rule.var] = r
                yield nus(binders + extra, par(instantiate(rule.body, env2), *rest))


def one_step_reducts(rules: RuleSet, p: Process) -> frozenset:
    q = struct_normalize(p)
    return frozenset(struct_normalize(r) for r in _reducts(rules, q))


@dataclass
class Trace:
    strategy: str
    states: list      # processes, or frozensets of processes for 'all'
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.states)


def rewrite_trace(rules: RuleSet, p: Process, max_steps: int,
                  strategy: str = "first", seed: int = 0,
                  max_layer: int = 20000) -> Trace:
    """Run a reduction trace.  `all` yields exact-depth breadth-first layers."""
    start = struct_normalize(p)
    if strategy == "all":
        layers = [frozenset([start])]
        truncated = False
        while True:
            nxt = frozenset(q for s in layers[-1] for q in one_step_reducts(rules, s))
            if not nxt:
                break
            if len(layers) > max_steps or len(nxt) > max_layer:
                truncated = True
                break
            layers.append(nxt)
        return Trace(strategy, layers, truncated)
    if strategy.startswith("random"):
        inner = strategy[strategy.find("(") + 1:strategy.rfind(")")] if "(" in strategy else ""
        rng = random.Random(int(inner) if inner.strip() else seed)
    elif strategy == "first":
        rng = None
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    states = [start]
    while True:
        nxt = sorted(one_step_reducts(rules, states[-1]), key=str)
        if not nxt:
            return Trace(strategy, states, False)
        if len(states) > max_steps:
            return Trace(strategy, states, True)
        states.append(nxt[0] if rng is None else rng.choice(nxt))


def reachable(rules: RuleSet, p: Process, depth: int, limit: int = 5000) -> set:
    """All states reachable in at most `depth` steps (bounded by `limit`)."""
    start = struct_normalize(p)
    seen = {start}
    frontier = deque([(start, 0)])
    while frontier and len(seen) < limit:
        q, d = frontier.popleft()
        if d == depth:
            continue
        for r in one_step_reducts(rules, q):
            if r not in seen:
                seen.add(r)
                frontier.append((r, d + 1))
    return seen
