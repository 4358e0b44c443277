"""Random well-scoped processes for property tests and cross-validation."""
from __future__ import annotations

import random

from . import ambients as A
from . import pi as P
from .terms import Name


class _Fresh:
    def __init__(self, prefix: str):
        self.prefix, self.n = prefix, 0

    def __call__(self) -> Name:
        self.n += 1
        return Name(f"{self.prefix}{self.n}")


def random_pi(rng: random.Random, size: int = 8, max_arity: int = 2,
              free: tuple = ("a", "b", "c")) -> P.PiProcess:
    """A random pi process with at most `size` constructors.  Binders get
    distinct bases so the result is always well scoped."""
    fresh = _Fresh("x")
    budget = [size]

    def go(scope: list) -> P.PiProcess:
        if budget[0] <= 0:
            return P.PNIL
        budget[0] -= 1
        k = rng.random()
        pick = lambda: rng.choice(scope)
        if k < 0.2 and budget[0] >= 2:
            return P.PPar(go(scope), go(scope))
        if k < 0.3:
            return P.PBang(go(scope))
        if k < 0.4:
            x = fresh()
            return P.PNu(x, go(scope + [x]))
        if k < 0.7:
            xs = tuple(fresh() for _ in range(rng.randint(0, max_arity)))
            return P.PIn(pick(), xs, go(scope + list(xs)))
        if k < 0.95:
            ys = tuple(pick() for _ in range(rng.randint(0, max_arity)))
            return P.POut(pick(), ys, go(scope))
        return P.PNIL

    return _top(rng, go, [Name(f) for f in free])


def _top(rng: random.Random, go, scope: list):
    # several top-level components make interaction likely
    parts = [go(scope) for _ in range(rng.randint(1, 3))]
    parts = [q for q in parts if not isinstance(q, (P.PNil, A.MNil))] or parts[:1]
    out = parts[-1]
    for q in reversed(parts[:-1]):
        out = P.PPar(q, out) if isinstance(out, P.PiProcess) else A.MPar(q, out)
    return out


_WS = ("Amb[1]", "Amb[Shh]", "Cap[1]", "Amb[Cap[1]]", "Cap[Shh]", "Amb[Amb[1]]")


def random_ma(rng: random.Random, size: int = 8, max_arity: int = 2,
              free: tuple = ("a", "b", "c"), annotate: bool = True) -> A.MaProcess:
    """A random ambient process.  Restriction annotations are always ambient
    types; input annotations are drawn from a small pool or left open."""
    fresh = _Fresh("x")
    budget = [size]

    def ann(amb: bool):
        if not annotate:
            return None
        pool = [w for w in _WS if w.startswith("Amb")] if amb else _WS
        return A.parse_message_type(rng.choice(pool)) if rng.random() < 0.7 else None

    def cap(scope: list, depth: int = 0) -> A.Capability:
        k = rng.random()
        if k < 0.45 or depth > 1:
            return A.CName(rng.choice(scope))
        if k < 0.85:
            op = rng.choice((A.CIn, A.COut, A.COpen))
            return op(A.CName(rng.choice(scope)) if rng.random() < 0.9 else cap(scope, depth + 1))
        if k < 0.92:
            return A.CEps()
        return A.CSeq(cap(scope, depth + 1), cap(scope, depth + 1))

    def go(scope: list) -> A.MaProcess:
        if budget[0] <= 0:
            return A.MNIL
        budget[0] -= 1
        k = rng.random()
        if k < 0.18 and budget[0] >= 2:
            return A.MPar(go(scope), go(scope))
        if k < 0.24:
            return A.MBang(go(scope))
        if k < 0.32:
            x = fresh()
            w = ann(True)
            return A.MNu(x, w if w is not None else A.parse_message_type("Amb[1]"), go(scope + [x]))
        if k < 0.55:
            return A.MAmb(A.CName(rng.choice(scope)) if rng.random() < 0.95 else cap(scope),
                          go(scope))
        if k < 0.75:
            return A.MPre(cap(scope), go(scope))
        if k < 0.87:
            xs = tuple((fresh(), ann(False)) for _ in range(rng.randint(0, max_arity)))
            return A.MInput(xs, go(scope + [x for x, _ in xs]))
        if k < 0.97:
            return A.MOutput(tuple(cap(scope) for _ in range(rng.randint(0, max_arity))))
        return A.MNIL

    return _top(rng, go, [Name(f) for f in free])
