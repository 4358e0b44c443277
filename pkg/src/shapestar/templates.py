"""Rule templates: patterns over processes with primed metavariables."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class NameVar:
    var: str

    def __str__(self) -> str:
        return self.var


@dataclass(frozen=True)
class MsgVar:
    var: str

    def __str__(self) -> str:
        return self.var


@dataclass(frozen=True)
class InT:
    vars: tuple  # of NameVar

    def __str__(self) -> str:
        return "in<" + ",".join(map(str, self.vars)) + ">"


@dataclass(frozen=True)
class OutT:
    vars: tuple  # of MsgVar

    def __str__(self) -> str:
        return "out<" + ",".join(map(str, self.vars)) + ">"


@dataclass(frozen=True)
class ActionT:
    elements: tuple  # Name (concrete) | NameVar | InT | OutT

    def binder_vars(self) -> tuple:
        return tuple(v.var for e in self.elements if isinstance(e, InT) for v in e.vars)

    def __str__(self) -> str:
        return " ".join(map(str, self.elements))


class ProcessT:
    __slots__ = ()

    def __str__(self) -> str:
        return show_template(self)


@dataclass(frozen=True, repr=False)
class NilT(ProcessT):
    def __repr__(self) -> str:
        return "NilT()"


@dataclass(frozen=True)
class PVar(ProcessT):
    var: str


@dataclass(frozen=True)
class PrefixT(ProcessT):
    action: ActionT
    cont: ProcessT


@dataclass(frozen=True)
class ParT(ProcessT):
    left: ProcessT
    right: ProcessT


@dataclass(frozen=True)
class SubstT(ProcessT):
    bindings: tuple  # of (name-var, substitute var) string pairs
    var: str


NILT = NilT()


def par_t(*ts: ProcessT) -> ProcessT:
    ts = [t for t in ts if not isinstance(t, NilT)]
    if not ts:
        return NILT
    out = ts[-1]
    for t in reversed(ts[:-1]):
        out = ParT(t, out)
    return out


def flatten_t(t: ProcessT) -> list:
    if isinstance(t, ParT):
        return flatten_t(t.left) + flatten_t(t.right)
    if isinstance(t, NilT):
        return []
    return [t]


def show_template(t: ProcessT) -> str:
    if isinstance(t, NilT):
        return "0"
    if isinstance(t, PVar):
        return t.var
    if isinstance(t, ParT):
        return " | ".join(show_template(c) for c in flatten_t(t))
    if isinstance(t, SubstT):
        binds = ", ".join(f"{a}:={s}" for a, s in t.bindings)
        return f"[{binds}]{t.var}"
    els = t.action.elements
    from .terms import AMB_NAME
    if len(els) >= 2 and els[-1] == AMB_NAME:
        head = " ".join(map(str, els[:-1]))
        body = "" if isinstance(t.cont, NilT) else show_template(t.cont)
        return f"{head}[{body}]"
    cont = show_template(t.cont)
    if isinstance(t.cont, ParT):
        cont = f"({cont})"
    return f"{t.action}.{cont}"
