"""Slow, independent reference implementations used to cross-check the
package.  They deliberately share no code with it beyond the data types."""
from shapestar.shapes import InType, OutType, Single
from shapestar.terms import Bang, In, Name, Nil, Nu, Par


def _element_ok(e, et) -> bool:
    if isinstance(e, Name):
        return et == e.base
    if isinstance(e, In):
        return isinstance(et, InType) and list(et.bases) == [x.base for x in e.names]
    if not isinstance(et, OutType) or len(et.mts) != len(e.messages):
        return False
    for m, mt in zip(e.messages, et.mts):
        shapes = [tuple(x.base for x in f) for f in m.forms]
        if isinstance(mt, Single):
            if shapes != [(mt.base,)]:
                return False
        elif len(shapes) == 1 and len(shapes[0]) == 1:
            return False    # a lone name only fits a single-name type
        elif not set(shapes) <= mt.forms:
            return False
    return True


def label_ok(action, label) -> bool:
    els, ets = action.elements, label.elements
    return len(els) == len(ets) and all(_element_ok(e, et) for e, et in zip(els, ets))


def matching_nodes(p, s) -> set:
    """Nodes n such that p matches the predicate rooted at n."""
    if isinstance(p, Nil):
        return set(s.nodes)
    if isinstance(p, (Nu, Bang)):
        return matching_nodes(p.body, s)
    if isinstance(p, Par):
        return matching_nodes(p.left, s) & matching_nodes(p.right, s)
    after = matching_nodes(p.cont, s)
    return {e.src for e in s.edges if e.dst in after and label_ok(p.action, e.label)}


def brute_matches(p, s) -> bool:
    return s.root in matching_nodes(p, s)
