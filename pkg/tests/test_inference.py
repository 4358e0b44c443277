import random

import pytest
from hypothesis import given, settings, strategies as st

from shapestar import ambients as A
from shapestar import pi as P
from shapestar.gen import random_ma, random_pi
from shapestar.inference import (IllScoped, active_nodes, closure_violations,
                                 infer_principal, is_type, seed_graph)
from shapestar.rules import one_step_reducts, parse_ruleset, reachable
from shapestar.shapes import ShapePredicate, matches, subsumed
from shapestar.syntax import parse_process

pp = parse_process
PI2 = P.ruleset_pi(2)
MA2 = A.ruleset_ma(2)


class TestSmallCases:
    def test_nil_gives_a_single_node(self):
        s = infer_principal(PI2, pp("0"))
        assert s.nodes == {"R"} and not s.edges

    def test_seed_graph_is_not_closed_when_a_redex_exists(self):
        p = pp("a out<b>.0 | a in<x>.x out<>.0")
        assert closure_violations(PI2, seed_graph(p))
        assert is_type(PI2, infer_principal(PI2, p))

    def test_communication_adds_the_substituted_edge(self):
        s = infer_principal(PI2, pp("a out<b>.0 | a in<x>.x out<>.0"))
        assert {str(e.label) for e in s.out_edges("R")} == {"a out<b>", "a in<x>", "b out<>"}

    def test_ill_scoped_input_is_rejected(self):
        with pytest.raises(IllScoped):
            infer_principal(PI2, pp("a in<x>.0 | new x.0"))

    def test_no_rules_means_the_seed_graph(self):
        p = pp("a out<b>.0 | a in<x>.x out<>.0")
        empty = parse_ruleset("")
        s = infer_principal(empty, p)
        assert is_type(empty, s) and len(s.edges) == 3

    def test_active_nodes_follow_ambient_boundaries(self):
        s = infer_principal(MA2, pp("a[b[out<>.0]] | in a.c[0]"))
        act = active_nodes(MA2, s)
        assert "R" in act
        inside = [e.dst for e in s.out_edges("R") if str(e.label) == "a[]"]
        assert inside and inside[0] in act
        guarded = [e.dst for e in s.out_edges("R") if str(e.label) == "in a"]
        assert guarded[0] not in act

    def test_bullet_appears_for_capability_used_as_name(self):
        s = infer_principal(MA2, pp("out<in a>.0 | in<x>.x out<>.0"))
        assert any(e.label.has_bullet for e in s.edges)


def pi_processes(seed, n, size=8):
    rng = random.Random(seed)
    return [random_pi(rng, size=size) for _ in range(n)]


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6))
    def test_pi_principal_is_a_type_and_matches(self, seed):
        p = P.encode_pi(random_pi(random.Random(seed), size=8))
        s = infer_principal(PI2, p)
        assert is_type(PI2, s)
        assert matches(p, s)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6))
    def test_ma_principal_is_a_type_and_matches(self, seed):
        q = random_ma(random.Random(seed), size=8, annotate=False)
        if not A.ma_well_scoped(q):
            return
        p = A.encode_ma(q)
        s = infer_principal(MA2, p)
        assert is_type(MA2, s)
        assert matches(p, s)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_reachable_states_match_the_principal_type(self, seed):
        p = P.encode_pi(random_pi(random.Random(seed), size=8, free=("a",)))
        s = infer_principal(PI2, p)
        for q in reachable(PI2, p, 3, limit=200):
            assert matches(q, s)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_inference_is_deterministic(self, seed):
        p = P.encode_pi(random_pi(random.Random(seed), size=8))
        assert infer_principal(PI2, p) == infer_principal(PI2, p)

    def test_principal_is_below_a_hand_written_type(self):
        p = pp("a out<b>.0 | a in<x>.x out<>.0")
        everything = ShapePredicate.build("R", [("R", l, "R") for l in
                                                ("a out<b>", "a in<x>", "b out<>", "x out<>")])
        assert is_type(PI2, everything) and matches(p, everything)
        assert subsumed(infer_principal(PI2, p), everything)

    def test_reduct_type_is_below_the_original(self):
        for p in map(P.encode_pi, pi_processes(5, 20)):
            s = infer_principal(PI2, p)
            for q in one_step_reducts(PI2, p):
                assert matches(q, s)
