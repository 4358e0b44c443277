import random

import pytest
from hypothesis import given, settings, strategies as st

from shapestar import ambients as A
from shapestar.gen import random_ma
from shapestar.inference import is_type
from shapestar.shapes import isomorphic, matches
from shapestar.tma import (TypeInfo, annotate, extract_envs, node_ids,
                           tma_check, tma_decide, tma_typable, typenc)

PACKET = "<in d> | new (p:Amb[1]).(d[open p.0] | (x:Cap[1]).p[x.<>])"
ex = A.parse_exchange
mt = A.parse_message_type
ENV = {"d": mt("Amb[1]")}


def packet_info():
    nu, inn = extract_envs(A.parse_ma(PACKET))
    return TypeInfo({**ENV, **nu, **inn}, inn, ex("Cap[1]"))


class TestDirectChecker:
    def test_packet(self):
        p = A.parse_ma(PACKET)
        assert tma_check(ENV, p, ex("Cap[1]"))
        assert not tma_check(ENV, p, ex("1"))

    def test_nil(self):
        assert tma_check({}, A.MNIL, A.SHH)

    def test_unknown_name(self):
        assert not tma_check({}, A.parse_ma("a[0]"), A.SHH)

    def test_output_arity_fixes_exchange(self):
        p = A.parse_ma("<in a, in a>")
        env = {"a": mt("Amb[1]")}
        assert tma_check(env, p, ex("Cap[1] x Cap[1]"))
        assert not tma_check(env, p, ex("Cap[1]"))

    def test_empty_output_has_exchange_one(self):
        assert tma_check({}, A.parse_ma("<>"), ex("1"))
        assert not tma_check({}, A.parse_ma("<>"), A.SHH)

    def test_holes_are_solved(self):
        p = A.parse_ma("new (q:_).q[<>]")
        assert tma_check({}, p, A.SHH)

    def test_open_requires_matching_exchange(self):
        env = {"a": mt("Amb[Shh]")}
        assert not tma_check(env, A.parse_ma("open a.<>"), ex("1"))
        assert tma_check(env, A.parse_ma("open a.0"), A.SHH)


class TestInference:
    def test_packet_is_typable(self):
        ty = tma_typable(A.parse_ma(PACKET), env=ENV)
        assert ty is not None and ty.top == ex("Cap[1]")

    def test_received_capability_is_untypable(self):
        assert tma_typable(A.parse_ma("<in a> | (x).x.0")) is None

    def test_annotations_make_the_process_checkable(self):
        p = A.parse_ma("<in a> | (x).in a.0 | a[0]")
        ty = tma_typable(p)
        assert tma_check(ty.env, annotate(p, ty.annotations), ty.top)


class TestExtract:
    def test_packet(self):
        nu, inn = extract_envs(A.parse_ma(PACKET))
        assert nu == {"p": mt("Amb[1]")} and inn == {"x": mt("Cap[1]")}

    def test_closed_process(self):
        assert extract_envs(A.parse_ma("in a.0")) == ({}, {})

    def test_restricted_capability_is_rejected(self):
        with pytest.raises(ValueError):
            extract_envs(A.parse_ma("new (x:Cap[1]).0"))

    def test_missing_annotation_is_rejected(self):
        with pytest.raises(ValueError):
            extract_envs(A.parse_ma("(x).0"))


class TestTypenc:
    def test_node_ids(self):
        assert node_ids(packet_info()) == {ex("Cap[1]"): "R", A.ONE: "1"}

    def test_packet_graph(self):
        s = typenc(packet_info())
        out = lambda n: {(str(e.label), e.dst) for e in s.out_edges(n)}
        assert out("R") == {
            ("d[]", "1"), ("p[]", "1"), ("in d", "R"), ("in p", "R"), ("out d", "R"),
            ("out p", "R"), ("out<x>", "R"), ("in<x>", "R"),
            ("out<*{in d, in p, open d, open p, out d, out p, x}>", "R")}
        assert out("1") == {(l, "1") for l in (
            "in d", "in p", "out d", "out p", "open d", "open p", "x", "out<>", "in<>",
            "d[]", "p[]")}

    def test_packet_matches_and_is_closed(self):
        s = typenc(packet_info())
        assert matches(A.encode_ma(A.parse_ma(PACKET)), s)
        assert is_type(A.ruleset_ma(1), s)

    def test_shh_with_empty_environment(self):
        s = typenc(TypeInfo({}, {}, A.SHH))
        assert s.nodes == {"R"} and not s.edges

    def test_deterministic(self):
        assert isomorphic(typenc(packet_info()), typenc(packet_info()))

    def test_input_map_must_agree(self):
        with pytest.raises(ValueError):
            TypeInfo({"x": mt("Amb[1]")}, {"x": mt("Cap[1]")}, A.SHH)


class TestDecide:
    def test_packet(self):
        p = A.parse_ma(PACKET)
        assert tma_decide(ENV, p, ex("Cap[1]"))
        assert not tma_decide(ENV, p, ex("1"))

    def test_nil(self):
        assert tma_decide({}, A.MNIL, A.SHH)

    def test_env_may_not_mention_restricted_names(self):
        with pytest.raises(ValueError):
            tma_decide({"p": mt("Amb[1]")}, A.parse_ma(PACKET), ex("Cap[1]"))

    @pytest.mark.parametrize("src, t", [
        ("(eps.b)[0]", "Shh"), ("in (eps.b).0", "Shh"), ("<eps.b> | (x:Amb[Shh]).x[0]", "Amb[Shh]"),
    ])
    def test_empty_path_is_a_unit(self, src, t):
        env, p, t = A.parse_env("b: Amb[Shh]"), A.parse_ma(src), ex(t)
        assert tma_check(env, p, t) and tma_decide(env, p, t)

    @settings(max_examples=120, deadline=None)
    @given(st.integers(0, 10**6))
    def test_agrees_with_direct_checker(self, seed):
        rng = random.Random(seed)
        q = random_ma(rng, annotate=False)
        if not A.ma_well_scoped(q):
            return
        ty = tma_typable(q)
        if ty is None:
            return
        q = annotate(q, ty.annotations)
        assert tma_decide(ty.env, q, ty.top) == tma_check(ty.env, q, ty.top)
        nu, inn = extract_envs(q)
        s = typenc(TypeInfo({**ty.env, **nu, **inn}, inn, ty.top))
        assert is_type(A.ruleset_ma(max(2, A.max_arity(q))), s)
