import random

import pytest
from hypothesis import given, settings, strategies as st

from shapestar import ambients as A
from shapestar.gen import random_ma
from shapestar.inference import infer_principal
from shapestar.rules import one_step_reducts
from shapestar.syntax import ParseError
from shapestar.terms import struct_normalize

PACKET = "<in d> | new (p:Amb[1]).(d[open p.0] | (x:Cap[1]).p[x.<>])"
FORWARDER = "!(x,y,m).x[in y.<m>] | <p,a,c> | a[open p.0] | <q,b,in a> | b[open q.0]"


def verdict(src):
    t = A.parse_ma(src)
    rs = A.ruleset_ma(A.max_arity(t))
    return A.ma_safety(infer_principal(rs, A.encode_ma(t)), rs, A.input_bound(t))


class TestSyntax:
    @pytest.mark.parametrize("src, encoded", [
        ("a[in b.out c.open d.0]", "a[in b.out c.open d.0]"),
        ("(x:Cap[1], y).x.<y>", "in<x,y>.x.out<y>.0"),
        ("new (a:Amb[Shh]).a[0]", "new a.a[]"),
        ("!<in a.open b, c>", "!out<in a.open b,c>.0"),
        ("a.b[0]", "a.b[]"),
        ("<>", "out<>.0"),
        ("<eps>", "out<ε>.0"),
    ])
    def test_encoding(self, src, encoded):
        assert str(A.encode_ma(A.parse_ma(src))) == encoded

    @pytest.mark.parametrize("src", ["a[", "(x:Foo).0", "in .0", "<a", "new (a:).0"])
    def test_parse_errors(self, src):
        with pytest.raises(ParseError):
            A.parse_ma(src)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 10**6))
    def test_printed_processes_parse_back(self, seed):
        t = random_ma(random.Random(seed))
        assert A.show_ma(A.parse_ma(A.show_ma(t))) == A.show_ma(t)

    def test_capability_as_ambient_head(self):
        t = A.parse_ma("(in a)[<>]")
        assert t == A.MAmb(A.CIn(A.CName(A.Name("a"))), A.MOutput(()))
        assert A.show_ma(t) == "(in a)[<>]"

    def test_decode_inverts_encode_up_to_annotations(self):
        t = A.parse_ma(PACKET)
        back = A.decode_ma(A.encode_ma(t))
        assert A.encode_ma(back) == A.encode_ma(t)


class TestTypes:
    @pytest.mark.parametrize("text, shown", [
        ("Shh", "Shh"), ("1", "1"), ("Amb[1]", "Amb[1]"), ("Cap[Shh]", "Cap[Shh]"),
        ("Amb[Cap[1]] x Amb[1]", "Amb[Cap[1]] x Amb[1]"),
    ])
    def test_exchange_round_trip(self, text, shown):
        assert str(A.parse_exchange(text)) == shown

    def test_single_message_type_is_a_one_part_product(self):
        assert A.parse_exchange("Cap[1]") == A.Prod((A.CapT(A.ONE),))

    def test_shh_is_not_a_message_type(self):
        with pytest.raises(ParseError):
            A.parse_message_type("Shh")

    def test_env(self):
        env = A.parse_env("d: Amb[1], x: Cap[1]")
        assert env == {"d": A.AmbT(A.ONE), "x": A.CapT(A.ONE)}

    def test_binder_annotations(self):
        ann = A.binder_annotations(A.parse_ma(PACKET))
        assert ann == {("nu", "p"): A.AmbT(A.ONE), ("in", "x"): A.CapT(A.ONE)}


class TestReferenceReducer:
    @pytest.mark.parametrize("src, out", [
        ("a[in b.0] | b[0]", ["b[a[]]"]),
        ("a[b[out a.0]]", ["a[] | b[]"]),
        ("open a.0 | a[<b>]", ["<b>"]),
        ("<in a> | (x).x.0", ["in a.0"]),
        ("<eps.b> | (x).x[out x.0]", ["b[out b.0]"]),
        ("<in a> | (x).x[0]", ["(in a)[]"]),
    ])
    def test_steps(self, src, out):
        assert sorted(map(str, A.ma_reducts(A.parse_ma(src)))) == out

    def test_packet_agrees_with_rule_engine(self):
        t = A.parse_ma(PACKET)
        meta = one_step_reducts(A.ruleset_ma(1), A.encode_ma(t))
        ref = {struct_normalize(A.encode_ma(q)) for q in A.ma_reducts(t)}
        assert meta == ref and len(meta) == 1

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 10**6))
    def test_random_processes_agree_with_rule_engine(self, seed):
        t = random_ma(random.Random(seed), size=8, free=("a", "b"), annotate=False)
        if not A.ma_well_scoped(t):
            return
        meta = one_step_reducts(A.ruleset_ma(2), A.encode_ma(t))
        ref = {struct_normalize(A.encode_ma(q)) for q in A.ma_reducts(t)}
        assert meta == ref


class TestSafety:
    def test_packet_is_safe(self):
        assert verdict(PACKET).safe

    def test_forwarder_is_safe(self):
        assert verdict(FORWARDER).safe

    def test_arity_mismatch(self):
        v = verdict("<a,b> | (x).in x.0")
        assert [f.kind for f in v.findings] == ["arity-mismatch"]

    def test_capability_leak(self):
        v = verdict("<in a> | (x).out x.0")
        assert [f.kind for f in v.findings] == ["bullet-label"]

    def test_received_capability_may_run(self):
        assert verdict("<in a> | (x).x.0").safe

    def test_bare_free_name_as_capability(self):
        v = verdict("a.0 | a[0]")
        assert [f.kind for f in v.findings] == ["bare-name-capability"]

    def test_bare_name_inside_an_ambient(self):
        assert not verdict("b[a.0]").safe
        assert verdict("in b.a.0").safe
