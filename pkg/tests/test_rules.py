import pytest

from shapestar import ambients as A
from shapestar import pi as P
from shapestar.rules import (Active, Reduce, instantiate, match_template,
                             one_step_reducts, parse_rule, parse_ruleset,
                             reachable, rewrite_trace, template_vars)
from shapestar.syntax import ParseError, parse_process, parse_template
from shapestar.terms import Name, struct_eq

pp = parse_process


class TestParsing:
    def test_reduce_rule(self):
        r = parse_rule("c'<n'>.P' | c'(x').Q' => P' | [x':=n']Q'")
        assert isinstance(r, Reduce)
        assert template_vars(r.lhs) == {"c'": "name", "n'": "msg", "x'": "name",
                                        "P'": "proc", "Q'": "proc"}

    def test_active_rule(self):
        r = parse_rule("P' ~active~ a'[P']")
        assert isinstance(r, Active) and r.var == "P'"

    def test_ruleset_skips_comments_and_splits_semicolons(self):
        rs = parse_ruleset("# swap\nP' | Q' => Q' | P' ; P' ~active~ a'[P']\n\n")
        assert len(rs) == 2
        assert len(rs.reduce_rules) == 1 and len(rs.active_rules) == 1

    def test_printed_rules_parse_back(self):
        for rs in (P.ruleset_pi(2), A.ruleset_ma(2)):
            assert parse_ruleset(str(rs)) == rs

    @pytest.mark.parametrize("text, fragment", [
        ("P' | P' => P'", "twice"),
        ("[x':=n']P' => P'", "substitution"),
        ("P' => Q'", "does not occur"),
        ("c'<n'>.P' => n'<>.P'", "msg variable"),
        ("P' ~active~ Q'", "exactly once"),
        ("a'[P'] | a'(x').Q' => [P':=a']Q'", "proc variable"),
    ])
    def test_invalid_rules(self, text, fragment):
        with pytest.raises(ParseError, match=fragment):
            parse_rule(text)

    def test_error_reports_line(self):
        with pytest.raises(ParseError) as e:
            parse_ruleset("P' => P'\nP' => Q'")
        assert e.value.line == 2


class TestMatching:
    def test_match_binds_every_kind(self):
        t = parse_template("c'<n'>.P' | c'(x').Q'")
        ms = match_template(t, pp("c out<a>.0 | c in<x>.x out<>.0"))
        assert len(ms) == 1
        m = ms[0]
        assert m.name_env == {"c'": Name("c"), "x'": Name("x")}
        assert str(m.msg_env["n'"]) == "a"
        assert str(m.proc_env["Q'"]) == "x out<>.0"

    def test_match_is_modulo_structural_congruence(self):
        t = parse_template("c'<n'>.P' | c'(x').Q'")
        assert match_template(t, pp("c in<x>.0 | (0 | c out<a>.0)"))

    def test_no_match_on_different_channels(self):
        t = parse_template("c'<n'>.P' | c'(x').Q'")
        assert match_template(t, pp("c out<a>.0 | d in<x>.0")) == []

    def test_process_variable_absorbs_the_rest(self):
        t = parse_template("a'<>.P' | R'")
        ms = match_template(t, pp("a out<>.0 | b out<>.0 | c out<>.0"))
        assert len(ms) == 3
        (m,) = [m for m in ms if m.name_env["a'"] == Name("a")]
        assert struct_eq(m.proc_env["R'"], pp("b out<>.0 | c out<>.0"))

    def test_instantiate_applies_substitution(self):
        t = parse_template("c'<n'>.P' | c'(x').Q'")
        (m,) = match_template(t, pp("c out<a>.0 | c in<x>.x out<>.0"))
        rhs = parse_template("P' | [x':=n']Q'")
        assert struct_eq(instantiate(rhs, m), pp("a out<>.0"))


class TestReduction:
    def test_pi_communication(self):
        rs = P.ruleset_pi(1)
        out = one_step_reducts(rs, pp("c out<a>.0 | c in<x>.x out<>.0"))
        assert out == {pp("a out<>.0")}

    def test_arity_mismatch_does_not_reduce(self):
        rs = P.ruleset_pi(2)
        assert one_step_reducts(rs, pp("c out<a>.0 | c in<x,y>.0")) == frozenset()

    def test_active_context_reduces_inside_ambients(self):
        rs = A.ruleset_ma(1)
        out = one_step_reducts(rs, pp("b[open a.0 | a[out<>.0]]"))
        assert out == {pp("b[out<>.0]")}

    def test_replication_feeds_many_reactions(self):
        rs = P.ruleset_pi(1)
        seen = reachable(rs, pp("!c out<a>.0 | c in<x>.0 | c in<y>.0"), 3)
        assert any(struct_eq(q, pp("!c out<a>.0")) for q in seen)

    def test_restriction_scopes_are_kept(self):
        rs = P.ruleset_pi(1)
        (q,) = one_step_reducts(rs, pp("new c.(c out<a>.0 | c in<x>.x out<>.0)"))
        assert struct_eq(q, pp("a out<>.0"))


class TestStrategies:
    def test_first_is_deterministic_and_stops(self):
        rs = P.ruleset_pi(1)
        tr = rewrite_trace(rs, pp("!c out<a>.0 | c in<x>.0"), 3)
        assert not tr.truncated
        assert [str(s) for s in tr.states] == ["c in<x>.0 | !c out<a>.0", "!c out<a>.0"]

    def test_truncation(self):
        rs = parse_ruleset("a'<>.P' => a'<>.a'<>.P'")
        tr = rewrite_trace(rs, pp("a out<>.0"), 4)
        assert tr.truncated and len(tr) == 5

    def test_random_depends_only_on_seed(self):
        rs = P.ruleset_pi(1)
        p = pp("!c out<a>.0 | !c out<b>.0 | !c in<x>.x out<>.0 | a in<>.0 | b in<>.0")
        runs = [rewrite_trace(rs, p, 6, strategy="random", seed=s).states for s in (7, 7, 8)]
        assert runs[0] == runs[1]
        assert rewrite_trace(rs, p, 6, strategy="random(7)").states == runs[0]

    def test_all_gives_exact_depth_layers(self):
        rs = P.ruleset_pi(0)
        tr = rewrite_trace(rs, pp("c out<>.0 | c in<>.0 | d out<>.0 | d in<>.0"), 5,
                           strategy="all")
        assert [len(layer) for layer in tr.states] == [1, 2, 1]

    def test_unknown_strategy(self):
        with pytest.raises(ValueError):
            rewrite_trace(P.ruleset_pi(0), pp("0"), 1, strategy="sideways")
