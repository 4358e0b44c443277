"""One test per acceptance criterion; each prints a PASS/FAIL line."""
import random
import time
from collections import Counter

from conftest import ma_corpus, pi_corpus
from oracles import brute_matches
from shapestar import ambients as A
from shapestar import pi as P
from shapestar.gen import random_ma, random_pi
from shapestar.inference import infer_principal, is_type
from shapestar.rules import one_step_reducts, rewrite_trace
from shapestar.shapes import (ShapePredicate, collapse_leaves, isomorphic,
                              matches, meaning_sample)
from shapestar.terms import struct_eq, struct_normalize
from shapestar.tma import (TypeInfo, annotate, extract_envs, tma_check,
                           tma_decide, tma_typable, typenc)
from shapestar.tpi import (agrees, parse_pi_type, pi_free_names, rigidify,
                           tpi_check, tpi_decide, tpi_typable)

EX31 = "!s(x,y).x<y>.0 | s<a,n>.0 | a(v).v(p).0 | n<o>.0 | s<b,m>.0 | b(w).w(q,r).0 | m<o,o>.0"
EX31_RESIDUAL = "!s(x,y).x<y>.0 | n(p).0 | n<o>.0 | m(q,r).0 | m<o,o>.0"
PACKET = "<in d> | new (p:Amb[1]).(d[open p.0] | (x:Cap[1]).p[x.<>])"
PACKET_CHAIN = [
    "new (p:Amb[1]).(d[open p.0] | p[in d.<>])",
    "new (p:Amb[1]).d[open p.0 | p[<>]]",
    "d[<>]",
]
SEPARATION = "<in a> | (x).x.0"


def _leaves(*labels):
    return [("R", l, f"L{i}") for i, l in enumerate(labels)]


# reference graphs, with leaves kept exactly as given
PI_REFERENCE = ShapePredicate.build("R", [
    ("R", "s in<x,y>", "A"), ("A", "x out<y>", "LA"),
    ("R", "a in<v>", "B"), ("B", "v in<p>", "LB"),
    ("R", "b in<w>", "C"), ("C", "w in<q,r>", "LC"),
] + _leaves("n in<p>", "n out<o>", "m in<q,r>", "m out<o,o>",
            "s out<a,n>", "a out<n>", "s out<b,m>", "b out<m>"))

MA_REFERENCE = ShapePredicate.build("R", [
    ("R", "d[]", "A"), ("R", "p[]", "B"), ("R", "out<*{in d}>", "G"), ("R", "in<x>", "H"),
    ("A", "d[]", "A"), ("A", "p[]", "C"), ("A", "in d", "B"), ("A", "open p", "D"),
    ("A", "out<>", "E"), ("B", "in d", "B"), ("B", "out<>", "F"), ("C", "in d", "B"),
    ("C", "out<>", "F"), ("H", "p[]", "I"), ("I", "x", "J"), ("J", "out<>", "F"),
])


def pi_type(src):
    t = P.parse_pi(src)
    rs = P.ruleset_pi(P.max_arity(t))
    return infer_principal(rs, P.encode_pi(t)), rs


def ma_type(src):
    t = A.parse_ma(src)
    rs = A.ruleset_ma(A.max_arity(t))
    return infer_principal(rs, A.encode_ma(t)), rs, t


def test_1_pi_reduction_fidelity(record):
    t0 = time.perf_counter()
    tr = rewrite_trace(P.ruleset_pi(2), P.encode_pi(P.parse_pi(EX31)), 4, strategy="all")
    target = struct_normalize(P.encode_pi(P.parse_pi(EX31_RESIDUAL)))
    found = len(tr.states) > 4 and target in tr.states[4]
    dt = time.perf_counter() - t0
    ok = found and dt < 1
    record(1, ok, f"residual in depth-4 layer: {found} "
                  f"({len(tr.states[4]) if len(tr.states) > 4 else 0} states), {dt:.3f}s")
    assert ok


def test_2_ma_reduction_fidelity(record):
    t0 = time.perf_counter()
    tr = rewrite_trace(A.ruleset_ma(1), A.encode_ma(A.parse_ma(PACKET)), 10)
    expected = [A.encode_ma(A.parse_ma(s)) for s in PACKET_CHAIN]
    steps = tr.states[1:]
    same = len(steps) == 3 and all(struct_eq(q, e) for q, e in zip(steps, expected))
    dt = time.perf_counter() - t0
    ok = same and dt < 1
    record(2, ok, f"{len(steps)}-step chain matches line by line: {same}, {dt:.3f}s")
    assert ok


def test_3_principal_type_reproduction(record):
    report, ok = [], True
    for name, fig, make in (
        ("pi", PI_REFERENCE, lambda: pi_type(EX31)[0]),
        ("ma", MA_REFERENCE, lambda: ma_type(PACKET)[0]),
    ):
        t0 = time.perf_counter()
        s = make()
        dt = time.perf_counter() - t0
        exact = isomorphic(s, fig)
        merged = isomorphic(collapse_leaves(s), collapse_leaves(fig))
        labels = Counter(str(e.label) for e in s.edges) == Counter(str(e.label) for e in fig.edges)
        ok = ok and exact and dt < 5
        report.append(f"{name}: {len(s.nodes)} nodes/{len(s.edges)} edges vs reference "
                      f"{len(fig.nodes)}/{len(fig.edges)}, isomorphic {exact}, "
                      f"isomorphic with leaves merged {merged}, labels exact {labels}, {dt:.2f}s")
    record(3, ok, "; ".join(report))
    assert ok


def test_4_safety_verdicts(record):
    s, rs = pi_type(EX31)
    seq = P.pi_safety(*pi_type("a(x).a(y,z).0 | a<o>.a<o,o>.0"))
    got = {
        "ex31": P.pi_safety(s, rs).safe,
        "sequential": seq.safe,
        "sequential has arity finding": any(f.kind == "arity-mismatch" for f in seq.findings),
        "swapped": P.pi_safety(*pi_type(EX31 + " | s<n,a>.0")).safe,
    }
    for name, src in (("packet", PACKET),
                      ("forwarder", "!(x,y,m).x[in y.<m>] | <p,a,c> | a[open p.0]"
                                    " | <q,b,in a> | b[open q.0]"),
                      ("arity", "<a,b> | (x).in x.0"),
                      ("leak", "<in a> | (x).out x.0")):
        s, rs, t = ma_type(src)
        got[name] = A.ma_safety(s, rs, A.input_bound(t)).safe
    want = {"ex31": True, "sequential": False, "sequential has arity finding": True,
            "swapped": True, "packet": True, "forwarder": True, "arity": False, "leak": False}
    ok = got == want
    record(4, ok, ", ".join(f"{k}={v}" for k, v in got.items()))
    assert ok


_PI_TYPES = ["ch[]", "ch[i]", "ch[i, i]", "ch[ch[]]", "ch[ch[i]]", "i", "j", "ch[j]"]


def test_5_tpi_agreement(record):
    p = P.parse_pi(EX31)
    untypable = tpi_typable(p) is None
    s, _ = pi_type(EX31)
    no_agree = not agrees({}, s)
    rng = random.Random(2024)
    t0 = time.perf_counter()
    n = disagreements = typable = 0
    while n < 500:
        t = random_pi(rng, size=8, max_arity=2)
        free = sorted({x.base for x in pi_free_names(t)})
        principal = tpi_typable(t)
        if principal is not None and rng.random() < 0.5:
            ctx = {b: rigidify(w) for b, w in principal.items()}
        else:
            ctx = {b: parse_pi_type(rng.choice(_PI_TYPES)) for b in free}
        n += 1
        direct = tpi_check(ctx, t)
        typable += direct
        if tpi_decide(ctx, t) != direct:
            disagreements += 1
    dt = time.perf_counter() - t0
    ok = untypable and no_agree and disagreements == 0 and dt < 60
    record(5, ok, f"ex31 untypable {untypable}, agrees(empty, S) false {no_agree}; "
                  f"{n} processes ({typable} typable), {disagreements} disagreements, {dt:.1f}s")
    assert ok


def _typenc_golden():
    r_loops = ["in d", "in p", "out d", "out p", "out<x>", "in<x>",
               "out<*{in d, in p, open d, open p, out d, out p, x}>"]
    one_loops = ["in d", "in p", "out d", "out p", "open d", "open p", "x", "out<>", "in<>",
                 "d[]", "p[]"]
    edges = [("R", l, "R") for l in r_loops] + [("1", l, "1") for l in one_loops]
    edges += [("R", "d[]", "1"), ("R", "p[]", "1")]
    return ShapePredicate.build("R", edges)


def test_6_tma_agreement(record):
    p = A.parse_ma(PACKET)
    env = A.parse_env("d: Amb[1]")
    cap1 = A.parse_exchange("Cap[1]")
    checks = tma_check(env, p, cap1)
    nu, inn = extract_envs(p)
    s = typenc(TypeInfo({**env, **nu, **inn}, inn, cap1))
    golden = s == _typenc_golden()
    star = [e for e in s.edges if str(e.label).startswith("out<*")]
    seven = len(star) == 1 and len(star[0].label.elements[0].mts[0].forms) == 7
    matched = matches(A.encode_ma(p), s)

    rng = random.Random(7)
    pool = ["Amb[1]", "Cap[1]", "Amb[Shh]", "Amb[Cap[1]]"]
    n = disagreements = typable = 0
    while n < 300:
        q = random_ma(rng, annotate=False)
        if not A.ma_well_scoped(q):
            continue
        if rng.random() < 0.5:
            ty = tma_typable(q)
            if ty is None:
                continue
            q, e, t = annotate(q, ty.annotations), ty.env, ty.top
        else:
            ann = {k: A.parse_message_type(rng.choice(pool if k[0] == "in" else pool[::2]))
                   for k in A.binder_annotations(q)}
            q = annotate(q, ann)
            bound = {b for _, b in A.binder_annotations(q)}
            free = {x.base for x in A.ma_names(q)} - bound
            e = {a: A.parse_message_type(rng.choice(pool)) for a in free}
            t = A.parse_exchange(rng.choice(["1", "Shh", "Cap[1]", "Amb[1]"]))
        try:
            extract_envs(q)
        except ValueError:
            continue
        n += 1
        direct = tma_check(e, q, t)
        typable += direct
        disagreements += tma_decide(e, q, t) != direct
    ok = checks and golden and seven and matched and disagreements == 0
    record(6, ok, f"check {checks}, typenc graph exact {golden} ({len(s.nodes)} nodes, "
                  f"{len(s.edges)} edges), 7-form Star {seven}, matches {matched}; "
                  f"{n} processes ({typable} typable), {disagreements} disagreements")
    assert ok


# fixed interacting parts keep the sampled processes from being mostly inert
PI_SPARK = P.parse_pi("!a<a>.0 | a(z).z(w).w<z>.0")
MA_SPARK = A.parse_ma("a[in a.<a>] | (x).open x.0 | a[out a.0]")


def test_7_subject_reduction(record):
    triples = nontrivial = violations = 0
    seed = 0
    # keep going until enough samples actually reduce
    while triples < 1000 or nontrivial < 200:
        rng = random.Random(seed)
        kind = ("pi", "ma", "typenc")[seed % 3]
        seed += 1
        if kind == "pi":
            rs = P.ruleset_pi(2)
            p = P.PPar(random_pi(rng, size=10, free=("a",)), PI_SPARK)
            s = infer_principal(rs, P.encode_pi(p))
        else:
            q = random_ma(rng, size=10, free=("a", "b") if kind == "typenc" else ("a",),
                          annotate=False)
            if not A.ma_well_scoped(q):
                continue
            rs = A.ruleset_ma(2)
            if kind == "ma":
                q = A.MPar(q, MA_SPARK)
                if not A.ma_well_scoped(q):
                    continue
                s = infer_principal(rs, A.encode_ma(q))
            else:
                ty = tma_typable(q)
                if ty is None:
                    continue
                nu, inn = extract_envs(annotate(q, ty.annotations))
                s = typenc(TypeInfo({**ty.env, **nu, **inn}, inn, ty.top))
        assert is_type(rs, s)
        for q in meaning_sample(s, 4, 6, seed=seed):
            triples += 1
            reducts = one_step_reducts(rs, q)
            nontrivial += bool(reducts)
            violations += sum(not matches(r, s) for r in reducts)
    ok = violations == 0
    record(7, ok, f"{triples} sampled processes, {nontrivial} with reducts, "
                  f"{violations} violations")
    assert ok


def test_8_oracle_equivalence(record):
    pis, mas = pi_corpus(100, seed=11, size=8), ma_corpus(100, seed=12, size=8)
    cases = [("pi", t, P.encode_pi(t), P.ruleset_pi(2)) for t in pis] + \
            [("ma", t, A.encode_ma(t), A.ruleset_ma(2)) for t in mas]
    types = [infer_principal(rs, p) for _, _, p, rs in cases]
    match_checks = match_bad = reduce_bad = 0
    for i, (kind, t, p, rs) in enumerate(cases):
        # own type plus a few unrelated ones for negative answers
        for s in [types[i]] + [types[(i * 7 + j) % len(types)] for j in (1, 2, 3)]:
            match_checks += 1
            match_bad += matches(p, s) != brute_matches(p, s)
        ref = P.pi_reducts(t) if kind == "pi" else A.ma_reducts(t)
        encode = P.encode_pi if kind == "pi" else A.encode_ma
        reduce_bad += one_step_reducts(rs, p) != {struct_normalize(encode(q)) for q in ref}
    ok = match_bad == 0 and reduce_bad == 0
    record(8, ok, f"{len(cases)} cases: {match_checks} matching checks, {match_bad} "
                  f"disagreements; reduction {reduce_bad} disagreements")
    assert ok


def test_9_separation_witness(record):
    t = A.parse_ma(SEPARATION)
    untypable = tma_typable(t) is None
    s, rs, _ = ma_type(SEPARATION)
    safe = A.ma_safety(s, rs, A.input_bound(t)).safe
    ok = untypable and safe
    record(9, ok, f"no environment or exchange type found {untypable}, shape-type safe {safe}")
    assert ok


def _wide_pi(n, seed=0):
    rng = random.Random(seed)
    chans = [f"c{i}" for i in range(8)]
    data = [f"d{i}" for i in range(6)]
    parts = []
    for i in range(n):
        k = rng.randint(0, 3)
        c = rng.choice(chans)
        if i % 2:
            xs = [f"x{i}_{j}" for j in range(k)]
            cont = f"{xs[0]}<{','.join(xs[1:])}>.0" if xs else "0"
            parts.append(("!" if i % 5 == 1 else "") + f"{c}({','.join(xs)}).{cont}")
        else:
            parts.append(f"{c}<{','.join(rng.choice(chans + data) for _ in range(k))}>.0")
    return P.parse_pi(" | ".join(parts))


def test_10_performance(record):
    t = _wide_pi(50)
    rs = P.ruleset_pi(3)
    t0 = time.perf_counter()
    s = infer_principal(rs, P.encode_pi(t))
    dt = time.perf_counter() - t0
    ok = dt < 10 and is_type(rs, s)
    record(10, ok, f"50 components, arity <= 3: {len(s.edges)} edges in {dt:.3f}s")
    assert ok
