"""Acceptance criteria 1-10, one test each. Every test records a single
PASS/FAIL line, echoed again in the terminal summary."""

import dataclasses
import json
import random
import time
from collections import defaultdict
from fractions import Fraction as Fr

from tilingaf import affability as af
from tilingaf import borders as bd
from tilingaf import cli
from tilingaf import pathspace as ps
from tilingaf import tilingsys as ts
from tilingaf.exactgeom import Direction, Vec2, det2


def V(x, y):
    return Vec2(Fr(x), Fr(y))


def D(x, y):
    return Direction(V(x, y))


def P(text):
    return ps.PathSpec.parse(text)


def _mutants():
    base = json.loads(cli.builtin_text("sq"))
    moved = json.loads(cli.builtin_text("sq"))
    moved["rule"]["sq"][3]["pos"] = ["1/2", "1"]
    missing = json.loads(cli.builtin_text("sq"))
    missing["rule"]["sq"].pop()
    doubled = json.loads(cli.builtin_text("sq"))
    doubled["rule"]["sq"][3]["pos"] = doubled["rule"]["sq"][0]["pos"]
    boundary = json.loads(cli.builtin_text("sq"))
    boundary["prototiles"][0]["vertices"] = [["0", "0"], ["1", "0"], ["1", "1"], ["0", "1"]]
    chair = json.loads(cli.builtin_text("chair"))
    chair["rule"]["c0"][0]["pos"] = [str(Fr(chair["rule"]["c0"][0]["pos"][0]) + Fr(1, 4)),
                                     chair["rule"]["c0"][0]["pos"][1]]
    assert base != moved
    return [moved, missing, doubled, boundary, chair]


def test_criterion_1_structural_exactness(record):
    timings, ok = {}, True
    for name in ("sq", "chair"):
        t0 = time.perf_counter()
        rep = ts.validate_system(ts.loads_system(cli.builtin_text(name), name))
        timings[name] = time.perf_counter() - t0
        ok &= rep["pass"] and timings[name] < 1.0
    caught = sum(not ts.validate_system(ts.parse_system(m))["pass"] for m in _mutants())
    ok &= caught == len(_mutants())
    detail = f"sq {timings['sq']:.3f}s, chair {timings['chair']:.3f}s, mutants caught {caught}/{len(_mutants())}"
    assert record(1, ok, detail)


def test_criterion_2_a_bound(record, sq, chair4):
    worst = {}
    for name, S in (("sq", sq), ("chair (collared, power 4)", chair4)):
        A = bd.a_pairs(S)
        assert len(A) == len(ps.build_graph(S).edges)
        worst[name] = max(len(v) for v in A.values())
    ok = all(w <= 2 for w in worst.values())
    assert record(2, ok, ", ".join(f"{k}: max |A(e)| = {v}" for k, v in worst.items()))


def test_criterion_3_corners(record, sq, chair, chair4):
    problems = []
    pairs_checked = 0
    for name, S, brute in (("sq", sq, True), ("chair", chair, True), ("chair4", chair4, False)):
        nv = len(S.ids)
        for s, t in bd.corner_pairs(S):
            if det2(s.vec, t.vec) <= 0:
                continue
            pairs_checked += 1
            res = bd.corner_enumerate(S, s, t)
            if not res.finite or len(res.sequences) > nv:
                problems.append((name, s, t, "bound"))
            if any(z.prefix or not z.cycle for z in res.sequences):
                problems.append((name, s, t, "not purely periodic"))
            if brute:
                windows = bd.corner_bruteforce(S, s, t, 8)
                if not all(z.first(8) in windows for z in res.sequences):
                    problems.append((name, s, t, "brute force"))
    golden = [str(z) for z in bd.corner_enumerate(sq, D(1, 0), D(0, 1)).sequences] == ["|e+_"]
    ok = not problems and golden
    assert record(3, ok, f"{pairs_checked} pairs, golden {golden}, problems {problems}")


def test_criterion_4_trichotomy(record, sq):
    iii = bd.classify_type(sq, P("|e__"))
    ii = bd.classify_type(sq, P("|e__,e_+"))
    i = bd.classify_type(sq, P("|e__,e++"))
    ok = (iii.kind == "III" and len(iii.halflines) == 4 and iii.center == V(Fr(-1, 2), Fr(-1, 2))
          and ii.kind == "II" and i.kind == "I" and len(bd.C_edges(sq)) == 4)
    assert record(4, ok, f"types {iii.kind}/{ii.kind}/{i.kind}, |C| = {len(bd.C_edges(sq))}")


def _walk(rng, G, v, n, back):
    out = []
    for _ in range(n):
        e = rng.choice(G.into[v] if back else G.starting[v])
        out.append(e.id)
        v = e.src if back else e.dst
    return tuple(reversed(out)) if back else tuple(out)


def test_criterion_5_mu_stability(record, sq, chair):
    # SQ: every pair of depth-6 paths, grouped by common tail and depth-n key
    violations = 0
    M = 6
    C = bd.C_edges(sq)
    paths = list(ps.enumerate_paths(sq, M))
    table = {w: [bd.mu_vector(sq, w, m, C) for m in range(1, M + 1)] for w in paths}
    for n in range(1, M):
        groups = defaultdict(set)
        for w in paths:
            groups[(w[n:], table[w][n - 1])].add(tuple(table[w][n:]))
        violations += sum(len(g) - 1 for g in groups.values())
    # chair: 10^4 sampled pairs sharing a tail, depth up to 8
    rng = random.Random(5)
    G = ps.build_graph(chair)
    C = bd.C_edges(chair)
    premise = 0
    for _ in range(10000):
        n = rng.randint(1, 7)
        v = rng.choice(chair.ids)
        tail = _walk(rng, G, v, 8 - n, back=False)
        x = _walk(rng, G, v, n, back=True) + tail
        y = _walk(rng, G, v, n, back=True) + tail
        if bd.mu_vector(chair, x, n, C) != bd.mu_vector(chair, y, n, C):
            continue
        premise += 1
        violations += sum(bd.mu_vector(chair, x, m, C) != bd.mu_vector(chair, y, m, C)
                          for m in range(n + 1, 9))
    ok = violations == 0 and premise > 1000
    assert record(5, ok, f"violations {violations}, chair pairs with equal depth-n keys {premise}/10000")


def test_criterion_6_nesting(record, sq, chair):
    violations = 0
    for S in (sq, chair):
        G = ps.build_graph(S)
        C = bd.C_edges(S)
        for n in range(1, 5):
            part = bd.xprime_partition(S, n, C)
            nxt = bd.xprime_partition(S, n + 1, C)
            key = {w: k for k, b in zip(nxt.keys, nxt.blocks) for w in b}
            for k, block in zip(part.keys, part.blocks):
                for g in G.starting[k[0]]:
                    violations += len({key[w + (g.id,)] for w in block}) - 1
    prime = [len(b) for b in bd.xprime_partition(sq, 1).blocks]
    plain = [len(b) for b in ps.xn_partition(sq, 1).blocks]
    ok = violations == 0 and prime == [1, 1, 1, 1] and plain == [4]
    assert record(6, ok, f"violations {violations}, SQ depth 1 blocks {prime} vs {plain}")


def test_criterion_7_measure(record, sq, chair, chair4):
    ok = True
    for S in (sq, chair, chair4):
        pf = ps.pf_measure(S)
        ok &= pf.exact and pf.eigenvalue == S.lam ** 2
    for S in (sq, chair):
        for n in range(1, 7):
            ok &= sum(ps.cylinder_measure(S, w) for w in ps.enumerate_paths(S, n)) == 1
    decay = [af.thinness_decay(sq, t, 8)["raw"] for t in af.choose_F(sq)]
    ok &= all(r == [Fr(2) ** (1 - m) for m in range(1, 9)] for r in decay)
    assert record(7, ok, "PF = lambda^2 exact, cylinder sums exact to depth 6, SQ decay 2^(1-m) to m = 8")


def test_criterion_8_recoding(record, sq_recode_table):
    table = sq_recode_table
    zero = V(0, 0)
    pts = defaultdict(list)
    for w, v in table:
        pts[w].append(v)
    bad = sum(table[(w, zero)] != w for w in pts)
    checked = 0
    for (w, v), y in table.items():
        bad += table[(y, -v)] != w
        for p in pts[w]:
            bad += table[(y, p - v)] != table[(w, p)]
            checked += 1
    ok = bad == 0 and checked == 4 ** 3 + 16 ** 3 + 64 ** 3
    assert record(8, ok, f"{checked} additivity instances, failures {bad}")


def test_criterion_9_chair_verification(record, chair4, chair4_atlas, chair4_F, chair4_flip,
                                        chair4_cross, chair4_disjointness):
    want = [(p, a) for p in chair4.ids for a in range(len(chair4.edges(p)))]
    one_per_edge = [(c.p, c.a) for c in chair4_atlas.charts] == want
    disj = chair4_disjointness["domains_disjoint"] and chair4_disjointness["images_disjoint"]
    flip = chair4_flip["pass"] and not chair4_flip["violations"] and chair4_flip["witnesses"] > 0
    cross = chair4_cross["pass"] and not chair4_cross["violations"]
    ch = chair4_atlas.charts[0]
    bad_u = dataclasses.replace(ch, u=ch.u + ps.build_graph(chair4).by_id[ch.e1].disp)
    mutant_u = not af.verify_border_flip(chair4, af.Atlas([bad_u]))["pass"]
    mutant_mu = not af.cross_relation_check(chair4, chair4_atlas, chair4_F, 8, drop=0)["pass"]
    ok = one_per_edge and disj and flip and cross and mutant_u and mutant_mu
    detail = (f"{len(chair4_atlas.charts)} charts, disjoint {disj}, flip witnesses {chair4_flip['witnesses']}, "
              f"cross B = {chair4_cross['B_states']}, mutants caught {int(mutant_u) + int(mutant_mu)}/2")
    assert record(9, ok, detail)


CHEAP_RUNS = [
    ["validate", "sq"],
    ["validate", "chair"],
    ["preprocess", "chair", "--power", "2"],
    ["analyze", "graph", "chair"],
    ["analyze", "corners", "chair"],
    ["analyze", "classify", "sq", "--path", "e++|e__"],
    ["analyze", "mu", "chair", "--path", "|c0.a", "-n", "3"],
    ["analyze", "classes", "sq", "-n", "3", "--prime"],
    ["analyze", "classes", "chair", "-n", "2"],
    ["analyze", "measure", "chair", "-n", "3"],
    ["analyze", "decay", "chair", "-n", "4"],
    ["analyze", "split", "sq"],
    ["analyze", "charts", "sq"],
]


def _cli_bytes(capsys, argv):
    rc = cli.main(argv)
    return rc, capsys.readouterr().out.encode()


def test_criterion_10_determinism(record, capsys, monkeypatch, chair4):
    differing = []
    for argv in CHEAP_RUNS:
        for threads in ("1", "3"):
            extra = ["--threads", threads] if argv[0] == "analyze" else []
            first = _cli_bytes(capsys, argv + extra)
            second = _cli_bytes(capsys, argv + extra)
            if first != second or not first[1]:
                differing.append(" ".join(argv + extra))
        if argv[0] == "analyze" and _cli_bytes(capsys, argv + ["--threads", "1"]) != \
                _cli_bytes(capsys, argv + ["--threads", "3"]):
            differing.append(" ".join(argv) + " threads")
    # the chair verification is the one threaded analysis
    monkeypatch.setattr(cli, "load", lambda path: chair4)
    one = _cli_bytes(capsys, ["analyze", "charts", "chair4", "--threads", "1"])
    two = _cli_bytes(capsys, ["analyze", "charts", "chair4", "--threads", "2"])
    if one != two or one[0] != 0:
        differing.append("charts chair4")
    ok = not differing
    assert record(10, ok, f"{len(CHEAP_RUNS) + 1} commands compared, differing {differing}")
