import itertools
import json
import random
from collections import defaultdict
from fractions import Fraction as Fr

import pytest

from tilingaf import borders as bd
from tilingaf import pathspace as ps
from tilingaf.affability import u_clash_check
from tilingaf.tilingsys import loads_system
from tilingaf.exactgeom import Direction, Segment, Vec2, det2, segment_contains

BOTTOM, RIGHT, TOP, LEFT = range(4)
SQ_C = ["e__", "e+_", "e++", "e_+"]


def V(x, y):
    return Vec2(Fr(x), Fr(y))


def D(x, y):
    return Direction(V(x, y))


def P(text):
    return ps.PathSpec.parse(text)


# ---------------------------------------------------------------------------
# A(e) and the automaton


def test_sq_a_pairs(sq):
    A = bd.a_pairs(sq)
    assert set(A["e__"]) == {(BOTTOM, BOTTOM), (LEFT, LEFT)}
    assert set(A["e+_"]) == {(BOTTOM, BOTTOM), (RIGHT, RIGHT)}
    assert set(A["e++"]) == {(RIGHT, RIGHT), (TOP, TOP)}
    assert set(A["e_+"]) == {(TOP, TOP), (LEFT, LEFT)}
    rep = bd.a_pairs_report(sq)
    assert rep["directions_match"] and rep["max_card"] == 2
    assert not rep["P5"]["holds"]


def _geometric_pairs(S, e):
    out = set()
    for i, (a, _) in enumerate(S.edges(e.src)):
        img = a.translate(e.disp).scale(1 / S.lam)
        for j, (b, _) in enumerate(S.edges(e.dst)):
            if segment_contains(b, img):
                out.add((i, j))
    return out


@pytest.mark.parametrize("name", ["sq", "chair", "chair4"])
def test_a_pairs_against_geometry(name, request):
    S = request.getfixturevalue(name)
    A = bd.a_pairs(S)
    edges = ps.build_graph(S).edges
    for e in edges[::13] if len(edges) > 1000 else edges:
        assert set(A[e.id]) == _geometric_pairs(S, e)
        # the bound needs preprocessing: the raw chair has triples
        assert len(A[e.id]) <= 2 or name == "chair"
        for a, b in A[e.id]:
            assert bd.edge_dir(S, e.src, a) == bd.edge_dir(S, e.dst, b)


@pytest.mark.parametrize("name", ["sq", "chair", "chair4"])
def test_chains_keep_their_direction(name, request):
    S = request.getfixturevalue(name)
    G = ps.build_graph(S)
    for (eid, a), b in bd.successor(S).items():
        e = G.by_id[eid]
        assert bd.edge_dir(S, e.src, a) == bd.edge_dir(S, e.dst, b)


def test_collared_chair_has_P5(chair4):
    assert bd.check_P5(chair4)["holds"]


def test_um_member_examples(sq):
    x = P("|e__")
    assert bd.um_member(sq, x, 3, D(1, 0))
    assert not bd.um_member(sq, x, 2, D(0, 1))
    for t in (D(1, 0), D(0, 1), D(-1, 0), D(0, -1)):
        assert bd.um_member(sq, P("e++"), 1, t)


@pytest.mark.parametrize("name, m_max", [("sq", 6), ("chair", 6)])
def test_um_monotone(name, m_max, request):
    S = request.getfixturevalue(name)
    dirs = bd.realized_directions(S)
    for w in ps.enumerate_paths(S, m_max):
        x = ps.PathSpec(w)
        for t in dirs:
            vals = [bd.um_member(S, x, m, t) for m in range(1, m_max + 1)]
            assert vals == sorted(vals, reverse=True)


def test_borders_examples(sq):
    got = {(b.direction, b.cycle) for b in bd.borders_of(sq, P("|e__"))}
    assert got == {(D(1, 0), (BOTTOM,)), (D(0, -1), (LEFT,))}
    got = bd.borders_of(sq, P("|e__,e_+"))
    assert [(b.direction, set(b.cycle)) for b in got] == [(D(0, -1), {LEFT})]
    assert bd.borders_of(sq, P("e++|e__")) == []


# ---------------------------------------------------------------------------
# corners


def test_sq_corners(sq):
    assert [str(z) for z in bd.corner_enumerate(sq, D(1, 0), D(0, 1)).sequences] == ["|e+_"]
    assert bd.corner_enumerate(sq, D(0, 1), D(1, 0)).sequences == []
    assert bd.corner_enumerate(sq, D(1, 0), D(0, -1)).sequences == []
    with pytest.raises(ValueError):
        bd.corner_enumerate(sq, D(1, 0), D(1, 0))


def _periodic_words(S, k):
    G = ps.build_graph(S)
    for w in itertools.product([e.id for e in G.edges], repeat=k):
        seq = list(w) + [w[0]]
        if all(G.by_id[a].dst == G.by_id[b].src for a, b in zip(seq, seq[1:])):
            if ps.PathSpec((), w).canonical().cycle == w:
                yield w


def _in_corner_set(S, w, s, t):
    """Periodic oracle: ``w^infinity`` carries an (s, t) corner at every level."""
    G = ps.build_graph(S)

    def step(e, i):
        ns, nr = len(S.edges(e.src)), len(S.edges(e.dst))
        pairs = _geometric_pairs(S, e)
        for j in range(nr):
            if (i, j) in pairs and ((i + 1) % ns, (j + 1) % nr) in pairs:
                return j
        return None

    p = G.by_id[w[0]].src
    n = len(S.edges(p))
    for i in range(n):
        if S.edges(p)[i][1] != s or S.edges(p)[(i + 1) % n][1] != t:
            continue
        cur = i
        for _ in range(n + 1):
            for eid in w:
                cur = None if cur is None else step(G.by_id[eid], cur)
        if cur is not None:
            return True
    return False


@pytest.mark.parametrize("name", ["sq", "chair"])
def test_corners_match_periodic_oracle(name, request):
    S = request.getfixturevalue(name)
    nv = len(S.ids)
    words = [w for k in (1, 2, 3) for w in _periodic_words(S, k)]
    for s, t in bd.corner_pairs(S):
        res = bd.corner_enumerate(S, s, t)
        got = {z.cycle for z in res.sequences}
        want = {w for w in words if _in_corner_set(S, w, s, t)}
        assert {c for c in got if len(c) <= 3} == want
        assert all(not z.prefix for z in res.sequences)
        if res.det_sign > 0:
            assert res.finite and len(res.sequences) <= nv


@pytest.mark.parametrize("name", ["sq", "chair"])
def test_corner_windows_pass_the_bruteforce(name, request):
    S = request.getfixturevalue(name)
    for s, t in bd.corner_pairs(S):
        bf = bd.corner_bruteforce(S, s, t, 8)
        for z in bd.corner_enumerate(S, s, t).sequences:
            assert z.first(8) in bf


def test_chair4_corner_bounds_and_rigidity(chair4):
    G = ps.build_graph(chair4)
    nv = len(chair4.ids)
    for s, t in bd.corner_pairs(chair4):
        res = bd.corner_enumerate(chair4, s, t)
        assert all(not z.prefix for z in res.sequences)
        if det2(s.vec, t.vec) > 0:
            assert res.finite and len(res.sequences) <= nv
            verts = [{G.by_id[e].dst for e in z.cycle} for z in res.sequences]
            for a, b in itertools.combinations(verts, 2):
                assert not a & b


# ---------------------------------------------------------------------------
# types, C, delta


def test_classify_examples(sq):
    tc = bd.classify_type(sq, P("|e__"))
    assert tc.kind == "III" and len(tc.halflines) == 4 and tc.center == V(Fr(-1, 2), Fr(-1, 2))
    assert tc.certified
    tc = bd.classify_type(sq, P("|e__,e_+"))
    assert tc.kind == "II" and set(tc.halflines) == {D(0, 1), D(0, -1)}
    assert bd.classify_type(sq, P("|e__,e++")).kind == "I"


def test_classify_is_orbit_invariant(sq):
    x = P("e++,e+_|e__")
    tc = bd.classify_type(sq, x)
    for v in (V(1, 0), V(-3, 2), V(5, 5)):
        y = ps.translate(sq, x, v)
        tv = bd.classify_type(sq, y)
        assert tv.kind == tc.kind == "III"
        # the centre moves with the tiling
        assert tv.center == tc.center - v


def test_find_periodic_rep(sq):
    assert bd.find_periodic_rep(sq, P("e++|e__")) == P("|e__")
    assert bd.find_periodic_rep(sq, P("|e__")) == P("|e__")
    with pytest.raises(bd.NotTypeIII):
        bd.find_periodic_rep(sq, P("|e__,e++"))


def test_sq_C(sq):
    rep = bd.compute_C(sq)
    assert rep["C"] == SQ_C
    assert rep["two_possibilities"] and rep["matches_corner_reps"]
    assert not rep["P6"]["holds"]
    assert bd.normalize_periods(sq) == (sq, 1)


def test_chair4_C(chair4):
    rep = bd.compute_C(chair4)
    assert len(rep["C"]) == 12
    assert rep["two_possibilities"] and rep["matches_corner_reps"] and rep["P6"]["holds"]
    G = ps.build_graph(chair4)
    assert all(G.by_id[e].src == G.by_id[e].dst for e in rep["C"])
    # already normalised: every type-III class is a fixed loop
    assert all(len(z.cycle) == 1 for z in bd.type_iii_representatives(chair4))


def _two_colour_square():
    """Two square prototiles; the lower-left child swaps colour, so the
    corner classes there have period two."""
    sq = [["-1/2", "-1/2"], ["1/2", "-1/2"], ["1/2", "1/2"], ["-1/2", "1/2"]]
    pos = {"ll": ["-1/2", "-1/2"], "lr": ["1/2", "-1/2"], "ur": ["1/2", "1/2"], "ul": ["-1/2", "1/2"]}

    def rule(me, other):
        return [{"proto": other if k == "ll" else me, "pos": v, "name": f"{me}{k}"} for k, v in pos.items()]

    return loads_system(json.dumps({
        "field": "rational", "lambda": "2",
        "prototiles": [{"id": "a", "vertices": sq}, {"id": "b", "vertices": sq}],
        "rule": {"a": rule("a", "b"), "b": rule("b", "a")},
    }))


def test_normalisation_of_period_two_corners():
    S = _two_colour_square()
    periods = sorted(len(z.cycle) for z in bd.type_iii_representatives(S))
    assert periods[-1] == 2 and periods[0] == 1
    with pytest.raises(bd.NormalizationRequired):
        bd.compute_C(S)
    S2, N = bd.normalize_periods(S)
    assert N == 2 and S2.lam == 4
    assert bd.normalize_periods(S2)[1] == 1
    assert len(bd.compute_C(S2)["C"]) == 8


def test_loopless_system_requires_normalisation():
    S = _two_colour_square()
    obj = json.loads(S.dumps())
    # every child swaps colour: no graph edge is a loop
    for me, other in (("a", "b"), ("b", "a")):
        for t in obj["rule"][me]:
            t["proto"] = other
    T = loads_system(json.dumps(obj))
    assert not any(e.src == e.dst for e in ps.build_graph(T).edges)
    # with no loops every type-III class has period at least two
    with pytest.raises(bd.NormalizationRequired):
        bd.compute_C(T)


def test_delta_edges(sq):
    left = Segment(V(Fr(-1, 2), Fr(1, 2)), V(Fr(-1, 2), Fr(-1, 2)))
    bottom = Segment(V(Fr(-1, 2), Fr(-1, 2)), V(Fr(1, 2), Fr(-1, 2)))
    assert bd.delta_edge(sq, "e__") == left
    assert bd.delta_edge(sq, "e+_") == bottom


def test_delta_singleton_case(chair4):
    G = ps.build_graph(chair4)
    A = bd.a_pairs(chair4)
    single = [e for e in bd.C_edges(chair4) if len(A[e]) == 1]
    for eid in single:
        e = G.by_id[eid]
        i = A[eid][0][0]
        edge = chair4.edges(e.dst)[i][0]
        seg = bd.delta_edge(chair4, eid)
        assert seg.p0 == edge.p0 and seg.p1 == (edge.p1 + e.disp) / chair4.lam
        assert segment_contains(edge, seg) and seg.p1 != edge.p1
    # double case: the earlier of the two adjacent edges
    for eid in set(bd.C_edges(chair4)) - set(single):
        (i, _), (j, _) = A[eid]
        n = len(chair4.shape(G.by_id[eid].dst))
        a = i if (i + 1) % n == j else j
        assert bd.delta_edge(chair4, eid) == chair4.edges(G.by_id[eid].dst)[a][0]


# ---------------------------------------------------------------------------
# mu and X'_n


def test_mu_examples(sq):
    assert bd.mu(sq, "e__", ["e__"], 1) == 1
    assert bd.mu(sq, "e__", ["e++"], 1) == 0
    assert bd.mu(sq, "e__", ["e++", "e__"], 2) == 0
    assert bd.mu(sq, "e__", ["e++", "e_+"], 2) == 1


def test_sq_xprime_blocks(sq):
    p = bd.xprime_partition(sq, 1)
    assert sorted(len(b) for b in p.blocks) == [1, 1, 1, 1]
    got = {b[0][0]: key[1] for key, b in zip(p.keys, p.blocks)}
    assert got == {"e__": (1, 1, 0, 0), "e+_": (0, 1, 1, 0), "e++": (0, 0, 1, 1), "e_+": (1, 0, 0, 1)}


def test_xprime_refines_xn(sq):
    for n in (1, 2, 3):
        xn = {frozenset(b) for b in ps.xn_partition(sq, n).blocks}
        for b in bd.xprime_partition(sq, n).blocks:
            assert any(set(b) <= big for big in xn)


def test_key_counts_match_enumeration(sq):
    for n in (1, 2, 3, 4):
        p = bd.xprime_partition(sq, n)
        assert bd.xprime_key_counts(sq, n) == {k: len(b) for k, b in zip(p.keys, p.blocks)}


def test_mu_stability_sq_exhaustive(sq):
    M = 6
    paths = list(ps.enumerate_paths(sq, M))
    table = {w: [bd.mu_vector(sq, w, m, SQ_C) for m in range(1, M + 1)] for w in paths}
    for n in range(1, M):
        groups = defaultdict(set)
        for w in paths:
            groups[(w[n:], table[w][n - 1])].add(tuple(tuple(table[w][m - 1]) for m in range(n + 1, M + 1)))
        assert all(len(g) == 1 for g in groups.values())


def _walk_back(rng, G, v, n):
    out = []
    for _ in range(n):
        e = rng.choice(G.into[v])
        out.append(e.id)
        v = e.src
    return tuple(reversed(out))


def _walk_forward(rng, G, v, n):
    out = []
    for _ in range(n):
        e = rng.choice(G.starting[v])
        out.append(e.id)
        v = e.dst
    return tuple(out)


def test_mu_stability_chair4_sampled(chair4):
    rng = random.Random(7)
    G = ps.build_graph(chair4)
    C = bd.C_edges(chair4)
    Cset = set(C)
    premise = 0
    for _ in range(10000):
        M = rng.randint(2, 8)
        n = rng.randint(1, M - 1)
        v = rng.choice(chair4.ids)
        tail = _walk_forward(rng, G, v, M - n)
        # heads ending in a C loop make the pair informative
        if rng.random() < 0.5:
            loop = rng.choice([e for e in C if G.by_id[e].dst == v] or [None])
            h1 = _walk_back(rng, G, v, n) if loop is None else _walk_back(rng, G, v, n - 1) + (loop,)
        else:
            h1 = _walk_back(rng, G, v, n)
        h2 = _walk_back(rng, G, v, n)
        x, y = h1 + tail, h2 + tail
        if bd.mu_vector(chair4, x, n, C) != bd.mu_vector(chair4, y, n, C):
            continue
        premise += 1
        for m in range(n + 1, M + 1):
            assert bd.mu_vector(chair4, x, m, C) == bd.mu_vector(chair4, y, m, C)
    assert premise > 3000 and Cset


def _keys(S, n):
    p = bd.xprime_partition(S, n)
    return {w: k for k, b in zip(p.keys, p.blocks) for w in b}


@pytest.mark.parametrize("name", ["sq", "chair"])
def test_nesting_exhaustive(name, request):
    S = request.getfixturevalue(name)
    G = ps.build_graph(S)
    for n in range(1, 5):
        key, nxt = _keys(S, n), _keys(S, n + 1)
        blocks = defaultdict(list)
        for w, k in key.items():
            blocks[k].append(w)
        for (v, _), ws in blocks.items():
            for g in G.starting[v]:
                assert len({nxt[w + (g.id,)] for w in ws}) == 1


def test_mu_stability_raw_chair_exhaustive(chair):
    M = 6
    C = bd.C_edges(chair)
    paths = list(ps.enumerate_paths(chair, M))
    for n in range(1, M):
        groups = defaultdict(set)
        for w in paths:
            later = tuple(bd.mu_vector(chair, w, m, C) for m in range(n + 1, M + 1))
            groups[(w[n:], bd.mu_vector(chair, w, n, C))].add(later)
        assert all(len(g) == 1 for g in groups.values())


def test_nesting_chair4_by_witnesses(chair4):
    rng = random.Random(11)
    G = ps.build_graph(chair4)
    C = bd.C_edges(chair4)
    for n in range(1, 5):
        witnesses = defaultdict(list)
        for _ in range(4000):
            v = rng.choice(chair4.ids)
            w = _walk_back(rng, G, v, n)
            k = (v, bd.mu_vector(chair4, w, n, C))
            if len(witnesses[k]) < 2 and w not in witnesses[k]:
                witnesses[k].append(w)
        counts = bd.xprime_key_counts(chair4, n, C)
        assert set(witnesses) <= set(counts)
        for (v, vec), ws in witnesses.items():
            for g in G.starting[v]:
                keys = {bd.mu_vector(chair4, w + (g.id,), n + 1, C) for w in ws}
                assert keys == {bd.mu_step(chair4, vec, g.id, C)}


@pytest.mark.parametrize("n", range(1, 7))
def test_u_clash_finite_form(chair4, n):
    rep = u_clash_check(chair4, n)
    assert rep["pass"] and rep["U_states"] > 0


def test_u_clash_vacuous_on_sq(sq):
    rep = u_clash_check(sq, 4)
    assert rep["pass"] and rep["U_states"] == 0
