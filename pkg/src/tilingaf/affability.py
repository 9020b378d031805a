"""Charts gluing the two sides of every border, and finite checks of the
properties the gluing relies on."""

from __future__ import annotations

from collections import defaultdict, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .borders import (
    C_edges,
    a_pairs,
    border_directions,
    canonical_rep,
    chain_states_on_cycles,
    classify_type,
    corner_enumerate,
    corner_pairs,
    edge_dir,
    mu_step,
    mu_test,
    realized_directions,
    successor,
)
from .exactgeom import Direction, Vec2, format_elem, interiors_overlap, segment_contains
from .pathspace import (
    NotAPuncture,
    OutOfSupertile,
    PathSpec,
    StarIncomplete,
    build_graph,
    periodic_frame,
    pf_measure,
    translate,
)
from .tilingsys import SubstSystem, forced_border


class NoChart(RuntimeError):
    def __init__(self, failures):
        self.failures = failures
        super().__init__("no chart for " + ", ".join(f"({p}, {a})" for p, a in failures))


class NotBorderForcing(RuntimeError):
    pass


class NotInDomain(ValueError):
    pass


class ChartViolation(AssertionError):
    pass


@dataclass(frozen=True)
class BetaChart:
    p: str
    a: int
    t: Direction
    e1: str
    e2: str
    e3: str
    a1: int
    a2: int
    a3: int
    q: str
    v: Vec2
    b: int
    f: str
    b_prime: int
    u: Vec2

    @property
    def triple(self):
        return (self.e1, self.e2, self.e3)

    def to_json(self):
        fe = format_elem
        return {
            "p": self.p, "a": self.a, "t": self.t.fmt(),
            "e1": self.e1, "e2": self.e2, "e3": self.e3,
            "a1": self.a1, "a2": self.a2, "a3": self.a3,
            "q": self.q, "v": [fe(self.v.x), fe(self.v.y)], "b": self.b,
            "f": self.f, "b_prime": self.b_prime,
            "u_a": [fe(self.u.x), fe(self.u.y)],
        }


def _singleton(A, eid):
    prs = A[eid]
    return prs[0] if len(prs) == 1 else None


def forced_neighbour(S: SubstSystem, p3: str, a3: int, t: Direction):
    """``(q, v, b)``: a tile ``q + v`` of ``omega`` of every neighbour of
    ``p3`` with ``theta(b) = -t`` and ``lam^-1 (b + v)`` inside edge ``a3``.

    Only tiles that are the same in every legal context qualify.
    """
    key = ("nbr", p3, a3)
    if key in S._cache:
        return S._cache[key]
    tiles, conflicts = forced_border(S, p3, 1)
    bad = {x for pair in conflicts for x in pair}
    big = S.edges(p3)[a3][0].scale(S.lam)
    found = []
    ambiguous = False
    for tl in tiles:
        for j, (seg, d) in enumerate(S.edges(tl.proto)):
            if d == -t and segment_contains(big, seg.translate(tl.pos)):
                if tl in bad:
                    ambiguous = True
                else:
                    found.append((tl.proto, j, float(tl.pos.x), float(tl.pos.y), tl.pos.fmt(), tl.pos))
    found.sort(key=lambda r: r[:5])
    res = (found[0][0], found[0][5], found[0][1]) if found else None
    if res is None and ambiguous:
        res = "ambiguous"
    S._cache[key] = res
    return res


def build_chart(S: SubstSystem, p: str, a: int) -> BetaChart:
    G = build_graph(S)
    A = a_pairs(S)
    C = set(C_edges(S))
    t = edge_dir(S, p, a)
    triples = []
    for e3 in G.into[p]:
        pr3 = _singleton(A, e3.id)
        if e3.id in C or pr3 is None or pr3[1] != a:
            continue
        for e2 in G.into[e3.src]:
            pr2 = _singleton(A, e2.id)
            if pr2 is None or pr2[1] != pr3[0]:
                continue
            for e1 in G.into[e2.src]:
                pr1 = _singleton(A, e1.id)
                if pr1 is None or pr1[1] != pr2[0]:
                    continue
                triples.append((e1.id, e2.id, e3.id, pr1[0], pr2[0], pr3[0]))
    triples.sort()
    saw_ambiguous = False
    for e1, e2, e3, a1, a2, a3 in triples:
        s3 = G.by_id[e3].src
        nb = forced_neighbour(S, s3, a3, t)
        if nb == "ambiguous":
            saw_ambiguous = True
            continue
        if nb is None:
            continue
        q, v, b = nb
        fs = sorted(f.id for f in G.into[q] if _singleton(A, f.id) and A[f.id][0][1] == b)
        if not fs:
            continue
        f = fs[0]
        bp = A[f][0][0]
        disp = lambda eid: G.by_id[eid].disp
        u = disp(f) + v * S.lam - disp(e2) * S.lam - disp(e1)
        chart = BetaChart(p, a, t, e1, e2, e3, a1, a2, a3, q, v, b, f, bp, u)
        check_chart(S, chart)
        return chart
    if saw_ambiguous:
        raise NotBorderForcing(f"the tile across edge {a} of {p} depends on the context")
    raise NoChart([(p, a)])


def chart_w(S: SubstSystem, ch: BetaChart) -> Vec2:
    G = build_graph(S)
    lam = S.lam
    return -G.by_id[ch.e3].disp / lam - G.by_id[ch.f].disp / lam ** 3 - ch.v / (lam * lam)


def check_chart(S: SubstSystem, ch: BetaChart) -> None:
    """Raise ChartViolation unless every invariant of the chart holds."""
    G = build_graph(S)
    A = a_pairs(S)
    e1, e2, e3, f = (G.by_id[i] for i in (ch.e1, ch.e2, ch.e3, ch.f))
    problems = []
    if not (e1.dst == e2.src and e2.dst == e3.src and e3.dst == ch.p):
        problems.append("edges do not form a path into p")
    if A[ch.e1] != ((ch.a1, ch.a2),) or A[ch.e2] != ((ch.a2, ch.a3),) or A[ch.e3] != ((ch.a3, ch.a),):
        problems.append("A(e_i) are not the required singletons")
    if ch.e3 in set(C_edges(S)):
        problems.append("e_3 belongs to C")
    if edge_dir(S, ch.q, ch.b) != -ch.t:
        problems.append("theta(b) != -t")
    if not segment_contains(S.edges(e3.src)[ch.a3][0],
                            S.edges(ch.q)[ch.b][0].translate(ch.v).scale(1 / S.lam)):
        problems.append("lam^-1 (b + v) is not inside a_3")
    if f.dst != ch.q or A[ch.f] != ((ch.b_prime, ch.b),):
        problems.append("A(f) is not {(b', b)}")
    if edge_dir(S, f.src, ch.b_prime) != -ch.t:
        problems.append("theta(b') != -t")
    u = f.disp + ch.v * S.lam - e2.disp * S.lam - e1.disp
    if u != ch.u:
        problems.append("u_a != f + lam v - lam e_2 - e_1")
    w = chart_w(S, ch)
    if not segment_contains(S.edges(ch.p)[ch.a][0].translate(w),
                            S.edges(f.src)[ch.b_prime][0].scale(1 / S.lam ** 3)):
        problems.append("lam^-3 b' is not inside a + w")
    if problems:
        raise ChartViolation(f"chart ({ch.p}, {ch.a}): " + "; ".join(problems))


def beta_apply(S: SubstSystem, ch: BetaChart, x: PathSpec, n: int | None = None, check: bool = True) -> PathSpec:
    if x.length < 3 or x.first(3) != ch.triple:
        raise NotInDomain(f"{x} does not start with {ch.triple}")
    y = translate(S, x, ch.u, n)
    if check and y.coord(1) != ch.f:
        raise ChartViolation(f"image of {x} starts with {y.coord(1)}, expected {ch.f}")
    return y


@dataclass
class Atlas:
    charts: list

    def to_json(self):
        return {"charts": [c.to_json() for c in self.charts]}


def build_atlas(S: SubstSystem) -> Atlas:
    if "atlas" in S._cache:
        return S._cache["atlas"]
    charts, failures = [], []
    for p in S.ids:
        for a in range(len(S.edges(p))):
            try:
                charts.append(build_chart(S, p, a))
            except NoChart:
                failures.append((p, a))
    if failures:
        raise NoChart(failures)
    at = Atlas(charts)
    S._cache["atlas"] = at
    return at


def atlas_disjointness(S: SubstSystem, atlas: Atlas) -> dict:
    """Domains: distinct triples.  Images: distinct first edges, or level-3
    tiles ``p + w`` that cannot coexist."""
    dom = []
    img = []
    ch = atlas.charts
    for i in range(len(ch)):
        for j in range(i + 1, len(ch)):
            c1, c2 = ch[i], ch[j]
            if c1.triple == c2.triple:
                dom.append([i, j])
            if c1.f == c2.f:
                w1, w2 = chart_w(S, c1), chart_w(S, c2)
                same = c1.p == c2.p and w1 == w2
                if same or not interiors_overlap(S.tile_polygon((c1.p, w1)), S.tile_polygon((c2.p, w2))):
                    img.append([i, j])
    return {"domains_disjoint": not dom, "images_disjoint": not img,
            "domain_clashes": dom, "image_clashes": img}


def choose_F(S: SubstSystem) -> list:
    return sorted({canonical_rep(t) for t in realized_directions(S)})


# ---------------------------------------------------------------------------
# witnesses


def _shortest_paths_from(S, v0):
    """BFS tree over the graph: vertex -> shortest edge path from v0."""
    G = build_graph(S)
    best = {v0: ()}
    dq = deque([v0])
    while dq:
        v = dq.popleft()
        for e in G.starting[v]:
            if e.dst not in best:
                best[e.dst] = best[v] + (e.id,)
                dq.append(e.dst)
    return best


def _border_paths_from(S, state):
    """BFS over chain states: state -> shortest edge path reaching it."""
    G = build_graph(S)
    succ = successor(S)
    best = {state: ()}
    dq = deque([state])
    while dq:
        v, a = dq.popleft()
        for e in G.starting[v]:
            b = succ.get((e.id, a))
            if b is not None and (e.dst, b) not in best:
                best[(e.dst, b)] = best[(v, a)] + (e.id,)
                dq.append((e.dst, b))
    return best


def _border_cycle_through(S, state):
    """Shortest edge cycle of the chain automaton through ``state``."""
    paths = _border_paths_from(S, state)
    G = build_graph(S)
    succ = successor(S)
    best = None
    for (v, a), path in paths.items():
        for e in G.starting[v]:
            if succ.get((e.id, a)) == state[1] and e.dst == state[0]:
                cand = path + (e.id,)
                if best is None or (len(cand), cand) < (len(best), best):
                    best = cand
    return best


def witness_tails(S: SubstSystem) -> list:
    """Periodic tails used as test material: chain cycles, corner cycles and
    the loops of C."""
    if "wtails" in S._cache:
        return S._cache["wtails"]
    tails = set()
    for st in sorted(chain_states_on_cycles(S)):
        cyc = _border_cycle_through(S, st)
        if cyc:
            tails.add(cyc)
    for s, t in corner_pairs(S):
        for z in corner_enumerate(S, s, t).sequences:
            tails.add(z.cycle)
    for e in C_edges(S):
        tails.add((e,))
    out = sorted(tails, key=lambda c: (len(c), c))
    S._cache["wtails"] = out
    return out


def chart_witnesses(S: SubstSystem, ch: BetaChart, limit: int | None = None) -> list:
    """Eventually periodic points of ``U_a``: the chart triple, a shortest
    connection, then a witness tail."""
    G = build_graph(S)
    out = []
    paths = _shortest_paths_from(S, ch.p)
    for cyc in witness_tails(S):
        src = G.by_id[cyc[0]].src
        if src in paths:
            out.append(PathSpec(ch.triple + paths[src], cyc).canonical())
    # points of B_t: follow the t-chain from (p, a) into each reachable cycle state
    bp = _border_paths_from(S, (ch.p, ch.a))
    cyc_states = chain_states_on_cycles(S)
    for st in sorted(bp):
        if st in cyc_states:
            cyc = _border_cycle_through(S, st)
            out.append(PathSpec(ch.triple + bp[st], cyc).canonical())
    out = sorted(set(out), key=str)
    return out[:limit] if limit else out


def _flip_one(S, ch, limit):
    viol = []
    checked = in_bt = 0
    for x in chart_witnesses(S, ch, limit):
        checked += 1
        try:
            y = beta_apply(S, ch, x)
        except (ChartViolation, NotAPuncture, OutOfSupertile, StarIncomplete) as exc:
            viol.append({"chart": [ch.p, ch.a], "x": str(x), "error": str(exc)})
            continue
        lhs = ch.t in border_directions(S, x)
        rhs = -ch.t in border_directions(S, y)
        in_bt += lhs
        if lhs != rhs:
            viol.append({"chart": [ch.p, ch.a], "x": str(x), "beta_x": str(y),
                         "x_in_Bt": lhs, "beta_x_in_B_minus_t": rhs})
    return checked, in_bt, viol


def verify_border_flip(S: SubstSystem, atlas: Atlas, limit: int | None = None, threads: int = 1) -> dict:
    """``x`` in ``B_t`` iff ``beta_a(x)`` in ``B_{-t}``, over periodic witnesses."""
    # warm the shared caches so that workers only read them
    witness_tails(S)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda ch: _flip_one(S, ch, limit), atlas.charts))
    else:
        parts = [_flip_one(S, ch, limit) for ch in atlas.charts]
    viol = [v for _, _, vs in parts for v in vs]
    return {"witnesses": sum(p[0] for p in parts), "witnesses_in_Bt": sum(p[1] for p in parts),
            "violations": viol, "pass": not viol}


# ---------------------------------------------------------------------------
# depth-n relation checks by dynamic programming over
# (vertex, chain edge, mu-vector, direction)


def _joint_infinite(S: SubstSystem) -> set:
    """Pairs of chain states at one vertex with a common infinite continuation."""
    if "joint" in S._cache:
        return S._cache["joint"]
    G = build_graph(S)
    succ = successor(S)
    alive = {(v, a, b) for v in S.ids for a in range(len(S.edges(v))) for b in range(len(S.edges(v)))}
    nexts = {}
    for v, a, b in alive:
        lst = []
        for e in G.starting[v]:
            a2, b2 = succ.get((e.id, a)), succ.get((e.id, b))
            if a2 is not None and b2 is not None:
                lst.append((e.dst, a2, b2))
        nexts[(v, a, b)] = lst
    changed = True
    while changed:
        changed = False
        for st in list(alive):
            if not any(n in alive for n in nexts[st]):
                alive.discard(st)
                changed = True
    S._cache["joint"] = alive
    return alive


def _advance(S, states, steps, C):
    G = build_graph(S)
    succ = successor(S)
    for _ in range(steps):
        nxt = set()
        for v, a, vec, tag in states:
            for g in G.starting[v]:
                b = succ.get((g.id, a))
                if b is not None:
                    nxt.add((g.dst, b, mu_step(S, vec, g.id, C), tag))
        states = nxt
    return states


def certified_states(S: SubstSystem, atlas: Atlas, F: list, n: int, C=None) -> tuple:
    """Depth-n end states of the certified members of ``B`` and of the
    superset ``U`` intersected with the ``B_{-t}``, ``t`` in F, of ``B*``."""
    C = C_edges(S) if C is None else list(C)
    Fset = set(F)
    b_states = set()
    for ch in atlas.charts:
        if ch.t not in Fset:
            continue
        vec = tuple(int(mu_test(S, ch.e1, e)) for e in C)
        vec = mu_step(S, vec, ch.e2, C)
        vec = mu_step(S, vec, ch.e3, C)
        b_states.add((ch.p, ch.a, vec, ch.t))
    b_states = _advance(S, b_states, n - 3, C)
    star_states = u_chain_states(S, n, [-t for t in F], C)
    return b_states, star_states


def u_chain_states(S: SubstSystem, n: int, dirs, C=None) -> set:
    """Depth-n end states ``(v, a, mu, t)`` of paths with ``|A(x_1)| = 1``
    carrying a depth-n t-chain, ``t`` in ``dirs``."""
    C = C_edges(S) if C is None else list(C)
    G = build_graph(S)
    A = a_pairs(S)
    dirs = set(dirs)
    states = set()
    for g in G.edges:
        prs = A[g.id]
        if len(prs) != 1:
            continue
        c, d = prs[0]
        t = edge_dir(S, g.src, c)
        if t in dirs:
            states.add((g.dst, d, tuple(int(mu_test(S, g.id, e)) for e in C), t))
    return _advance(S, states, n - 1, C)


def _clashes(S, members_by_block, skip):
    joint = _joint_infinite(S)
    viol = []
    for (v, k), members in sorted(members_by_block.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                k1, a1, t1 = members[i]
                k2, a2, t2 = members[j]
                if skip(k1, t1, k2, t2):
                    continue
                if (v, a1, a2) in joint:
                    viol.append({"block": [v, list(k)], "members": [[k1, a1, t1.fmt()], [k2, a2, t2.fmt()]]})
    return viol


def u_clash_check(S: SubstSystem, n: int) -> dict:
    """No ``X'_n`` block holds two paths of ``U`` whose chains have distinct
    directions and a common infinite continuation."""
    C = C_edges(S)
    states = u_chain_states(S, n, realized_directions(S), C)
    by_block = defaultdict(list)
    for v, a, vec, t in states:
        by_block[(v, vec)].append(("U", a, t))
    viol = _clashes(S, by_block, lambda k1, t1, k2, t2: t1 == t2)
    return {"depth": n, "U_states": len(states), "violations": viol, "pass": not viol}


def cross_relation_check(S: SubstSystem, atlas: Atlas, F: list, n: int, drop: int | None = None,
                         extra_star=()) -> dict:
    """Empty-intersection and no-relation checks at depth n.

    Two certified members clash when they share an ``X'_n`` block key
    ``(r(x_n), mu_n)`` and their chains admit a common infinite continuation,
    which would produce related points of the two closed sets.
    """
    if n < 4:
        raise ValueError("depth must be at least 4")
    C = C_edges(S)
    if not atlas.charts:
        return {"depth": n, "B_states": 0, "Bstar_states": 0, "violations": [], "pass": True}
    b_states, star_states = certified_states(S, atlas, F, n, C)
    star_states |= set(extra_star)

    def key(vec):
        return vec if drop is None else vec[:drop] + vec[drop + 1:]

    by_block = defaultdict(list)
    for v, a, vec, t in b_states:
        by_block[(v, key(vec))].append(("B", a, t))
    for v, a, vec, t in star_states:
        by_block[(v, key(vec))].append(("B*", a, t))

    def skip(k1, t1, k2, t2):
        return (k1 == k2 == "B*") or (k1 == k2 == "B" and t1 == t2)

    viol = _clashes(S, by_block, skip)
    return {"depth": n, "B_states": len(b_states), "Bstar_states": len(star_states),
            "violations": viol, "pass": not viol}


def periodic_star_states(S: SubstSystem, atlas: Atlas, F: list, n: int, limit: int | None = None) -> set:
    """Depth-n end states of exact images ``beta(x)`` of periodic witnesses
    ``x`` in ``B``."""
    C = C_edges(S)
    G = build_graph(S)
    succ = successor(S)
    Fset = set(F)
    out = set()
    for ch in atlas.charts:
        if ch.t not in Fset:
            continue
        for x in chart_witnesses(S, ch, limit):
            if ch.t not in border_directions(S, x):
                continue
            y = beta_apply(S, ch, x)
            src = G.by_id[y.coord(1)].src
            for a in range(len(S.edges(src))):
                if edge_dir(S, src, a) != -ch.t:
                    continue
                cur = a
                for k in range(1, n + 1):
                    cur = succ.get((y.coord(k), cur))
                    if cur is None:
                        break
                if cur is None:
                    continue
                vec = tuple(int(mu_test(S, y.coord(1), e)) for e in C)
                for k in range(2, n + 1):
                    vec = mu_step(S, vec, y.coord(k), C)
                out.add((G.by_id[y.coord(n)].dst, cur, vec, -ch.t))
    return out


# ---------------------------------------------------------------------------
# measure of the finite-depth supersets of B_t


def thinness_decay(S: SubstSystem, t: Direction, m_max: int) -> dict:
    pf = pf_measure(S)
    G = build_graph(S)
    succ = successor(S)
    lam_pf = pf.eigenvalue
    values = []
    start = {}
    for v in S.ids:
        alive = frozenset(a for a in range(len(S.edges(v))) if edge_dir(S, v, a) == t)
        if alive:
            start[(v, alive)] = 1
    cur = start
    for m in range(1, m_max + 1):
        # paths of length m-1 with a surviving chain; x_m is free
        tot = sum((cnt * pf.xi[v] for (v, _), cnt in cur.items()), 0 * pf.xi[S.ids[0]])
        values.append(tot / lam_pf ** (m - 1))
        nxt = defaultdict(int)
        for (v, alive), cnt in cur.items():
            for g in G.starting[v]:
                new = frozenset(b for a in alive if (b := succ.get((g.id, a))) is not None)
                if new:
                    nxt[(g.dst, new)] += cnt
        cur = nxt
    ratios = [values[i + 1] / values[i] if values[i] else None for i in range(len(values) - 1)]
    fmt = format_elem if pf.exact else (lambda z: repr(float(z)))
    return {"t": t.fmt(), "values": [fmt(v) for v in values],
            "ratios": [fmt(r) if r is not None else None for r in ratios],
            "exact": pf.exact, "raw": values}


# ---------------------------------------------------------------------------
# orbit splitting


def _x_equivalent(x: PathSpec, y: PathSpec) -> bool:
    N = max(len(x.prefix), len(y.prefix)) + 1
    P = len(x.cycle) * len(y.cycle)
    return all(x.coord(k) == y.coord(k) for k in range(N, N + P))


def splitting_report(S: SubstSystem, atlas: Atlas | None = None, type2_samples: int = 20) -> dict:
    G = build_graph(S)
    C = C_edges(S)
    F = set(choose_F(S))
    succ = successor(S)
    families = {}
    for e in C:
        tc = classify_type(S, PathSpec((), (e,)))
        fr, _ = periodic_frame(S, PathSpec((), (e,)))
        comps = sorted({PathSpec((), blk).canonical().cycle[0] for blk in fr.blocks})
        key = tuple(comps)
        families.setdefault(key, {"halflines": len(tc.halflines), "representatives": list(comps),
                                  "directions": [d.fmt() for d in tc.halflines]})
    charts = atlas.charts if atlas else []
    for fam in families.values():
        reps = fam["representatives"]
        glue = set()
        for ch in charts:
            if ch.t not in F:
                continue
            bp = _border_paths_from(S, (ch.p, ch.a))
            for g in reps:
                ge = G.by_id[g]
                for a2, b2 in a_pairs(S)[g]:
                    if a2 != b2 or (ge.src, a2) not in bp or succ.get((g, a2)) != a2:
                        continue
                    x = PathSpec(ch.triple + bp[(ge.src, a2)], (g,)).canonical()
                    y = beta_apply(S, ch, x)
                    g2 = y.cycle[0] if len(y.cycle) == 1 else None
                    if g2 in reps and g2 != g:
                        glue.add(tuple(sorted((g, g2))))
        parent = {r: r for r in reps}

        def find(r):
            while parent[r] != r:
                parent[r] = parent[parent[r]]
                r = parent[r]
            return r

        for u, w in glue:
            parent[find(u)] = find(w)
        pieces = len({find(r) for r in reps})
        fam["glued_pairs"] = [list(gp) for gp in sorted(glue)]
        fam["residual_generators"] = pieces - 1
    # type II: sides glued by the chart that flips them
    t2 = []
    for ch in charts:
        if len(t2) >= type2_samples:
            break
        if ch.t not in F:
            continue
        for x in chart_witnesses(S, ch):
            if ch.t not in border_directions(S, x):
                continue
            tc = classify_type(S, x)
            if tc.kind != "II":
                continue
            y = beta_apply(S, ch, x)
            t2.append({"x": str(x), "beta_x": str(y), "type_beta_x": classify_type(S, y).kind,
                       "other_side": not _x_equivalent(x, y)})
            break
    return {
        "type_III": [dict(v) for _, v in sorted(families.items())],
        "type_II_samples": t2,
        "type_II_glued": all(s["other_side"] and s["type_beta_x"] == "II" for s in t2),
    }
