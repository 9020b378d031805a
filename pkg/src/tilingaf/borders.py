"""Borders of paths: A(e), the border automaton, corner sets, tiling types,
the special loops C, the refinement functions mu and the partition X'_n."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

from .exactgeom import Direction, Segment, Vec2, det2, segment_contains
from .pathspace import (
    CylinderPartition,
    PathSpec,
    build_graph,
    enumerate_paths,
    periodic_frame,
)
from .tilingsys import SubstSystem, check_P2, check_P3, edge_pairs, power_system


class NormalizationRequired(RuntimeError):
    pass


class NotTypeIII(ValueError):
    pass


def edge_dir(S: SubstSystem, p: str, i: int) -> Direction:
    return S.edges(p)[i][1]


def a_pairs(S: SubstSystem) -> dict:
    """``edge id -> tuple of (a, b)`` index pairs."""
    if "apairs" in S._cache:
        return S._cache["apairs"]
    out = {}
    for q in S.ids:
        for rt in S.rule[q]:
            out[rt.name] = tuple(edge_pairs(S, q, rt))
    S._cache["apairs"] = out
    return out


def check_P5(S: SubstSystem, exclude=frozenset()) -> dict:
    """For every prototile q and edge b some edge e (not in ``exclude``) with
    ``r(e) = q`` and ``A(e) = {(a, b)}``."""
    G = build_graph(S)
    A = a_pairs(S)
    missing = []
    witness = {}
    for q in S.ids:
        for b in range(len(S.edges(q))):
            hit = next((e.id for e in G.into[q] if e.id not in exclude and len(A[e.id]) == 1 and A[e.id][0][1] == b), None)
            if hit is None:
                missing.append([q, b])
            else:
                witness[f"{q}:{b}"] = hit
    return {"holds": not missing, "missing": missing, "witness": witness}


def a_pairs_report(S: SubstSystem) -> dict:
    A = a_pairs(S)
    G = build_graph(S)
    bad_dir = []
    for e in G.edges:
        for a, b in A[e.id]:
            if edge_dir(S, e.src, a) != edge_dir(S, e.dst, b):
                bad_dir.append([e.id, a, b])
    return {
        "pairs": {e.id: [list(p) for p in A[e.id]] for e in G.edges},
        "max_card": max((len(v) for v in A.values()), default=0),
        "directions_match": not bad_dir,
        "P2": check_P2(S),
        "P3": check_P3(S),
        "P5": check_P5(S),
    }


# ---------------------------------------------------------------------------
# border automaton
#
# A chain state is (vertex v, edge index a of v).  Reading a graph edge e with
# s(e) = v moves a to the unique b with (a, b) in A(e), if any.


def successor(S: SubstSystem) -> dict:
    """``(edge id, a) -> b``."""
    if "succ" in S._cache:
        return S._cache["succ"]
    out = {}
    for eid, prs in a_pairs(S).items():
        for a, b in prs:
            if (eid, a) in out:
                raise AssertionError(f"A({eid}) is not forward deterministic")
            out[(eid, a)] = b
    S._cache["succ"] = out
    return out


def chain_states_on_cycles(S: SubstSystem) -> set:
    """States ``(v, a)`` that lie on a cycle of the reduced automaton."""
    if "cyc_states" in S._cache:
        return S._cache["cyc_states"]
    G = build_graph(S)
    succ = successor(S)
    adj = defaultdict(set)
    for (eid, a), b in succ.items():
        e = G.by_id[eid]
        adj[(e.src, a)].add((e.dst, b))
    nodes = sorted({u for u in adj} | {w for vs in adj.values() for w in vs})
    comps = _scc(nodes, adj)
    out = set()
    for comp in comps:
        if len(comp) > 1 or any(u in adj[u] for u in comp):
            out |= set(comp)
    S._cache["cyc_states"] = out
    return out


def _scc(nodes, adj):
    index, low, onstack, stack, comps = {}, {}, set(), [], []
    counter = [0]
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(sorted(adj.get(root, ()))))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        onstack.add(root)
        while work:
            v, it = work[-1]
            nxt = next(it, None)
            if nxt is not None:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter[0]
                    counter[0] += 1
                    stack.append(nxt)
                    onstack.add(nxt)
                    work.append((nxt, iter(sorted(adj.get(nxt, ())))))
                elif nxt in onstack:
                    low[v] = min(low[v], index[nxt])
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    onstack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


def realized_directions(S: SubstSystem) -> list:
    return sorted({edge_dir(S, v, a) for v, a in chain_states_on_cycles(S)})


def um_member(S: SubstSystem, x: PathSpec, m: int, t: Direction) -> bool:
    """Some chain ``a_1..a_m`` along ``x`` starts in direction ``t``."""
    G = build_graph(S)
    succ = successor(S)
    p = G.by_id[x.coord(1)].src
    for a in range(len(S.edges(p))):
        if edge_dir(S, p, a) != t:
            continue
        cur = a
        ok = True
        for i in range(1, m):
            cur = succ.get((x.coord(i), cur))
            if cur is None:
                ok = False
                break
        if ok:
            return True
    return False


@dataclass(frozen=True)
class Border:
    direction: Direction
    prefix: tuple
    cycle: tuple

    def to_json(self):
        return {"direction": self.direction.fmt(), "chain": {"prefix": list(self.prefix), "cycle": list(self.cycle)}}


def borders_of(S: SubstSystem, x: PathSpec) -> list:
    """All infinite borders of an eventually periodic ``x``."""
    if not x.cycle:
        raise ValueError("borders_of needs an eventually periodic path")
    G = build_graph(S)
    succ = successor(S)
    p = G.by_id[x.coord(1)].src
    n0, P = len(x.prefix), len(x.cycle)
    out = []
    for a in range(len(S.edges(p))):
        chain = [a]
        cur = a
        alive = True
        for i in range(1, n0 + 1):
            cur = succ.get((x.coord(i), cur))
            if cur is None:
                alive = False
                break
            chain.append(cur)
        if not alive:
            continue
        # chain[n0] is the state at the start of the first cycle pass
        seen = {cur: 0}
        starts = [cur]
        while alive:
            for j in range(P):
                cur = succ.get((x.cycle[j], cur))
                if cur is None:
                    alive = False
                    break
                chain.append(cur)
            if not alive:
                break
            if cur in seen:
                k = seen[cur]
                pre_len = n0 + k * P
                cyc = tuple(chain[pre_len:pre_len + (len(starts) - k) * P])
                out.append(Border(edge_dir(S, p, a), tuple(chain[:pre_len]), cyc))
                break
            seen[cur] = len(starts)
            starts.append(cur)
    return out


def border_directions(S: SubstSystem, x: PathSpec) -> set:
    return {b.direction for b in borders_of(S, x)}


# ---------------------------------------------------------------------------
# corners


def _corner_graph(S: SubstSystem, s: Direction, t: Direction):
    """Transitions of the corner automaton: state (v, i) means the edge i of
    v has direction s and the next edge (counterclockwise) has direction t."""
    key = ("corner", s, t)
    if key in S._cache:
        return S._cache[key]
    G = build_graph(S)
    A = a_pairs(S)
    trans = defaultdict(list)
    for e in G.edges:
        prs = dict(A[e.id])
        ns = len(S.edges(e.src))
        nr = len(S.edges(e.dst))
        for i, i2 in prs.items():
            j = (i + 1) % ns
            if j not in prs or prs[j] != (i2 + 1) % nr:
                continue
            if edge_dir(S, e.src, i) != s or edge_dir(S, e.src, j) != t:
                continue
            trans[(e.src, i)].append((e.id, (e.dst, i2)))
    S._cache[key] = dict(trans)
    return S._cache[key]


@dataclass
class CornerResult:
    s: Direction
    t: Direction
    sequences: list
    finite: bool
    det_sign: int

    def to_json(self):
        return {"s": self.s.fmt(), "t": self.t.fmt(), "det_sign": self.det_sign,
                "finite": self.finite, "sequences": [str(z) for z in self.sequences]}


def corner_enumerate(S: SubstSystem, s: Direction, t: Direction) -> CornerResult:
    """All elements of ``B_{s,t}`` (as periodic paths, every rotation listed).

    ``finite`` is false when two cycles of the corner automaton share a state,
    in which case the set is infinite and only simple cycles are listed.
    """
    if s == t:
        raise ValueError("corner directions must differ")
    trans = _corner_graph(S, s, t)
    adj = {u: {w for _, w in lst} for u, lst in trans.items()}
    nodes = sorted(set(adj) | {w for vs in adj.values() for w in vs})
    comps = _scc(nodes, adj)
    finite = True
    cycles = set()
    for comp in comps:
        cs = set(comp)
        inner = [(u, eid, w) for u in comp for eid, w in trans.get(u, ()) if w in cs]
        if not inner:
            continue
        if len(inner) != len(comp):
            finite = False
        # simple cycles inside the component
        for start in sorted(comp):
            stack = [(start, (), frozenset([start]))]
            while stack:
                u, path, seen = stack.pop()
                for eid, w in trans.get(u, ()):
                    if w not in cs:
                        continue
                    if w == start:
                        cycles.add(path + (eid,))
                    elif w not in seen:
                        stack.append((w, path + (eid,), seen | {w}))
    seqs = sorted({PathSpec((), c).canonical() for c in cycles}, key=str)
    return CornerResult(s, t, seqs, finite, _sgn(det2(s.vec, t.vec)))


def _sgn(x):
    return (x > 0) - (x < 0)


def corner_pairs(S: SubstSystem) -> list:
    """Ordered pairs (s, t) of distinct realized directions."""
    dirs = realized_directions(S)
    return [(s, t) for s in dirs for t in dirs if s != t]


def corner_bruteforce(S: SubstSystem, s: Direction, t: Direction, depth: int) -> set:
    """Depth-``depth`` paths admitting an s-chain and a t-chain that stay
    counterclockwise-adjacent at every level; pair membership is recomputed
    from the geometry rather than read from ``a_pairs``."""
    G = build_graph(S)
    lam = S.lam

    def pair_ok(e, a, b):
        seg = S.edges(e.src)[a][0].translate(e.disp).scale(1 / lam)
        return segment_contains(S.edges(e.dst)[b][0], seg)

    def nexts(e, i):
        ns, nr = len(S.edges(e.src)), len(S.edges(e.dst))
        for i2 in range(nr):
            if pair_ok(e, i, i2) and pair_ok(e, (i + 1) % ns, (i2 + 1) % nr):
                yield i2

    out = set()
    stack = []
    for e in G.edges:
        n = len(S.edges(e.src))
        for i in range(n):
            if edge_dir(S, e.src, i) == s and edge_dir(S, e.src, (i + 1) % n) == t:
                for i2 in nexts(e, i):
                    stack.append(((e.id,), e, i2))
    while stack:
        path, e, i = stack.pop()
        if len(path) == depth:
            out.add(path)
            continue
        for e2 in G.starting[e.dst]:
            for i2 in nexts(e2, i):
                stack.append((path + (e2.id,), e2, i2))
    return out


# ---------------------------------------------------------------------------
# types


@dataclass
class TypeClass:
    kind: str
    halflines: list
    center: Vec2 | None
    certified: bool
    level: int

    def to_json(self):
        out = {"type": self.kind, "halflines": len(self.halflines),
               "directions": [d.fmt() for d in self.halflines],
               "center": self.center.fmt() if self.center is not None else None,
               "certified": self.certified}
        if self.kind == "II":
            out["line"] = canonical_rep(self.halflines[0]).fmt()
        return out


def classify_type(S: SubstSystem, x: PathSpec) -> TypeClass:
    """Type of the tiling coded by an eventually periodic ``x``.

    The infinite boundary of ``T_x`` is the union of the rays issuing from the
    fixed point of its periodic tail along the edges of the tiles around it.
    """
    fr, u = periodic_frame(S, x)
    rays = fr.rays
    if not rays:
        kind = "I"
    elif len(rays) == 2 and rays[0] == -rays[1]:
        kind = "II"
    else:
        kind = "III"
    center = fr.c - u if kind == "III" else None
    return TypeClass(kind, list(rays), center, fr.complete, fr.level)


def canonical_rep(t: Direction) -> Direction:
    v = t.vec
    return t if (v.x > 0 or (v.x == 0 and v.y > 0)) else -t


def type_iii_representatives(S: SubstSystem) -> list:
    """The periodic codes of the tiles meeting the centre of every type-III
    tiling reached from a corner cycle with ``det(s, t) > 0``."""
    if "M" in S._cache:
        return S._cache["M"]
    out = set()
    for s, t in corner_pairs(S):
        if det2(s.vec, t.vec) <= 0:
            continue
        for z in corner_enumerate(S, s, t).sequences:
            fr, _ = periodic_frame(S, z)
            for blk in fr.blocks:
                out.add(PathSpec((), blk).canonical())
    res = sorted(out, key=str)
    S._cache["M"] = res
    return res


def normalize_periods(S: SubstSystem):
    """``(power_system(S, N), N)`` with N the lcm of the type-III periods."""
    M = type_iii_representatives(S)
    N = 1
    for z in M:
        N = N * len(z.cycle) // math.gcd(N, len(z.cycle))
    return (power_system(S, N) if N > 1 else S), N


def find_periodic_rep(S: SubstSystem, x: PathSpec) -> PathSpec:
    """The purely periodic path tail-equivalent to a type-III ``x``."""
    tc = classify_type(S, x)
    if tc.kind != "III":
        raise NotTypeIII(f"{x} is of type {tc.kind}")
    x = x.canonical()
    n0, P = len(x.prefix), len(x.cycle)
    k = (-n0) % P
    z = PathSpec((), x.cycle[k:] + x.cycle[:k]).canonical()
    # the same tail read from the cycle must agree beyond n0
    assert all(z.coord(i) == x.coord(i) for i in range(n0 + 1, n0 + 2 * P + 1))
    return z


def compute_C(S: SubstSystem) -> dict:
    """The loops ``e`` whose constant path is of type III, with the checks that
    come with them."""
    if "C" in S._cache:
        return S._cache["C"]
    M = type_iii_representatives(S)
    long = [str(z) for z in M if len(z.cycle) != 1]
    if long:
        raise NormalizationRequired(f"type-III periodic classes with period > 1: {long}")
    G = build_graph(S)
    A = a_pairs(S)
    C = []
    for e in G.edges:
        if e.src == e.dst and classify_type(S, PathSpec((), (e.id,))).kind == "III":
            C.append(e.id)
    from_M = sorted(z.cycle[0] for z in M)
    two_poss = {}
    for eid in C:
        prs = A[eid]
        two_poss[eid] = len(prs) in (1, 2) and all(a == b for a, b in prs)
    res = {
        "C": C,
        "matches_corner_reps": sorted(C) == from_M,
        "two_possibilities": all(two_poss.values()),
        "two_possibilities_by_edge": two_poss,
        "P6": check_P5(S, exclude=frozenset(C)),
    }
    S._cache["C"] = res
    return res


def C_edges(S: SubstSystem) -> list:
    return compute_C(S)["C"]


# ---------------------------------------------------------------------------
# delta and mu


def delta_edge(S: SubstSystem, eid: str) -> Segment:
    G = build_graph(S)
    e = G.by_id[eid]
    prs = a_pairs(S)[eid]
    if e.src != e.dst or not prs or any(a != b for a, b in prs):
        raise ValueError(f"{eid} is not a loop with diagonal A(e)")
    verts = S.shape(e.dst).vertices
    n = len(verts)
    if len(prs) == 1:
        i = prs[0][0]
        return Segment(verts[i], (verts[(i + 1) % n] + e.disp) / S.lam)
    i1, i2 = prs[0][0], prs[1][0]
    a = i1 if (i1 + 1) % n == i2 else i2
    return Segment(verts[a], verts[(a + 1) % n])


def mu_test(S: SubstSystem, y: str, eid: str) -> bool:
    """``r(y) = r(e)`` and some edge of ``s(y)`` lands in ``delta_e``."""
    key = ("mutest", y, eid)
    if key in S._cache:
        return S._cache[key]
    G = build_graph(S)
    ye, e = G.by_id[y], G.by_id[eid]
    res = False
    if ye.dst == e.dst:
        d = delta_edge(S, eid)
        for seg, _ in S.edges(ye.src):
            if segment_contains(d, seg.translate(ye.disp).scale(1 / S.lam)):
                res = True
                break
    S._cache[key] = res
    return res


def mu(S: SubstSystem, eid: str, x, n: int) -> int:
    """``mu^e_n(x)``; ``x`` is a PathSpec or a sequence of edge ids."""
    coord = x.coord if isinstance(x, PathSpec) else (lambda k: x[k - 1])
    val = int(mu_test(S, coord(1), eid))
    for k in range(2, n + 1):
        xk = coord(k)
        if xk != eid:
            val = int(mu_test(S, xk, eid))
    return val


def mu_vector(S: SubstSystem, x, n: int, C=None) -> tuple:
    C = C_edges(S) if C is None else C
    return tuple(mu(S, e, x, n) for e in C)


def mu_step(S: SubstSystem, vec: tuple, g: str, C) -> tuple:
    return tuple(v if g == e else int(mu_test(S, g, e)) for v, e in zip(vec, C))


def xprime_partition(S: SubstSystem, n: int, C=None, drop: int | None = None) -> CylinderPartition:
    """Blocks of length-n paths keyed by ``(r(x_n), mu-vector)``.

    ``drop`` removes one coordinate of the key (fault injection).
    """
    C = C_edges(S) if C is None else list(C)
    G = build_graph(S)
    groups = {}
    for p in enumerate_paths(S, n):
        vec = mu_vector(S, p, n, C)
        if drop is not None:
            vec = vec[:drop] + vec[drop + 1:]
        groups.setdefault((G.by_id[p[-1]].dst, vec), []).append(p)
    order = {v: i for i, v in enumerate(S.ids)}
    keys = sorted(groups, key=lambda k: (order[k[0]], k[1]))
    return CylinderPartition(n, "XPrimeN", keys, [groups[k] for k in keys])


def xprime_key_counts(S: SubstSystem, n: int, C=None) -> dict:
    """Number of length-n paths per ``(r(x_n), mu-vector)`` key (dynamic
    programming; no path enumeration)."""
    C = C_edges(S) if C is None else list(C)
    G = build_graph(S)
    cur = defaultdict(int)
    for g in G.edges:
        cur[(g.dst, tuple(int(mu_test(S, g.id, e)) for e in C))] += 1
    for _ in range(n - 1):
        nxt = defaultdict(int)
        for (v, vec), cnt in cur.items():
            for g in G.starting[v]:
                nxt[(g.dst, mu_step(S, vec, g.id, C))] += cnt
        cur = nxt
    return dict(cur)
