"""The substitution graph, its path space and the coding of punctured tilings.

A point of the path space is a sequence ``(e_n)`` of graph edges with
``r(e_n) = s(e_{n+1})``.  Edge ``e`` is the tile ``s(e) + disp(e)`` of
``omega(r(e))``; the tiling coded by ``x`` has its level-n supertile at the
origin equal to ``omega^n(r(x_n))`` shifted by ``-sum lam^(k-1) x_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import NamedTuple, Sequence

import numpy as np

from .exactgeom import Direction, Location, Vec2, format_elem, on_segment, overlap_length_positive, point_locate
from .tilingsys import Patch, SubstSystem, Tile, forced_border, forcing_level, subst_matrix, supertile


class NotAPuncture(ValueError):
    pass


class OutOfSupertile(ValueError):
    pass


class InvalidPath(ValueError):
    pass


class NotPrimitive(ValueError):
    pass


class StarIncomplete(RuntimeError):
    pass


class GraphEdge(NamedTuple):
    id: str
    src: str
    dst: str
    disp: Vec2


@dataclass
class SubstGraph:
    vertices: list
    edges: list
    by_id: dict
    starting: dict  # v -> edges e with s(e) = v (possible successors)
    into: dict  # v -> edges e with r(e) = v (children of v)

    def to_json(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [{"id": e.id, "src": e.src, "dst": e.dst, "disp": [format_elem(e.disp.x), format_elem(e.disp.y)]}
                      for e in self.edges],
        }


def build_graph(S: SubstSystem) -> SubstGraph:
    if "graph" in S._cache:
        return S._cache["graph"]
    edges = []
    for q in S.ids:
        for rt in S.rule[q]:
            edges.append(GraphEdge(rt.name, rt.proto, q, rt.pos))
    starting = {v: [] for v in S.ids}
    into = {v: [] for v in S.ids}
    for e in edges:
        starting[e.src].append(e)
        into[e.dst].append(e)
    G = SubstGraph(list(S.ids), edges, {e.id: e for e in edges}, starting, into)
    S._cache["graph"] = G
    return G


# ---------------------------------------------------------------------------
# PathSpec


@dataclass(frozen=True)
class PathSpec:
    """Finite prefix, optionally followed by a cycle repeated forever."""

    prefix: tuple = ()
    cycle: tuple | None = None

    @classmethod
    def parse(cls, text: str) -> "PathSpec":
        text = text.strip()
        if "|" in text:
            head, tail = text.split("|", 1)
            cyc = tuple(t.strip() for t in tail.split(",") if t.strip())
            if not cyc:
                raise InvalidPath("empty cycle after '|'")
        else:
            head, cyc = text, None
        pre = tuple(t.strip() for t in head.split(",") if t.strip())
        return cls(pre, cyc)

    def __str__(self) -> str:
        out = ",".join(self.prefix)
        if self.cycle:
            out += "|" + ",".join(self.cycle)
        return out

    @property
    def periodic(self) -> bool:
        return bool(self.cycle)

    @property
    def length(self):
        return math.inf if self.cycle else len(self.prefix)

    def coord(self, n: int) -> str:
        """``x_n`` (1-indexed)."""
        if n <= len(self.prefix):
            return self.prefix[n - 1]
        if not self.cycle:
            raise IndexError(f"path has only {len(self.prefix)} coordinates")
        return self.cycle[(n - len(self.prefix) - 1) % len(self.cycle)]

    def first(self, n: int) -> tuple:
        return tuple(self.coord(k) for k in range(1, n + 1))

    def tail_from(self, m: int) -> "PathSpec":
        """Coordinates ``m+1, m+2, ...``."""
        if m <= len(self.prefix):
            return PathSpec(self.prefix[m:], self.cycle)
        k = (m - len(self.prefix)) % len(self.cycle)
        return PathSpec((), self.cycle[k:] + self.cycle[:k])

    def with_head(self, head: Sequence[str], m: int) -> "PathSpec":
        """Replace coordinates ``1..m`` by ``head``."""
        t = self.tail_from(m)
        return PathSpec(tuple(head) + t.prefix, t.cycle).canonical()

    def canonical(self) -> "PathSpec":
        if not self.cycle:
            return PathSpec(tuple(self.prefix), None)
        cyc = list(self.cycle)
        n = len(cyc)
        for d in range(1, n + 1):
            if n % d == 0 and cyc == cyc[:d] * (n // d):
                cyc = cyc[:d]
                break
        pre = list(self.prefix)
        while pre and pre[-1] == cyc[-1]:
            pre.pop()
            cyc = [cyc[-1]] + cyc[:-1]
        return PathSpec(tuple(pre), tuple(cyc))


def check_path(G: SubstGraph, x: PathSpec) -> None:
    seq = list(x.prefix) + list(x.cycle or ()) + list((x.cycle or ())[:1])
    for eid in seq:
        if eid not in G.by_id:
            raise InvalidPath(f"unknown edge {eid!r}")
    for a, b in zip(seq, seq[1:]):
        if G.by_id[a].dst != G.by_id[b].src:
            raise InvalidPath(f"r({a}) = {G.by_id[a].dst} but s({b}) = {G.by_id[b].src}")


def enumerate_paths(S: SubstSystem, n: int):
    """All length-n paths, ordered by graph edge order (rule order)."""
    G = build_graph(S)
    order = G.edges

    def rec(prefix, v):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for e in order:
            if v is None or e.src == v:
                prefix.append(e.id)
                yield from rec(prefix, e.dst)
                prefix.pop()

    yield from rec([], None)


def count_paths(S: SubstSystem, n: int) -> int:
    M = subst_matrix(S)
    return sum(sum(row) for row in M.power(n).rows)


# ---------------------------------------------------------------------------
# coding


def path_offset(S: SubstSystem, edges: Sequence[str]):
    """``sum_{k=1..n} lam^(k-1) e_k``: position of the origin tile inside the
    level-n supertile placed with its anchor at zero."""
    G = build_graph(S)
    acc = Vec2(S.field.zero(), S.field.zero())
    for k, eid in enumerate(edges):
        acc = acc + G.by_id[eid].disp * S.lam_pow(k)
    return acc


def place_path(S: SubstSystem, edges: Sequence[str]) -> Patch:
    G = build_graph(S)
    if not edges:
        raise InvalidPath("empty path")
    check_path(G, PathSpec(tuple(edges)))
    n = len(edges)
    top = G.by_id[edges[-1]].dst
    anchor = -path_offset(S, edges)
    tiles = [Tile(t.proto, t.pos + anchor) for t in supertile(S, top, n).tiles]
    marked = next(i for i, t in enumerate(tiles) if t.pos.is_zero())
    return Patch(tiles, marked)


def _bbox_has(S, pid, y):
    b = S.shape(pid).bbox()
    return b[0] < y.x < b[2] and b[1] < y.y < b[3]


def _child_grid(S, q):
    """Children of ``omega(q)`` bucketed by a float grid of their punctures.

    Only used to pick candidates; membership is decided exactly.
    """
    key = ("childgrid", q)
    if key in S._cache:
        return S._cache[key]
    G = build_graph(S)
    cell = 2 * max(max(abs(float(v.x)), abs(float(v.y))) for p in S.ids for v in S.shape(p).vertices)
    grid = {}
    for e in G.into[q]:
        grid.setdefault((math.floor(float(e.disp.x) / cell), math.floor(float(e.disp.y) / cell)), []).append(e)
    S._cache[key] = (cell, grid)
    return cell, grid


def _children_near(S, q, y):
    cell, grid = _child_grid(S, q)
    gx, gy = math.floor(float(y.x) / cell), math.floor(float(y.y) / cell)
    out = []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            out.extend(grid.get((gx + dx, gy + dy), ()))
    return out


def encode_position(S: SubstSystem, q: str, n: int, u: Vec2) -> tuple:
    """Edges ``(e_1..e_n)`` with ``r(e_n) = q`` addressing the tile of
    ``omega^n(q)`` whose puncture is ``u``."""
    out = [None] * n
    cur_q, cur_u = q, u
    for lvl in range(n, 0, -1):
        scale = S.lam_pow(lvl - 1)
        y = cur_u / scale if lvl > 1 else cur_u
        hit = None
        for e in _children_near(S, cur_q, y):
            z = y - e.disp
            if _bbox_has(S, e.src, z) and point_locate(S.shape(e.src), z) is Location.INTERIOR:
                hit = e
                break
        if hit is None:
            raise NotAPuncture(f"{u.fmt()} is not a puncture of omega^{n}({q})")
        out[lvl - 1] = hit.id
        cur_u = cur_u - hit.disp * scale
        cur_q = hit.src
    if not cur_u.is_zero():
        raise NotAPuncture(f"{u.fmt()} is not a puncture of omega^{n}({q})")
    return tuple(out)


def recode_translation(S: SubstSystem, x: PathSpec, v: Vec2, n: int) -> PathSpec:
    """Code of ``T - v``, where ``T`` is coded by ``x``: the tile whose
    puncture sits at ``v`` becomes the origin tile.

    Works inside the least level-m supertile (m <= n) containing ``v`` in its
    interior; the output agrees with ``x`` beyond m.
    """
    if v.is_zero():
        return x.canonical()
    G = build_graph(S)
    n = min(n, x.length)
    acc = Vec2(S.field.zero(), S.field.zero())
    for m in range(1, n + 1):
        e = G.by_id[x.coord(m)]
        acc = acc + e.disp * S.lam_pow(m - 1)
        y = v + acc  # v relative to the anchor of the level-m supertile
        region = S.tile_polygon((e.dst, Vec2(S.field.zero(), S.field.zero())), m)
        b = region.bbox()
        if not (b[0] < y.x < b[2] and b[1] < y.y < b[3]):
            continue
        if point_locate(region, y) is Location.INTERIOR:
            head = encode_position(S, e.dst, m, y)
            return x.with_head(head, m)
    raise OutOfSupertile(f"{v.fmt()} is not inside the level-{n} supertile")


# ---------------------------------------------------------------------------
# eventually periodic points: exact translation through the fixed-point star


def _dist2_point_segment(p: Vec2, a: Vec2, b: Vec2):
    d = b - a
    t = (p - a).dot(d) / d.dot(d)
    if t < 0:
        t = t * 0
    elif t > 1:
        t = t * 0 + 1
    w = p - (a + d * t)
    return w.dot(w)


@dataclass
class PeriodicFrame:
    """Geometry of the tiling ``T_z`` for a purely periodic ``z``.

    ``c`` is the point of ``T_z`` fixed by ``omega^P``; ``star`` lists the
    tiles of ``T_z - c`` containing the origin and ``blocks[i]`` is the
    period block of the (periodic) code of ``star[i]``.
    """

    cycle: tuple
    c: Vec2
    star: list
    blocks: list
    complete: bool
    rays: list
    radius2: object
    level: int


def _periodic_frame(S: SubstSystem, cycle: tuple) -> PeriodicFrame:
    key = ("frame", cycle)
    if key in S._cache:
        return S._cache[key]
    G = build_graph(S)
    P = len(cycle)
    zero = Vec2(S.field.zero(), S.field.zero())
    lamP = S.lam_pow(P)
    A_P = -path_offset(S, cycle)
    c = -A_P / (lamP - 1)
    s0 = G.by_id[cycle[0]].src
    sigma0 = Tile(s0, -c)
    poly0 = S.tile_polygon(sigma0)
    star = [sigma0]
    complete = True
    level = 0
    if point_locate(poly0, zero) is not Location.INTERIOR:
        k = forcing_level(S)
        forcing = k is not None
        k = k or 1
        level = P * -(-k // P)
        scale = S.lam_pow(level)
        seen = {sigma0}
        work = [sigma0]
        while work:
            sg = work.pop()
            tiles, conflicts = forced_border(S, sg.proto, level)
            bad = {t for pair in conflicts for t in pair}
            for t in tiles:
                if t in bad:
                    continue
                tt = Tile(t.proto, t.pos + sg.pos * scale)
                if tt in seen:
                    continue
                if point_locate(S.tile_polygon(tt), zero) is not Location.EXTERIOR:
                    seen.add(tt)
                    star.append(tt)
                    work.append(tt)
        complete = forcing and _star_closed(S, star)
    star.sort(key=lambda t: (t.proto, float(t.pos.x), float(t.pos.y), t.pos.fmt()))
    rays = set()
    r2 = None
    for t in star:
        for seg in S.tile_polygon(t).edge_segments():
            if on_segment(seg, zero):
                for end in (seg.p0, seg.p1):
                    if not end.is_zero():
                        rays.add(Direction(end))
            else:
                d2 = _dist2_point_segment(zero, seg.p0, seg.p1)
                r2 = d2 if r2 is None or d2 < r2 else r2
    blocks = [encode_position(S, t.proto, P, t.pos - t.pos * lamP) for t in star]
    fr = PeriodicFrame(tuple(cycle), c, star, blocks, complete, sorted(rays), r2, level)
    S._cache[key] = fr
    return fr


def _star_closed(S, star) -> bool:
    """Every edge through the origin is matched by an edge of another star tile."""
    zero = Vec2(S.field.zero(), S.field.zero())
    segs = [(i, seg) for i, t in enumerate(star) for seg in S.tile_polygon(t).edge_segments()
            if on_segment(seg, zero)]
    for i, seg in segs:
        if not any(j != i and overlap_length_positive(seg, other) for j, other in segs):
            return False
    return True


def _split_periodic(x: PathSpec):
    """``(z_cycle, u)`` with ``T_x = T_z - u`` and ``z`` purely periodic."""
    if not x.cycle:
        raise InvalidPath("path is not eventually periodic")
    n0 = len(x.prefix)
    P = len(x.cycle)
    k = (-n0) % P
    zc = tuple(x.cycle[k:] + x.cycle[:k])
    z = PathSpec((), zc)
    return zc, z, n0


def periodic_frame(S: SubstSystem, x: PathSpec):
    """``(frame, u)``: the frame of the periodic tail of ``x`` and the shift
    with ``T_x = T_z - u``."""
    x = x.canonical()
    zc, z, n0 = _split_periodic(x)
    fr = _periodic_frame(S, zc)
    u = path_offset(S, x.first(n0)) - path_offset(S, z.first(n0))
    return fr, u


def translate_periodic(S: SubstSystem, x: PathSpec, v: Vec2, max_levels: int = 200) -> PathSpec:
    """Exact code of ``T_x - v`` for eventually periodic ``x``.

    Valid across every supertile boundary, including the infinite ones.
    """
    fr, u = periodic_frame(S, x)
    P = len(fr.cycle)
    y = u + v - fr.c
    for j in range(max_levels):
        scale = S.lam_pow(j * P)
        yj = y / scale if j else y
        for t, blk in zip(fr.star, fr.blocks):
            if point_locate(S.tile_polygon(t), yj) is Location.INTERIOR:
                head = encode_position(S, t.proto, j * P, y - t.pos * scale)
                return PathSpec(head, blk).canonical()
        if fr.radius2 is not None and yj.dot(yj) < fr.radius2:
            if fr.complete:
                raise NotAPuncture(f"{v.fmt()} lies on the infinite boundary")
            raise StarIncomplete("the star at the fixed point could not be completed")
    raise NotAPuncture(f"{v.fmt()} not resolved after {max_levels} levels")


def translate(S: SubstSystem, x: PathSpec, v: Vec2, n: int | None = None) -> PathSpec:
    """``recode_translation`` with the exact periodic route as fallback."""
    try:
        return recode_translation(S, x, v, n if n is not None else (len(x.prefix) + 2 * len(x.cycle or ()) or 1))
    except OutOfSupertile:
        if x.cycle:
            return translate_periodic(S, x, v)
        raise


# ---------------------------------------------------------------------------
# filtration and measure


@dataclass
class CylinderPartition:
    depth: int
    kind: str
    keys: list
    blocks: list

    def to_json(self) -> dict:
        return {"depth": self.depth, "kind": self.kind,
                "blocks": [[",".join(p) for p in b] for b in self.blocks]}


def xn_partition(S: SubstSystem, n: int) -> CylinderPartition:
    G = build_graph(S)
    groups = {}
    for p in enumerate_paths(S, n):
        groups.setdefault(G.by_id[p[-1]].dst, []).append(p)
    keys = [v for v in S.ids if v in groups]
    return CylinderPartition(n, "Xn", keys, [groups[k] for k in keys])


@dataclass
class PFMeasure:
    eigenvalue: object
    xi: dict
    exact: bool
    lam_sq_check: bool
    float_eigenvalue: float
    float_xi: dict

    def to_json(self) -> dict:
        f = format_elem if self.exact else (lambda v: repr(float(v)))
        return {
            "eigenvalue": f(self.eigenvalue),
            "exact": self.exact,
            "lambda_sq_check": self.lam_sq_check,
            "xi": {k: f(v) for k, v in self.xi.items()},
        }


def _power_iteration(M: np.ndarray, tol=1e-12, cap=100000):
    n = M.shape[0]
    x = np.full(n, 1.0 / n)
    ev = 0.0
    for _ in range(cap):
        y = M @ x
        ev_new = y.sum()
        y = y / ev_new
        if np.abs(y - x).max() < tol and abs(ev_new - ev) < tol * max(1.0, ev_new):
            return ev_new, y
        x, ev = y, ev_new
    return ev, x


def _exact_kernel_vector(rows, lam2, one):
    """A nonzero vector of the kernel of ``M - lam2*I`` over the field."""
    n = len(rows)
    A = [[rows[i][j] * one - (lam2 if i == j else 0 * one) for j in range(n)] for i in range(n)]
    pivots = []
    r = 0
    for col in range(n):
        piv = next((i for i in range(r, n) if A[i][col] != 0), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        inv = one / A[r][col]
        A[r] = [a * inv for a in A[r]]
        for i in range(n):
            if i != r and A[i][col] != 0:
                f = A[i][col]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        pivots.append(col)
        r += 1
    free = [c for c in range(n) if c not in pivots]
    if len(free) != 1:
        return None
    fc = free[0]
    vec = [0 * one] * n
    vec[fc] = one
    for i, pc in enumerate(pivots):
        vec[pc] = -A[i][fc]
    return vec


def pf_measure(S: SubstSystem) -> PFMeasure:
    if "pf" in S._cache:
        return S._cache["pf"]
    from .tilingsys import check_primitive

    ok, _ = check_primitive(S)
    if not ok:
        raise NotPrimitive("substitution matrix is not primitive")
    M = subst_matrix(S)
    arr = np.array(M.rows, dtype=float)
    fev, fxi = _power_iteration(arr)
    one = S.field.one()
    lam2 = S.lam * S.lam
    vec = _exact_kernel_vector(M.rows, lam2, one)
    exact = False
    xi = None
    if vec is not None:
        tot = reduce(lambda a, b: a + b, vec)
        cand = [v / tot for v in vec]
        if all(v > 0 for v in cand):
            check = all(sum((M.rows[i][j] * cand[j] for j in range(len(cand))), 0 * one) == lam2 * cand[i]
                        for i in range(len(cand)))
            if check:
                exact = True
                xi = dict(zip(M.ids, cand))
    if exact:
        ev = lam2
        lam_check = True
    else:
        ev = fev
        xi = dict(zip(M.ids, (float(v) for v in fxi)))
        lam_check = abs(fev - float(lam2)) < 1e-10
    pf = PFMeasure(ev, xi, exact, lam_check, float(fev), dict(zip(M.ids, (float(v) for v in fxi))))
    S._cache["pf"] = pf
    return pf


def cylinder_measure(S: SubstSystem, w: Sequence[str]):
    pf = pf_measure(S)
    G = build_graph(S)
    n = len(w)
    top = G.by_id[w[-1]].dst
    return pf.xi[top] / pf.eigenvalue ** n
