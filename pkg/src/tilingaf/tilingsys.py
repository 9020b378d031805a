"""Substitution tiling systems: data model, supertiles and hypothesis checks."""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, NamedTuple

from .exactgeom import (
    Field,
    FieldError,
    Location,
    Polygon,
    Vec2,
    _split_params,
    format_elem,
    interiors_overlap,
    point_locate,
    polygon_edges,
    polygon_problems,
    cover_problems,
    segment_contains,
    shares_segment,
)

log = logging.getLogger(__name__)


class SystemError_(ValueError):
    """Malformed system description."""

    def __init__(self, msg: str, location: str = ""):
        super().__init__(f"{location}: {msg}" if location else msg)
        self.location = location


class ClosureTooLarge(RuntimeError):
    pass


@dataclass(frozen=True)
class Prototile:
    id: str
    label: str
    shape: Polygon

    @property
    def edges(self) -> list:
        return polygon_edges(self.shape)


class Tile(NamedTuple):
    proto: str
    pos: Vec2


class RuleTile(NamedTuple):
    proto: str
    pos: Vec2
    name: str


@dataclass
class Patch:
    tiles: list
    marked: int | None = None

    def __len__(self):
        return len(self.tiles)


class SubstSystem:
    """Prototiles, inflation constant and substitution rule over one field.

    ``rule[q]`` lists the tiles of ``omega(q)`` as :class:`RuleTile`; each
    entry is also a graph edge (its ``name``) with ``s = proto``, ``r = q``.
    """

    def __init__(self, field_: Field, lam, prototiles, rule, asserted=None, name: str = ""):
        self.field = field_
        self.lam = lam
        self.prototiles = tuple(prototiles)
        self.rule = {k: tuple(v) for k, v in rule.items()}
        self.asserted = dict(asserted or {"aperiodic": False, "fpc": False})
        self.name = name
        self.proto = {p.id: p for p in self.prototiles}
        self._cache: dict = {}

    @property
    def ids(self) -> list:
        return [p.id for p in self.prototiles]

    def shape(self, pid: str) -> Polygon:
        return self.proto[pid].shape

    def edges(self, pid: str) -> list:
        key = ("edges", pid)
        if key not in self._cache:
            self._cache[key] = polygon_edges(self.proto[pid].shape)
        return self._cache[key]

    def lam_pow(self, n: int):
        key = ("lam", n)
        if key not in self._cache:
            self._cache[key] = self.lam ** n if n >= 0 else self.field.one() / (self.lam ** (-n))
        return self._cache[key]

    def tile_polygon(self, t, level: int = 0) -> Polygon:
        """Region of the tile ``t`` (``proto``, ``pos``) viewed at ``level``:
        ``lam^level * shape + pos``."""
        key = ("poly", t[0], level)
        base = self._cache.get(key)
        if base is None:
            base = self.shape(t[0]).scale(self.lam_pow(level)) if level else self.shape(t[0])
            self._cache[key] = base
        return base.translate(t[1])

    def to_json(self, with_adjacency: bool = False) -> dict:
        f = format_elem
        out = {
            "field": self.field.to_json(),
            "lambda": f(self.lam),
            "prototiles": [
                {"id": p.id, "label": p.label,
                 "vertices": [[f(v.x), f(v.y)] for v in p.shape.vertices]}
                for p in self.prototiles
            ],
            "rule": {
                q: [{"proto": t.proto, "pos": [f(t.pos.x), f(t.pos.y)], "name": t.name}
                    for t in self.rule[q]]
                for q in self.ids
            },
            "asserted": {"aperiodic": bool(self.asserted.get("aperiodic")),
                         "fpc": bool(self.asserted.get("fpc"))},
        }
        if with_adjacency:
            # derived data, stored so that large powers need not recompute it
            out["adjacency"] = sorted(
                [p, q, [f(d.x), f(d.y)]] for p, q, d in adjacency_closure(self))
        return out

    def dumps(self, with_adjacency: bool = False) -> str:
        return json.dumps(self.to_json(with_adjacency), indent=1) + "\n"


def _default_names(q: str, n: int) -> list:
    w = len(str(max(n - 1, 0)))
    return [f"{q}.{i:0{w}d}" for i in range(n)]


def parse_system(obj, name: str = "") -> SubstSystem:
    """Build a system from its JSON object, reporting the location of errors."""
    if not isinstance(obj, dict):
        raise SystemError_("top level must be an object", "$")
    for key in ("field", "lambda", "prototiles", "rule"):
        if key not in obj:
            raise SystemError_(f"missing key {key!r}", "$")
    try:
        fld = Field.from_json(obj["field"])
    except FieldError as exc:
        raise SystemError_(str(exc), "$.field") from None

    def elem(x, loc):
        try:
            return fld.parse(x)
        except FieldError as exc:
            raise SystemError_(str(exc), loc) from None

    lam = elem(obj["lambda"], "$.lambda")
    if not lam > 1:
        raise SystemError_("inflation constant must exceed 1", "$.lambda")
    protos = []
    seen = set()
    for i, p in enumerate(obj["prototiles"]):
        loc = f"$.prototiles[{i}]"
        if not isinstance(p, dict) or "id" not in p or "vertices" not in p:
            raise SystemError_("prototile needs 'id' and 'vertices'", loc)
        pid = str(p["id"])
        if pid in seen:
            raise SystemError_(f"duplicate prototile id {pid!r}", loc)
        seen.add(pid)
        verts = []
        for j, v in enumerate(p["vertices"]):
            if not isinstance(v, (list, tuple)) or len(v) != 2:
                raise SystemError_("vertex must be a pair", f"{loc}.vertices[{j}]")
            verts.append(Vec2(elem(v[0], f"{loc}.vertices[{j}][0]"), elem(v[1], f"{loc}.vertices[{j}][1]")))
        poly = Polygon(verts, check=False)
        protos.append(Prototile(pid, str(p.get("label", pid)), poly))
    rule = {}
    for q, entries in obj["rule"].items():
        loc = f"$.rule.{q}"
        if q not in seen:
            raise SystemError_(f"rule for unknown prototile {q!r}", loc)
        if not entries:
            raise SystemError_("empty rule entry", loc)
        names = _default_names(q, len(entries))
        tiles = []
        for j, t in enumerate(entries):
            tloc = f"{loc}[{j}]"
            if not isinstance(t, dict) or "proto" not in t or "pos" not in t:
                raise SystemError_("rule tile needs 'proto' and 'pos'", tloc)
            if t["proto"] not in seen:
                raise SystemError_(f"unknown prototile {t['proto']!r}", tloc)
            pos = Vec2(elem(t["pos"][0], f"{tloc}.pos[0]"), elem(t["pos"][1], f"{tloc}.pos[1]"))
            nm = str(t.get("name", names[j]))
            if "," in nm or "|" in nm or not nm:
                raise SystemError_(f"edge name {nm!r} may not contain ',' or '|'", tloc)
            tiles.append(RuleTile(t["proto"], pos, nm))
        rule[q] = tiles
    missing = seen - set(rule)
    if missing:
        raise SystemError_(f"no rule for {sorted(missing)}", "$.rule")
    allnames = [t.name for q in rule for t in rule[q]]
    if len(set(allnames)) != len(allnames):
        raise SystemError_("graph edge names must be unique", "$.rule")
    asserted = obj.get("asserted", {"aperiodic": False, "fpc": False})
    S = SubstSystem(fld, lam, protos, rule, asserted, name=name)
    if "adjacency" in obj:
        adj = set()
        for j, ent in enumerate(obj["adjacency"]):
            loc = f"$.adjacency[{j}]"
            if not (isinstance(ent, list) and len(ent) == 3 and ent[0] in seen and ent[1] in seen):
                raise SystemError_("adjacency entry must be [p, q, [dx, dy]]", loc)
            adj.add((ent[0], ent[1], Vec2(elem(ent[2][0], loc), elem(ent[2][1], loc))))
        S._cache[("closure",)] = frozenset(adj)
    return S


def loads_system(text: str, name: str = "") -> SubstSystem:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SystemError_(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    return parse_system(obj, name=name)


def load_system(path) -> SubstSystem:
    with open(path, encoding="utf-8") as fh:
        return loads_system(fh.read(), name=str(path))


# ---------------------------------------------------------------------------
# validation


def validate_system(S: SubstSystem) -> dict:
    report = {"prototiles": {}, "pass": True}
    lam = S.lam
    for p in S.prototiles:
        entry = {}
        probs = polygon_problems(p.shape)
        entry["polygon_ok"] = not probs
        entry["polygon_problems"] = probs
        entry["origin_interior"] = (not probs) and point_locate(p.shape, Vec2(S.field.zero(), S.field.zero())) is Location.INTERIOR
        if probs:
            entry["cover_ok"] = False
            entry["cover_problems"] = ["skipped: malformed prototile"]
        else:
            pieces = []
            bad = []
            for t in S.rule[p.id]:
                if polygon_problems(S.shape(t.proto)):
                    bad.append(f"piece {t.name} has malformed prototile {t.proto}")
                pieces.append((S.shape(t.proto), t.pos))
            cps = bad or cover_problems(p.shape.scale(lam), pieces)
            entry["cover_ok"] = not cps
            entry["cover_problems"] = cps
        ok = entry["polygon_ok"] and entry["origin_interior"] and entry["cover_ok"]
        entry["pass"] = ok
        report["prototiles"][p.id] = entry
        report["pass"] = report["pass"] and ok
    report["asserted"] = {"aperiodic": bool(S.asserted.get("aperiodic")), "fpc": bool(S.asserted.get("fpc"))}
    return report


# ---------------------------------------------------------------------------
# supertiles


def supertile_paths(S: SubstSystem, p: str, n: int) -> Iterator[tuple]:
    """Yield ``(path, Tile)`` for every tile of ``omega^n(p)``.

    ``path = (e_1, ..., e_n)`` are rule entries with ``r(e_n) = p`` and the
    tile puncture is ``sum lam^(k-1) e_k``.
    """
    zero = Vec2(S.field.zero(), S.field.zero())
    if n == 0:
        yield (), Tile(p, zero)
        return
    scale = S.lam_pow(n - 1)
    for rt in S.rule[p]:
        off = rt.pos * scale
        for path, t in supertile_paths(S, rt.proto, n - 1):
            yield path + (rt,), Tile(t.proto, t.pos + off)


def supertile(S: SubstSystem, p: str, n: int) -> Patch:
    return Patch([t for _, t in supertile_paths(S, p, n)])


def pruned_supertile(S: SubstSystem, p: str, n: int, offset: Vec2, keep) -> list:
    """Tiles of ``omega^n(p) + offset`` whose ancestors all satisfy
    ``keep(polygon)``; used to walk only a boundary layer."""
    out = []
    stack = [(p, offset, n)]
    while stack:
        q, pos, lvl = stack.pop()
        if not keep(S.tile_polygon((q, pos), lvl)):
            continue
        if lvl == 0:
            out.append(Tile(q, pos))
            continue
        scale = S.lam_pow(lvl - 1)
        for rt in S.rule[q]:
            stack.append((rt.proto, pos + rt.pos * scale, lvl - 1))
    return out


@dataclass
class SubstMatrix:
    ids: list
    rows: list  # rows[i][j] = number of tiles of type ids[i] in omega(ids[j])

    def as_lists(self):
        return [list(r) for r in self.rows]

    def power(self, k: int) -> "SubstMatrix":
        n = len(self.ids)
        out = [[int(i == j) for j in range(n)] for i in range(n)]
        for _ in range(k):
            out = [[sum(out[i][m] * self.rows[m][j] for m in range(n)) for j in range(n)] for i in range(n)]
        return SubstMatrix(list(self.ids), out)


def subst_matrix(S: SubstSystem) -> SubstMatrix:
    ids = S.ids
    idx = {p: i for i, p in enumerate(ids)}
    rows = [[0] * len(ids) for _ in ids]
    for q in ids:
        for t in S.rule[q]:
            rows[idx[t.proto]][idx[q]] += 1
    return SubstMatrix(ids, rows)


def check_primitive(S: SubstSystem):
    """Return ``(True, m)`` with the least m such that M^m > 0, else ``(False, None)``."""
    M = subst_matrix(S)
    n = len(M.ids)
    B = [[M.rows[i][j] > 0 for j in range(n)] for i in range(n)]
    cur = [row[:] for row in B]
    for m in range(1, n * n + 1):
        if all(all(r) for r in cur):
            return True, m
        cur = [[any(cur[i][k] and B[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
    return False, None


def power_system(S: SubstSystem, N: int) -> SubstSystem:
    """The system with rule omega^N and inflation lambda^N."""
    if N < 1:
        raise ValueError("power must be >= 1")
    if N == 1:
        return S
    rule = {}
    for q in S.ids:
        rule[q] = [RuleTile(t.proto, t.pos, "/".join(e.name for e in path))
                   for path, t in supertile_paths(S, q, N)]
    out = SubstSystem(S.field, S.lam_pow(N), S.prototiles, rule, S.asserted,
                      name=f"{S.name}^{N}" if S.name else "")
    # the tiling space is unchanged, so legal patterns carry over
    # the powers tile the same space; the closure is cheap on the base
    out._cache[("closure",)] = adjacency_closure(S)
    out._cache["base"] = S._cache.get("base", (S, 1))
    out._cache["base"] = (out._cache["base"][0], out._cache["base"][1] * N)
    return out


# ---------------------------------------------------------------------------
# legal edge-adjacent pairs


def _edge_adjacent(S, t1, t2, level=0) -> bool:
    P = S.tile_polygon(t1, level)
    Q = S.tile_polygon(t2, level)
    return shares_segment(P, Q) and not interiors_overlap(P, Q)


def adjacency_closure(S: SubstSystem, bound: int = 100000) -> frozenset:
    """Translation classes ``(p, q, d)`` of ordered edge-adjacent pairs
    ``(p + 0, q + d)`` that occur in some supertile."""
    key = ("closure",)
    if key in S._cache:
        return S._cache[key]
    zero = Vec2(S.field.zero(), S.field.zero())
    found = set()
    work = []

    def add(a: Tile, b: Tile):
        k = (a.proto, b.proto, b.pos - a.pos)
        if k not in found:
            found.add(k)
            work.append(k)
            if len(found) > bound:
                raise ClosureTooLarge(
                    f"adjacency closure exceeded {bound} classes; the finite pattern condition may fail")

    for q in S.ids:
        tiles = [Tile(t.proto, t.pos) for t in S.rule[q]]
        for i, a in enumerate(tiles):
            for j, b in enumerate(tiles):
                if i != j and _edge_adjacent(S, a, b):
                    add(a, b)
    while work:
        p, q, d = work.pop()
        PA = S.tile_polygon((p, zero), 1)
        PB = S.tile_polygon((q, d * S.lam), 1)
        ca = [Tile(rt.proto, rt.pos) for rt in S.rule[p]
              if shares_segment(S.tile_polygon((rt.proto, rt.pos)), PB)]
        cb = [Tile(rt.proto, rt.pos + d * S.lam) for rt in S.rule[q]
              if shares_segment(S.tile_polygon((rt.proto, rt.pos + d * S.lam)), PA)]
        for a in ca:
            for b in cb:
                if _edge_adjacent(S, a, b):
                    add(a, b)
                    add(b, a)
    result = frozenset(found)
    S._cache[key] = result
    return result


def neighbor_contexts(S: SubstSystem) -> dict:
    """``p -> sorted list of (q, d)`` edge-neighbours that can occur."""
    out = defaultdict(list)
    for p, q, d in adjacency_closure(S):
        out[p].append((q, d))
    return {p: sorted(out[p], key=lambda qd: (qd[0], float(qd[1].x), float(qd[1].y), qd[1].fmt())) for p in S.ids}


# ---------------------------------------------------------------------------
# border forcing


def _tile_key(t: Tile):
    return (t.proto, float(t.pos.x), float(t.pos.y), t.pos.fmt())


def forced_border(S: SubstSystem, p: str, k: int) -> tuple:
    """Outside tiles sharing an edge piece with ``lam^k p`` in any context.

    Returns ``(tiles, conflicts)``: the union over all legal neighbours of
    ``p`` of the level-0 tiles of their level-k supertiles that touch the
    boundary of ``lam^k p`` along a segment, and the list of pairs of those
    candidates that overlap (different contexts disagreeing).
    """
    key = ("forced", p, k)
    if key in S._cache:
        return S._cache[key]
    zero = Vec2(S.field.zero(), S.field.zero())
    big = S.tile_polygon((p, zero), k)
    cands = set()
    scale = S.lam_pow(k)
    for q, d in neighbor_contexts(S)[p]:
        for t in pruned_supertile(S, q, k, d * scale, lambda poly: shares_segment(poly, big)):
            cands.add(t)
    tiles = sorted(cands, key=_tile_key)
    conflicts = []
    # candidate pairs via a coarse float grid; the test itself is exact
    cell = max(float(abs(v.x)) + float(abs(v.y)) for q in S.ids for v in S.shape(q).vertices) * 2
    grid = defaultdict(list)
    for i, t in enumerate(tiles):
        grid[(int(float(t.pos.x) // cell), int(float(t.pos.y) // cell))].append(i)
    for i, t in enumerate(tiles):
        gx, gy = int(float(t.pos.x) // cell), int(float(t.pos.y) // cell)
        P = S.tile_polygon(t)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for j in grid.get((gx + dx, gy + dy), ()):
                    if j > i and interiors_overlap(P, S.tile_polygon(tiles[j])):
                        conflicts.append((t, tiles[j]))
    S._cache[key] = (tiles, conflicts)
    return tiles, conflicts


def forces_border_check(S: SubstSystem, k: int) -> bool:
    return all(not forced_border(S, p, k)[1] for p in S.ids)


def forcing_level(S: SubstSystem, cap: int = 4):
    """Least k <= cap at which the system forces its border, else None."""
    for k in range(1, cap + 1):
        if forces_border_check(S, k):
            return k
    return None


# ---------------------------------------------------------------------------
# collaring


def _corona(S, t: Tile, patch) -> frozenset:
    P = S.tile_polygon(t)
    out = []
    for u in patch:
        if u == t:
            continue
        Q = S.tile_polygon(u)
        if shares_segment(P, Q) and not interiors_overlap(P, Q):
            out.append((u.proto, u.pos - t.pos))
    return frozenset(out)


def _child_coronas(S, p: str, cor) -> list:
    """Coronas of the children of a collared tile ``p + 0`` with corona ``cor``.

    Every edge-neighbour of a child lies in the inflated corona, so the
    result is complete.
    """
    zero = Vec2(S.field.zero(), S.field.zero())
    patch = [Tile(p, zero)] + [Tile(q, d) for q, d in cor]
    kids = [Tile(rt.proto, t.pos * S.lam + rt.pos) for t in patch for rt in S.rule[t.proto]]
    # children of the centre come first, in rule order
    return [(rt, _corona(S, kids[i], kids)) for i, rt in enumerate(S.rule[p])]


def legal_coronas(S: SubstSystem, bound: int = 20000) -> dict:
    """``p -> set of coronas``; a corona is the frozenset of edge-neighbours
    ``(q, d)`` of a tile ``p + 0``."""
    key = ("coronas",)
    if key in S._cache:
        return S._cache[key]
    zero = Vec2(S.field.zero(), S.field.zero())
    found = set()
    work = []
    # seed: tiles of a supertile that sit strictly inside it
    for n in range(1, 6):
        for q in S.ids:
            big = S.tile_polygon((q, zero), n)
            tiles = supertile(S, q, n).tiles
            for t in tiles:
                poly = S.tile_polygon(t)
                if all(point_locate(big, v) is Location.INTERIOR for v in poly.vertices):
                    item = (t.proto, _corona(S, t, tiles))
                    if item not in found:
                        found.add(item)
                        work.append(item)
        if work:
            break
    if not work:
        raise ClosureTooLarge("no interior tile found in supertiles up to level 5")
    while work:
        p, cor = work.pop()
        for rt, ccor in _child_coronas(S, p, cor):
            item = (rt.proto, ccor)
            if item not in found:
                found.add(item)
                work.append(item)
                if len(found) > bound:
                    raise ClosureTooLarge(f"more than {bound} collared tiles")
    out = defaultdict(set)
    for p, cor in found:
        out[p].add(cor)
    S._cache[key] = dict(out)
    return S._cache[key]


def _corona_key(cor):
    return sorted((q, float(d.x), float(d.y), d.fmt()) for q, d in cor)


def collar_system(S: SubstSystem, bound: int = 20000) -> SubstSystem:
    """Label each tile by its first (edge) corona."""
    cors = legal_coronas(S, bound)
    labels = {}
    protos = []
    for p in S.ids:
        for i, cor in enumerate(sorted(cors.get(p, ()), key=_corona_key)):
            nid = f"{p}#{i}"
            labels[(p, cor)] = nid
            base = S.proto[p]
            protos.append(Prototile(nid, base.label, base.shape))
    rule = {}
    for (p, cor), nid in labels.items():
        short = [rt.name.rsplit(".", 1)[-1] for rt in S.rule[p]]
        if len(set(short)) != len(short):
            short = [rt.name for rt in S.rule[p]]
        rule[nid] = [RuleTile(labels[(rt.proto, ccor)], rt.pos, f"{nid}.{sn}")
                     for (rt, ccor), sn in zip(_child_coronas(S, p, cor), short)]
    order = {p.id: i for i, p in enumerate(protos)}
    out = SubstSystem(S.field, S.lam, protos, {k: rule[k] for k in sorted(rule, key=order.get)},
                      S.asserted, name=f"collar({S.name})" if S.name else "")
    out._cache["forget"] = {nid: p for (p, _), nid in labels.items()}
    return out


def forget_labels(S: SubstSystem) -> dict:
    """Map collared ids back to the original ids (identity if not collared)."""
    return S._cache.get("forget", {p: p for p in S.ids})


# ---------------------------------------------------------------------------
# hypotheses (P1)-(P4)


def child_edge_images(S: SubstSystem, q: str, rt: RuleTile) -> list:
    """For each edge ``a`` of the child ``rt``: the segment ``a + v`` inside
    ``lam q`` (parent coordinates scaled by lambda)."""
    return [seg.translate(rt.pos) for seg, _ in S.edges(rt.proto)]


def edge_pairs(S: SubstSystem, q: str, rt: RuleTile) -> list:
    """``A(e)`` for the graph edge ``rt`` in ``omega(q)``: index pairs ``(a, b)``
    with ``lam^-1 (a + e)`` inside edge ``b`` of ``q``."""
    key = ("pairs", rt.name)
    if key in S._cache:
        return S._cache[key]
    big_edges = [seg.scale(S.lam) for seg, _ in S.edges(q)]
    out = []
    for i, seg in enumerate(child_edge_images(S, q, rt)):
        for j, b in enumerate(big_edges):
            if segment_contains(b, seg):
                out.append((i, j))
    S._cache[key] = out
    return out


def _adjacent_idx(i: int, j: int, n: int) -> bool:
    return (i - j) % n in (1, n - 1)


def check_P1(S: SubstSystem) -> dict:
    viol = []
    for q in S.ids:
        big = S.shape(q).scale(S.lam)
        bedges = big.edge_segments()
        for rt in S.rule[q]:
            for i, seg in enumerate(child_edge_images(S, q, rt)):
                if any(segment_contains(b, seg) for b in bedges):
                    continue
                params = _split_params(seg, bedges)
                mid = seg.p0 + (seg.p1 - seg.p0) * Fraction(1, 2)
                if len(params) == 2 and point_locate(big, mid) is Location.INTERIOR:
                    continue
                viol.append({"parent": q, "edge": rt.name, "child_edge": i})
    return {"holds": not viol, "violations": viol}


def check_P2(S: SubstSystem) -> dict:
    viol = []
    for q in S.ids:
        for rt in S.rule[q]:
            prs = edge_pairs(S, q, rt)
            dirs = S.edges(rt.proto)
            for x in range(len(prs)):
                for y in range(x + 1, len(prs)):
                    (a1, b1), (a2, b2) = prs[x], prs[y]
                    if dirs[a1][1] == dirs[a2][1] and (a1, b1) != (a2, b2):
                        viol.append({"edge": rt.name, "pairs": [list(prs[x]), list(prs[y])]})
    return {"holds": not viol, "violations": viol}


def check_P3(S: SubstSystem) -> dict:
    viol = []
    for q in S.ids:
        nq = len(S.shape(q))
        for rt in S.rule[q]:
            prs = edge_pairs(S, q, rt)
            dirs = S.edges(rt.proto)
            npn = len(dirs)
            for x in range(len(prs)):
                for y in range(x + 1, len(prs)):
                    (a1, b1), (a2, b2) = prs[x], prs[y]
                    if dirs[a1][1] != dirs[a2][1]:
                        if not (_adjacent_idx(a1, a2, npn) and _adjacent_idx(b1, b2, nq)):
                            viol.append({"edge": rt.name, "pairs": [list(prs[x]), list(prs[y])]})
    return {"holds": not viol, "violations": viol}


def check_P4(S: SubstSystem) -> dict:
    lens = [(p, i, seg.length2()) for p in S.ids for i, (seg, _) in enumerate(S.edges(p))]
    shortest = min(lens, key=lambda t: (t[2], t[0], t[1]))
    longest = max(lens, key=lambda t: (t[2], t[0], t[1]))
    holds = S.lam * S.lam * shortest[2] > 4 * longest[2]
    return {
        "holds": bool(holds),
        "lambda_sq_min_len_sq": format_elem(S.lam * S.lam * shortest[2]),
        "four_max_len_sq": format_elem(4 * longest[2]),
        "violations": [] if holds else [{"short_edge": [shortest[0], shortest[1]],
                                         "long_edge": [longest[0], longest[1]]}],
    }


def hypothesis_report(S: SubstSystem) -> dict:
    prim, m = check_primitive(S)
    return {
        "primitive": {"holds": prim, "exponent": m},
        "P1": check_P1(S),
        "P2": check_P2(S),
        "P3": check_P3(S),
        "P4": check_P4(S),
        "asserted": {"aperiodic": bool(S.asserted.get("aperiodic")), "fpc": bool(S.asserted.get("fpc"))},
    }
