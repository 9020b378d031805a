"""Exact arithmetic over Q and real quadratic fields, plus planar predicates.

Every scalar in the library is either a :class:`fractions.Fraction` (for
systems over Q) or a :class:`QuadElem` ``a + b*sqrt(d)`` with rational
``a, b``.  Nothing here ever touches floating point when deciding a
predicate; floats only appear in :meth:`QuadElem.__float__` for rendering.
"""

from __future__ import annotations

import math
import re
from enum import Enum
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, NamedTuple, Sequence


class FieldError(ValueError):
    pass


def _squarefree(d: int) -> bool:
    if d < 2:
        return False
    k = 2
    while k * k <= d:
        if d % (k * k) == 0:
            return False
        k += 1
    return True


@total_ordering
class QuadElem:
    """An element ``a + b*sqrt(d)`` of a real quadratic field."""

    __slots__ = ("a", "b", "d")

    def __init__(self, a, b, d: int):
        self.a = Fraction(a)
        self.b = Fraction(b)
        self.d = d

    def _coerce(self, other):
        if isinstance(other, QuadElem):
            if other.d != self.d:
                raise FieldError(f"mixed fields sqrt({self.d}) and sqrt({other.d})")
            return other
        if isinstance(other, (int, Fraction)):
            return QuadElem(other, 0, self.d)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return QuadElem(self.a + o.a, self.b + o.b, self.d)

    __radd__ = __add__

    def __neg__(self):
        return QuadElem(-self.a, -self.b, self.d)

    def __pos__(self):
        return self

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return QuadElem(self.a - o.a, self.b - o.b, self.d)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return QuadElem(self.a * o.a + self.d * self.b * o.b,
                        self.a * o.b + self.b * o.a, self.d)

    __rmul__ = __mul__

    def conjugate(self):
        return QuadElem(self.a, -self.b, self.d)

    def norm(self) -> Fraction:
        return self.a * self.a - self.d * self.b * self.b

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        n = o.norm()
        if n == 0:
            raise ZeroDivisionError("division by zero in quadratic field")
        num = self * o.conjugate()
        return QuadElem(num.a / n, num.b / n, self.d)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o / self

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return QuadElem(1, 0, self.d) / (self ** (-k))
        out = QuadElem(1, 0, self.d)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def sign(self) -> int:
        sa = (self.a > 0) - (self.a < 0)
        sb = (self.b > 0) - (self.b < 0)
        if sa == sb or sb == 0:
            return sa
        if sa == 0:
            return sb
        # opposite signs: compare a^2 with d*b^2
        diff = self.a * self.a - self.d * self.b * self.b
        if diff > 0:
            return sa
        if diff < 0:
            return sb
        return 0

    def __eq__(self, other):
        if isinstance(other, QuadElem):
            return self.d == other.d and self.a == other.a and self.b == other.b
        if isinstance(other, (int, Fraction)):
            return self.b == 0 and self.a == other
        return NotImplemented

    def __lt__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return (self - o).sign() < 0

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __bool__(self):
        return bool(self.a) or bool(self.b)

    def __hash__(self):
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b, self.d))

    def __float__(self):
        return float(self.a) + float(self.b) * math.sqrt(self.d)

    def __repr__(self):
        return f"QuadElem({format_elem(self)!r})"

    def __str__(self):
        return format_elem(self)


def sign(x) -> int:
    if isinstance(x, QuadElem):
        return x.sign()
    return (x > 0) - (x < 0)


_RAT = r"[+-]?\d+(?:/\d+)?"
_ELEM_RE = re.compile(
    rf"^\s*(?:(?P<a>{_RAT})\s*)?(?:(?P<bs>[+-])?\s*(?:(?P<b>\d+(?:/\d+)?)\s*\*\s*)?sqrt\((?P<d>\d+)\))?\s*$"
)


class Field:
    """Number field descriptor: Q (``d == 0``) or Q(sqrt(d))."""

    def __init__(self, d: int = 0):
        if d and not _squarefree(d):
            raise FieldError(f"sqrt({d}): d must be a square-free integer > 1")
        self.d = d

    @classmethod
    def from_json(cls, obj) -> "Field":
        if obj == "rational":
            return cls(0)
        if isinstance(obj, dict) and set(obj) == {"sqrt"}:
            return cls(int(obj["sqrt"]))
        raise FieldError(f"unknown field descriptor {obj!r}")

    def to_json(self):
        return "rational" if self.d == 0 else {"sqrt": self.d}

    @property
    def rational(self) -> bool:
        return self.d == 0

    def elem(self, a, b=0):
        if self.d == 0:
            if b:
                raise FieldError("irrational part in a rational field")
            return Fraction(a)
        return QuadElem(a, b, self.d)

    def zero(self):
        return self.elem(0)

    def one(self):
        return self.elem(1)

    def parse(self, text) -> object:
        if isinstance(text, int):
            return self.elem(text)
        if not isinstance(text, str):
            raise FieldError(f"field element must be a string, got {text!r}")
        m = _ELEM_RE.match(text)
        if not m or (m.group("a") is None and m.group("d") is None):
            raise FieldError(f"malformed field element {text!r}")
        a = Fraction(m.group("a")) if m.group("a") else Fraction(0)
        if m.group("d") is None:
            return self.elem(a)
        d = int(m.group("d"))
        if d != self.d:
            raise FieldError(f"{text!r} uses sqrt({d}) in field {self.to_json()!r}")
        b = Fraction(m.group("b")) if m.group("b") else Fraction(1)
        if m.group("bs") == "-":
            b = -b
        return self.elem(a, b)

    def coerce(self, x):
        if self.d == 0:
            if isinstance(x, QuadElem):
                if x.b:
                    raise FieldError("irrational element in rational field")
                return x.a
            return Fraction(x)
        if isinstance(x, QuadElem):
            if x.d != self.d:
                raise FieldError("mixed fields")
            return x
        return QuadElem(x, 0, self.d)

    def __eq__(self, other):
        return isinstance(other, Field) and other.d == self.d

    def __hash__(self):
        return hash(("Field", self.d))

    def __repr__(self):
        return f"Field({self.d})"


def format_elem(x) -> str:
    """Canonical string: ``p/q`` or ``p/q+r/s*sqrt(d)``."""
    if isinstance(x, QuadElem):
        if x.b == 0:
            return str(x.a)
        b = x.b
        s = "-" if b < 0 else "+"
        mag = abs(b)
        bpart = f"sqrt({x.d})" if mag == 1 else f"{mag}*sqrt({x.d})"
        if x.a == 0:
            return ("-" if b < 0 else "") + bpart
        return f"{x.a}{s}{bpart}"
    return str(Fraction(x))


def to_float(x) -> float:
    return float(x)


class Vec2(NamedTuple):
    x: object
    y: object

    def __add__(self, o):
        return Vec2(self.x + o.x, self.y + o.y)

    def __sub__(self, o):
        return Vec2(self.x - o.x, self.y - o.y)

    def __neg__(self):
        return Vec2(-self.x, -self.y)

    def __mul__(self, c):
        return Vec2(self.x * c, self.y * c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return Vec2(self.x / c, self.y / c)

    def dot(self, o):
        return self.x * o.x + self.y * o.y

    def is_zero(self) -> bool:
        return not self.x and not self.y

    def fmt(self) -> str:
        return f"({format_elem(self.x)},{format_elem(self.y)})"


def det2(u: Vec2, v: Vec2):
    """``u.x*v.y - u.y*v.x``, exactly."""
    return u.x * v.y - u.y * v.x


class Direction:
    """A ray in the plane, stored as the vector scaled so that its first
    nonzero coordinate has absolute value one (sign is kept)."""

    __slots__ = ("vec",)

    def __init__(self, v: Vec2):
        if v.is_zero():
            raise ValueError("zero vector has no direction")
        lead = v.x if v.x else v.y
        self.vec = Vec2(v.x / abs(lead), v.y / abs(lead))

    def __neg__(self):
        return Direction(-self.vec)

    def __eq__(self, other):
        return isinstance(other, Direction) and self.vec == other.vec

    def __hash__(self):
        return hash(self.vec)

    def sort_key(self):
        return (float(self.vec.x), float(self.vec.y), format_elem(self.vec.x), format_elem(self.vec.y))

    def __lt__(self, other):
        return self.sort_key() < other.sort_key()

    def fmt(self) -> str:
        return self.vec.fmt()

    def __repr__(self):
        return f"Direction{self.fmt()}"


class Segment(NamedTuple):
    p0: Vec2
    p1: Vec2

    def vector(self) -> Vec2:
        return self.p1 - self.p0

    def translate(self, v: Vec2) -> "Segment":
        return Segment(self.p0 + v, self.p1 + v)

    def scale(self, c) -> "Segment":
        return Segment(self.p0 * c, self.p1 * c)

    def length2(self):
        d = self.p1 - self.p0
        return d.dot(d)


def on_segment(seg: Segment, p: Vec2) -> bool:
    d = seg.p1 - seg.p0
    w = p - seg.p0
    if det2(d, w) != 0:
        return False
    t = d.dot(w)
    return 0 <= t <= d.dot(d)


def segment_contains(outer: Segment, inner: Segment) -> bool:
    """True iff both endpoints of ``inner`` lie on the closed segment ``outer``."""
    return on_segment(outer, inner.p0) and on_segment(outer, inner.p1)


def overlap_length_positive(s1: Segment, s2: Segment) -> bool:
    """Collinear segments sharing a piece of positive length."""
    d = s1.p1 - s1.p0
    if det2(d, s2.p1 - s2.p0) != 0 or det2(d, s2.p0 - s1.p0) != 0:
        return False
    dd = d.dot(d)
    t0 = d.dot(s2.p0 - s1.p0)
    t1 = d.dot(s2.p1 - s1.p0)
    lo, hi = (t0, t1) if t0 < t1 else (t1, t0)
    return min(hi, dd) > max(lo, 0)


class Location(Enum):
    INTERIOR = "Interior"
    BOUNDARY = "Boundary"
    EXTERIOR = "Exterior"


class Polygon:
    """Simple counterclockwise polygon with vertices ``v_1..v_n``."""

    __slots__ = ("vertices", "_edges", "_bbox", "_area")

    def __init__(self, vertices: Sequence[Vec2], check: bool = True):
        self.vertices = tuple(Vec2(*v) for v in vertices)
        self._edges = None
        self._bbox = None
        self._area = None
        if check:
            problems = polygon_problems(self)
            if problems:
                raise ValueError("invalid polygon: " + "; ".join(problems))

    def __len__(self):
        return len(self.vertices)

    def __eq__(self, other):
        return isinstance(other, Polygon) and self.vertices == other.vertices

    def __hash__(self):
        return hash(self.vertices)

    def __repr__(self):
        return "Polygon[" + ", ".join(v.fmt() for v in self.vertices) + "]"

    def edge_segments(self) -> tuple:
        if self._edges is None:
            n = len(self.vertices)
            self._edges = tuple(Segment(self.vertices[i], self.vertices[(i + 1) % n]) for i in range(n))
        return self._edges

    def translate(self, v: Vec2) -> "Polygon":
        p = Polygon([w + v for w in self.vertices], check=False)
        return p

    def scale(self, c) -> "Polygon":
        return Polygon([w * c for w in self.vertices], check=False)

    def area2(self):
        """Twice the signed area."""
        if self._area is None:
            vs = self.vertices
            n = len(vs)
            acc = det2(vs[-1], vs[0])
            for i in range(n - 1):
                acc = acc + det2(vs[i], vs[i + 1])
            self._area = acc
        return self._area

    def area(self):
        return self.area2() / 2

    def bbox(self):
        if self._bbox is None:
            xs = [v.x for v in self.vertices]
            ys = [v.y for v in self.vertices]
            self._bbox = (min(xs), min(ys), max(xs), max(ys))
        return self._bbox


def _segments_intersect(s: Segment, t: Segment) -> bool:
    """Closed segments intersect (any common point)."""
    d1 = det2(t.p1 - t.p0, s.p0 - t.p0)
    d2 = det2(t.p1 - t.p0, s.p1 - t.p0)
    d3 = det2(s.p1 - s.p0, t.p0 - s.p0)
    d4 = det2(s.p1 - s.p0, t.p1 - s.p0)
    s1, s2, s3, s4 = sign(d1), sign(d2), sign(d3), sign(d4)
    if s1 * s2 < 0 and s3 * s4 < 0:
        return True
    return (on_segment(t, s.p0) or on_segment(t, s.p1)
            or on_segment(s, t.p0) or on_segment(s, t.p1))


def polygon_problems(poly: Polygon) -> list:
    vs = poly.vertices
    n = len(vs)
    out = []
    if n < 3:
        return [f"needs at least 3 vertices, got {n}"]
    if len(set(vs)) != n:
        out.append("repeated vertex")
        return out
    for i in range(n):
        a, b, c = vs[i - 1], vs[i], vs[(i + 1) % n]
        if det2(b - a, c - b) == 0:
            out.append(f"collinear consecutive vertices at index {i}")
    edges = poly.edge_segments()
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(edges[i], edges[j]):
                out.append(f"edges {i} and {j} intersect")
    if not out and sign(poly.area2()) <= 0:
        out.append("vertices are not counterclockwise")
    return out


def point_locate(poly: Polygon, p: Vec2) -> Location:
    """Exact interior/boundary/exterior classification (winding number)."""
    wn = 0
    for e in poly.edge_segments():
        a, b = e.p0, e.p1
        if on_segment(e, p):
            return Location.BOUNDARY
        if a.y <= p.y:
            if b.y > p.y and sign(det2(b - a, p - a)) > 0:
                wn += 1
        elif b.y <= p.y and sign(det2(b - a, p - a)) < 0:
            wn -= 1
    return Location.INTERIOR if wn else Location.EXTERIOR


def polygon_edges(poly: Polygon) -> list:
    """Edges ``a_i = v_i v_{i+1}`` with the ray of ``v_{i+1} - v_i``."""
    return [(s, Direction(s.vector())) for s in poly.edge_segments()]


def _split_params(s: Segment, others: Iterable[Segment]) -> list:
    """Sorted parameters in [0,1] where ``s`` meets any of ``others``."""
    d = s.p1 - s.p0
    params = [Fraction(0), Fraction(1)]
    for t in others:
        e = t.p1 - t.p0
        den = det2(d, e)
        w = t.p0 - s.p0
        if den != 0:
            u = det2(w, e) / den
            v = det2(w, d) / den
            if 0 <= u <= 1 and 0 <= v <= 1:
                params.append(u)
        elif det2(d, w) == 0:
            dd = d.dot(d)
            for q in (t.p0, t.p1):
                u = d.dot(q - s.p0) / dd
                if 0 <= u <= 1:
                    params.append(u)
    uniq = []
    for u in sorted(params):
        if not uniq or uniq[-1] != u:
            uniq.append(u)
    return uniq


def _bbox_overlap_open(b1, b2) -> bool:
    return b1[0] < b2[2] and b2[0] < b1[2] and b1[1] < b2[3] and b2[1] < b1[3]


def _boundary_probe_points(P: Polygon, Q: Polygon):
    qe = Q.edge_segments()
    for s in P.edge_segments():
        params = _split_params(s, qe)
        d = s.p1 - s.p0
        for u0, u1 in zip(params, params[1:]):
            yield s.p0 + d * ((u0 + u1) / 2)


def interiors_overlap(P: Polygon, Q: Polygon) -> bool:
    """True iff the two simple polygons share a set of positive area."""
    if not _bbox_overlap_open(P.bbox(), Q.bbox()):
        return False
    if set(P.vertices) == set(Q.vertices) and _same_cycle(P.vertices, Q.vertices):
        return True
    for pt in _boundary_probe_points(P, Q):
        if point_locate(Q, pt) is Location.INTERIOR:
            return True
    for pt in _boundary_probe_points(Q, P):
        if point_locate(P, pt) is Location.INTERIOR:
            return True
    for v in P.vertices:
        if point_locate(Q, v) is Location.INTERIOR:
            return True
    for v in Q.vertices:
        if point_locate(P, v) is Location.INTERIOR:
            return True
    return False


def _same_cycle(a, b) -> bool:
    if len(a) != len(b):
        return False
    try:
        k = b.index(a[0])
    except ValueError:
        return False
    return all(a[i] == b[(i + k) % len(b)] for i in range(len(a)))


def polygon_inside(inner: Polygon, outer: Polygon) -> bool:
    """Closed containment ``inner ⊆ outer`` for simple polygons."""
    ib, ob = inner.bbox(), outer.bbox()
    if ib[0] < ob[0] or ib[1] < ob[1] or ib[2] > ob[2] or ib[3] > ob[3]:
        return False
    for v in inner.vertices:
        if point_locate(outer, v) is Location.EXTERIOR:
            return False
    for pt in _boundary_probe_points(inner, outer):
        if point_locate(outer, pt) is Location.EXTERIOR:
            return False
    return True


def shares_segment(P: Polygon, Q: Polygon) -> bool:
    """Boundaries of P and Q share a piece of positive length."""
    pb, qb = P.bbox(), Q.bbox()
    if pb[0] > qb[2] or qb[0] > pb[2] or pb[1] > qb[3] or qb[1] > pb[3]:
        return False
    for s in P.edge_segments():
        for t in Q.edge_segments():
            if overlap_length_positive(s, t):
                return True
    return False


def cover_check(big: Polygon, pieces: Sequence) -> bool:
    """``pieces`` is a list of ``(Polygon, translation)``.  True iff they lie
    in ``big``, have pairwise disjoint interiors and their areas add up."""
    return not cover_problems(big, pieces)


def cover_problems(big: Polygon, pieces: Sequence) -> list:
    placed = [poly.translate(v) for poly, v in pieces]
    out = []
    for i, P in enumerate(placed):
        if not polygon_inside(P, big):
            out.append(f"piece {i} is not inside the inflated prototile")
    for i in range(len(placed)):
        for j in range(i + 1, len(placed)):
            if interiors_overlap(placed[i], placed[j]):
                out.append(f"pieces {i} and {j} overlap")
    total = sum((P.area2() for P in placed), big.area2() * 0)
    if total != big.area2():
        out.append(f"area mismatch: pieces {format_elem(total / 2)} vs {format_elem(big.area())}")
    return out
