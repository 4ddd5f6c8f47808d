"""Polygonal obstacles, piecewise-linear cracks, support functions and hulls."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

SCENE_VERSION = 1


class GeometryError(ValueError):
    """Invalid shape, scene file, or half-plane system."""


@dataclass(frozen=True)
class Direction:
    theta: float

    @classmethod
    def from_vector(cls, v: Sequence[float]) -> "Direction":
        return cls(math.atan2(v[1], v[0]))

    @property
    def vec(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta)])

    @property
    def perp(self) -> np.ndarray:
        # (w2, -w1)
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([s, -c])

    @property
    def complex(self) -> complex:
        return complex(math.cos(self.theta), math.sin(self.theta))


def _as_vertices(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GeometryError(f"expected a list of [x, y] pairs, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("non-finite vertex coordinates")
    return arr


def signed_area(loop: np.ndarray) -> float:
    x, y = loop[:, 0], loop[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_intersect(p1, p2, q1, q2, eps=1e-14) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    def on_seg(a, b, c):
        return min(a[0], b[0]) - eps <= c[0] <= max(a[0], b[0]) + eps and min(a[1], b[1]) - eps <= c[1] <= max(a[1], b[1]) + eps

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and ((d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)):
        return True
    if abs(d1) <= eps and on_seg(q1, q2, p1):
        return True
    if abs(d2) <= eps and on_seg(q1, q2, p2):
        return True
    if abs(d3) <= eps and on_seg(p1, p2, q1):
        return True
    if abs(d4) <= eps and on_seg(p1, p2, q2):
        return True
    return False


def _edges(chain: np.ndarray, closed: bool):
    n = len(chain)
    stop = n if closed else n - 1
    return [(chain[i], chain[(i + 1) % n]) for i in range(stop)]


def _chain_is_simple(chain: np.ndarray, closed: bool) -> bool:
    edges = _edges(chain, closed)
    n = len(edges)
    for i in range(n):
        for j in range(i + 1, n):
            adjacent = j == i + 1 or (closed and i == 0 and j == n - 1)
            if adjacent:
                continue
            if _segments_intersect(*edges[i], *edges[j]):
                return False
    return True


def _point_in_polygon(p, loop) -> bool:
    inside = False
    n = len(loop)
    for i in range(n):
        a, b = loop[i], loop[(i + 1) % n]
        if (a[1] > p[1]) != (b[1] > p[1]):
            xc = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            if xc > p[0]:
                inside = not inside
    return inside


@dataclass(frozen=True, eq=False)
class PolygonalObstacle:
    """Union of disjoint simple polygons, stored counterclockwise."""

    components: tuple
    R: float

    def __init__(self, components, R: float):
        loops = []
        for comp in components:
            loop = _as_vertices(comp)
            if len(loop) < 3:
                raise GeometryError("a polygon needs at least 3 vertices")
            area = signed_area(loop)
            if abs(area) < 1e-14:
                raise GeometryError("degenerate polygon with zero area")
            if area < 0:
                loop = loop[::-1].copy()
            if not _chain_is_simple(loop, closed=True):
                raise GeometryError("polygon is self-intersecting")
            loop.setflags(write=False)
            loops.append(loop)
        if not loops:
            raise GeometryError("empty obstacle")
        for i in range(len(loops)):
            for j in range(i + 1, len(loops)):
                a, b = loops[i], loops[j]
                if any(_segments_intersect(*e, *f) for e in _edges(a, True) for f in _edges(b, True)):
                    raise GeometryError(f"components {i} and {j} touch or overlap")
                if _point_in_polygon(a[0], b) or _point_in_polygon(b[0], a):
                    raise GeometryError(f"components {i} and {j} are nested")
        R = float(R)
        allv = np.vstack(loops)
        if not np.all(np.hypot(allv[:, 0], allv[:, 1]) < R):
            raise GeometryError(f"vertices must lie strictly inside the disc of radius R={R}")
        object.__setattr__(self, "components", tuple(loops))
        object.__setattr__(self, "R", R)

    kind = "obstacle"

    @property
    def vertices(self) -> np.ndarray:
        return np.vstack(self.components)

    def contains(self, p) -> bool:
        return any(_point_in_polygon(np.asarray(p, float), loop) for loop in self.components)

    def translated(self, b) -> "PolygonalObstacle":
        b = np.asarray(b, float)
        return PolygonalObstacle([c + b for c in self.components], self.R + float(np.hypot(*b)))


@dataclass(frozen=True, eq=False)
class CrackSet:
    """Disjoint piecewise-linear open arcs; ``witness`` is a simple polygon whose boundary holds every arc."""

    segments: tuple
    R: float
    witness: np.ndarray | None = None

    def __init__(self, segments, R: float, witness=None):
        chains = []
        for seg in segments:
            chain = _as_vertices(seg)
            if len(chain) < 2:
                raise GeometryError("an arc needs at least 2 vertices")
            if np.any(np.hypot(*np.diff(chain, axis=0).T) < 1e-14):
                raise GeometryError("repeated vertex in arc")
            if not _chain_is_simple(chain, closed=False):
                raise GeometryError("arc is self-intersecting")
            chain.setflags(write=False)
            chains.append(chain)
        if not chains:
            raise GeometryError("empty crack set")
        for i in range(len(chains)):
            for j in range(i + 1, len(chains)):
                if any(_segments_intersect(*e, *f) for e in _edges(chains[i], False) for f in _edges(chains[j], False)):
                    raise GeometryError(f"arcs {i} and {j} intersect")
        w = None
        if witness is not None:
            w = _as_vertices(witness)
            if signed_area(w) < 0:
                w = w[::-1].copy()
            if not _chain_is_simple(w, closed=True):
                raise GeometryError("witness polygon is self-intersecting")
            for chain in chains:
                for p in chain:
                    if _distance_to_loop(p, w) > 1e-9:
                        raise GeometryError("crack vertex does not lie on the witness polygon boundary")
            w.setflags(write=False)
        R = float(R)
        allv = np.vstack(chains + ([w] if w is not None else []))
        if not np.all(np.hypot(allv[:, 0], allv[:, 1]) < R):
            raise GeometryError(f"crack must lie strictly inside the disc of radius R={R}")
        object.__setattr__(self, "segments", tuple(chains))
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "witness", w)

    kind = "crack"

    @property
    def vertices(self) -> np.ndarray:
        return np.vstack(self.segments)

    @property
    def endpoints(self) -> np.ndarray:
        return np.array([p for c in self.segments for p in (c[0], c[-1])])


Shape = Union[PolygonalObstacle, CrackSet]


def _distance_to_loop(p, loop) -> float:
    best = math.inf
    for a, b in _edges(loop, True):
        ab = b - a
        t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
        best = min(best, float(np.hypot(*(a + t * ab - p))))
    return best


def _edges_of(shape: Shape):
    if isinstance(shape, PolygonalObstacle):
        return [e for loop in shape.components for e in _edges(loop, True)]
    return [e for chain in shape.segments for e in _edges(chain, False)]


def diameter(shape: Shape) -> float:
    v = shape.vertices
    d = v[:, None, :] - v[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


def support_function(shape: Shape, omega: Direction) -> float:
    v = shape.vertices
    if v.size == 0:
        raise GeometryError("empty shape")
    return float(np.max(v @ omega.vec))


def is_regular_direction(shape: Shape, omega: Direction, tol: float = 1e-9) -> bool:
    """True iff the supporting line in direction ``omega`` touches the shape at one point."""
    w = omega.vec
    h = support_function(shape, omega)
    scale = tol * max(diameter(shape), 1e-300)
    v = shape.vertices
    attaining = np.unique(np.round(v[h - v @ w <= scale], 14), axis=0)
    if len(attaining) != 1:
        return False
    for a, b in _edges_of(shape):
        if h - a @ w <= scale and h - b @ w <= scale:
            return False
    return True


@dataclass
class HullResult:
    vertices: np.ndarray
    empty: bool = False
    violated: list = field(default_factory=list)

    @property
    def area(self) -> float:
        return abs(signed_area(self.vertices)) if len(self.vertices) >= 3 else 0.0


def _clip(poly: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon against {x . normal <= offset}."""
    if len(poly) == 0:
        return poly
    out = []
    vals = poly @ normal - offset
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        vp, vq = vals[i], vals[(i + 1) % n]
        if vp <= 0:
            out.append(p)
        if (vp < 0 < vq) or (vq < 0 < vp):
            t = vp / (vp - vq)
            out.append(p + t * (q - p))
    return np.array(out) if out else np.zeros((0, 2))


def hull_from_support(samples, R: float | None = None) -> HullResult:
    """Intersect the half-planes {x . w <= h} inside a box of side 4R.

    ``samples`` is a sequence of (Direction, h). Returns the counterclockwise
    vertex loop, or an empty result listing the indices of the constraints
    that emptied the region.
    """
    samples = list(samples)
    if len(samples) < 3:
        raise GeometryError("need at least 3 support samples")
    ws = np.array([d.vec for d, _ in samples])
    hs = np.array([float(h) for _, h in samples])
    if not np.all(np.isfinite(hs)):
        raise GeometryError("non-finite support value")
    angles = np.sort(np.mod([d.theta for d, _ in samples], 2 * np.pi))
    gaps = np.diff(np.concatenate([angles, [angles[0] + 2 * np.pi]]))
    if gaps.max() >= np.pi:
        raise GeometryError("directions do not span the circle; intersection is unbounded")
    if R is None:
        R = max(1.0, float(np.max(np.abs(hs))))
    half = 2.0 * R
    poly = np.array([[-half, -half], [half, -half], [half, half], [-half, half]])
    for i, (w, h) in enumerate(zip(ws, hs)):
        clipped = _clip(poly, w, h)
        if len(clipped) < 3 or abs(signed_area(clipped)) < 1e-12 * R * R:
            return HullResult(np.zeros((0, 2)), empty=True, violated=_conflict_set(ws, hs, i, half, R))
        poly = clipped
    poly = _dedupe(poly, 1e-12 * R)
    if signed_area(poly) < 0:
        poly = poly[::-1]
    return HullResult(poly)


def _feasible(ws, hs, idx, half, R) -> bool:
    poly = np.array([[-half, -half], [half, -half], [half, half], [-half, half]])
    for j in idx:
        poly = _clip(poly, ws[j], hs[j])
        if len(poly) < 3 or abs(signed_area(poly)) < 1e-12 * R * R:
            return False
    return True


def _conflict_set(ws, hs, i, half, R) -> list:
    """Constraint i plus every earlier constraint whose removal restores feasibility."""
    earlier = list(range(i))
    return [j for j in earlier if _feasible(ws, hs, [m for m in earlier if m != j] + [i], half, R)] + [i]


def _dedupe(poly: np.ndarray, tol: float) -> np.ndarray:
    keep = [poly[0]]
    for p in poly[1:]:
        if np.hypot(*(p - keep[-1])) > tol:
            keep.append(p)
    if len(keep) > 1 and np.hypot(*(keep[0] - keep[-1])) <= tol:
        keep.pop()
    return np.array(keep)


def polygon_support(vertices: np.ndarray, omega: Direction) -> float:
    return float(np.max(np.asarray(vertices) @ omega.vec))


def hausdorff_polygons(a: np.ndarray, b: np.ndarray, samples_per_edge: int = 200) -> float:
    """Hausdorff distance between two polygon boundaries (densely sampled)."""

    def densify(loop):
        pts = []
        for p, q in _edges(np.asarray(loop, float), True):
            t = np.linspace(0.0, 1.0, samples_per_edge, endpoint=False)[:, None]
            pts.append(p + t * (q - p))
        return np.vstack(pts)

    def directed(src, loop):
        best = np.full(len(src), np.inf)
        for p, q in _edges(np.asarray(loop, float), True):
            pq = q - p
            L2 = pq @ pq
            # a one-point loop has a zero-length edge
            t = np.clip(((src - p) @ pq) / L2, 0.0, 1.0) if L2 > 0 else np.zeros(len(src))
            d = np.hypot(*(p + t[:, None] * pq - src).T)
            best = np.minimum(best, d)
        return best.max()

    return float(max(directed(densify(a), b), directed(densify(b), a)))


def convex_hull(points) -> np.ndarray:
    """Andrew's monotone chain; counterclockwise, no repeated endpoint."""
    pts = sorted(map(tuple, np.asarray(points, float)))
    if len(pts) <= 2:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def regular_polygon(n: int, radius: float = 1.0, phase: float = 0.0, center=(0.0, 0.0)) -> np.ndarray:
    t = phase + 2 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


def rotate(points, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.asarray(points, float) @ np.array([[c, s], [-s, c]])


# --- scene files -----------------------------------------------------------

def scene_to_dict(shape: Shape) -> dict:
    if isinstance(shape, PolygonalObstacle):
        comps = [c.tolist() for c in shape.components]
        out = {"version": SCENE_VERSION, "type": "obstacle", "components": comps, "R": shape.R}
    else:
        comps = [c.tolist() for c in shape.segments]
        out = {"version": SCENE_VERSION, "type": "crack", "components": comps, "R": shape.R}
        if shape.witness is not None:
            out["witness"] = shape.witness.tolist()
    return out


def scene_from_dict(doc: dict) -> Shape:
    if not isinstance(doc, dict):
        raise GeometryError("scene document must be a JSON object")
    for key in ("version", "type", "components", "R"):
        if key not in doc:
            raise GeometryError(f"scene is missing field {key!r}")
    if doc["version"] != SCENE_VERSION:
        raise GeometryError(f"unsupported scene version {doc['version']!r}")
    try:
        R = float(doc["R"])
    except (TypeError, ValueError):
        raise GeometryError("field 'R' must be a number") from None
    if doc["type"] == "obstacle":
        return PolygonalObstacle(doc["components"], R)
    if doc["type"] == "crack":
        return CrackSet(doc["components"], R, witness=doc.get("witness"))
    raise GeometryError(f"field 'type' must be 'obstacle' or 'crack', got {doc['type']!r}")


def read_scene(path) -> Shape:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GeometryError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return scene_from_dict(doc)


def write_scene(shape: Shape, path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(shape), indent=2) + "\n")
