"""Symmetric convex bodies as composable support-function ASTs.

A body is evaluated only through its support function h(y) = sup over the
body of <x, y>; inclusion A inside s*B is equivalent to h_A <= s*h_B, so
inclusion tests reduce to maximizing the ratio of two support functions
over the unit sphere.  Dimensions <= 3 get exhaustive polar grids with a
Lipschitz-corrected certificate; higher dimensions get multistart ascent
clearly labeled non-certified.  No vertex or facet enumeration anywhere.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatchError, InvalidArgumentError
from .randcore import LinearMap, SeedStream, Subspace


def dual_exponent(p: float) -> float:
    """q with 1/p + 1/q = 1; p = 1 maps to infinity."""
    if p < 1:
        raise InvalidArgumentError("exponent must satisfy p >= 1")
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def _lq(values: np.ndarray, q: float) -> np.ndarray:
    """l_q norm along axis 0 of a non-negative array; q = inf is the max."""
    if math.isinf(q):
        return values.max(axis=0)
    if q == 1:
        return values.sum(axis=0)
    return (values ** q).sum(axis=0) ** (1.0 / q)


# ---------------------------------------------------------------------------
# body variants


class Body:
    """Base class; concrete variants implement the _batch/_point recursion."""

    dim: int

    def support(self, y: np.ndarray) -> float:
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != self.dim:
            raise DimensionMismatchError(
                f"direction dim {y.shape[0]} != body dim {self.dim}")
        return float(self.support_batch(y[:, None])[0])

    def support_batch(self, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        if Y.shape[0] != self.dim:
            raise DimensionMismatchError(
                f"direction dim {Y.shape[0]} != body dim {self.dim}")
        return self._batch(Y)

    def support_point(self, y: np.ndarray) -> tuple[float, np.ndarray]:
        """Support value together with a maximizing body point (a subgradient)."""
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != self.dim:
            raise DimensionMismatchError(
                f"direction dim {y.shape[0]} != body dim {self.dim}")
        h, p = self._point(y)
        return float(h), p

    def support_points_batch(self, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(values, points): one maximizing body point per direction column."""
        Y = np.asarray(Y, dtype=float)
        if Y.shape[0] != self.dim:
            raise DimensionMismatchError(
                f"direction dim {Y.shape[0]} != body dim {self.dim}")
        return self._points(Y)

    def _points(self, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # generic fallback: column-by-column
        vals = np.empty(Y.shape[1])
        pts = np.empty_like(Y)
        for i in range(Y.shape[1]):
            h, p = self._point(Y[:, i])
            vals[i], pts[:, i] = h, p
        return vals, pts

    def circumradius_bound(self) -> float:
        """Certified upper bound on max_{|y|=1} h(y); also a Lipschitz constant."""
        r = getattr(self, "_cr_cache", None)
        if r is None:
            r = self._cr_upper()
            self._cr_cache = r
        return r

    def circumradius_exact(self) -> Optional[float]:
        """Exact circumradius when the AST admits one, else None."""
        return None

    # subclass hooks
    def _batch(self, Y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _point(self, y: np.ndarray) -> tuple[float, np.ndarray]:
        raise NotImplementedError

    def _cr_upper(self) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(eq=False)
class EuclideanBall(Body):
    """radius * (B_2 intersected with an optional subspace)."""

    radius: float
    dim: int
    subspace: Optional[Subspace] = None

    def __post_init__(self):
        if self.radius < 0:
            raise InvalidArgumentError("radius must be non-negative")
        if self.subspace is not None and self.subspace.ambient_dim != self.dim:
            raise DimensionMismatchError("subspace ambient dim mismatch")

    def _proj(self, Y):
        if self.subspace is None:
            return Y
        f = self.subspace.frame
        return f @ (f.T @ Y)

    def _batch(self, Y):
        return self.radius * np.linalg.norm(self._proj(Y), axis=0)

    def _point(self, y):
        py = self._proj(y[:, None])[:, 0]
        n = np.linalg.norm(py)
        if n == 0.0:
            return 0.0, np.zeros(self.dim)
        return self.radius * n, (self.radius / n) * py

    def _points(self, Y):
        P = self._proj(Y)
        n = np.linalg.norm(P, axis=0)
        vals = self.radius * n
        safe = np.where(n > 0, n, 1.0)
        return vals, (self.radius / safe) * P * (n > 0)

    def _cr_upper(self):
        return self.radius

    def circumradius_exact(self):
        return self.radius

    def to_dict(self):
        return {"variant": "euclidean_ball", "radius": self.radius, "dim": self.dim,
                "subspace": None if self.subspace is None
                else self.subspace.frame.tolist()}


@dataclass(eq=False)
class EllipsoidImage(Body):
    """Image of the unit Euclidean ball under a linear map."""

    map: LinearMap

    def __post_init__(self):
        self.dim = self.map.rows

    def _batch(self, Y):
        return np.linalg.norm(self.map.entries.T @ Y, axis=0)

    def _point(self, y):
        v = self.map.entries.T @ y
        n = np.linalg.norm(v)
        if n == 0.0:
            return 0.0, np.zeros(self.dim)
        return n, self.map.entries @ (v / n)

    def _points(self, Y):
        V = self.map.entries.T @ Y
        n = np.linalg.norm(V, axis=0)
        safe = np.where(n > 0, n, 1.0)
        return n, self.map.entries @ (V / safe) * (n > 0)

    def _cr_upper(self):
        return float(np.linalg.svd(self.map.entries, compute_uv=False)[0])

    def circumradius_exact(self):
        return self._cr_upper()

    def to_dict(self):
        return {"variant": "ellipsoid_image", "map": self.map.entries.tolist()}


@dataclass(eq=False)
class BaseNorm(Body):
    """scale * (unit ball of l_r) or scale * conv(+-vertices)."""

    kind: str
    dim: int
    r: Optional[float] = None
    vertices: Optional[np.ndarray] = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind == "lr":
            if self.r is None or self.r < 1:
                raise InvalidArgumentError("lr ball needs r >= 1")
            self._rstar = dual_exponent(self.r)
        elif self.kind == "polytope":
            v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
            if v.shape[1] != self.dim:
                v = v.T
            if v.shape[1] != self.dim:
                raise DimensionMismatchError("vertices must be lists of dim entries")
            self.vertices = v  # one vertex per row; reflected pair implied
        else:
            raise InvalidArgumentError(f"unknown BaseNorm kind {self.kind!r}")

    def _batch(self, Y):
        if self.kind == "lr":
            rs = self._rstar
            if math.isinf(rs):
                h = np.abs(Y).max(axis=0)
            elif rs == 1:
                h = np.abs(Y).sum(axis=0)
            else:
                h = (np.abs(Y) ** rs).sum(axis=0) ** (1.0 / rs)
            return self.scale * h
        return self.scale * np.abs(self.vertices @ Y).max(axis=0)

    def _point(self, y):
        if self.kind == "polytope":
            vals = self.vertices @ y
            i = int(np.argmax(np.abs(vals)))
            pt = self.scale * np.sign(vals[i]) * self.vertices[i]
            return self.scale * abs(vals[i]), pt
        rs = self._rstar
        ay = np.abs(y)
        if math.isinf(rs):
            i = int(np.argmax(ay))
            pt = np.zeros(self.dim)
            pt[i] = self.scale * np.sign(y[i])
            return self.scale * ay[i], pt
        if rs == 1:
            return self.scale * ay.sum(), self.scale * np.sign(y)
        h = (ay ** rs).sum() ** (1.0 / rs)
        if h == 0.0:
            return 0.0, np.zeros(self.dim)
        x = np.sign(y) * (ay / h) ** (rs - 1.0)
        return self.scale * h, self.scale * x

    def _points(self, Y):
        if self.kind == "polytope":
            prods = self.vertices @ Y
            idx = np.argmax(np.abs(prods), axis=1) if prods.ndim == 1 else \
                np.argmax(np.abs(prods), axis=0)
            signs = np.sign(prods[idx, np.arange(Y.shape[1])])
            signs[signs == 0] = 1.0
            vals = self.scale * np.abs(prods[idx, np.arange(Y.shape[1])])
            pts = self.scale * (signs * self.vertices[idx].T)
            return vals, pts
        rs = self._rstar
        ay = np.abs(Y)
        sy = np.sign(Y)
        if math.isinf(rs):
            idx = np.argmax(ay, axis=0)
            cols = np.arange(Y.shape[1])
            vals = self.scale * ay[idx, cols]
            pts = np.zeros_like(Y)
            pts[idx, cols] = self.scale * np.where(sy[idx, cols] == 0, 1.0,
                                                   sy[idx, cols])
            return vals, pts
        if rs == 1:
            return self.scale * ay.sum(axis=0), self.scale * sy
        h = (ay ** rs).sum(axis=0) ** (1.0 / rs)
        safe = np.where(h > 0, h, 1.0)
        pts = self.scale * sy * (ay / safe) ** (rs - 1.0) * (h > 0)
        return self.scale * h, pts

    def _cr_upper(self):
        if self.kind == "polytope":
            return self.scale * float(np.linalg.norm(self.vertices, axis=1).max())
        rs = self._rstar
        if rs >= 2:
            return self.scale
        return self.scale * self.dim ** (1.0 / rs - 0.5)

    def circumradius_exact(self):
        return self._cr_upper()

    def to_dict(self):
        return {"variant": "base_norm", "kind": self.kind, "dim": self.dim,
                "r": self.r, "scale": self.scale,
                "vertices": None if self.vertices is None else self.vertices.tolist()}


@dataclass(eq=False)
class PConvexHull(Body):
    """p-convex hull of the parts; support is the l_q norm of part supports.

    For p = 1 this is the ordinary convex hull and q = infinity (the max).
    """

    p: float
    parts: list[Body]

    def __post_init__(self):
        if not self.parts:
            raise InvalidArgumentError("PConvexHull needs at least one part")
        dims = {b.dim for b in self.parts}
        if len(dims) != 1:
            raise DimensionMismatchError("parts live in different dimensions")
        self.dim = self.parts[0].dim
        self.q = dual_exponent(self.p)

    def _batch(self, Y):
        vals = np.stack([b._batch(Y) for b in self.parts])
        return _lq(vals, self.q)

    def _point(self, y):
        hs, pts = zip(*(b._point(y) for b in self.parts))
        v = np.array(hs)
        if math.isinf(self.q):
            i = int(np.argmax(v))
            return float(v[i]), pts[i]
        total = _lq(v[:, None], self.q)[0]
        if total == 0.0:
            return 0.0, np.zeros(self.dim)
        t = (v / total) ** (self.q - 1.0)
        return float(total), sum(ti * np.asarray(pi) for ti, pi in zip(t, pts))

    def _points(self, Y):
        pairs = [b._points(Y) for b in self.parts]
        vals = np.stack([v for v, _ in pairs])
        totals = _lq(vals, self.q)
        if math.isinf(self.q):
            idx = np.argmax(vals, axis=0)
            pts = np.empty_like(Y)
            for part_i, (_, p) in enumerate(pairs):
                sel = idx == part_i
                pts[:, sel] = p[:, sel]
            return totals, pts
        safe = np.where(totals > 0, totals, 1.0)
        t = (vals / safe) ** (self.q - 1.0) * (totals > 0)
        pts = np.zeros_like(Y)
        for part_i, (_, p) in enumerate(pairs):
            pts += t[part_i] * p
        return totals, pts

    def _cr_upper(self):
        radii = np.array([b.circumradius_bound() for b in self.parts])
        return float(_lq(radii[:, None], self.q)[0])

    def circumradius_exact(self):
        if self.p != 1:
            return None
        radii = [b.circumradius_exact() for b in self.parts]
        if any(r is None for r in radii):
            return None
        return max(radii)

    def to_dict(self):
        return {"variant": "p_convex_hull", "p": self.p,
                "parts": [b.to_dict() for b in self.parts]}


@dataclass(eq=False)
class MinkowskiSum(Body):
    """Minkowski sum; supports add exactly."""

    parts: list[Body]

    def __post_init__(self):
        if not self.parts:
            raise InvalidArgumentError("MinkowskiSum needs at least one part")
        dims = {b.dim for b in self.parts}
        if len(dims) != 1:
            raise DimensionMismatchError("parts live in different dimensions")
        self.dim = self.parts[0].dim

    def _batch(self, Y):
        out = self.parts[0]._batch(Y).copy()
        for b in self.parts[1:]:
            out += b._batch(Y)
        return out

    def _point(self, y):
        h = 0.0
        pt = np.zeros(self.dim)
        for b in self.parts:
            hb, pb = b._point(y)
            h += hb
            pt += pb
        return h, pt

    def _points(self, Y):
        vals = np.zeros(Y.shape[1])
        pts = np.zeros_like(Y)
        for b in self.parts:
            v, p = b._points(Y)
            vals += v
            pts += p
        return vals, pts

    def _cr_upper(self):
        return float(sum(b.circumradius_bound() for b in self.parts))

    def circumradius_exact(self):
        if len(self.parts) == 1:
            return self.parts[0].circumradius_exact()
        return None

    def to_dict(self):
        return {"variant": "minkowski_sum", "parts": [b.to_dict() for b in self.parts]}


@dataclass(eq=False)
class LinearImage(Body):
    """Image of the inner body under a linear map; h(y) = h_inner(map^T y)."""

    map: LinearMap
    inner: Body

    def __post_init__(self):
        if self.map.cols != self.inner.dim:
            raise DimensionMismatchError(
                f"map cols {self.map.cols} != inner dim {self.inner.dim}")
        self.dim = self.map.rows

    def _batch(self, Y):
        return self.inner._batch(self.map.entries.T @ Y)

    def _point(self, y):
        h, p = self.inner._point(self.map.entries.T @ y)
        return h, self.map.entries @ p

    def _points(self, Y):
        v, p = self.inner._points(self.map.entries.T @ Y)
        return v, self.map.entries @ p

    def _cr_upper(self):
        exact = self.circumradius_exact()
        if exact is not None:
            return exact
        smax = float(np.linalg.svd(self.map.entries, compute_uv=False)[0])
        return smax * self.inner.circumradius_bound()

    def circumradius_exact(self):
        return _exact_radius_of_image(self.map.entries, self.inner)

    def to_dict(self):
        return {"variant": "linear_image", "map": self.map.entries.tolist(),
                "inner": self.inner.to_dict()}


@dataclass(eq=False)
class Rotated(Body):
    """Image under an orthogonal map, kept distinct to mark rotation sums."""

    u: LinearMap
    inner: Body

    def __post_init__(self):
        if self.u.rows != self.u.cols or self.u.cols != self.inner.dim:
            raise DimensionMismatchError("rotation must be square and match inner dim")
        self.dim = self.u.rows

    def _batch(self, Y):
        return self.inner._batch(self.u.entries.T @ Y)

    def _point(self, y):
        h, p = self.inner._point(self.u.entries.T @ y)
        return h, self.u.entries @ p

    def _points(self, Y):
        v, p = self.inner._points(self.u.entries.T @ Y)
        return v, self.u.entries @ p

    def _cr_upper(self):
        return self.inner.circumradius_bound()

    def circumradius_exact(self):
        return self.inner.circumradius_exact()

    def to_dict(self):
        return {"variant": "rotated", "u": self.u.entries.tolist(),
                "inner": self.inner.to_dict()}


def _exact_radius_of_image(mat: np.ndarray, inner: Body) -> Optional[float]:
    """Exact circumradius of mat(inner) for AST shapes where it is computable."""
    if isinstance(inner, EuclideanBall):
        if inner.subspace is None:
            s = np.linalg.svd(mat, compute_uv=False)
            return inner.radius * float(s[0]) if s.size else 0.0
        s = np.linalg.svd(mat @ inner.subspace.frame, compute_uv=False)
        return inner.radius * float(s[0]) if s.size else 0.0
    if isinstance(inner, EllipsoidImage):
        s = np.linalg.svd(mat @ inner.map.entries, compute_uv=False)
        return float(s[0]) if s.size else 0.0
    if isinstance(inner, BaseNorm) and inner.kind == "polytope":
        return inner.scale * float(
            np.linalg.norm(mat @ inner.vertices.T, axis=0).max())
    if isinstance(inner, (LinearImage, Rotated)):
        m2 = inner.u.entries if isinstance(inner, Rotated) else inner.map.entries
        return _exact_radius_of_image(mat @ m2, inner.inner)
    if isinstance(inner, PConvexHull) and inner.p == 1:
        radii = [_exact_radius_of_image(mat, b) for b in inner.parts]
        if any(r is None for r in radii):
            return None
        return max(radii)
    return None


# convenience constructors ---------------------------------------------------

def ball(dim: int, radius: float = 1.0, subspace: Optional[Subspace] = None) -> Body:
    return EuclideanBall(radius, dim, subspace)


def lr_ball(dim: int, r: float, scale: float = 1.0) -> Body:
    return BaseNorm("lr", dim, r=r, scale=scale)


def polytope(vertices, scale: float = 1.0) -> Body:
    v = np.atleast_2d(np.asarray(vertices, dtype=float))
    return BaseNorm("polytope", v.shape[1], vertices=v, scale=scale)


def segment(v) -> Body:
    """conv{-v, +v}."""
    v = np.asarray(v, dtype=float).reshape(1, -1)
    return BaseNorm("polytope", v.shape[1], vertices=v)


def restrict(body: Body, s: Subspace) -> Body:
    """Body expressed in the frame coordinates of the subspace.

    For the left side of an inclusion this is the orthogonal projection;
    for right-hand sides contained in the subspace (or Euclidean balls) it
    coincides with the section.
    """
    if body.dim != s.ambient_dim:
        raise DimensionMismatchError("body and subspace ambient dims differ")
    return LinearImage(LinearMap.from_array(s.frame.T), body)


def body_from_dict(d: dict) -> Body:
    v = d["variant"]
    if v == "euclidean_ball":
        sub = d.get("subspace")
        s = None if sub is None else Subspace(len(sub), np.asarray(sub))
        return EuclideanBall(d["radius"], d["dim"], s)
    if v == "ellipsoid_image":
        return EllipsoidImage(LinearMap.from_array(np.asarray(d["map"])))
    if v == "base_norm":
        vert = d.get("vertices")
        return BaseNorm(d["kind"], d["dim"], r=d.get("r"),
                        vertices=None if vert is None else np.asarray(vert),
                        scale=d.get("scale", 1.0))
    if v == "p_convex_hull":
        return PConvexHull(d["p"], [body_from_dict(x) for x in d["parts"]])
    if v == "minkowski_sum":
        return MinkowskiSum([body_from_dict(x) for x in d["parts"]])
    if v == "linear_image":
        return LinearImage(LinearMap.from_array(np.asarray(d["map"])),
                           body_from_dict(d["inner"]))
    if v == "rotated":
        return Rotated(LinearMap.from_array(np.asarray(d["u"])),
                       body_from_dict(d["inner"]))
    raise InvalidArgumentError(f"unknown body variant {v!r}")


# ---------------------------------------------------------------------------
# direction sets

def polar_grid(dim: int, pitch: float) -> tuple[np.ndarray, float]:
    """Unit directions covering S^(dim-1), with a chordal covering radius.

    Only dims 1..3 are supported; this is the certified-search workhorse.
    Returns (directions as dim x M array, covering radius theta).
    """
    if dim == 1:
        return np.array([[1.0, -1.0]]), 0.0
    if dim == 2:
        m = max(8, int(math.ceil(2 * math.pi / pitch)))
        ang = np.arange(m) * (2 * math.pi / m)
        theta = 2 * math.sin(math.pi / (2 * m))
        return np.vstack([np.cos(ang), np.sin(ang)]), theta
    if dim == 3:
        bands = max(4, int(math.ceil(math.pi / pitch)))
        dirs = []
        for i in range(bands):
            phi = (i + 0.5) * math.pi / bands
            m_i = max(6, int(math.ceil(2 * math.pi * math.sin(phi) / pitch)))
            lam = np.arange(m_i) * (2 * math.pi / m_i)
            dirs.append(np.vstack([np.sin(phi) * np.cos(lam),
                                   np.sin(phi) * np.sin(lam),
                                   np.full(m_i, math.cos(phi))]))
        # geodesic covering <= pitch/2 (bands) + pitch/2 (within band)
        return np.hstack(dirs), pitch
    raise InvalidArgumentError("polar_grid supports dimensions 1..3 only")


def quasirandom_directions(dim: int, count: int, seed: SeedStream) -> np.ndarray:
    """Deterministic pseudo-uniform unit directions (normalized Gaussians)."""
    g = seed.rng().standard_normal((dim, count))
    n = np.linalg.norm(g, axis=0)
    n[n == 0] = 1.0
    return g / n


# ---------------------------------------------------------------------------
# certified and heuristic ratio maximization

@dataclass(frozen=True)
class Budget:
    """Direction/iteration budget for certification searches."""

    grid_pitch: float = 2 * math.pi / 512
    multistart: int = 24
    iters: int = 150
    points: int = 1024
    seed: int = 20240
    refine_rounds: int = 60


GRID_EXHAUSTIVE = "grid-exhaustive"
MULTISTART = "multistart-heuristic"


@dataclass
class InclusionReport:
    """Outcome of an inclusion test h_A <= scale * h_B over certification directions."""

    holds: bool
    measured_ratio: float
    certified_ratio: float
    certification: str
    directions_used: int
    pitch: float
    worst_direction: Optional[np.ndarray] = None

    def to_dict(self):
        return {"holds": bool(self.holds),
                "measured_ratio": float(self.measured_ratio),
                "certified_ratio": float(self.certified_ratio),
                "certification": self.certification,
                "directions_used": int(self.directions_used),
                "pitch": float(self.pitch)}


def _ascend_ratio(num, den, y0: np.ndarray, iters: int) -> tuple[float, np.ndarray]:
    """Maximize num(y)/den(y) over the unit sphere by projected subgradient steps.

    num/den are callables returning (value, subgradient).  The ratio of a
    linear (or convex positively homogeneous) numerator over a convex
    positively homogeneous denominator has convex superlevel cones, so
    local ascent with restarts is an effective global strategy.
    """
    y = y0 / np.linalg.norm(y0)
    a, ga = num(y)
    b, gb = den(y)
    if b <= 0.0:
        return (math.inf if a > 0 else 0.0), y
    f = a / b
    step = 0.5
    for _ in range(iters):
        grad = (ga * b - a * gb) / (b * b)
        grad = grad - np.dot(grad, y) * y
        gn = np.linalg.norm(grad)
        if gn < 1e-16:
            break
        improved = False
        while step > 1e-12:
            cand = y + step * grad / gn
            cand /= np.linalg.norm(cand)
            a2, ga2 = num(cand)
            b2, gb2 = den(cand)
            if b2 <= 0.0:
                return (math.inf if a2 > 0 else f), cand
            f2 = a2 / b2
            if f2 > f + 1e-17:
                y, a, ga, b, gb, f = cand, a2, ga2, b2, gb2, f2
                improved = True
                step = min(step * 2.0, 0.5)
                break
            step *= 0.5
        if not improved:
            break
    return f, y


def _support_funcs(body: Body):
    def f(y):
        h, p = body._point(y)
        return h, p
    return f


def _sphere_max_power(body: Body, starts: np.ndarray,
                      iters: int) -> tuple[float, np.ndarray]:
    """max of h over the unit sphere via batched support-point iteration.

    Each step maps y to its support point normalized; h is nondecreasing
    along the iteration, so tracking the best visited value suffices.
    """
    Y = starts / np.linalg.norm(starts, axis=0)
    best_val, best_y = -math.inf, Y[:, 0].copy()
    prev = -math.inf
    for _ in range(min(iters, 40)):
        vals, pts = body.support_points_batch(Y)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_y = float(vals[i]), Y[:, i].copy()
        if best_val <= prev * (1 + 1e-14):
            break
        prev = best_val
        norms = np.linalg.norm(pts, axis=0)
        live = norms > 1e-300
        if not np.any(live):
            break
        Y = np.where(live, pts / np.where(live, norms, 1.0), Y)
    return best_val, best_y


def check_inclusion(a: Body, b: Body, restrict_to: Optional[Subspace] = None,
                    scale: float = 1.0, budget: Budget = Budget(),
                    tol: float = 1e-9) -> InclusionReport:
    """Test a inside scale*b by certification directions.

    With restrict_to, both bodies are first expressed in the subspace frame
    (projection on the left; section semantics for subspace-supported or
    Euclidean-ball right-hand sides).  Dim <= 3 uses an exhaustive polar
    grid whose maximum is inflated by a Lipschitz correction, so `holds`
    is a rigorous verdict; higher dims use multistart ascent and are
    labeled non-certified.
    """
    if scale <= 0:
        raise InvalidArgumentError("scale must be positive")
    if restrict_to is not None:
        a = restrict(a, restrict_to)
        b = restrict(b, restrict_to)
    if a.dim != b.dim:
        raise DimensionMismatchError("bodies live in different dimensions")
    d = a.dim

    if d <= 3:
        Y, theta = polar_grid(d, budget.grid_pitch)
        ha = a.support_batch(Y)
        hb = b.support_batch(Y) * scale
        ra = a.circumradius_bound()
        rb = b.circumradius_bound() * scale
        floor = 1e-14 * max(ra, rb, 1.0)
        degenerate = hb <= floor
        if np.any(degenerate & (ha > floor)):
            i = int(np.argmax(np.where(degenerate, ha, -np.inf)))
            return InclusionReport(False, math.inf, math.inf, GRID_EXHAUSTIVE,
                                   Y.shape[1], budget.grid_pitch, Y[:, i])
        ok = ~degenerate
        ratios = np.where(ok, ha / np.where(ok, hb, 1.0), 0.0)
        i = int(np.argmax(ratios))
        measured = float(ratios[i])
        denom = hb - rb * theta
        if np.any(ok & (denom <= 0)):
            certified = math.inf
        else:
            certified = float(np.max(np.where(ok, (ha + ra * theta)
                                              / np.where(ok, denom, 1.0), 0.0)))
        certified = max(certified, measured)
        return InclusionReport(certified <= 1.0 + tol, measured, certified,
                               GRID_EXHAUSTIVE, Y.shape[1], budget.grid_pitch,
                               Y[:, i])

    # heuristic path
    seeds = quasirandom_directions(d, budget.multistart, SeedStream(budget.seed, 7))
    axes = np.eye(d)[:, : min(d, 8)]
    starts = np.hstack([seeds, axes])
    if isinstance(b, EuclideanBall) and b.subspace is None and b.radius > 0:
        # sup h_A(y)/|y| is the circumradius of A; batched support-point
        # power iteration is monotone in h on unit directions
        val, y = _sphere_max_power(a, starts, budget.iters)
        ratio = val / (scale * b.radius)
        return InclusionReport(ratio <= 1.0 + tol, ratio, ratio, MULTISTART,
                               starts.shape[1], math.nan, y)
    ha_s = a.support_batch(starts)
    hb_s = b.support_batch(starts) * scale
    floor = 1e-14 * max(a.circumradius_bound(), b.circumradius_bound() * scale, 1.0)
    if np.any((hb_s <= floor) & (ha_s > floor)):
        i = int(np.argmax(np.where(hb_s <= floor, ha_s, -np.inf)))
        return InclusionReport(False, math.inf, math.inf, MULTISTART,
                               starts.shape[1], math.nan, starts[:, i])
    order = np.argsort(-(ha_s / np.maximum(hb_s, floor)))
    best, best_y = -math.inf, starts[:, 0]
    fa, fb = _support_funcs(a), _support_funcs(b)

    def den(y):
        h, p = fb(y)
        return h * scale, p * scale

    n_starts = min(budget.multistart, starts.shape[1])
    for j in order[:n_starts]:
        f, y = _ascend_ratio(fa, den, starts[:, j], budget.iters)
        if f > best:
            best, best_y = f, y
        if math.isinf(best):
            break
    return InclusionReport(best <= 1.0 + tol, best, best, MULTISTART,
                           starts.shape[1], math.nan, best_y)


# ---------------------------------------------------------------------------
# gauge (Minkowski functional) via duality

@dataclass
class GaugeBounds:
    """Enclosure of the Minkowski functional, with the best dual direction."""

    lower: float
    upper: float
    best_direction: Optional[np.ndarray]
    certification: str

    def __iter__(self):
        return iter((self.lower, self.upper))


def span_basis(body: Body, seed: SeedStream, extra: int = 16) -> np.ndarray:
    """Orthonormal basis of the body's linear span, from sampled support points."""
    d = body.dim
    dirs = quasirandom_directions(d, 3 * d + extra, seed)
    pts = np.stack([body._point(dirs[:, i])[1] for i in range(dirs.shape[1])], axis=1)
    u, s, _ = np.linalg.svd(pts, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((d, 0))
    keep = s > 1e-10 * s[0]
    return u[:, keep]


def _gauge_bb_2d(body: Body, x: np.ndarray, tol: float,
                 rounds: int) -> tuple[float, float, np.ndarray]:
    """Branch-and-bound over angle intervals for the 2-D polar maximization."""
    R = body.circumradius_bound()
    nx = np.linalg.norm(x)

    def upper_of(dc: float, half: float, hc: float) -> float:
        # on the arc, <x,y> <= <x,c> + |x|*chord and h >= h(c) - R*chord
        chord = 2 * math.sin(min(half, math.pi) / 2)
        den = hc - R * chord
        if den <= 0:
            return math.inf
        return (dc + nx * chord) / den

    m0 = 256
    ang = np.arange(m0) * (2 * math.pi / m0)
    Y = np.vstack([np.cos(ang), np.sin(ang)])
    h = body.support_batch(Y)
    dots = x @ Y
    ok = h > 1e-14 * max(R, 1.0)
    vals = np.where(ok, dots / np.where(ok, h, 1.0), -math.inf)
    lower = float(np.max(vals))
    best_y = Y[:, int(np.argmax(vals))]
    half0 = math.pi / m0
    heap = []
    for i in range(m0):
        ub = upper_of(float(dots[i]), half0, float(h[i]))
        if ub > lower:
            heapq.heappush(heap, (-ub, float(ang[i]), half0))
    converged = not heap
    for _ in range(rounds * 64):
        if not heap:
            converged = True
            break
        neg_ub, c, half = heapq.heappop(heap)
        if -neg_ub <= lower * (1 + tol) + 1e-300:
            converged = True
            heap = []
            break
        for child in (c - half / 2, c + half / 2):
            y = np.array([math.cos(child), math.sin(child)])
            hc = body.support(y)
            dc = float(x @ y)
            if hc > 0 and dc / hc > lower:
                lower, best_y = dc / hc, y
            ub = upper_of(dc, half / 2, hc)
            if ub > lower:
                heapq.heappush(heap, (-ub, child, half / 2))
    if converged:
        upper = lower * (1 + tol)
    else:
        upper = max(lower, -heap[0][0]) if heap else lower * (1 + tol)
    return lower, upper, best_y


def gauge(body: Body, x: np.ndarray, tol: float = 1e-6,
          budget: Budget = Budget()) -> GaugeBounds:
    """Enclosure of ||x||_body = sup over directions of <x,y>/h(y).

    The maximization is carried out in the body's span; if x falls outside
    that span the gauge is infinite and signaled explicitly.  Dimension <= 3
    (after span reduction) yields a certified interval of relative width
    <= tol; beyond that, multistart ascent with a heuristic upper pad.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != body.dim:
        raise DimensionMismatchError("x dim != body dim")
    nx = np.linalg.norm(x)
    if nx == 0.0:
        return GaugeBounds(0.0, 0.0, None, GRID_EXHAUSTIVE)

    basis = span_basis(body, SeedStream(budget.seed, 11))
    if basis.shape[1] < body.dim:
        resid = x - basis @ (basis.T @ x)
        if np.linalg.norm(resid) > 1e-9 * nx:
            return GaugeBounds(math.inf, math.inf, None, GRID_EXHAUSTIVE)
        sub = Subspace(body.dim, basis)
        inner = restrict(body, sub)
        res = gauge(inner, basis.T @ x, tol=tol, budget=budget)
        lift = None if res.best_direction is None else basis @ res.best_direction
        return GaugeBounds(res.lower, res.upper, lift, res.certification)

    d = body.dim
    if d == 1:
        h = body.support(np.array([1.0]))
        if h <= 0:
            return GaugeBounds(math.inf, math.inf, None, GRID_EXHAUSTIVE)
        v = abs(x[0]) / h
        return GaugeBounds(v * (1 - 1e-15), v * (1 + 1e-15),
                           np.array([math.copysign(1.0, x[0])]), GRID_EXHAUSTIVE)
    if d == 2:
        lo, hi, y = _gauge_bb_2d(body, x, tol, budget.refine_rounds)
        cert = GRID_EXHAUSTIVE if hi <= lo * (1 + tol) + 1e-300 else MULTISTART
        return GaugeBounds(lo, hi, y, cert)
    if d == 3:
        # coarse grid, then local cap refinement around the incumbent
        Y, theta = polar_grid(3, budget.grid_pitch)
        h = body.support_batch(Y)
        R = body.circumradius_bound()
        ok = h > 1e-14 * max(R, 1.0)
        vals = np.where(ok, (x @ Y) / np.where(ok, h, 1.0), -math.inf)
        i = int(np.argmax(vals))
        lower, best_y = float(vals[i]), Y[:, i]
        pitch = budget.grid_pitch
        for _ in range(budget.refine_rounds):
            den = h - R * theta
            if np.all(~ok | (den > 0)):
                upper = float(np.max(np.where(ok, (x @ Y + nx * theta)
                                              / np.where(ok & (den > 0), den, 1.0),
                                              -math.inf)))
            else:
                upper = math.inf
            if upper <= lower * (1 + tol):
                return GaugeBounds(lower, upper, best_y, GRID_EXHAUSTIVE)
            # refine globally at half pitch; costs grow 4x per round, so cap
            pitch /= 2.0
            if 2 * math.pi / pitch > 4e3:
                break
            Y, theta = polar_grid(3, pitch)
            h = body.support_batch(Y)
            ok = h > 1e-14 * max(R, 1.0)
            vals = np.where(ok, (x @ Y) / np.where(ok, h, 1.0), -math.inf)
            i = int(np.argmax(vals))
            if vals[i] > lower:
                lower, best_y = float(vals[i]), Y[:, i]
        # fall back on ascent polish + padded interval
        f, y = _ascend_ratio(lambda v: (float(x @ v), x), _support_funcs(body),
                             best_y, budget.iters)
        lower = max(lower, f)
        return GaugeBounds(lower, lower * (1 + tol), y, MULTISTART)

    starts = quasirandom_directions(d, budget.multistart, SeedStream(budget.seed, 13))
    starts = np.hstack([x[:, None] / nx, starts])
    best, best_y = -math.inf, starts[:, 0]
    fden = _support_funcs(body)
    for j in range(starts.shape[1]):
        f, y = _ascend_ratio(lambda v: (float(x @ v), x), fden,
                             starts[:, j], budget.iters)
        if f > best:
            best, best_y = f, y
    return GaugeBounds(best, best * (1 + tol), best_y, MULTISTART)


def section_isomorphism_constant(body: Body, s: Subspace, reference: Body,
                                 budget: Budget = Budget(),
                                 tol: float = 1e-6) -> tuple[float, float]:
    """Enclosure of the least lambda with reference inside body-section inside
    lambda*reference, computed from two inclusion reports.

    The upper end comes from the projection of the body onto the subspace,
    which dominates the section; the lower end is 1 once the reference is
    verified inside the body.  Endpoints carry a +-tol slack.
    """
    inner = check_inclusion(reference, body, scale=1.0, budget=budget, tol=tol)
    if not inner.holds and inner.measured_ratio > 1.0 + 10 * tol:
        return math.inf, math.inf
    outer = check_inclusion(body, reference, restrict_to=s, scale=1.0,
                            budget=budget, tol=tol)
    hi = max(1.0, outer.measured_ratio) + tol
    lo = max(inner.measured_ratio, 1.0) - tol
    return lo, hi
