"""Discrete Laplace-Beltrami operator on raw point clouds.

Tangent planes are fitted by local PCA, Voronoi areas are measured on those
planes, and a Gaussian heat-kernel stiffness matrix is assembled from them.
No mesh connectivity is needed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DegenerateNeighborhood,
    DimensionMismatch,
    EigensolveFailure,
    IndexOutOfRange,
    NonPositiveArea,
    ValidationError,
)

__all__ = [
    "PointCloud",
    "LboParams",
    "TangentFrame",
    "LboPair",
    "HarmonicBasis",
    "mean_nn_distance",
    "default_params",
    "estimate_tangent_frame",
    "voronoi_cell_area",
    "polygon_disk_area",
    "build_lbo",
    "solve_harmonic_basis",
]


@dataclass(frozen=True)
class PointCloud:
    """N points in 3D plus optional per-point scalar channels."""

    points: np.ndarray
    channels: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise DimensionMismatch(f"points must be (N, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        chans = {}
        for name, values in self.channels.items():
            arr = np.array(values)
            if arr.shape[0] != pts.shape[0]:
                raise DimensionMismatch(f"channel {name!r} has {arr.shape[0]} rows, expected {pts.shape[0]}")
            arr.setflags(write=False)
            chans[name] = arr
        object.__setattr__(self, "channels", chans)

    def __len__(self):
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class LboParams:
    """Heat-kernel bandwidth ``t`` and neighborhood radii.

    ``r_neighbor`` is the tangent-plane fitting radius and ``delta`` the
    radius used both for the Voronoi neighborhood and for truncating the
    Gaussian weights.
    """

    t: float
    r_neighbor: float
    delta: float
    k_fallback: int = 8

    def __post_init__(self):
        if not (self.t > 0 and math.isfinite(self.t)):
            raise ValidationError(f"t must be positive, got {self.t}")
        if not (self.r_neighbor > 0 and math.isfinite(self.r_neighbor)):
            raise ValidationError(f"r_neighbor must be positive, got {self.r_neighbor}")
        if not (self.delta >= self.r_neighbor and math.isfinite(self.delta)):
            raise ValidationError(f"delta ({self.delta}) must be >= r_neighbor ({self.r_neighbor})")
        if int(self.k_fallback) != self.k_fallback or self.k_fallback < 3:
            raise ValidationError(f"k_fallback must be an integer >= 3, got {self.k_fallback}")


@dataclass(frozen=True)
class TangentFrame:
    origin: np.ndarray
    basis_u: np.ndarray
    basis_v: np.ndarray
    normal: np.ndarray

    def project(self, pts):
        """In-plane (u, v) coordinates of ``pts`` relative to the frame origin."""
        d = np.atleast_2d(pts) - self.origin
        return np.column_stack([d @ self.basis_u, d @ self.basis_v])


@dataclass(frozen=True)
class LboPair:
    """Stiffness ``Q`` (N x N, symmetric, zero row sums) and the mass diagonal."""

    Q: np.ndarray
    mass: np.ndarray

    @property
    def B(self) -> np.ndarray:
        return np.diag(self.mass)

    @property
    def n(self) -> int:
        return self.mass.shape[0]


@dataclass(frozen=True)
class HarmonicBasis:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def H(self) -> np.ndarray:
        return self.eigenvectors


def _as_cloud(cloud) -> PointCloud:
    return cloud if isinstance(cloud, PointCloud) else PointCloud(np.asarray(cloud, dtype=float))


def mean_nn_distance(cloud) -> float:
    pts = _as_cloud(cloud).points
    if pts.shape[0] < 2:
        raise ValidationError("need at least 2 points for a nearest-neighbor distance")
    d, _ = cKDTree(pts).query(pts, k=2)
    return float(np.mean(d[:, 1]))


def default_params(cloud, k_fallback: int = 8) -> LboParams:
    """Bandwidth and radii scaled by the mean nearest-neighbor spacing."""
    dbar = mean_nn_distance(cloud)
    if dbar <= 0:
        raise ValidationError("mean nearest-neighbor distance is zero (duplicate points)")
    return LboParams(t=dbar**2 / 4.0, r_neighbor=3.0 * dbar, delta=3.0 * dbar, k_fallback=k_fallback)


def _neighborhood(tree, pts, index, radius, k_fallback, *, ball=None):
    """Indices of the radius ball around ``index`` excluding the point itself.

    Falls back to the ``k_fallback`` nearest neighbors when the ball holds
    fewer than 3 other points.
    """
    if ball is None:
        ball = tree.query_ball_point(pts[index], radius)
    nbrs = [j for j in ball if j != index]
    if len(nbrs) < 3:
        k = min(k_fallback + 1, pts.shape[0])
        _, idx = tree.query(pts[index], k=k)
        nbrs = [int(j) for j in np.atleast_1d(idx) if j != index]
    return np.asarray(sorted(nbrs), dtype=int)


def _sign_fix(vec):
    k = int(np.argmax(np.abs(vec)))
    return -vec if vec[k] < 0 else vec


def _fit_frame(nbhd, index) -> TangentFrame:
    origin = nbhd.mean(axis=0)
    centered = nbhd - origin
    cov = centered.T @ centered
    w, vecs = np.linalg.eigh(cov)
    scale = w[2]
    if scale <= 0 or w[1] <= 1e-12 * scale:
        raise DegenerateNeighborhood(index)
    normal = _sign_fix(vecs[:, 0])
    u = _sign_fix(vecs[:, 2])
    v = np.cross(normal, u)
    return TangentFrame(origin=origin, basis_u=u, basis_v=v, normal=normal)


def estimate_tangent_frame(cloud, index: int, params: LboParams, *, tree=None) -> TangentFrame:
    """Least-squares plane through the r-neighborhood of one point.

    The normal is the direction of least variance of the centered
    neighborhood (point included).
    """
    cloud = _as_cloud(cloud)
    pts = cloud.points
    if not 0 <= index < pts.shape[0]:
        raise IndexOutOfRange(f"index {index} out of range for {pts.shape[0]} points")
    if pts.shape[0] < 4:
        raise DegenerateNeighborhood(index, "need at least 4 points")
    tree = tree if tree is not None else cKDTree(pts)
    nbrs = _neighborhood(tree, pts, index, params.r_neighbor, params.k_fallback)
    nbhd = np.vstack([pts[index], pts[nbrs]])
    return _fit_frame(nbhd, index)


def _clip_halfplane(poly, nx, ny, c):
    """Keep the part of ``poly`` with nx*x + ny*y <= c (Sutherland-Hodgman)."""
    out = []
    n = len(poly)
    if n == 0:
        return out
    px, py = poly[-1]
    pin = nx * px + ny * py <= c
    for qx, qy in poly:
        qin = nx * qx + ny * qy <= c
        if qin != pin:
            dp = nx * px + ny * py - c
            dq = nx * qx + ny * qy - c
            s = dp / (dp - dq)
            out.append((px + s * (qx - px), py + s * (qy - py)))
        if qin:
            out.append((qx, qy))
        px, py, pin = qx, qy, qin
    return out


def _segment_disk_area(ax, ay, bx, by, r):
    """Signed area of triangle (origin, a, b) intersected with the disk of radius r."""
    dx, dy = bx - ax, by - ay
    A = dx * dx + dy * dy
    if A == 0.0:
        return 0.0
    Bq = 2.0 * (ax * dx + ay * dy)
    C = ax * ax + ay * ay - r * r
    cuts = [0.0]
    disc = Bq * Bq - 4.0 * A * C
    if disc > 0:
        sq = math.sqrt(disc)
        for s in ((-Bq - sq) / (2 * A), (-Bq + sq) / (2 * A)):
            if 0.0 < s < 1.0:
                cuts.append(s)
    cuts.append(1.0)
    total = 0.0
    for s0, s1 in zip(cuts[:-1], cuts[1:]):
        p = (ax + s0 * dx, ay + s0 * dy)
        q = (ax + s1 * dx, ay + s1 * dy)
        sm = 0.5 * (s0 + s1)
        mx, my = ax + sm * dx, ay + sm * dy
        cross = p[0] * q[1] - p[1] * q[0]
        # strict test: a tangent edge touches the circle only at its midpoint
        if mx * mx + my * my < r * r:
            total += 0.5 * cross
        else:
            dot = p[0] * q[0] + p[1] * q[1]
            total += 0.5 * r * r * math.atan2(cross, dot)
    return total


def polygon_disk_area(poly, r: float) -> float:
    """Area of a convex polygon (around the origin) intersected with the disk |x| <= r."""
    poly = [(float(x), float(y)) for x, y in poly]
    if len(poly) < 3:
        return 0.0
    rr = r * r
    if all(x * x + y * y <= rr for x, y in poly):
        area = 0.0
        for (ax, ay), (bx, by) in zip(poly, poly[1:] + poly[:1]):
            area += ax * by - ay * bx
        return abs(0.5 * area)
    area = 0.0
    for (ax, ay), (bx, by) in zip(poly, poly[1:] + poly[:1]):
        area += _segment_disk_area(ax, ay, bx, by, r)
    return abs(area)


def _voronoi_area_2d(center, others, delta, index):
    rel = np.asarray(others, dtype=float) - center
    dist2 = np.einsum("ij,ij->i", rel, rel)
    keep = dist2 > (1e-12 * delta) ** 2
    rel, dist2 = rel[keep], dist2[keep]
    if rel.shape[0] == 0:
        raise DegenerateNeighborhood(index, "all projected neighbors coincide with the point")
    order = np.argsort(dist2, kind="stable")
    poly = [(-delta, -delta), (delta, -delta), (delta, delta), (-delta, delta)]
    max_r2 = 2.0 * delta * delta
    for k in order:
        # bisector at distance |q|/2 cannot cut a polygon inside that radius
        if dist2[k] >= 4.0 * max_r2:
            break
        qx, qy = rel[k]
        poly = _clip_halfplane(poly, qx, qy, 0.5 * dist2[k])
        if not poly:
            break
        max_r2 = max(x * x + y * y for x, y in poly)
    return polygon_disk_area(poly, delta)


def voronoi_cell_area(cloud, index: int, frame: TangentFrame, params: LboParams, *, tree=None) -> float:
    """Area of the point's Voronoi cell on its tangent plane, clipped to radius ``delta``."""
    cloud = _as_cloud(cloud)
    pts = cloud.points
    if not 0 <= index < pts.shape[0]:
        raise IndexOutOfRange(f"index {index} out of range for {pts.shape[0]} points")
    tree = tree if tree is not None else cKDTree(pts)
    nbrs = _neighborhood(tree, pts, index, params.delta, params.k_fallback)
    proj = frame.project(np.vstack([pts[index], pts[nbrs]]))
    return _voronoi_area_2d(proj[0], proj[1:], params.delta, index)


def build_lbo(cloud, params: LboParams | None = None) -> LboPair:
    """Assemble the symmetric stiffness matrix and the Voronoi mass diagonal."""
    cloud = _as_cloud(cloud)
    pts = cloud.points
    n = pts.shape[0]
    if n < 4:
        raise ValidationError(f"need at least 4 points for a tangent plane, got {n}")
    if params is None:
        params = default_params(cloud)
    tree = cKDTree(pts)
    r_balls = tree.query_ball_point(pts, params.r_neighbor)
    d_balls = r_balls if params.delta == params.r_neighbor else tree.query_ball_point(pts, params.delta)

    areas = np.empty(n)
    for i in range(n):
        nbrs = _neighborhood(tree, pts, i, params.r_neighbor, params.k_fallback, ball=r_balls[i])
        frame = _fit_frame(np.vstack([pts[i], pts[nbrs]]), i)
        vnbrs = _neighborhood(tree, pts, i, params.delta, params.k_fallback, ball=d_balls[i])
        proj = frame.project(np.vstack([pts[i], pts[vnbrs]]))
        areas[i] = _voronoi_area_2d(proj[0], proj[1:], params.delta, i)
        if not areas[i] > 0:
            raise NonPositiveArea(i, areas[i])

    pairs = tree.query_pairs(params.delta, output_type="ndarray")
    Q = np.zeros((n, n))
    if pairs.size:
        i, j = pairs[:, 0], pairs[:, 1]
        d2 = np.sum((pts[i] - pts[j]) ** 2, axis=1)
        w = areas[i] * areas[j] / (4.0 * math.pi * params.t**2) * np.exp(-d2 / (4.0 * params.t))
        Q[i, j] = w
        Q[j, i] = w
    Q = 0.5 * (Q + Q.T)
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    Q.setflags(write=False)
    areas.setflags(write=False)
    return LboPair(Q=Q, mass=areas)


def solve_harmonic_basis(lbo: LboPair) -> HarmonicBasis:
    """Generalized eigenpairs of ``Q H = -lambda B H``, ascending in lambda.

    Solved through the symmetric reduction ``B^{-1/2} (-Q) B^{-1/2}``;
    columns come out B-orthonormal and each column's largest-magnitude
    entry is made positive.
    """
    mass = np.asarray(lbo.mass, dtype=float)
    if np.any(mass <= 0):
        raise NonPositiveArea(int(np.argmin(mass)), float(np.min(mass)))
    s = 1.0 / np.sqrt(mass)
    C = -(lbo.Q * s[:, None]) * s[None, :]
    C = 0.5 * (C + C.T)
    try:
        lam, U = np.linalg.eigh(C)
    except np.linalg.LinAlgError as exc:
        raise EigensolveFailure(str(exc)) from exc
    H = U * s[:, None]
    idx = np.argmax(np.abs(H), axis=0)
    signs = np.sign(H[idx, np.arange(H.shape[1])])
    signs[signs == 0] = 1.0
    H = H * signs
    lam.setflags(write=False)
    H.setflags(write=False)
    return HarmonicBasis(eigenvalues=lam, eigenvectors=H)
