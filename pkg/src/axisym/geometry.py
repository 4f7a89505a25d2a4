"""Surfaces of revolution: generating curves, meshes, rotations, projections.

A surface of revolution is swept by rotating a planar regular curve
gamma(t) = (x(t), 0, z(t)), t in I, about the e3-axis.  The (phi, t) chart
xi(phi, t) = A(phi)^T gamma(t) is orthogonal with scale factors
h1(t) = |x(t)| (circle-of-latitude radius) and h2(t) = |(x'(t), z'(t))|,
so the area element is sqrt(g) = h1*h2.

Everything here is immutable after construction; operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline


class GeometryError(ValueError):
    """Base class for geometry construction errors."""


class RegularityError(GeometryError):
    """The generating curve violates the regularity assumptions."""


class AxisError(GeometryError):
    """The curve meets the e3-axis somewhere it is not allowed to."""


class DegenerateTangentError(GeometryError):
    """Tangent vectors too close to parallel to define a normal."""


# ---------------------------------------------------------------------------
# rotations about the e3-axis
# ---------------------------------------------------------------------------

def rotate(phi, v):
    """Rotate v by angle phi about the e3-axis (counterclockwise seen from +e3).

    Accepts scalar or array phi and v with shape (..., 3); broadcasts.
    Preserves the Euclidean norm and the e3-component.
    """
    phi = np.asarray(phi, dtype=float)
    v = np.asarray(v, dtype=float)
    c, s = np.cos(phi), np.sin(phi)
    vx, vy, vz = v[..., 0], v[..., 1], v[..., 2]
    out = np.empty(np.broadcast(c, vx).shape + (3,))
    out[..., 0] = c * vx - s * vy
    out[..., 1] = s * vx + c * vy
    out[..., 2] = np.broadcast_to(vz, out[..., 2].shape)
    return out


def rotate_inverse(phi, v):
    """Inverse rotation: rotate_inverse(phi, rotate(phi, v)) == v."""
    return rotate(-np.asarray(phi, dtype=float), v)


# ---------------------------------------------------------------------------
# generating curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratingCurve:
    """Planar regular curve t -> (x(t), 0, z(t)) seeding a surface of revolution.

    x, z, dx, dz are vectorized callables on the closed interval.  ``closed``
    marks loops (endpoints identified).  ``touches_axis_at`` lists endpoint
    parameters where x vanishes; there the curve must meet the axis
    perpendicularly (dz = 0) so the swept surface is smooth.
    """

    name: str
    interval: tuple[float, float]
    x: Callable
    z: Callable
    dx: Callable
    dz: Callable
    closed: bool = False
    touches_axis_at: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        t0, t1 = self.interval
        if not t1 > t0:
            raise RegularityError("curve interval must have positive length")
        ts = np.linspace(t0, t1, 512)
        if np.any(self.x(ts) < -1e-12):
            raise RegularityError("x(t) must be nonnegative")
        speed = np.hypot(self.dx(ts), self.dz(ts))
        if np.any(speed <= 1e-12):
            raise RegularityError("curve must be regular: (dx, dz) != 0")
        if len(self.touches_axis_at) > 2:
            raise AxisError("at most two axis-touching points")
        for ta in self.touches_axis_at:
            if abs(float(self.x(ta))) > 1e-10:
                raise AxisError(f"declared axis point t={ta} has x != 0")
            if abs(float(self.dz(ta))) > 1e-10:
                raise AxisError(
                    f"curve does not meet the axis perpendicularly at t={ta}")

    @property
    def length(self):
        return self.interval[1] - self.interval[0]

    def point(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (3,))
        out[..., 0] = self.x(t)
        out[..., 2] = self.z(t)
        return out

    def speed(self, t):
        return np.hypot(self.dx(t), self.dz(t))


def preset_curve(name, **kw):
    """Built-in generating curves.

    sphere           x = sin t, z = cos t on [0, pi] (unit sphere)
    cylinder         x = radius, z = t on [0, height]
    annulus          x = t, z = 0 on [r_inner, r_outer] (flat ring)
    disk             x = t, z = 0 on [0, 1] (flat disk, touches axis)
    torus_band       x = R + r cos t, z = r sin t on [0, 2 pi], closed
    ellipsoid_band   x = a sin t, z = c cos t on [pad, pi - pad]
    """
    if name == "sphere":
        return GeneratingCurve(
            "sphere", (0.0, np.pi),
            x=np.sin, z=np.cos, dx=np.cos, dz=lambda t: -np.sin(t),
            touches_axis_at=frozenset((0.0, np.pi)))
    if name == "cylinder":
        radius = kw.get("radius", 1.0)
        height = kw.get("height", 1.0)
        return GeneratingCurve(
            f"cylinder(r={radius:g})", (0.0, height),
            x=lambda t: np.full_like(np.asarray(t, dtype=float), radius),
            z=lambda t: np.asarray(t, dtype=float),
            dx=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            dz=lambda t: np.ones_like(np.asarray(t, dtype=float)))
    if name == "annulus":
        r0 = kw.get("r_inner", 1.0)
        r1 = kw.get("r_outer", 2.0)
        return GeneratingCurve(
            f"annulus({r0:g},{r1:g})", (r0, r1),
            x=lambda t: np.asarray(t, dtype=float),
            z=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            dx=lambda t: np.ones_like(np.asarray(t, dtype=float)),
            dz=lambda t: np.zeros_like(np.asarray(t, dtype=float)))
    if name == "disk":
        return GeneratingCurve(
            "disk", (0.0, kw.get("radius", 1.0)),
            x=lambda t: np.asarray(t, dtype=float),
            z=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            dx=lambda t: np.ones_like(np.asarray(t, dtype=float)),
            dz=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            touches_axis_at=frozenset((0.0,)))
    if name == "torus_band":
        R = kw.get("R", 2.0)
        r = kw.get("r", 1.0)
        if not R > r > 0:
            raise RegularityError("torus_band needs R > r > 0")
        return GeneratingCurve(
            f"torus_band(R={R:g},r={r:g})", (0.0, 2 * np.pi),
            x=lambda t: R + r * np.cos(t),
            z=lambda t: r * np.sin(t),
            dx=lambda t: -r * np.sin(t),
            dz=lambda t: r * np.cos(t),
            closed=True)
    if name == "ellipsoid_band":
        a = kw.get("a", 1.0)
        c = kw.get("c", 1.5)
        pad = kw.get("pad", 0.4)
        return GeneratingCurve(
            f"ellipsoid_band(a={a:g},c={c:g})", (pad, np.pi - pad),
            x=lambda t: a * np.sin(t),
            z=lambda t: c * np.cos(t),
            dx=lambda t: a * np.cos(t),
            dz=lambda t: -c * np.sin(t))
    raise GeometryError(f"unknown curve preset {name!r}")


def spline_curve(t_samples, x_samples, z_samples, name="spline", closed=False):
    """Cubic-spline generating curve through (t, x, z) sample tables."""
    t = np.asarray(t_samples, dtype=float)
    bc = "periodic" if closed else "not-a-knot"
    sx = CubicSpline(t, np.asarray(x_samples, dtype=float), bc_type=bc)
    sz = CubicSpline(t, np.asarray(z_samples, dtype=float), bc_type=bc)
    dsx, dsz = sx.derivative(), sz.derivative()
    t0, t1 = float(t[0]), float(t[-1])
    if closed:
        period = t1 - t0

        def wrap(f):
            return lambda s: f((np.asarray(s, dtype=float) - t0) % period + t0)

        return GeneratingCurve(name, (t0, t1), x=wrap(sx), z=wrap(sz),
                               dx=wrap(dsx), dz=wrap(dsz), closed=True)
    touches = frozenset(
        ta for ta in (t0, t1)
        if abs(float(sx(ta))) <= 1e-10 and abs(float(dsz(ta))) <= 1e-10)
    return GeneratingCurve(name, (t0, t1), x=sx, z=sz, dx=dsx, dz=dsz,
                           touches_axis_at=touches)


# ---------------------------------------------------------------------------
# surfaces and meshes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceOfRevolution:
    """A generating curve together with its role (base S or target T)."""

    curve: GeneratingCurve
    role: str = "base"  # "base" | "target"

    def h1(self, t):
        return np.abs(self.curve.x(t))

    def h2(self, t):
        return self.curve.speed(t)

    def sqrtg(self, t):
        return self.h1(t) * self.h2(t)

    def point(self, phi, t):
        return rotate(phi, self.curve.point(t))

    def normal_profile(self, t):
        """Unit surface normal along the phi = 0 meridian: (dz, 0, -dx)/h2."""
        t = np.asarray(t, dtype=float)
        h2 = self.h2(t)
        out = np.zeros(t.shape + (3,))
        out[..., 0] = self.curve.dz(t) / h2
        out[..., 2] = -self.curve.dx(t) / h2
        return out


def surface(preset_or_curve, role="base", **kw):
    """Convenience constructor: surface('sphere'), surface(curve, 'target'), ..."""
    if isinstance(preset_or_curve, GeneratingCurve):
        return SurfaceOfRevolution(preset_or_curve, role)
    return SurfaceOfRevolution(preset_curve(preset_or_curve, **kw), role)


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Tensor (phi, t) grid with precomputed metric data and quadrature.

    phi nodes are the n_phi-th roots of unity angles (no duplicated seam);
    t nodes sit at cell midpoints t_j = t_min + (j + 1/2) dt, which keeps
    h1 > 0 at every node even when the curve touches the axis.  Quadrature
    is the rectangle rule in phi times the midpoint rule in t, so
    quad_weights sum to the surface area up to O(dt^2).

    t_ends classifies each end of the t-range: "axis" (curve touches the
    e3-axis there, chart continues through the pole), "periodic" (closed
    curve), or "free" (genuine boundary circle).
    """

    surface: SurfaceOfRevolution
    n_phi: int
    n_t: int
    phi: np.ndarray
    t: np.ndarray
    dphi: float
    dt: float
    h1: np.ndarray
    h2: np.ndarray
    sqrtg: np.ndarray
    quad_weights: np.ndarray
    t_ends: tuple[str, str]

    @property
    def shape(self):
        return (self.n_phi, self.n_t)

    def area(self):
        return float(self.quad_weights.sum())

    def nodes(self):
        """All mesh points xi(phi_i, t_j) as an (n_phi, n_t, 3) array."""
        gamma = self.surface.curve.point(self.t)          # (n_t, 3)
        return rotate(self.phi[:, None], gamma[None, :, :])


def _interior_axis_touch(curve, ts, xs):
    """True if x attains (numerically) zero strictly inside the interval.

    Sampled minima can sit between grid nodes, so every interior local
    minimum of the scan is sharpened by golden section before testing.
    """
    k = np.where((xs[1:-1] <= xs[:-2]) & (xs[1:-1] <= xs[2:]) & (xs[1:-1] < 0.1))[0] + 1
    if k.size == 0:
        return False
    lo, hi = ts[k - 1].copy(), ts[k + 1].copy()
    inv = 0.5 * (np.sqrt(5.0) - 1.0)
    for _ in range(60):
        c = hi - inv * (hi - lo)
        d = lo + inv * (hi - lo)
        left = np.abs(curve.x(c)) < np.abs(curve.x(d))
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
    smin = 0.5 * (lo + hi)
    t0, t1 = curve.interval
    pad = 1e-9 * (t1 - t0)
    inside = (smin > t0 + pad) & (smin < t1 - pad)
    return bool(np.any(inside & (np.abs(curve.x(smin)) <= 1e-9)))


def build_mesh(surf, n_phi, n_t):
    """Build a SurfaceMesh; validates regularity at a resolution-independent level."""
    if isinstance(surf, GeneratingCurve):
        surf = SurfaceOfRevolution(surf)
    if n_phi < 4 or n_phi % 2 != 0:
        raise ValueError("n_phi must be an even integer >= 4")
    if n_t < 2:
        raise ValueError("n_t must be >= 2")
    curve = surf.curve
    t0, t1 = curve.interval

    # scan for interior axis crossings and degenerate speed
    ts = np.linspace(t0, t1, 4096)
    xs = np.abs(curve.x(ts))
    if np.any(curve.x(ts) < -1e-12):
        raise RegularityError("x(t) < 0 detected on the curve")
    if np.any(curve.speed(ts) <= 1e-12):
        raise RegularityError("h2 vanishes on the curve")
    if _interior_axis_touch(curve, ts, xs):
        raise AxisError("curve meets the e3-axis at an interior parameter")
    for ta, hit in ((t0, xs[0] <= 1e-10), (t1, xs[-1] <= 1e-10)):
        if hit and abs(float(curve.dz(ta))) > 1e-8:
            raise AxisError(f"axis touching at t={ta} without perpendicularity")

    dphi = 2 * np.pi / n_phi
    dt = (t1 - t0) / n_t
    phi = dphi * np.arange(n_phi)
    t = t0 + dt * (np.arange(n_t) + 0.5)
    h1 = np.abs(curve.x(t))
    h2 = curve.speed(t)
    sqrtg = h1 * h2
    if np.any(sqrtg <= 0):
        raise RegularityError("area element vanishes at a mesh node")
    weights = np.broadcast_to(dphi * dt * sqrtg, (n_phi, n_t)).copy()

    def end_kind(ta):
        if curve.closed:
            return "periodic"
        return "axis" if any(abs(ta - a) < 1e-12 for a in curve.touches_axis_at) else "free"

    mesh = SurfaceMesh(surf, n_phi, n_t, phi, t, dphi, dt, h1, h2, sqrtg,
                       weights, (end_kind(t0), end_kind(t1)))
    return mesh


def surface_normal(mesh, i_phi=None, j_t=None):
    """Unit normal nu = (tau_phi x tau_t)/|tau_phi x tau_t| at mesh nodes.

    With gamma = (x, 0, z) the cross product evaluates to
    A(phi)^T (x dz, 0, -x dx), so nu = A(phi)^T (dz, 0, -dx)/h2 and the
    normal is axially symmetric by construction.  Returns the full
    (n_phi, n_t, 3) array when no indices are given.
    """
    curve = mesh.surface.curve
    if np.any(mesh.sqrtg < 1e-12):
        raise DegenerateTangentError("|tau_phi x tau_t| below 1e-12 at a node")
    prof = mesh.surface.normal_profile(mesh.t)            # (n_t, 3)
    full = rotate(mesh.phi[:, None], prof[None, :, :])
    if i_phi is None and j_t is None:
        return full
    return full[i_phi, j_t]


# ---------------------------------------------------------------------------
# closest-point projection onto a target surface
# ---------------------------------------------------------------------------

_SCAN_POINTS = 1024


def _analytic_projection(curve, r, zeta):
    """Closed-form profile parameters for presets; None if unavailable.

    Returns s such that (x(s), z(s)) is nearest to (r, zeta) in the
    half-plane, with ties broken toward the smallest s.
    """
    name = curve.name
    t0, t1 = curve.interval
    if name == "sphere":
        rho = np.hypot(r, zeta)
        if np.any(rho == 0):
            raise ValueError("projection of the origin onto the sphere is undefined")
        return np.arctan2(r, zeta)                        # in [0, pi]
    if name.startswith("cylinder"):
        return np.clip(zeta, t0, t1)
    if name.startswith(("annulus", "disk")):
        return np.clip(r, t0, t1)
    if name.startswith("torus_band"):
        # x = R + r cos t, z = r sin t: nearest tube angle seen from the
        # center circle of radius R = (min x + max x)/2
        grid = np.linspace(t0, t1, 4097)
        xg = curve.x(grid)
        R = 0.5 * (float(xg.min()) + float(xg.max()))
        return np.arctan2(zeta, r - R) % (2 * np.pi)
    return None


def _bracketed_refine(curve, r, zeta, lo, hi, iters=80):
    """Vectorized refinement of the squared-distance minimum on [lo, hi].

    Bisects on the derivative of the half-plane squared distance when it
    changes sign across the bracket, which resolves the parameter to machine
    precision; otherwise falls back to golden-section on the distance itself.
    """
    def fdist(s):
        return (curve.x(s) - r) ** 2 + (curve.z(s) - zeta) ** 2

    def g(s):
        return ((curve.x(s) - r) * curve.dx(s)
                + (curve.z(s) - zeta) * curve.dz(s))

    glo, ghi = g(lo), g(hi)
    has_root = (glo <= 0) & (ghi >= 0)
    a, b = lo.copy(), hi.copy()
    for _ in range(iters):
        mid = 0.5 * (a + b)
        gm = g(mid)
        take_hi = gm <= 0
        a = np.where(has_root & take_hi, mid, a)
        b = np.where(has_root & ~take_hi, mid, b)
    root = 0.5 * (a + b)

    # golden-section fallback where no sign change was available
    inv = 0.5 * (np.sqrt(5.0) - 1.0)
    ga, gb = lo.copy(), hi.copy()
    for _ in range(iters):
        c = gb - inv * (gb - ga)
        d = ga + inv * (gb - ga)
        left = fdist(c) < fdist(d)
        gb = np.where(left, d, gb)
        ga = np.where(left, ga, c)
    gold = 0.5 * (ga + gb)

    s = np.where(has_root, root, gold)
    # keep whichever of {refined, bracket ends} is best; ties -> smallest s
    cands = np.stack([lo, s, hi])
    order = np.argsort(cands, axis=0, kind="stable")
    cands = np.take_along_axis(cands, order, 0)
    best = np.argmin(fdist(cands), axis=0)
    return np.take_along_axis(cands, best[None, :], 0)[0]


def curve_parameter_of_closest(curve, r, zeta):
    """Parameter s in I minimizing (r - x(s))^2 + (zeta - z(s))^2, vectorized."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    s = _analytic_projection(curve, r, zeta)
    if s is not None:
        return np.atleast_1d(s)
    t0, t1 = curve.interval
    grid = np.linspace(t0, t1, _SCAN_POINTS + 1)
    d2 = ((curve.x(grid)[None, :] - r[:, None]) ** 2
          + (curve.z(grid)[None, :] - zeta[:, None]) ** 2)
    k = np.argmin(d2, axis=1)                             # first minimum wins
    step = (t1 - t0) / _SCAN_POINTS
    lo = np.maximum(grid[k] - step, t0)
    hi = np.minimum(grid[k] + step, t1)
    if curve.closed:
        lo = grid[k] - step
        hi = grid[k] + step
    s = _bracketed_refine(curve, r, zeta, lo, hi)
    if curve.closed:
        period = t1 - t0
        s = (s - t0) % period + t0
    return s


def project_points(target, pts):
    """Closest points of the target surface to pts (N, 3).

    Works with cylindrical coordinates r = |v_perp|, zeta = v . e3; the
    profile parameter minimizes the half-plane distance and the azimuth of v
    is reused (e1 when r = 0).  Returns (projected points, parameters).
    """
    pts = np.asarray(pts, dtype=float)
    flat = pts.reshape(-1, 3)
    r = np.hypot(flat[:, 0], flat[:, 1])
    zeta = flat[:, 2]
    s = curve_parameter_of_closest(target.curve, r, zeta)
    xs = target.curve.x(s)
    zs = target.curve.z(s)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_t = np.where(r > 0, flat[:, 0] / np.where(r > 0, r, 1.0), 1.0)
        sin_t = np.where(r > 0, flat[:, 1] / np.where(r > 0, r, 1.0), 0.0)
    out = np.stack([xs * cos_t, xs * sin_t, zs], axis=-1)
    return out.reshape(pts.shape), s.reshape(pts.shape[:-1])


def project_to_target(target, v):
    """Nearest point of the target surface of revolution to a single vector v."""
    p, _ = project_points(target, np.asarray(v, dtype=float))
    return p


def tangent_frame(target, pts, params=None):
    """Orthonormal tangent basis (azimuthal, meridional) at points of T.

    The azimuthal direction is e3 x p_perp / |p_perp| (a fixed horizontal
    unit vector when p_perp = 0); the meridional one is the rotated curve
    tangent.  The two are orthogonal for any surface of revolution.
    """
    pts = np.asarray(pts, dtype=float)
    flat = pts.reshape(-1, 3)
    if params is None:
        _, params = project_points(target, flat)
    params = np.asarray(params).reshape(-1)
    r = np.hypot(flat[:, 0], flat[:, 1])
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_t = np.where(r > 0, flat[:, 0] / np.where(r > 0, r, 1.0), 1.0)
        sin_t = np.where(r > 0, flat[:, 1] / np.where(r > 0, r, 1.0), 0.0)
    u1 = np.stack([-sin_t, cos_t, np.zeros_like(r)], axis=-1)
    h2 = target.h2(params)
    u2 = np.stack([target.curve.dx(params) * cos_t,
                   target.curve.dx(params) * sin_t,
                   target.curve.dz(params)], axis=-1) / h2[:, None]
    return u1.reshape(pts.shape), u2.reshape(pts.shape)


def tangent_project_points(target, pts, w, params=None):
    """Project vectors w onto the tangent planes of T at the points pts."""
    u1, u2 = tangent_frame(target, pts, params)
    w = np.asarray(w, dtype=float)
    c1 = np.sum(w * u1, axis=-1, keepdims=True)
    c2 = np.sum(w * u2, axis=-1, keepdims=True)
    return c1 * u1 + c2 * u2


def tangent_project(target, p, w):
    """Tangent-plane component of w at a single point p of T."""
    return tangent_project_points(target, np.asarray(p, dtype=float),
                                  np.asarray(w, dtype=float))


def target_normal(target, pts, params=None):
    """Unit normal of the target surface at points of T."""
    u1, u2 = tangent_frame(target, pts, params)
    return np.cross(u1, u2)


# ---------------------------------------------------------------------------
# never-flat predicate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NeverFlatReport:
    ok: bool
    flat_intervals: tuple
    tol: float


def never_flat_check(target, tol=1e-6, samples=4096):
    """Detect flat horizontal bands of the target's generating curve.

    The target fails the check iff some parameter interval of length > tol
    has |dz| < tol while |dx| > tol throughout: its horizontal sections then
    project to fat annuli instead of isolated circles.  Sampled at grid
    resolution, so isolated horizontal tangents (measure zero) do not count.
    """
    curve = target.curve
    t0, t1 = curve.interval
    ts = np.linspace(t0, t1, samples + 1)
    flat = (np.abs(curve.dz(ts)) < tol) & (np.abs(curve.dx(ts)) > tol)
    intervals = []
    start = None
    for k, f in enumerate(np.append(flat, False)):
        if f and start is None:
            start = k
        elif not f and start is not None:
            a, b = ts[start], ts[k - 1]
            if b - a > tol:
                intervals.append((float(a), float(b)))
            start = None
    return NeverFlatReport(len(intervals) == 0, tuple(intervals), tol)
