"""Sections S_theta, their boundaries, the limiting c-hyperplane and curvature tests.

S_theta = {x : h_theta(x) <= 0} with the defining function
h_theta(x) = c(x, y0) - c(x, y_theta) - c(x0, y0) + c(x0, y_theta),
where y_theta runs along the c-segment from y0 to y1 seen from x0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial import QhullError
from skimage import measure

from .c_exp import c_segment
from .cost_model import CostFunction, DomainBox, default_domains, det_and_inverse

MESH_TOL = 1e-9
SFF_STEP = 1e-4
DEGENERATE_GRAD = 1e-8


@dataclass(frozen=True)
class SectionSpec:
    x0: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    theta: float = 1.0

    def __post_init__(self):
        for k in ("x0", "y0", "y1"):
            object.__setattr__(self, k, np.asarray(getattr(self, k), dtype=float))
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must lie in (0, 1]")

    def with_theta(self, theta: float) -> "SectionSpec":
        return SectionSpec(self.x0, self.y0, self.y1, theta)


@dataclass
class Section:
    """A section with its target point y_theta resolved; evaluates h and its derivatives."""

    c: CostFunction
    spec: SectionSpec
    y_theta: np.ndarray

    @property
    def offset(self) -> float:
        return float(self.c(self.spec.x0, self.spec.y0) - self.c(self.spec.x0, self.y_theta))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        return self.c(x, self.spec.y0) - self.c(x, self.y_theta) - self.offset

    def grad(self, x) -> np.ndarray:
        return self.c.cx(x, self.spec.y0) - self.c.cx(x, self.y_theta)

    def hess(self, x) -> np.ndarray:
        return self.c.cxx(x, self.spec.y0) - self.c.cxx(x, self.y_theta)

    def scale(self, x) -> float:
        return float(np.linalg.norm(self.c.cx(x, self.spec.y0)) + np.linalg.norm(self.c.cx(x, self.y_theta)))


def resolve(c: CostFunction, spec: SectionSpec, box: Optional[DomainBox] = None) -> Section:
    """Solve y_theta on the c-segment; ``box`` is the target domain (default for the cost)."""
    if box is None:
        box = default_domains(c)[1]
    if spec.theta == 1.0:
        yt = spec.y1
    else:
        yt = c_segment(c, spec.x0, spec.y0, spec.y1, [spec.theta], box=box).ys[0]
    return Section(c, spec, np.asarray(yt, float))


def h_theta(c: CostFunction, spec: SectionSpec, x, box: Optional[DomainBox] = None) -> np.ndarray:
    """Defining function of S_theta; vectorised over leading axes of ``x``."""
    return resolve(c, spec, box)(x)


@dataclass
class CHyperplane:
    """Limit of the section boundaries as theta -> 0.

    g(x) = -(c_xy^{-1}(x0, y0) dp) . [c_y(x, y0) - c_y(x0, y0)] with dp = p1 - p0.
    Note h_theta / theta -> -g, so {g >= 0} is the side of the limiting sections.
    In the coordinates q = -c_y(., y0) the zero set is the flat hyperplane
    {tangent_normal . (q - q0) = 0} with tangent_normal = c_xy^{-1}(x0, y0) dp.
    """

    c: CostFunction
    x0: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    normal_seed: np.ndarray
    q0: np.ndarray

    @property
    def tangent_normal(self) -> np.ndarray:
        return -self.normal_seed

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        return (self.c.cy(x, self.y0) - self.c.cy(self.x0, self.y0)) @ self.normal_seed

    def grad(self, x) -> np.ndarray:
        # d/dx_i [c_y(x, y0)_j n_j] = c_xy[i, j] n_j
        return self.c.cxy(x, self.y0) @ self.normal_seed

    def hess(self, x) -> np.ndarray:
        return _hessian_fd(self, np.asarray(x, float))

    def scale(self, x) -> float:
        return float(np.linalg.norm(self.normal_seed) * np.linalg.norm(self.c.cxy(x, self.y0)))

    def tangent_points(self, q_offsets) -> np.ndarray:
        """Points q0 + s on the flat image; ``q_offsets`` is projected orthogonal to tangent_normal."""
        nrm = self.tangent_normal / np.linalg.norm(self.tangent_normal)
        s = np.atleast_2d(q_offsets)
        s = s - (s @ nrm)[:, None] * nrm
        return self.q0 + s

    def pull_back(self, q, box: Optional[DomainBox] = None) -> np.ndarray:
        """Map tangent-space points back to x with the c*-exponential at y0."""
        from .c_exp import c_star_exp_batch

        if box is None:
            box = default_domains(self.c)[0]
        b = c_star_exp_batch(self.c, self.y0, q, self.x0, box=box)
        out = b.y.copy()
        out[~b.converged] = np.nan
        return out


def c_hyperplane(c: CostFunction, x0, y0, y1) -> CHyperplane:
    x0, y0, y1 = (np.asarray(a, float) for a in (x0, y0, y1))
    dp = -c.cx(x0, y1) + c.cx(x0, y0)
    _, inv = det_and_inverse(c.cxy(x0, y0))
    seed = -(inv @ dp)
    return CHyperplane(c, x0, y0, y1, seed, -c.cy(x0, y0))


# ---------------------------------------------------------------------------
# zero-set extraction


@dataclass
class LevelSetMesh:
    points: np.ndarray
    h_values: np.ndarray
    polylines: list = field(default_factory=list)
    directions: Optional[np.ndarray] = None
    resolution: int = 0
    box: Optional[DomainBox] = None
    multi_crossings: int = 0

    @property
    def empty(self) -> bool:
        return self.points.shape[0] == 0

    @property
    def max_abs_h(self) -> float:
        return float(np.max(np.abs(self.h_values))) if self.h_values.size else 0.0

    def segments(self) -> np.ndarray:
        """All polyline segments as an array of shape (k, 2, n)."""
        segs = [np.stack([pl[:-1], pl[1:]], axis=1) for pl in self.polylines if len(pl) > 1]
        if not segs:
            return np.empty((0, 2, self.points.shape[1] if self.points.ndim == 2 else 2))
        return np.concatenate(segs)

    def to_csv(self) -> str:
        n = self.points.shape[1] if self.points.ndim == 2 else 0
        head = ",".join([f"x{i}" for i in range(n)] + ["h", "polyline"])
        rows = [head]
        if self.polylines:
            k = 0
            for j, pl in enumerate(self.polylines):
                for v in pl:
                    rows.append(",".join(repr(float(t)) for t in v) + f",{float(self.h_values[k])!r},{j}")
                    k += 1
        else:
            for v, hv in zip(self.points, self.h_values):
                rows.append(",".join(repr(float(t)) for t in v) + f",{float(hv)!r},0")
        return "\n".join(rows) + "\n"


def _bisect(f, a, b, fa, iters: int = 80, tol: float = MESH_TOL):
    """Vectorised bisection for roots of f between a and b (rows), fa = f(a)."""
    a, b = a.copy(), b.copy()
    fa = fa.copy()
    for _ in range(iters):
        m = 0.5 * (a + b)
        fm = f(m)
        left = np.sign(fm) == np.sign(fa)
        a = np.where(left[:, None], m, a)
        fa = np.where(left, fm, fa)
        b = np.where(left[:, None], b, m)
        if np.all(np.max(np.abs(b - a), axis=1) <= 1e-16 * (1 + np.max(np.abs(a), axis=1))):
            break
    fa_, fb_ = f(a), f(b)
    pick_a = np.abs(fa_) <= np.abs(fb_)
    return np.where(pick_a[:, None], a, b), np.where(pick_a, fa_, fb_)


def zero_set(f: Callable, box: DomainBox, resolution: int = 128, mesh_tol: float = MESH_TOL,
             base: Optional[np.ndarray] = None, normal: Optional[np.ndarray] = None) -> LevelSetMesh:
    """Zero set of a vectorised function on a box.

    n = 2: marching squares on a node grid, vertices refined by bisection
    along the grid edge they lie on.  n >= 3: the surface is traced as a graph
    over the plane through ``base`` orthogonal to ``normal`` -- parallel rays
    along ``normal`` are cast from a tangent-plane grid and the crossing nearest
    the plane is refined; rays with several crossings are counted.
    """
    n = box.dim
    if n == 2:
        axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(box.lower, box.upper)]
        X, Y = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], -1)
        H = np.asarray(f(pts), float).reshape(resolution, resolution)
        contours = measure.find_contours(H, 0.0)
        spacing = (box.upper - box.lower) / (resolution - 1)
        lines = []
        hv = []
        for cont in contours:
            lo_idx = np.floor(cont + 1e-12).astype(int)
            frac = cont - lo_idx
            on_row = np.abs(frac[:, 0]) <= 1e-9  # moves along axis 1
            a_idx = lo_idx.copy()
            b_idx = lo_idx.copy()
            b_idx[on_row, 1] += 1
            b_idx[~on_row, 0] += 1
            b_idx = np.minimum(b_idx, resolution - 1)
            a = box.lower + a_idx * spacing
            b = box.lower + b_idx * spacing
            ha = H[a_idx[:, 0], a_idx[:, 1]]
            hb = H[b_idx[:, 0], b_idx[:, 1]]
            at_node = (ha == 0) | (hb == 0) | (np.sign(ha) == np.sign(hb))
            v = box.lower + cont * spacing
            vh = np.asarray(f(v), float)
            todo = ~at_node
            if todo.any():
                r, rh = _bisect(lambda z: np.asarray(f(z), float), a[todo], b[todo], ha[todo])
                v[todo], vh[todo] = r, rh
            node_a = at_node & (np.abs(ha) <= np.abs(hb))
            v[node_a & (ha == 0)] = a[node_a & (ha == 0)]
            vh[node_a & (ha == 0)] = 0.0
            lines.append(v)
            hv.append(vh)
        if lines:
            allp = np.concatenate(lines)
            allh = np.concatenate(hv)
        else:
            allp, allh = np.empty((0, 2)), np.empty(0)
        return LevelSetMesh(points=allp, h_values=allh, polylines=lines, resolution=resolution, box=box)

    # graph over a tangent plane
    if base is None:
        base = box.center
    if normal is None:
        raise ValueError("n >= 3 zero sets need a normal direction")
    nu = np.asarray(normal, float) / np.linalg.norm(normal)
    basis = np.linalg.svd(np.eye(n) - np.outer(nu, nu))[0][:, : n - 1]
    L = box.diagonal
    ticks = np.linspace(-L / 2, L / 2, resolution)
    mesh = np.meshgrid(*([ticks] * (n - 1)), indexing="ij")
    coeffs = np.stack([m.ravel() for m in mesh], -1)
    starts = base + coeffs @ basis.T
    ts = np.linspace(-L / 2, L / 2, 2 * resolution + 1)
    samples = starts[:, None, :] + ts[None, :, None] * nu
    fv = np.asarray(f(samples), float)
    sgn = np.sign(fv)
    change = (sgn[:, :-1] * sgn[:, 1:]) < 0
    ncross = change.sum(axis=1)
    rows = np.flatnonzero(ncross > 0)
    if rows.size == 0:
        return LevelSetMesh(points=np.empty((0, n)), h_values=np.empty(0), resolution=resolution, box=box,
                            directions=np.empty((0, n)))
    mid = ts.size // 2
    idx_all = np.arange(ts.size - 1)
    dist = np.where(change[rows], np.abs(idx_all[None, :] - mid), np.inf)
    j = np.argmin(dist, axis=1)
    a = samples[rows, j]
    b = samples[rows, j + 1]
    r, rh = _bisect(lambda z: np.asarray(f(z), float), a, b, fv[rows, j])
    keep = box.contains(r)
    return LevelSetMesh(points=r[keep], h_values=rh[keep], directions=np.tile(nu, (int(keep.sum()), 1)),
                        resolution=resolution, box=box, multi_crossings=int(np.sum(ncross[rows][keep] > 1)))


def section_boundary(c: CostFunction, spec: SectionSpec, resolution: int = 128,
                     omega: Optional[DomainBox] = None, omega_star: Optional[DomainBox] = None,
                     mesh_tol: float = MESH_TOL) -> LevelSetMesh:
    """Boundary of S_theta inside ``omega``; an empty mesh means no boundary in the box."""
    dom = default_domains(c)
    omega = omega or dom[0]
    sec = resolve(c, spec, omega_star or dom[1])
    return zero_set(sec, omega, resolution, mesh_tol, base=spec.x0, normal=sec.grad(spec.x0))


def hyperplane_trace(hp: CHyperplane, resolution: int = 128, omega: Optional[DomainBox] = None) -> LevelSetMesh:
    omega = omega or default_domains(hp.c)[0]
    return zero_set(hp, omega, resolution, base=hp.x0, normal=hp.grad(hp.x0))


# ---------------------------------------------------------------------------
# Hausdorff distance between traced curves


def point_to_segments(points: np.ndarray, segs: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Distance from each point to the nearest of the segments (k, 2, n)."""
    if segs.shape[0] == 0:
        return np.full(points.shape[0], np.inf)
    a = segs[:, 0]
    d = segs[:, 1] - a
    dd = np.maximum(np.sum(d * d, -1), 1e-300)
    out = np.empty(points.shape[0])
    for s in range(0, points.shape[0], chunk):
        p = points[s:s + chunk, None, :]
        t = np.clip(np.sum((p - a) * d, -1) / dd, 0.0, 1.0)
        proj = a + t[..., None] * d
        out[s:s + chunk] = np.min(np.linalg.norm(p - proj, axis=-1), axis=1)
    return out


def mesh_distance(m1: LevelSetMesh, m2: LevelSetMesh, centre, radius: float) -> float:
    """Symmetric Hausdorff distance of the two traces restricted to a ball.

    Each restricted vertex set is measured against the full other polyline, so
    the cut at the sphere does not create artificial end gaps.
    """
    def restricted(m):
        return m.points[np.linalg.norm(m.points - centre, axis=-1) <= radius]

    a, b = restricted(m1), restricted(m2)
    if a.shape[0] == 0 and b.shape[0] == 0:
        return 0.0
    if a.shape[0] == 0 or b.shape[0] == 0:
        return float("inf")
    if m1.polylines and m2.polylines:
        dab = point_to_segments(a, m2.segments())
        dba = point_to_segments(b, m1.segments())
    else:
        from scipy.spatial import cKDTree

        dab = cKDTree(m2.points).query(a)[0]
        dba = cKDTree(m1.points).query(b)[0]
    return float(max(dab.max(), dba.max()))


@dataclass
class ConvergenceReport:
    thetas: np.ndarray
    distances: np.ndarray
    ball_radius: float
    clipped: bool

    @property
    def ratios(self) -> np.ndarray:
        return self.distances[1:] / self.distances[:-1]

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.distances) < 0))

    def to_csv(self) -> str:
        return "theta,hausdorff\n" + "".join(f"{float(t)!r},{float(d)!r}\n" for t, d in zip(self.thetas, self.distances))


def hausdorff_convergence(c: CostFunction, x0, y0, y1, thetas: Sequence[float], ball_radius: float,
                          resolution: int = 256, omega: Optional[DomainBox] = None,
                          omega_star: Optional[DomainBox] = None) -> ConvergenceReport:
    """Distance between the section boundary and the limiting c-hyperplane inside a ball around x0."""
    dom = default_domains(c)
    omega = omega or dom[0]
    omega_star = omega_star or dom[1]
    x0 = np.asarray(x0, float)
    room = float(np.min(np.minimum(x0 - omega.lower, omega.upper - x0)))
    clipped = ball_radius > room
    if clipped:
        warnings.warn(f"ball radius {ball_radius} exceeds the domain around x0; clipped to {room}", stacklevel=2)
        ball_radius = room
    hp = c_hyperplane(c, x0, y0, y1)
    ref = hyperplane_trace(hp, resolution, omega)
    out = []
    for t in thetas:
        mesh = section_boundary(c, SectionSpec(x0, y0, y1, float(t)), resolution, omega, omega_star)
        out.append(mesh_distance(mesh, ref, x0, ball_radius))
    return ConvergenceReport(np.asarray(thetas, float), np.asarray(out), float(ball_radius), clipped)


# ---------------------------------------------------------------------------
# second fundamental form


def _hessian_fd(f, x, step: Optional[float] = None) -> np.ndarray:
    """Central-difference Hessian of a scalar function with one Richardson level."""
    n = x.shape[-1]
    h = SFF_STEP * (1 + np.linalg.norm(x)) if step is None else step
    eye = np.eye(n)

    def d2(hh):
        out = np.empty((n, n))
        f0 = float(f(x))
        for i in range(n):
            for j in range(i, n):
                if i == j:
                    v = (float(f(x + hh * eye[i])) - 2 * f0 + float(f(x - hh * eye[i]))) / hh ** 2
                else:
                    ei, ej = hh * eye[i], hh * eye[j]
                    v = (float(f(x + ei + ej)) - float(f(x + ei - ej)) - float(f(x - ei + ej))
                         + float(f(x - ei - ej))) / (4 * hh * hh)
                out[i, j] = out[j, i] = v
        return out

    return (4 * d2(h / 2) - d2(h)) / 3


def _grad_fd(f, x, step: Optional[float] = None) -> np.ndarray:
    n = x.shape[-1]
    h = SFF_STEP * (1 + np.linalg.norm(x)) if step is None else step
    eye = np.eye(n)
    return np.array([(float(f(x + h * eye[i])) - float(f(x - h * eye[i]))) / (2 * h) for i in range(n)])


class DegenerateGradient(ArithmeticError):
    def __init__(self, x, grad_norm):
        self.x = np.asarray(x)
        self.grad_norm = float(grad_norm)
        super().__init__(f"defining function has degenerate gradient |grad h| = {grad_norm:.3e} at {self.x.tolist()}")


@dataclass
class SFF:
    """Second fundamental form at a surface point, oriented by the outward normal of {h <= 0}."""

    x: np.ndarray
    normal: np.ndarray
    tangent_basis: np.ndarray
    matrix: np.ndarray
    grad_norm: float
    hessian: np.ndarray

    def __call__(self, xi) -> float:
        xi = np.asarray(xi, float)
        xi = xi - (xi @ self.normal) * self.normal
        return float(xi @ self.hessian @ xi / self.grad_norm)


def sff(surface, x, step: Optional[float] = None, scale: Optional[float] = None,
        c: Optional[CostFunction] = None, box: Optional[DomainBox] = None) -> SFF:
    """Second fundamental form of {h = 0} at ``x``: II = D^2 h |_tangent / |grad h|.

    ``surface`` may be a :class:`Section`, a :class:`CHyperplane`, a
    :class:`SectionSpec` (then ``c`` is required), or a plain callable.
    Sections use the cost's second derivatives (analytic where available),
    other defining functions a finite-difference Hessian.
    """
    if isinstance(surface, SectionSpec):
        if c is None:
            raise ValueError("a SectionSpec needs the cost")
        surface = resolve(c, surface, box)
    x = np.asarray(x, float)
    if isinstance(surface, (Section, CHyperplane)):
        g = np.asarray(surface.grad(x), float)
        H = np.asarray(surface.hess(x), float)
        sc = surface.scale(x) if scale is None else scale
    else:
        g = getattr(surface, "grad", None)
        g = np.asarray(g(x), float) if g is not None else _grad_fd(surface, x, step)
        H = _hessian_fd(surface, x, step)
        sc = 1.0 if scale is None else scale
    H = 0.5 * (H + H.T)
    gn = float(np.linalg.norm(g))
    if not gn > DEGENERATE_GRAD * max(sc, 1e-300):
        raise DegenerateGradient(x, gn)
    nu = g / gn
    n = x.shape[-1]
    basis = np.linalg.svd(np.eye(n) - np.outer(nu, nu))[0][:, : n - 1]
    return SFF(x=x, normal=nu, tangent_basis=basis, matrix=basis.T @ H @ basis / gn, grad_norm=gn, hessian=H)


@dataclass
class MonotonicityResult:
    thetas: np.ndarray
    xis: np.ndarray
    values: np.ndarray  # (k_theta, k_xi)
    margins: np.ndarray  # (k_theta - 1, k_xi)

    @property
    def worst(self) -> float:
        return float(np.min(self.margins)) if self.margins.size else 0.0


def sff_monotonicity_test(c: CostFunction, x0, y0, y1, theta_grid: Sequence[float],
                          xi_grid=None, box: Optional[DomainBox] = None) -> MonotonicityResult:
    """II_theta(xi, xi) at x0 across an increasing theta grid; margins are successive differences."""
    thetas = np.sort(np.asarray(theta_grid, float))
    x0 = np.asarray(x0, float)
    if box is None:
        box = default_domains(c)[1]
    ys = c_segment(c, x0, y0, y1, thetas, box=box).ys
    forms = [sff(Section(c, SectionSpec(x0, y0, y1, float(t)), np.asarray(y)), x0) for t, y in zip(thetas, ys)]
    if xi_grid is None:
        xi_grid = forms[0].tangent_basis.T
    xis = np.atleast_2d(np.asarray(xi_grid, float))
    nu = forms[0].normal
    xis = xis - (xis @ nu)[:, None] * nu
    norms = np.linalg.norm(xis, axis=1)
    xis = xis[norms > 1e-12] / norms[norms > 1e-12, None]
    vals = np.array([[f(xi) for xi in xis] for f in forms])
    return MonotonicityResult(thetas, xis, vals, np.diff(vals, axis=0))


@dataclass
class NestingResult:
    pairs: list
    violations: np.ndarray
    tolerance: float

    @property
    def total(self) -> int:
        return int(self.violations.sum())


def section_nesting_test(c: CostFunction, x0, y0, y1, theta_pairs, resolution: int = 128,
                         omega: Optional[DomainBox] = None, omega_star: Optional[DomainBox] = None,
                         tol: Optional[float] = None) -> NestingResult:
    """Count grid points in S_theta' but outside S_theta (beyond ``tol``) for each pair theta' > theta.

    Default tolerance band: 1e-9 times the largest |h| seen on the grid.
    """
    dom = default_domains(c)
    omega = omega or dom[0]
    omega_star = omega_star or dom[1]
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(omega.lower, omega.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], -1)
    pairs = [(float(a), float(b)) for a, b in theta_pairs]
    thetas = sorted({t for pr in pairs for t in pr})
    ys = c_segment(c, x0, y0, y1, thetas, box=omega_star).ys
    hs = {t: Section(c, SectionSpec(x0, y0, y1, t), y)(pts) for t, y in zip(thetas, ys)}
    if tol is None:
        tol = 1e-9 * max(float(np.max(np.abs(v))) for v in hs.values())
    counts = []
    for a, b in pairs:
        lo, hi = (a, b) if a <= b else (b, a)
        counts.append(int(np.sum((hs[hi] <= 0) & (hs[lo] > tol))))
    return NestingResult(pairs, np.asarray(counts), float(tol))


# ---------------------------------------------------------------------------
# convexity of point sets


@dataclass
class ConvexityResult:
    violation: float
    degenerate: bool
    method: str
    pairs: int = 0
    tol: float = 0.0

    @property
    def convex(self) -> bool:
        return self.violation <= self.tol


def polygon_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def convexity_of_point_set(points, tol: float = 0.0, inside: Optional[Callable] = None, seeds=None,
                           n_pairs: int = 2000, seed: int = 0) -> ConvexityResult:
    """Normalised convexity defect of a point set.

    Without ``inside``: ``points`` is an ordered planar boundary and the defect
    is (hull area - polygon area) / hull area.  With ``inside(pts, seeds)`` a
    membership oracle: the defect is the fraction of midpoints of random pairs
    that fall outside (``seeds`` are per-point hints passed through, averaged
    for midpoints).  Fewer than three points, or a flat hull, count as convex
    and are flagged degenerate.
    """
    pts = np.atleast_2d(np.asarray(points, float))
    m, n = pts.shape
    if inside is not None:
        if m < 2:
            return ConvexityResult(0.0, True, "midpoint", 0, tol)
        rng = np.random.default_rng(seed)
        i = rng.integers(0, m, n_pairs)
        j = rng.integers(0, m, n_pairs)
        mids = 0.5 * (pts[i] + pts[j])
        hint = None if seeds is None else 0.5 * (np.asarray(seeds)[i] + np.asarray(seeds)[j])
        ok = np.asarray(inside(mids, hint), bool)
        return ConvexityResult(float(np.mean(~ok)), False, "midpoint", n_pairs, tol)
    if n != 2:
        raise ValueError("hull-area test is planar; pass an inside() oracle for n != 2")
    if m < 3:
        return ConvexityResult(0.0, True, "hull_area", 0, tol)
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return ConvexityResult(0.0, True, "hull_area", 0, tol)
    ha = float(hull.volume)
    if ha <= 1e-14 * np.ptp(pts, axis=0).max() ** 2:
        return ConvexityResult(0.0, True, "hull_area", 0, tol)
    return ConvexityResult(max(0.0, (ha - polygon_area(pts)) / ha), False, "hull_area", 0, tol)


# ---------------------------------------------------------------------------
# seeded scans over random configurations


@dataclass
class SectionScanReport:
    kind: str
    cost: str
    seed: int
    configs: int
    skipped: int
    worst_margin: float
    worst_location: dict
    tolerance: float
    violations: int = 0

    @property
    def passed(self) -> bool:
        if self.kind == "nesting":
            return self.violations == 0
        return not (self.worst_margin < -self.tolerance)

    def to_dict(self) -> dict:
        loc = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.worst_location.items()}
        return {"kind": self.kind, "cost": self.cost, "seed": self.seed, "configs": self.configs,
                "skipped": self.skipped, "worst_margin": self.worst_margin, "worst_location": loc,
                "tolerance": self.tolerance, "violations": self.violations, "passed": self.passed}


SFF_THETAS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
SFF_TOL = 1e-7


def sff_values_batch(c: CostFunction, x0, y0, y1, thetas, box: Optional[DomainBox] = None):
    """II_theta(xi, xi) at x0 for the unit tangent xi of each configuration (planar).

    Uses grad h_theta(x0) = p_theta - p0 and D^2 h_theta(x0) = c_xx(x0, y0) - c_xx(x0, y_theta).
    Returns (values (m, k), converged (m, k), xi (m, 2)).
    """
    from .c_exp import CONVERGED, c_segment_batch

    if c.dim != 2:
        raise ValueError("batched SFF scan is planar; use sff_monotonicity_test for n != 2")
    ys, status, _ = c_segment_batch(c, x0, y0, y1, thetas, box=box)
    dp = -c.cx(x0, y1) + c.cx(x0, y0)
    xi = np.stack([-dp[:, 1], dp[:, 0]], -1) / np.linalg.norm(dp, axis=-1)[:, None]
    xb = np.broadcast_to(x0[:, None, :], ys.shape)
    grad = c.cx(xb, y0[:, None, :]) - c.cx(xb, ys)
    hess = c.cxx(xb, y0[:, None, :]) - c.cxx(xb, ys)
    vals = np.einsum("mi,mkij,mj->mk", xi, hess, xi) / np.linalg.norm(grad, axis=-1)
    return vals, status == CONVERGED, xi


def sff_scan(c: CostFunction, omega: Optional[DomainBox] = None, omega_star: Optional[DomainBox] = None,
             configs: int = 1000, seed: int = 0, thetas: Sequence[float] = SFF_THETAS,
             tol: float = SFF_TOL) -> SectionScanReport:
    """Worst SFF monotonicity margin II_theta' - II_theta (successive thetas) over seeded configurations."""
    from .mtw import draw_configurations

    dom = default_domains(c)
    omega = omega or dom[0]
    omega_star = omega_star or dom[1]
    th = np.sort(np.asarray(thetas, float))
    x, (y0, y1), _ = draw_configurations(c, omega, omega_star, configs, seed, 2, 0)
    dp = np.linalg.norm(-c.cx(x, y1) + c.cx(x, y0), axis=-1)
    vals, ok, xi = sff_values_batch(c, x, y0, y1, th, box=omega_star)
    good = np.all(ok, axis=1) & (dp > 1e-8 * np.median(dp))
    margins = np.where(good[:, None], np.diff(vals, axis=1), np.inf)
    flat = np.argmin(margins)
    i, j = np.unravel_index(flat, margins.shape)
    loc = {"index": int(i), "x0": x[i], "y0": y0[i], "y1": y1[i], "xi": xi[i],
           "theta": float(th[j]), "theta_next": float(th[j + 1])}
    return SectionScanReport("sff", c.name, seed, configs, int((~good).sum()), float(margins[i, j]), loc, tol)


def nesting_scan(c: CostFunction, omega: Optional[DomainBox] = None, omega_star: Optional[DomainBox] = None,
                 configs: int = 1000, seed: int = 0, theta_pairs=((0.25, 0.5), (0.5, 1.0)),
                 resolution: int = 128) -> SectionScanReport:
    """Total nesting violations over seeded configurations, each tested on a resolution^2 grid."""
    from .c_exp import CONVERGED, c_segment_batch
    from .mtw import draw_configurations

    dom = default_domains(c)
    omega = omega or dom[0]
    omega_star = omega_star or dom[1]
    pairs = [(min(a, b), max(a, b)) for a, b in theta_pairs]
    thetas = sorted({t for pr in pairs for t in pr})
    x, (y0, y1), _ = draw_configurations(c, omega, omega_star, configs, seed, 2, 0)
    ys, status, _ = c_segment_batch(c, x, y0, y1, thetas, box=omega_star)
    good = np.all(status == CONVERGED, axis=1)
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(omega.lower, omega.upper)]
    pts = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], -1)
    c0 = c(pts[None, :, :], y0[:, None, :]) - c(x, y0)[:, None]
    counts = np.zeros(configs, dtype=int)
    worst = np.full(configs, np.inf)
    tol_used = 0.0
    for i in np.flatnonzero(good):
        hs = {}
        for k, t in enumerate(thetas):
            hs[t] = c0[i] - c(pts, ys[i, k]) + c(x[i], ys[i, k])
        tol = 1e-9 * max(float(np.max(np.abs(v))) for v in hs.values())
        tol_used = max(tol_used, tol)
        for lo, hi in pairs:
            inner = hs[hi] <= 0
            counts[i] += int(np.sum(inner & (hs[lo] > tol)))
            if inner.any():
                worst[i] = min(worst[i], float(np.min(-hs[lo][inner])))
    i = int(np.argmax(counts)) if counts.any() else int(np.argmin(worst))
    loc = {"index": i, "x0": x[i], "y0": y0[i], "y1": y1[i], "theta_pairs": [list(p) for p in pairs]}
    rep = SectionScanReport("nesting", c.name, seed, configs, int((~good).sum()), float(worst[i]), loc,
                            tol_used, violations=int(counts.sum()))
    return rep
