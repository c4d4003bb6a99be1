"""Checkers for the weak MTW condition.

Three independent routes are provided:

* ``a3v``: the integrated inequality along a c-segment, probed on small
  spheres around the anchor point (no derivatives of c beyond c_x);
* ``codim1``: convexity of theta -> A(x, p_theta) xi.xi along segments in p
  orthogonal to xi, where A(x, p) = -c_xx(x, c_exp(x, p));
* ``tensor``: the second difference of A xi.xi in p along eta orthogonal to xi.

All margins are oriented so that nonnegative means "condition holds".
Sampling gives falsification power and evidence, never a proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .c_exp import CONVERGED, c_exp, c_exp_batch, c_segment_batch
from .cost_model import (
    CostFunction,
    DomainBox,
    cost_scale,
    det_and_inverse,
    exclusion_radius,
    lipschitz_estimate,
)

METHODS = ("a3v", "codim1", "tensor")
TOL_REL = 1e-7
A3V_THETAS = (0.25, 0.5, 0.75)
CODIM1_THETAS = tuple(np.linspace(0.0, 1.0, 9))
PROBE_RADII_REL = (0.05, 0.025, 0.0125)
N_PROBE_DIRS = 32
STRATIFIED_FRACTION = 0.7


def _norm(v):
    return np.linalg.norm(v, axis=-1)


def _quad(a, v):
    return np.einsum("...ij,...i,...j->...", a, v, v)


def tangent_direction(dp, rng: Optional[np.random.Generator] = None, raw=None):
    """Unit vector orthogonal to ``dp`` (batched).

    In 2-D this is ``dp`` rotated by +90 degrees; otherwise ``raw`` (or a random
    vector) is projected and normalised.  Rows where the projection degenerates
    come back as NaN.
    """
    dp = np.asarray(dp, float)
    n = dp.shape[-1]
    if n == 2 and raw is None:
        t = np.stack([-dp[..., 1], dp[..., 0]], axis=-1)
        nt = _norm(t)[..., None]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(nt > 0, t / nt, np.nan)
    if raw is None:
        rng = rng or np.random.default_rng(0)
        raw = rng.standard_normal(dp.shape)
    return orthogonalize(raw, dp)


def orthogonalize(xi, dp, min_norm: float = 1e-8):
    """Project xi orthogonal to dp and renormalise; NaN rows if the projection is ~0."""
    xi = np.asarray(xi, float)
    dp = np.asarray(dp, float)
    nd2 = np.sum(dp * dp, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        proj = xi - np.where(nd2 > 0, np.sum(xi * dp, -1, keepdims=True) / nd2, 0.0) * dp
    nx = _norm(xi)[..., None]
    npj = _norm(proj)[..., None]
    ok = npj > min_norm * np.maximum(nx, 1e-300)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(ok, proj / npj, np.nan)


# ---------------------------------------------------------------------------
# A matrix


@dataclass
class AMatrixSample:
    x: np.ndarray
    p: np.ndarray
    A: np.ndarray
    y: np.ndarray


def a_from_y(c: CostFunction, x, y):
    a = -c.cxx(x, y)
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def a_matrix(c: CostFunction, x, p, y_init=None, box: Optional[DomainBox] = None) -> AMatrixSample:
    """A(x, p) = -c_xx(x, c_exp(x, p)), symmetrised."""
    res = c_exp(c, x, p, y_init=y_init, box=box)
    return AMatrixSample(x=np.asarray(x, float), p=np.asarray(p, float), A=a_from_y(c, x, res.y), y=res.y)


# ---------------------------------------------------------------------------
# co-dimension one convexity


def codim1_margins_batch(c: CostFunction, x, y0, y1, xi, thetas, box=None):
    """Margins (1-t) A(p0)xi.xi + t A(p1)xi.xi - A(p_t)xi.xi, shape (m, k).

    ``xi`` is used as given (callers orthogonalise).  Returns (margins, status, ys).
    """
    thetas = np.asarray(thetas, float)
    ys, status, _ = c_segment_batch(c, x, y0, y1, thetas, box=box)
    x = np.atleast_2d(x)
    a0 = _quad(a_from_y(c, x, y0), xi)
    a1 = _quad(a_from_y(c, x, y1), xi)
    at = _quad(a_from_y(c, x[:, None, :], ys), xi[:, None, :])
    t = thetas[None, :]
    margins = (1.0 - t) * a0[:, None] + t * a1[:, None] - at
    margins[status != CONVERGED] = np.nan
    return margins, status, ys


@dataclass
class Codim1Result:
    thetas: np.ndarray
    margins: np.ndarray
    xi: np.ndarray
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.all(self.margins >= -self.tolerance))


def check_a3w_codim1(c: CostFunction, x, p0, p1, xi, thetas=CODIM1_THETAS, tol: float = 0.0,
                     box: Optional[DomainBox] = None, y0=None, y1=None) -> Codim1Result:
    """Convexity of theta -> A(x, p_theta) xi.xi on a segment in p orthogonal to xi."""
    x, p0, p1 = (np.asarray(a, float) for a in (x, p0, p1))
    seed = box.center if box is not None else x
    if y0 is None:
        y0 = c_exp(c, x, p0, y_init=seed, box=box).y
    if y1 is None:
        y1 = c_exp(c, x, p1, y_init=y0, box=box).y
    xi_o = orthogonalize(np.asarray(xi, float)[None], (p1 - p0)[None])
    if np.any(np.isnan(xi_o)):
        raise ValueError("xi is (numerically) parallel to p1 - p0")
    m, status, _ = codim1_margins_batch(c, x[None], np.asarray(y0)[None], np.asarray(y1)[None], xi_o,
                                        thetas, box=box)
    if np.any(status != CONVERGED):
        from .c_exp import CExpError
        j = int(np.flatnonzero(status[0] != CONVERGED)[0])
        t = float(np.asarray(thetas)[j])
        raise CExpError(int(status[0, j]), x, (1 - t) * p0 + t * p1, theta=t)
    return Codim1Result(thetas=np.asarray(thetas, float), margins=m[0], xi=xi_o[0], tolerance=tol)


# ---------------------------------------------------------------------------
# tensor


def tensor_batch(c: CostFunction, x, y, xi, eta, box=None, step_rel: float = 1e-3):
    """Second difference of A(x, .) xi.xi along eta at p = -c_x(x, y).

    Step h = step_rel * (1 + |p|) with one Richardson level.  Returns
    (values, ok) where ok flags that every offset c_exp converged.
    """
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    p = -c.cx(x, y)
    h = step_rel * (1.0 + _norm(p))
    a_mid = _quad(a_from_y(c, x, y), xi)
    ok = np.ones(x.shape[0], dtype=bool)
    vals = {}
    for s in (1.0, -1.0, 0.5, -0.5):
        b = c_exp_batch(c, x, p + (s * h)[:, None] * eta, y, box=box)
        ok &= b.converged
        vals[s] = _quad(a_from_y(c, x, b.y), xi)
    t_h = (vals[1.0] - 2.0 * a_mid + vals[-1.0]) / h ** 2
    t_h2 = (vals[0.5] - 2.0 * a_mid + vals[-0.5]) / (0.5 * h) ** 2
    out = (4.0 * t_h2 - t_h) / 3.0
    out[~ok] = np.nan
    return out, ok


def mtw_tensor(c: CostFunction, x, p, xi, eta, y_init=None, box: Optional[DomainBox] = None,
               step_rel: float = 1e-3) -> float:
    """d^2/ds^2 A(x, p + s eta) xi.xi at s = 0 for unit xi orthogonal to eta.

    Nonnegativity over all such pairs is the weak MTW condition.
    """
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    if abs(np.linalg.norm(xi) - 1) > 1e-12 or abs(np.linalg.norm(eta) - 1) > 1e-12:
        raise ValueError("xi and eta must be unit vectors")
    if abs(xi @ eta) > 1e-12:
        raise ValueError("xi and eta must be orthogonal")
    y = c_exp(c, x, p, y_init=y_init, box=box).y
    v, ok = tensor_batch(c, np.asarray(x, float)[None], y[None], xi[None], eta[None], box=box,
                         step_rel=step_rel)
    if not ok[0]:
        raise RuntimeError("c_exp failed at a tensor offset point")
    return float(v[0])


# ---------------------------------------------------------------------------
# direct A3v


def probe_directions(xi, n_dirs: int = N_PROBE_DIRS, rng=None):
    """Unit probe directions per configuration, always including +-xi.

    ``xi`` has shape (m, n); returns (m, D, n).
    """
    xi = np.atleast_2d(xi)
    m, n = xi.shape
    if n == 1:
        return np.stack([np.ones((m, 1)), -np.ones((m, 1))], axis=1)
    if n == 2:
        base = np.arctan2(xi[:, 1], xi[:, 0])
        ang = base[:, None] + 2.0 * np.pi * np.arange(n_dirs)[None, :] / n_dirs
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    rng = rng or np.random.default_rng(0)
    d = rng.standard_normal((m, n_dirs - 2, n))
    d /= _norm(d)[..., None]
    return np.concatenate([xi[:, None], -xi[:, None], d], axis=1)


def a3v_margins_batch(c: CostFunction, x0, y0, y1, thetas, radii, dirs, omega=None, box=None):
    """max(f(0), f(1)) - f(theta) with f(s) = -c(x, y_s) + c(x0, y_s).

    Probes are x0 + r * dir; shape of the result is (m, k, R, D).  Probes
    outside ``omega`` or inside the singular set are NaN.
    """
    x0 = np.atleast_2d(x0)
    y0 = np.atleast_2d(y0)
    y1 = np.atleast_2d(y1)
    thetas = np.asarray(thetas, float)
    radii = np.asarray(radii, float)
    ys, status, _ = c_segment_batch(c, x0, y0, y1, thetas, box=box)
    probes = x0[:, None, None, :] + radii[None, :, None, None] * dirs[:, None, :, :]  # m R D n

    def f(yv):  # yv: (m, n) -> (m, R, D)
        return -c(probes, yv[:, None, None, :]) + c(x0, yv)[:, None, None]

    with np.errstate(all="ignore"):
        f0 = f(y0)
        f1 = f(y1)
        top = np.maximum(f0, f1)
        ft = -c(probes[:, None], ys[:, :, None, None, :]) + c(x0[:, None], ys)[:, :, None, None]
    margins = top[:, None] - ft
    bad = np.zeros(probes.shape[:-1], dtype=bool)
    if omega is not None:
        bad |= ~omega.contains(probes)
    r = exclusion_radius(c, *(b for b in (omega, box) if b is not None))
    if r > 0:
        for yv in [y0, y1]:
            bad |= _norm(probes - yv[:, None, None, :]) < r
        bad = bad[:, None] | (_norm(probes[:, None] - ys[:, :, None, None, :]) < r)
    else:
        bad = np.broadcast_to(bad[:, None], margins.shape)
    margins = np.where(bad, np.nan, margins)
    margins[status != CONVERGED] = np.nan
    return margins, probes


def h_ordering_batch(c: CostFunction, x0, y0, y_theta, y1, probes):
    """max(h_1, 0) - h_theta at probe points (independent algebraic route)."""
    def h(yv):
        return c(probes, y0) - c(probes, yv) - c(x0, y0) + c(x0, yv)

    return np.maximum(h(y1), 0.0) - h(y_theta)


@dataclass
class A3vResult:
    x0: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    thetas: np.ndarray
    radii: np.ndarray
    margins: np.ndarray  # (k, R, D)
    probes: np.ndarray  # (R, D, n)
    tolerance: float

    @property
    def worst_margin(self) -> float:
        return float(np.nanmin(self.margins))

    @property
    def passed(self) -> bool:
        return self.worst_margin >= -self.tolerance

    def scaled_trend(self) -> np.ndarray:
        """min over theta and directions of margin / r^2, per radius."""
        return np.nanmin(self.margins, axis=(0, 2)) / self.radii ** 2


def check_a3v_direct(c: CostFunction, x0, y0, y1, thetas=A3V_THETAS, probe_radii=(0.1, 0.05, 0.025),
                     n_dirs: int = N_PROBE_DIRS, tol: float = 0.0, omega: Optional[DomainBox] = None,
                     box: Optional[DomainBox] = None) -> A3vResult:
    """Integrated weak MTW inequality at one configuration, clean form."""
    x0, y0, y1 = (np.asarray(a, float) for a in (x0, y0, y1))
    dp = -c.cx(x0, y1) + c.cx(x0, y0)
    xi = tangent_direction(dp[None])
    if np.any(np.isnan(xi)):
        raise ValueError("degenerate configuration: p1 == p0")
    dirs = probe_directions(xi, n_dirs)
    m, probes = a3v_margins_batch(c, x0[None], y0[None], y1[None], thetas, probe_radii, dirs,
                                  omega=omega, box=box)
    return A3vResult(x0=x0, y0=y0, y1=y1, thetas=np.asarray(thetas, float),
                     radii=np.asarray(probe_radii, float), margins=m[0], probes=probes[0], tolerance=tol)


def check_h_ordering(c: CostFunction, x0, y0, y1, theta: float, probes, box=None) -> np.ndarray:
    """max(h_1, 0) - h_theta at the given probe points; >= 0 under the weak MTW condition."""
    x0, y0, y1 = (np.asarray(a, float) for a in (x0, y0, y1))
    ys, status, _ = c_segment_batch(c, x0, y0, y1, [theta], box=box)
    if status[0, 0] != CONVERGED:
        raise RuntimeError("c-segment solve failed")
    return h_ordering_batch(c, x0, y0, ys[0, 0], y1, np.asarray(probes, float))


# ---------------------------------------------------------------------------
# C^3 local c-convexity form


def mixed_third(c: CostFunction, x, y0, w, rel: float = 1e-5):
    """sum_k c_{ij,k} w_k, i.e. the derivative of c_xx(x, .) at y0 along w (central, Richardson)."""
    x, y0, w = (np.asarray(a, float) for a in (x, y0, w))
    h = rel * (1.0 + np.linalg.norm(x) + np.linalg.norm(y0))

    def d(hh):
        return (c.cxx(x, y0 + hh * w) - c.cxx(x, y0 - hh * w)) / (2.0 * hh)

    return (4.0 * d(0.5 * h) - d(h)) / 3.0


def local_cconvexity_form(c: CostFunction, phi_grad, phi_hess, x, y0, tau) -> float:
    """[phi_ij - c_{ij,k} c^{k,l} phi_l] tau_i tau_j for the set {phi <= 0}.

    Here c^{k,l} is the inverse of c_{x,y}(x, y0).  The value is the tangential
    Hessian of phi after the change of variables q = -c_y(., y0), so it is
    nonnegative on the boundary exactly when {phi <= 0} is locally c-convex
    with respect to y0.
    """
    tau = np.asarray(tau, float)
    if abs(np.linalg.norm(tau) - 1) > 1e-9:
        raise ValueError("tau must be a unit vector")
    _, inv = det_and_inverse(c.cxy(x, y0))
    w = inv @ np.asarray(phi_grad, float)
    if not np.all(np.isfinite(w)):
        from .cost_model import A2Violation
        raise A2Violation(x, y0, 0.0)
    t = mixed_third(c, x, y0, w)
    return float(tau @ (np.asarray(phi_hess, float) - t) @ tau)


# ---------------------------------------------------------------------------
# scans


@dataclass
class MTWReport:
    method: str
    cost: str
    seed: int
    budget: int
    samples: int
    skipped: int
    worst_margin: float
    worst_location: dict
    tolerance: float
    diagnostic: dict = field(default_factory=dict)
    margins: Optional[np.ndarray] = None

    @property
    def passed(self) -> bool:
        return bool(self.worst_margin >= -self.tolerance)

    def to_dict(self, with_margins: bool = False) -> dict:
        d = {
            "method": self.method, "cost": self.cost, "seed": self.seed, "budget": self.budget,
            "samples": self.samples, "skipped": self.skipped, "worst_margin": self.worst_margin,
            "tolerance": self.tolerance, "pass": self.passed,
            "worst_location": {k: np.asarray(v).tolist() for k, v in self.worst_location.items()},
            "diagnostic": {k: np.asarray(v).tolist() for k, v in self.diagnostic.items()},
        }
        if with_margins and self.margins is not None:
            d["margins"] = self.margins.tolist()
        return d


def config_samples(dim_unit: int, budget: int, seed: int) -> np.ndarray:
    """Unit-cube samples: 70% Latin hypercube (stratified), 30% uniform."""
    n_strat = int(round(STRATIFIED_FRACTION * budget))
    parts = []
    if n_strat:
        parts.append(qmc.LatinHypercube(d=dim_unit, seed=np.random.default_rng([seed, 0])).random(n_strat))
    parts.append(np.random.default_rng([seed, 1]).random((budget - n_strat, dim_unit)))
    return np.concatenate(parts)


def draw_configurations(c, omega, omega_star, budget, seed, n_targets, extra):
    """Configurations x, targets y_1..y_k and `extra` unit coordinates; inadmissible rows replaced."""
    n = c.dim
    d = n * (1 + n_targets) + extra
    u = config_samples(d, budget, seed)
    r = exclusion_radius(c, omega, omega_star)
    rng = np.random.default_rng([seed, 2])
    for _ in range(100):
        x = omega.from_unit(u[:, :n])
        ys = [omega_star.from_unit(u[:, n * (i + 1):n * (i + 2)]) for i in range(n_targets)]
        bad = np.zeros(budget, dtype=bool)
        for y in ys:
            bad |= _norm(x - y) < r
        if not bad.any():
            break
        u[bad] = rng.random((int(bad.sum()), d))
    return x, ys, u[:, n * (1 + n_targets):]


def _tolerances(c, omega, omega_star):
    s = cost_scale(c, omega, omega_star)
    lip = max(lipschitz_estimate(c, omega, omega_star), 1e-12)
    return s, lip


def _random_dirs(u_extra, n, rng):
    if n == 2:
        ang = np.pi * u_extra[:, 0]
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    v = rng.standard_normal((u_extra.shape[0], n))
    return v / _norm(v)[:, None]


def scan(c: CostFunction, omega: DomainBox, omega_star: DomainBox, method: str = "a3v",
         budget: int = 10_000, seed: int = 0, keep_margins: bool = False,
         thetas: Optional[Sequence[float]] = None, probe_radii: Optional[Sequence[float]] = None,
         tol: Optional[float] = None, chunk: int = 4096) -> MTWReport:
    """Randomised + stratified search for violations; deterministic given ``seed``."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    n = c.dim
    scale, lip = _tolerances(c, omega, omega_star)
    rng = np.random.default_rng([seed, 3])
    box = omega_star
    diagnostic = {}

    if method == "tensor":
        x, (y,), ue = draw_configurations(c, omega, omega_star, budget, seed, 1, 1 if n == 2 else 0)
        xi = _random_dirs(ue, n, rng)
        eta = tangent_direction(xi, rng=rng)
        vals = np.full(budget, np.nan)
        for s in range(0, budget, chunk):
            sl = slice(s, s + chunk)
            vals[sl], _ = tensor_batch(c, x[sl], y[sl], xi[sl], eta[sl], box=box)
        per = vals
        tol = TOL_REL * scale / lip ** 2 if tol is None else tol

        def location(i):
            return {"x": x[i], "y": y[i], "p": -c.cx(x[i], y[i]), "xi": xi[i], "eta": eta[i]}

    else:
        x, (y0, y1), _ = draw_configurations(c, omega, omega_star, budget, seed, 2, 0)
        dp = -c.cx(x, y1) + c.cx(x, y0)
        xi = tangent_direction(dp, rng=rng)
        degenerate = np.any(np.isnan(xi), axis=-1) | (_norm(dp) < 1e-10 * lip)
        xi[degenerate] = 0.0
        if method == "codim1":
            th = np.asarray(CODIM1_THETAS if thetas is None else thetas, float)
            allm = np.full((budget, th.size), np.nan)
            for s in range(0, budget, chunk):
                sl = slice(s, s + chunk)
                allm[sl], _, _ = codim1_margins_batch(c, x[sl], y0[sl], y1[sl], xi[sl], th, box=box)
            tol = TOL_REL * scale if tol is None else tol
            arg_t = np.zeros(budget, dtype=int)
            with np.errstate(all="ignore"):
                finite = np.where(np.isnan(allm), np.inf, allm)
                arg_t = np.argmin(finite, axis=1)
                per = finite[np.arange(budget), arg_t]
            per[np.all(np.isnan(allm), axis=1)] = np.nan

            def location(i):
                return {"x": x[i], "y0": y0[i], "y1": y1[i], "p0": -c.cx(x[i], y0[i]),
                        "p1": -c.cx(x[i], y1[i]), "xi": xi[i], "theta": th[arg_t[i]], "thetas": th}
        else:
            th = np.asarray(A3V_THETAS if thetas is None else thetas, float)
            radii = np.asarray(probe_radii if probe_radii is not None
                               else [f * omega.diagonal for f in PROBE_RADII_REL], float)
            dirs = probe_directions(np.where(degenerate[:, None], np.eye(n)[0], xi), N_PROBE_DIRS, rng)
            per = np.full(budget, np.nan)
            where = np.zeros((budget, 3), dtype=int)
            trend = np.full(radii.size, np.inf)
            for s in range(0, budget, chunk):
                sl = slice(s, s + chunk)
                mg, _ = a3v_margins_batch(c, x[sl], y0[sl], y1[sl], th, radii, dirs[sl],
                                          omega=omega, box=box)
                flat = np.where(np.isnan(mg), np.inf, mg).reshape(mg.shape[0], -1)
                k = np.argmin(flat, axis=1)
                per[sl] = flat[np.arange(flat.shape[0]), k]
                where[sl] = np.stack(np.unravel_index(k, mg.shape[1:]), axis=-1)
                with np.errstate(all="ignore"):
                    r_min = np.nanmin(np.where(np.isnan(mg), np.inf, mg), axis=(1, 3))
                trend = np.minimum(trend, np.min(r_min, axis=0) / radii ** 2)
            per[~np.isfinite(per)] = np.nan
            diagnostic["min_margin_over_r2"] = trend
            diagnostic["radii"] = radii
            tol = TOL_REL * scale * float(radii.max()) ** 2 if tol is None else tol

            def location(i):
                kt, kr, kd = where[i]
                return {"x0": x[i], "y0": y0[i], "y1": y1[i], "theta": th[kt], "radius": radii[kr],
                        "probe": x[i] + radii[kr] * dirs[i, kd], "thetas": th, "radii": radii,
                        "xi": xi[i], "dirs": dirs[i]}
        per[degenerate] = np.nan

    valid = ~np.isnan(per)
    skipped = int(budget - valid.sum())
    if valid.any():
        i = int(np.flatnonzero(valid)[np.argmin(per[valid])])
        worst = float(per[i])
        loc = location(i)
        loc["index"] = i
    else:
        worst, loc = math.nan, {}
    return MTWReport(method=method, cost=c.name, seed=seed, budget=budget, samples=int(valid.sum()),
                     skipped=skipped, worst_margin=worst, worst_location=loc, tolerance=float(tol),
                     diagnostic=diagnostic, margins=per if keep_margins else None)


def replay(c: CostFunction, report, omega: DomainBox, omega_star: DomainBox) -> float:
    """Recompute the worst margin of a scan as a single-configuration check.

    ``report`` is an :class:`MTWReport` or its ``to_dict()`` form (as stored in a run record).
    """
    if isinstance(report, dict):
        method = report["method"]
        loc = {k: np.asarray(v, float) for k, v in report["worst_location"].items()}
    else:
        method, loc = report.method, report.worst_location
    if method == "tensor":
        v, _ = tensor_batch(c, loc["x"][None], loc["y"][None], loc["xi"][None], loc["eta"][None],
                            box=omega_star)
        return float(v[0])
    if method == "codim1":
        m, _, _ = codim1_margins_batch(c, loc["x"][None], loc["y0"][None], loc["y1"][None],
                                       loc["xi"][None], loc["thetas"], box=omega_star)
        return float(np.nanmin(m))
    dirs = loc["dirs"][None]
    m, probes = a3v_margins_batch(c, loc["x0"][None], loc["y0"][None], loc["y1"][None], loc["thetas"],
                                  loc["radii"], dirs, omega=omega, box=omega_star)
    return float(np.nanmin(m))


@dataclass
class DualityReport:
    primal: MTWReport
    dual: MTWReport

    @property
    def agree(self) -> bool:
        return self.primal.passed == self.dual.passed


def check_duality_invariance(c: CostFunction, omega: DomainBox, omega_star: DomainBox,
                             method: str = "a3v", budget: int = 10_000, seed: int = 0) -> DualityReport:
    """Same scan on c and on the transposed cost c*(y, x) = c(x, y) with domains swapped."""
    primal = scan(c, omega, omega_star, method, budget, seed)
    dual = scan(c.transposed(), omega_star, omega, method, budget, seed)
    return DualityReport(primal=primal, dual=dual)
