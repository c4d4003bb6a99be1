"""c-exponential maps and c-segments.

Convention used throughout the package: ``p := -c_x(x, y)``, so
``y = c_exp(x, p)`` solves ``-c_x(x, y) = p``.  Interpolating ``p`` affinely
gives the same c-segment as interpolating ``+c_x``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .cost_model import CostFunction, DomainBox, det_and_inverse, singular_mask, solve_small

NEWTON_TOL = 1e-12
MAX_ITER = 50
MAX_HALVINGS = 20

RUNNING, CONVERGED, MAX_ITERATIONS, SINGULAR, ESCAPED, STALLED = range(6)
STATUS_NAMES = {
    RUNNING: "running",
    CONVERGED: "converged",
    MAX_ITERATIONS: "max_iterations",
    SINGULAR: "singular_jacobian",
    ESCAPED: "escaped",
    STALLED: "stalled",
}


class CExpError(RuntimeError):
    def __init__(self, status: int, x, p, result=None, theta=None):
        self.status = status
        self.x = np.asarray(x)
        self.p = np.asarray(p)
        self.result = result
        self.theta = theta
        where = f" at theta={theta}" if theta is not None else ""
        super().__init__(f"c-exp failed ({STATUS_NAMES[status]}){where}: x={self.x.tolist()}, p={self.p.tolist()}")


@dataclass
class CExpResult:
    y: np.ndarray
    iterations: int
    residual: float
    converged: bool
    status: str = "converged"


@dataclass
class CExpBatch:
    y: np.ndarray
    iterations: np.ndarray
    residual: np.ndarray
    status: np.ndarray

    @property
    def converged(self) -> np.ndarray:
        return self.status == CONVERGED


def c_exp_batch(c: CostFunction, x, p, y_init, box: Optional[DomainBox] = None,
                tol: float = NEWTON_TOL, max_iter: int = MAX_ITER,
                max_halvings: int = MAX_HALVINGS) -> CExpBatch:
    """Damped Newton on F(y) = -c_x(x, y) - p for stacks of (x, p) of shape (m, n)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    p = np.atleast_2d(np.asarray(p, dtype=float))
    y_init = np.atleast_2d(np.asarray(y_init, dtype=float))
    m = max(x.shape[0], p.shape[0], y_init.shape[0])
    x = np.broadcast_to(x, (m, c.dim))
    p = np.broadcast_to(p, (m, c.dim))
    y = np.array(np.broadcast_to(y_init, (m, c.dim)))

    def resid(xx, yy, pp):
        with np.errstate(all="ignore"):
            f = -c.cx(xx, yy) - pp
            r = np.linalg.norm(f, axis=-1)
        r[~np.isfinite(r)] = np.inf
        return f, r

    f, res = resid(x, y, p)
    status = np.where(res < tol, CONVERGED, RUNNING)
    iters = np.zeros(m, dtype=int)
    slack = box.diagonal if box is not None else None

    for _ in range(max_iter):
        act = np.flatnonzero(status == RUNNING)
        if act.size == 0:
            break
        xa, ya, pa, fa, ra = x[act], y[act], p[act], f[act], res[act]
        with np.errstate(all="ignore"):
            jac = -c.cxy(xa, ya)
            det, _ = det_and_inverse(jac)
        sing = singular_mask(jac, det) | ~np.isfinite(det)
        status[act[sing]] = SINGULAR
        keep = ~sing
        act, xa, ya, pa, fa, ra, jac = act[keep], xa[keep], ya[keep], pa[keep], fa[keep], ra[keep], jac[keep]
        if act.size == 0:
            continue
        with np.errstate(all="ignore"):
            delta = solve_small(jac, -fa)

        step = np.ones(act.size)
        accepted = np.zeros(act.size, dtype=bool)
        new_y = ya.copy()
        new_f = fa.copy()
        new_r = ra.copy()
        for _h in range(max_halvings + 1):
            todo = ~accepted
            if not todo.any():
                break
            trial = ya[todo] + step[todo, None] * delta[todo]
            ft, rt = resid(xa[todo], trial, pa[todo])
            good = rt < ra[todo]
            idx = np.flatnonzero(todo)[good]
            new_y[idx], new_f[idx], new_r[idx] = trial[good], ft[good], rt[good]
            accepted[idx] = True
            step[todo] *= 0.5
        iters[act] += 1
        status[act[~accepted]] = STALLED
        y[act], f[act], res[act] = new_y, new_f, new_r
        done = accepted & (new_r < tol)
        status[act[done]] = CONVERGED
        if slack is not None:
            out = ~box.contains(new_y, slack=slack) & accepted
            status[act[out]] = ESCAPED
    status[status == RUNNING] = MAX_ITERATIONS
    # a stall at the numerical floor is convergence
    status[(status == STALLED) & (res < tol)] = CONVERGED
    return CExpBatch(y=y, iterations=iters, residual=res, status=status)


def _seed(box, y_init, name):
    if y_init is not None:
        return np.asarray(y_init, dtype=float)
    if box is None:
        raise ValueError(f"{name} needs either a seed or a box to seed at its center")
    return box.center


def c_exp(c: CostFunction, x, p, y_init=None, box: Optional[DomainBox] = None,
          tol: float = NEWTON_TOL, max_iter: int = MAX_ITER) -> CExpResult:
    """y with -c_x(x, y) = p.  Seeds at ``box.center`` when ``y_init`` is omitted.

    Raises :class:`CExpError` on non-convergence, singular Jacobian or escape
    from the box (by more than one box diagonal).
    """
    seed = _seed(box, y_init, "c_exp")
    b = c_exp_batch(c, x, p, seed, box=box, tol=tol, max_iter=max_iter)
    st = int(b.status[0])
    result = CExpResult(y=b.y[0], iterations=int(b.iterations[0]), residual=float(b.residual[0]),
                        converged=st == CONVERGED, status=STATUS_NAMES[st])
    if st != CONVERGED:
        raise CExpError(st, x, p, result)
    return result


def c_star_exp(c: CostFunction, y, q, x_init=None, box: Optional[DomainBox] = None,
               tol: float = NEWTON_TOL, max_iter: int = MAX_ITER) -> CExpResult:
    """x with -c_y(x, y) = q (the dual map); ``box`` is the source domain."""
    return c_exp(c.transposed(), y, q, x_init, box=box, tol=tol, max_iter=max_iter)


def c_star_exp_batch(c: CostFunction, y, q, x_init, box=None, **kw) -> CExpBatch:
    return c_exp_batch(c.transposed(), y, q, x_init, box=box, **kw)


@dataclass
class CSegment:
    x0: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    p0: np.ndarray
    p1: np.ndarray
    thetas: np.ndarray
    ys: np.ndarray
    residuals: np.ndarray

    @property
    def theta_samples(self):
        return list(zip(self.thetas.tolist(), self.ys))

    def p_theta(self, theta):
        return (1.0 - theta) * self.p0 + theta * self.p1


def c_segment_batch(c: CostFunction, x0, y0, y1, thetas: Sequence[float],
                    box: Optional[DomainBox] = None, p0=None, p1=None):
    """Solve y_theta for stacks of configurations.

    Returns ``(ys, status, residual)`` with shapes (m, k, n), (m, k), (m, k), in
    the order of ``thetas``.  Continuation runs outward from the endpoint
    nearest the first requested theta; theta in {0, 1} returns the endpoint
    itself.
    """
    x0 = np.atleast_2d(np.asarray(x0, float))
    y0 = np.atleast_2d(np.asarray(y0, float))
    y1 = np.atleast_2d(np.asarray(y1, float))
    m = max(x0.shape[0], y0.shape[0], y1.shape[0])
    x0, y0, y1 = (np.broadcast_to(a, (m, c.dim)) for a in (x0, y0, y1))
    p0 = -c.cx(x0, y0) if p0 is None else np.broadcast_to(p0, (m, c.dim))
    p1 = -c.cx(x0, y1) if p1 is None else np.broadcast_to(p1, (m, c.dim))
    thetas = np.asarray(thetas, dtype=float)
    if np.any((thetas < 0) | (thetas > 1)):
        raise ValueError("theta values must lie in [0, 1]")
    k = thetas.size
    ys = np.empty((m, k, c.dim))
    status = np.full((m, k), CONVERGED)
    residual = np.zeros((m, k))
    # sweep in ascending order of distance from the starting endpoint
    start_at_zero = k == 0 or thetas[0] <= 0.5
    order = np.argsort(thetas if start_at_zero else -thetas, kind="stable")
    seed = np.array(y0 if start_at_zero else y1)
    for j in order:
        t = thetas[j]
        if t == 0.0:
            ys[:, j] = y0
            seed = np.array(y0)
            continue
        if t == 1.0:
            ys[:, j] = y1
            seed = np.array(y1)
            continue
        pt = (1.0 - t) * p0 + t * p1
        b = c_exp_batch(c, x0, pt, seed, box=box)
        ys[:, j] = b.y
        status[:, j] = b.status
        residual[:, j] = b.residual
        seed = np.where(b.converged[:, None], b.y, seed)
    return ys, status, residual


def c_segment(c: CostFunction, x0, y0, y1, thetas: Sequence[float],
              box: Optional[DomainBox] = None) -> CSegment:
    """c-segment from y0 to y1 with respect to x0, sampled at ``thetas``."""
    x0, y0, y1 = (np.asarray(a, float) for a in (x0, y0, y1))
    thetas = np.asarray(thetas, dtype=float)
    ys, status, residual = c_segment_batch(c, x0, y0, y1, thetas, box=box)
    bad = np.flatnonzero(status[0] != CONVERGED)
    if bad.size:
        j = int(bad[0])
        p0, p1 = -c.cx(x0, y0), -c.cx(x0, y1)
        raise CExpError(int(status[0, j]), x0, (1 - thetas[j]) * p0 + thetas[j] * p1, theta=float(thetas[j]))
    return CSegment(x0=x0, y0=y0, y1=y1, p0=-c.cx(x0, y0), p1=-c.cx(x0, y1), thetas=thetas,
                    ys=ys[0], residuals=residual[0])


def dual_c_segment(c: CostFunction, y0, x0, x1, thetas: Sequence[float],
                   box: Optional[DomainBox] = None) -> CSegment:
    """c*-segment from x0 to x1 with respect to y0: -c_y(x_theta, y0) is affine in theta.

    The returned segment stores the anchor in ``x0`` and the endpoints in
    ``y0``/``y1`` (roles swapped, as for the transposed cost).
    """
    return c_segment(c.transposed(), y0, x0, x1, thetas, box=box)
