"""Cost functions c(x, y) on a product of boxes and their derivative bundles.

All evaluators are vectorised: ``x`` and ``y`` are arrays whose last axis is the
space dimension and whose leading axes broadcast against each other.  Matrix
valued derivatives carry two trailing axes ``(..., n, n)``; for the mixed
Hessian ``cxy[..., i, j] = d^2 c / dx_i dy_j``.

Costs without analytic derivatives fall back to central differences with one
Richardson extrapolation level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

Array = np.ndarray

#: default relative step for first derivatives
FD_STEP = 1e-5
#: default relative step for second derivatives taken directly from c
FD_STEP_SECOND = 2e-3
SINGULAR_REL = 1e-12


class CostError(ValueError):
    """Invalid cost family or parameters."""


class A2Violation(ArithmeticError):
    """The mixed Hessian c_{x,y} is singular at the given location."""

    def __init__(self, x, y, det):
        self.x = np.asarray(x)
        self.y = np.asarray(y)
        self.det = det
        super().__init__(f"singular c_xy (det={det:.3e}) at x={self.x.tolist()}, y={self.y.tolist()}")


@dataclass(frozen=True, eq=False)
class DomainBox:
    """Axis aligned box; ``excluded_diagonal_radius`` removes pairs with |x-y| below it."""

    lower: Array
    upper: Array
    excluded_diagonal_radius: float = 0.0

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("lower and upper must have the same dimension")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(lo >= hi):
            raise ValueError(f"box needs lower < upper componentwise, got {lo} / {hi}")
        if self.excluded_diagonal_radius < 0:
            raise ValueError("excluded_diagonal_radius must be nonnegative")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, lo: float, hi: float, dim: int, **kw) -> "DomainBox":
        return cls(np.full(dim, lo), np.full(dim, hi), **kw)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> Array:
        return 0.5 * (self.lower + self.upper)

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, pts: Array, slack: float = 0.0) -> Array:
        pts = np.asarray(pts, dtype=float)
        return np.all((pts >= self.lower - slack) & (pts <= self.upper + slack), axis=-1)

    def sample(self, rng: np.random.Generator, m: int) -> Array:
        return self.lower + (self.upper - self.lower) * rng.random((m, self.dim))

    def from_unit(self, u: Array) -> Array:
        return self.lower + (self.upper - self.lower) * np.asarray(u)

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist(),
                "excluded_diagonal_radius": self.excluded_diagonal_radius}


def _norm(v: Array) -> Array:
    return np.linalg.norm(v, axis=-1)


def _unit(n: int, i: int) -> Array:
    e = np.zeros(n)
    e[i] = 1.0
    return e


class CostFunction:
    """A cost c(x, y) with optional analytic derivative closures.

    Instances are immutable after construction; ``transposed`` and ``scaled``
    return new costs.
    """

    _DERIVS = ("cx", "cy", "cxx", "cyy", "cxy")

    def __init__(
        self,
        name: str,
        dim: int,
        func: Callable[[Array, Array], Array],
        *,
        params: Sequence[float] = (),
        cx=None,
        cy=None,
        cxx=None,
        cyy=None,
        cxy=None,
        fd_step: float = FD_STEP,
        excluded_diagonal_radius: float = 0.0,
    ):
        if dim < 1:
            raise CostError("dimension must be positive")
        if fd_step <= 0:
            raise CostError("fd_step must be positive")
        self.name = name
        self.dim = int(dim)
        self.params = tuple(float(p) for p in params)
        self.fd_step = float(fd_step)
        self.excluded_diagonal_radius = float(excluded_diagonal_radius)
        self._func = func
        self._analytic = {"cx": cx, "cy": cy, "cxx": cxx, "cyy": cyy, "cxy": cxy}

    def __repr__(self):
        return f"CostFunction({self.name!r}, dim={self.dim}, params={list(self.params)})"

    @property
    def has_analytic(self) -> bool:
        return all(self._analytic[k] is not None for k in self._DERIVS)

    def analytic(self, key: str):
        return self._analytic[key]

    # -- evaluation -----------------------------------------------------
    def __call__(self, x, y) -> Array:
        return self._func(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def _step(self, x, y, rel):
        return rel * (1.0 + _norm(x) + _norm(y))[..., None]

    def cx(self, x, y) -> Array:
        x, y = np.asarray(x, float), np.asarray(y, float)
        if self._analytic["cx"] is not None:
            return self._analytic["cx"](x, y)
        return _grad_fd(lambda u: self(u, y), x, self._step(x, y, self.fd_step))

    def cy(self, x, y) -> Array:
        x, y = np.asarray(x, float), np.asarray(y, float)
        if self._analytic["cy"] is not None:
            return self._analytic["cy"](x, y)
        return _grad_fd(lambda v: self(x, v), y, self._step(x, y, self.fd_step))

    def cxx(self, x, y) -> Array:
        x, y = np.asarray(x, float), np.asarray(y, float)
        if self._analytic["cxx"] is not None:
            return self._analytic["cxx"](x, y)
        if self._analytic["cx"] is not None:
            return _jac_fd(lambda u: self.cx(u, y), x, self._step(x, y, self.fd_step))
        return _hess_fd(self, x, y, "xx", self._step(x, y, FD_STEP_SECOND))

    def cyy(self, x, y) -> Array:
        x, y = np.asarray(x, float), np.asarray(y, float)
        if self._analytic["cyy"] is not None:
            return self._analytic["cyy"](x, y)
        if self._analytic["cy"] is not None:
            return _jac_fd(lambda v: self.cy(x, v), y, self._step(x, y, self.fd_step))
        return _hess_fd(self, x, y, "yy", self._step(x, y, FD_STEP_SECOND))

    def cxy(self, x, y) -> Array:
        x, y = np.asarray(x, float), np.asarray(y, float)
        if self._analytic["cxy"] is not None:
            return self._analytic["cxy"](x, y)
        if self._analytic["cx"] is not None:
            return _jac_fd(lambda v: self.cx(x, v), y, self._step(x, y, self.fd_step))
        return _hess_fd(self, x, y, "xy", self._step(x, y, FD_STEP_SECOND))

    # -- derived costs --------------------------------------------------
    def transposed(self) -> "CostFunction":
        """The dual cost c*(y, x) := c(x, y)."""
        a = self._analytic

        def swap(f, transpose=False):
            if f is None:
                return None
            if transpose:
                return lambda u, v: np.swapaxes(f(v, u), -1, -2)
            return lambda u, v: f(v, u)

        return CostFunction(
            self.name + "*", self.dim, lambda u, v: self._func(v, u), params=self.params,
            cx=swap(a["cy"]), cy=swap(a["cx"]), cxx=swap(a["cyy"]), cyy=swap(a["cxx"]),
            cxy=swap(a["cxy"], transpose=True), fd_step=self.fd_step,
            excluded_diagonal_radius=self.excluded_diagonal_radius,
        )

    def scaled(self, k: float) -> "CostFunction":
        k = float(k)
        a = self._analytic

        def sc(f):
            return None if f is None else (lambda u, v: k * f(u, v))

        return CostFunction(
            f"{k:g}*{self.name}", self.dim, lambda u, v: k * self._func(u, v), params=self.params,
            cx=sc(a["cx"]), cy=sc(a["cy"]), cxx=sc(a["cxx"]), cyy=sc(a["cyy"]), cxy=sc(a["cxy"]),
            fd_step=self.fd_step, excluded_diagonal_radius=self.excluded_diagonal_radius,
        )

    def without_derivatives(self) -> "CostFunction":
        """Same cost, finite differences only (used to cross-check closures)."""
        return CostFunction(self.name + "[fd]", self.dim, self._func, params=self.params,
                            fd_step=self.fd_step,
                            excluded_diagonal_radius=self.excluded_diagonal_radius)


# -- finite differences -------------------------------------------------------

def _richardson(d):
    return lambda h: (4.0 * d(0.5 * h) - d(h)) / 3.0


def _grad_fd(f, z, h):
    """Gradient of scalar f at z, h of shape (..., 1)."""
    n = z.shape[-1]
    out = []
    for i in range(n):
        e = _unit(n, i)

        def d(hh, e=e):
            return (f(z + hh * e) - f(z - hh * e)) / (2.0 * hh[..., 0])

        out.append(_richardson(d)(h))
    return np.stack(out, axis=-1)


def _jac_fd(f, z, h):
    """Jacobian J[..., i, j] = d f_i / d z_j of vector valued f."""
    n = z.shape[-1]
    cols = []
    for j in range(n):
        e = _unit(n, j)

        def d(hh, e=e):
            return (f(z + hh * e) - f(z - hh * e)) / (2.0 * hh)

        cols.append(_richardson(d)(h))
    return np.stack(cols, axis=-1)


def _hess_fd(c, x, y, which, h):
    n = x.shape[-1]
    x, y = np.broadcast_arrays(x, y)
    blocks = {"x": 0, "y": 1}
    a, b = blocks[which[0]], blocks[which[1]]
    out = np.empty(x.shape[:-1] + (n, n))
    for i in range(n):
        for j in range(n):
            if a == b and j < i:
                out[..., i, j] = out[..., j, i]
                continue

            def d(hh, i=i, j=j):
                def ev(si, sj):
                    z = [x.copy(), y.copy()]
                    z[a] = z[a] + si * hh * _unit(n, i)
                    z[b] = z[b] + sj * hh * _unit(n, j)
                    return c(z[0], z[1])

                num = ev(1, 1) - ev(1, -1) - ev(-1, 1) + ev(-1, -1)
                return num / (4.0 * hh[..., 0] ** 2)

            out[..., i, j] = _richardson(d)(h)
    return out


# -- linear algebra helpers ---------------------------------------------------

def det_and_inverse(m: Array):
    """Determinant and inverse of (..., n, n) matrices; 2x2 handled in closed form."""
    m = np.asarray(m, dtype=float)
    n = m.shape[-1]
    if n == 1:
        det = m[..., 0, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / m
        return det, inv
    if n == 2:
        a, b = m[..., 0, 0], m[..., 0, 1]
        c, d = m[..., 1, 0], m[..., 1, 1]
        det = a * d - b * c
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.stack([np.stack([d, -b], -1), np.stack([-c, a], -1)], -2) / det[..., None, None]
        return det, inv
    det = np.linalg.det(m)
    inv = np.full_like(m, np.nan)
    ok = np.abs(det) > 0
    if np.any(ok):
        inv[ok] = np.linalg.inv(m[ok])
    return det, inv


def singular_mask(m: Array, det: Array) -> Array:
    n = m.shape[-1]
    scale = np.max(np.abs(m), axis=(-1, -2))
    return ~(np.abs(det) > SINGULAR_REL * scale ** n)


def solve_small(m: Array, rhs: Array) -> Array:
    """Solve m @ z = rhs for stacks of small systems."""
    if m.shape[-1] == 2:
        _, inv = det_and_inverse(m)
        return np.einsum("...ij,...j->...i", inv, rhs)
    return np.linalg.solve(m, rhs[..., None])[..., 0]


# -- derivative bundle --------------------------------------------------------

@dataclass
class DerivativeBundle:
    c: Array
    cx: Array
    cy: Array
    cxx: Array
    cxy: Array
    cxy_inv: Array
    cxy_det: Array


def derivative_bundle(c: CostFunction, x, y) -> DerivativeBundle:
    """All first and second derivatives of ``c`` at (x, y).

    Raises :class:`A2Violation` when c_xy is numerically singular anywhere in
    the (possibly batched) input.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    cxy = c.cxy(x, y)
    det, inv = det_and_inverse(cxy)
    bad = singular_mask(cxy, det)
    if np.any(bad):
        idx = np.argwhere(np.atleast_1d(bad))[0]
        xb = np.broadcast_to(x, cxy.shape[:-1]).reshape(-1, c.dim)
        yb = np.broadcast_to(y, cxy.shape[:-1]).reshape(-1, c.dim)
        k = int(np.ravel_multi_index(tuple(idx), np.atleast_1d(bad).shape)) if bad.ndim else 0
        raise A2Violation(xb[k], yb[k], float(np.atleast_1d(det).ravel()[k]))
    return DerivativeBundle(c=c(x, y), cx=c.cx(x, y), cy=c.cy(x, y), cxx=c.cxx(x, y),
                            cxy=cxy, cxy_inv=inv, cxy_det=det)


# -- built-in families --------------------------------------------------------

def _radial(name, dim, F, G, Gp_over_r, params=(), radius=0.0):
    """Cost F(|x-y|) with c_x = G(r) d and c_xx = G I + (G'(r)/r) d d^T, d = x - y."""
    eye = np.eye(dim)

    def f(x, y):
        return F(_norm(x - y))

    def cx(x, y):
        d = x - y
        return G(_norm(d))[..., None] * d

    def cxx(x, y):
        d = x - y
        r = _norm(d)
        return G(r)[..., None, None] * eye + Gp_over_r(r)[..., None, None] * d[..., :, None] * d[..., None, :]

    return CostFunction(name, dim, f, params=params, cx=cx, cy=lambda x, y: -cx(x, y), cxx=cxx,
                        cyy=cxx, cxy=lambda x, y: -cxx(x, y), excluded_diagonal_radius=radius)


def _perturbed_quadratic(dim, eps, radius=0.0):
    eye = np.eye(dim)

    def f(x, y):
        s = (x - y) ** 2
        return np.sum(0.5 * s + eps * s * s, axis=-1)

    def cx(x, y):
        d = x - y
        return d + 4.0 * eps * d * d * d

    def cxx(x, y):
        d = x - y
        return eye + (12.0 * eps * d * d)[..., None] * eye

    return CostFunction("perturbed_quadratic", dim, f, params=(eps,), cx=cx,
                        cy=lambda x, y: -cx(x, y), cxx=cxx, cyy=cxx,
                        cxy=lambda x, y: -cxx(x, y), excluded_diagonal_radius=radius)


BUILTIN_NAMES = ("quadratic", "neg_log", "sqrt_plus", "power_p", "perturbed_quadratic")
DEFAULT_PARAMS = {"power_p": (-1.0,), "perturbed_quadratic": (0.2,)}
DEFAULT_EXCLUDED_RADIUS = 0.1


def builtin_cost(name: str, dim: int = 2, params: Sequence[float] = (),
                 excluded_diagonal_radius: Optional[float] = None) -> CostFunction:
    """Catalog of test costs.

    ``power_p`` takes ``[p]`` and ``perturbed_quadratic`` takes ``[eps]``; both
    fall back to :data:`DEFAULT_PARAMS` when ``params`` is empty.
    """
    params = tuple(float(p) for p in params) or DEFAULT_PARAMS.get(name, ())
    singular = name == "neg_log" or (name == "power_p" and params and params[0] != 2.0)
    if excluded_diagonal_radius is None:
        radius = DEFAULT_EXCLUDED_RADIUS if singular else 0.0
    else:
        radius = float(excluded_diagonal_radius)
        if singular and radius <= 0:
            raise CostError(f"{name} is singular on the diagonal; needs excluded_diagonal_radius > 0")

    if name == "quadratic":
        return _radial(name, dim, lambda r: 0.5 * r * r, lambda r: np.ones_like(r),
                       lambda r: np.zeros_like(r), radius=radius)
    if name == "neg_log":
        return _radial(name, dim, lambda r: -np.log(r), lambda r: -1.0 / r ** 2,
                       lambda r: 2.0 / r ** 4, radius=radius)
    if name == "sqrt_plus":
        return _radial(name, dim, lambda r: np.sqrt(1.0 + r * r), lambda r: 1.0 / np.sqrt(1.0 + r * r),
                       lambda r: -(1.0 + r * r) ** -1.5, radius=radius)
    if name == "power_p":
        if len(params) != 1:
            raise CostError("power_p takes exactly one parameter p")
        p = params[0]
        if p in (0.0, 1.0) or not np.isfinite(p):
            raise CostError("power_p needs p not in {0, 1} (use neg_log for the p -> 0 limit)")
        return _radial(name, dim, lambda r: r ** p / p, lambda r: r ** (p - 2.0),
                       lambda r: (p - 2.0) * r ** (p - 4.0), params=(p,), radius=radius)
    if name == "perturbed_quadratic":
        if len(params) != 1:
            raise CostError("perturbed_quadratic takes exactly one parameter eps")
        return _perturbed_quadratic(dim, params[0], radius)
    raise CostError(f"unknown cost {name!r}; known: {', '.join(BUILTIN_NAMES)}")


def default_domains(cost: CostFunction) -> tuple[DomainBox, DomainBox]:
    """Source and target boxes used by the experiments for each built-in family."""
    n = cost.dim
    base = cost.name.rstrip("*").split("*")[-1].replace("[fd]", "")
    r = cost.excluded_diagonal_radius
    if base in ("neg_log", "power_p"):
        lo = np.full(n, -0.5)
        hi = np.full(n, 0.5)
        lo[0], hi[0] = 1.0, 2.0
        omega = DomainBox(lo, hi, r)
        omega_star = DomainBox.cube(-0.5, 0.5, n, excluded_diagonal_radius=r)
        if cost.name.endswith("*"):
            return omega_star, omega
        return omega, omega_star
    if base == "perturbed_quadratic":
        return DomainBox.cube(-0.25, 0.25, n), DomainBox.cube(-0.25, 0.25, n)
    return DomainBox.cube(-1.0, 1.0, n, excluded_diagonal_radius=r), DomainBox.cube(-1.0, 1.0, n, excluded_diagonal_radius=r)


# -- sampling -----------------------------------------------------------------

def exclusion_radius(c: CostFunction, *boxes: DomainBox) -> float:
    return max([c.excluded_diagonal_radius] + [b.excluded_diagonal_radius for b in boxes])


def sample_pairs(c: CostFunction, omega: DomainBox, omega_star: DomainBox, m: int,
                 rng: np.random.Generator, max_rounds: int = 50):
    """m admissible (x, y) pairs, rejecting |x - y| below the exclusion radius."""
    r = exclusion_radius(c, omega, omega_star)
    xs, ys = [], []
    have = 0
    for _ in range(max_rounds):
        x = omega.sample(rng, 2 * (m - have) + 8)
        y = omega_star.sample(rng, x.shape[0])
        ok = _norm(x - y) >= r
        xs.append(x[ok])
        ys.append(y[ok])
        have += int(ok.sum())
        if have >= m:
            break
    else:
        raise CostError("could not draw admissible pairs; domains lie inside the singular set")
    return np.concatenate(xs)[:m], np.concatenate(ys)[:m]


def cost_scale(c: CostFunction, omega: DomainBox, omega_star: DomainBox, m: int = 256) -> float:
    """Typical magnitude of c_xx over the domains (median max-entry)."""
    x, y = sample_pairs(c, omega, omega_star, m, np.random.default_rng(0))
    s = float(np.median(np.max(np.abs(c.cxx(x, y)), axis=(-1, -2))))
    return s if s > 0 else 1.0


def lipschitz_estimate(c: CostFunction, omega: DomainBox, omega_star: DomainBox, m: int = 4096) -> float:
    """max |c_x| over sampled admissible pairs."""
    x, y = sample_pairs(c, omega, omega_star, m, np.random.default_rng(1))
    return float(np.max(_norm(c.cx(x, y))))


# -- A1 / A2 ------------------------------------------------------------------

@dataclass
class A1A2Report:
    samples: int
    min_abs_det: float
    det_location: tuple
    a2_ok: bool
    a1_min_separation: float
    a1_min_ratio: float
    a1_location: tuple
    a1_ok: bool
    dual_min_separation: float
    dual_min_ratio: float
    dual_ok: bool
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.a1_ok and self.a2_ok and self.dual_ok

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["det_location"] = [np.asarray(v).tolist() for v in self.det_location]
        d["a1_location"] = [np.asarray(v).tolist() for v in self.a1_location]
        d["ok"] = self.ok
        return d


def verify_a1a2(c: CostFunction, omega: DomainBox, omega_star: DomainBox, samples: int = 1000,
                seed: int = 0) -> A1A2Report:
    """Sampled check of A1 (twist, both sides) and A2 (non-degenerate c_xy).

    Violations are reported, never raised.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    x, y = sample_pairs(c, omega, omega_star, samples, rng)
    m = c.cxy(x, y)
    det, _ = det_and_inverse(m)
    k = int(np.argmin(np.abs(det)))
    a2_ok = not bool(np.any(singular_mask(m, det)))

    # second target point per x (and second source point per y) for injectivity
    x2, y2 = sample_pairs(c, omega, omega_star, samples, rng)
    ok = _norm(x - y2) >= exclusion_radius(c, omega, omega_star)
    sep = _norm(c.cx(x, y) - c.cx(x, y2))[ok]
    ratio = sep / np.maximum(_norm(y - y2)[ok], 1e-300)
    xa, ya, ya2 = x[ok], y[ok], y2[ok]
    ka = int(np.argmin(sep)) if sep.size else 0

    okd = _norm(x2 - y) >= exclusion_radius(c, omega, omega_star)
    dsep = _norm(c.cy(x, y) - c.cy(x2, y))[okd]
    dratio = dsep / np.maximum(_norm(x - x2)[okd], 1e-300)

    return A1A2Report(
        samples=int(x.shape[0]),
        min_abs_det=float(np.abs(det[k])),
        det_location=(x[k], y[k]),
        a2_ok=a2_ok,
        a1_min_separation=float(sep.min()) if sep.size else float("nan"),
        a1_min_ratio=float(ratio.min()) if sep.size else float("nan"),
        a1_location=(xa[ka], ya[ka], ya2[ka]) if sep.size else (),
        a1_ok=bool(sep.size and sep.min() > 0),
        dual_min_separation=float(dsep.min()) if dsep.size else float("nan"),
        dual_min_ratio=float(dratio.min()) if dsep.size else float("nan"),
        dual_ok=bool(dsep.size and dsep.min() > 0),
    )
