"""Discrete c-transforms on uniform box grids, contact sets and c-convexity tests."""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import ndimage

from .c_exp import c_exp_batch, c_star_exp_batch
from .cost_model import CostFunction, DomainBox, default_domains, lipschitz_estimate

_CHUNK = 1 << 22
CONTACT_BAND = 2.5


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform node grid over a box, nodes include the box corners."""

    box: DomainBox
    resolution: tuple

    def __post_init__(self):
        res = tuple(int(r) for r in np.atleast_1d(self.resolution))
        if len(res) == 1 and self.box.dim > 1:
            res = res * self.box.dim
        if len(res) != self.box.dim:
            raise ValueError("resolution must have one entry per dimension")
        if min(res) < 2:
            raise ValueError("resolution must be >= 2 per dimension")
        object.__setattr__(self, "resolution", res)

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def spacing(self) -> np.ndarray:
        return (self.box.upper - self.box.lower) / (np.asarray(self.resolution) - 1)

    @property
    def axes(self):
        return [np.linspace(lo, hi, r) for lo, hi, r in zip(self.box.lower, self.box.upper, self.resolution)]

    @property
    def points(self) -> np.ndarray:
        """Node coordinates, row-major (C order), shape (N, n)."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @property
    def size(self) -> int:
        return int(np.prod(self.resolution))

    def index_of(self, pt, atol: float = 1e-9) -> tuple:
        """Grid index of a node; raises if ``pt`` is not (close to) a node."""
        pt = np.asarray(pt, float)
        f = (pt - self.box.lower) / self.spacing
        idx = np.rint(f).astype(int)
        if np.any(np.abs(f - idx) > atol) or np.any(idx < 0) or np.any(idx >= self.resolution):
            raise ValueError(f"{pt.tolist()} is not a grid node")
        return tuple(int(i) for i in idx)


@dataclass(eq=False)
class GridPotential:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.grid.size:
            raise ValueError("values do not match grid resolution")
        v = v.reshape(self.grid.resolution)
        if not np.all(np.isfinite(v)):
            raise ValueError("potential values must be finite")
        self.values = v

    @classmethod
    def from_function(cls, grid: Grid, f) -> "GridPotential":
        return cls(grid, f(grid.points))

    @property
    def box(self) -> DomainBox:
        return self.grid.box

    @property
    def resolution(self) -> tuple:
        return self.grid.resolution

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def gradient(self) -> np.ndarray:
        """Central differences inside, one-sided on the boundary; shape (N, n)."""
        g = np.gradient(self.values, *self.grid.spacing)
        if self.grid.dim == 1:
            g = [g]
        return np.stack([gi.ravel() for gi in g], axis=-1)

    # -- serialisation ----------------------------------------------------
    def save(self, path, binary: bool = False) -> None:
        path = Path(path)
        if binary:
            path.write_bytes(self.to_bytes())
        else:
            path.write_text(self.to_text())

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write("# gridpotential v1\n")
        buf.write(f"dim {self.grid.dim}\n")
        buf.write("lower " + " ".join(repr(float(v)) for v in self.box.lower) + "\n")
        buf.write("upper " + " ".join(repr(float(v)) for v in self.box.upper) + "\n")
        buf.write("resolution " + " ".join(str(r) for r in self.resolution) + "\n")
        buf.write("values\n")
        for v in self.flat:
            buf.write(repr(float(v)) + "\n")
        return buf.getvalue()

    def to_bytes(self) -> bytes:
        n = self.grid.dim
        head = MAGIC + struct.pack("<II", 1, n)
        head += struct.pack(f"<{n}d", *self.box.lower) + struct.pack(f"<{n}d", *self.box.upper)
        head += struct.pack(f"<{n}q", *self.resolution)
        return head + self.flat.astype("<f8").tobytes()

    @classmethod
    def load(cls, path) -> "GridPotential":
        data = Path(path).read_bytes()
        if data.startswith(MAGIC):
            return cls.from_bytes(data)
        return cls.from_text(data.decode())

    @classmethod
    def from_bytes(cls, data: bytes) -> "GridPotential":
        if not data.startswith(MAGIC):
            raise ValueError("not a binary grid potential")
        off = len(MAGIC)
        version, n = struct.unpack_from("<II", data, off)
        if version != 1:
            raise ValueError(f"unsupported grid potential version {version}")
        off += 8
        lo = struct.unpack_from(f"<{n}d", data, off)
        off += 8 * n
        hi = struct.unpack_from(f"<{n}d", data, off)
        off += 8 * n
        res = struct.unpack_from(f"<{n}q", data, off)
        off += 8 * n
        vals = np.frombuffer(data, dtype="<f8", offset=off)
        return cls(Grid(DomainBox(lo, hi), res), vals.astype(float))

    @classmethod
    def from_text(cls, text: str) -> "GridPotential":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        head = {}
        i = 0
        while i < len(lines) and lines[i] != "values":
            key, *rest = lines[i].split()
            head[key] = rest
            i += 1
        if i == len(lines):
            raise ValueError("missing 'values' section")
        for key in ("dim", "lower", "upper", "resolution"):
            if key not in head:
                raise ValueError(f"missing header field {key!r}")
        n = int(head["dim"][0])
        lo = [float(v) for v in head["lower"]]
        hi = [float(v) for v in head["upper"]]
        res = [int(v) for v in head["resolution"]]
        if not (len(lo) == len(hi) == len(res) == n):
            raise ValueError("header dimension mismatch")
        vals = np.array([float(v) for ln in lines[i + 1:] for v in ln.split()])
        return cls(Grid(DomainBox(lo, hi), res), vals)


MAGIC = b"GPOT"


# ---------------------------------------------------------------------------
# transforms


def cost_matrix(c: CostFunction, src: Grid, dst: Grid) -> np.ndarray:
    """C[i, j] = c(x_i, y_j) for source nodes x_i and target nodes y_j."""
    return c(src.points[:, None, :], dst.points[None, :, :])


def _sup(values_src, pts_src, pts_dst, cost, cmat):
    """out[j] = max_i (-values_src[i] - cost(i, j)); first index wins ties."""
    out = np.empty(pts_dst.shape[0])
    step = max(1, _CHUNK // max(1, pts_src.shape[0]))
    for s in range(0, pts_dst.shape[0], step):
        block = cmat[:, s:s + step] if cmat is not None else cost(pts_src[:, None, :], pts_dst[None, s:s + step, :])
        out[s:s + step] = np.max(-values_src[:, None] - block, axis=0)
    return out


def c_transform(phi: GridPotential, c: CostFunction, target: Grid, cmat: Optional[np.ndarray] = None) -> GridPotential:
    """phi^c(y) = max over source nodes x of -phi(x) - c(x, y)."""
    if cmat is not None and cmat.shape != (phi.grid.size, target.size):
        raise ValueError("cost matrix shape mismatch")
    vals = _sup(phi.flat, phi.grid.points, target.points, c, cmat)
    return GridPotential(target, vals)


def c_star_transform(psi: GridPotential, c: CostFunction, target: Grid,
                     cmat: Optional[np.ndarray] = None) -> GridPotential:
    """psi^{c*}(x) = max over target nodes y of -psi(y) - c(x, y).

    ``cmat`` (if given) is indexed [x, y] as returned by :func:`cost_matrix`
    with ``target`` as source grid.
    """
    if cmat is not None:
        if cmat.shape != (target.size, psi.grid.size):
            raise ValueError("cost matrix shape mismatch")
        vals = np.empty(target.size)
        step = max(1, _CHUNK // max(1, psi.grid.size))
        for s in range(0, target.size, step):
            vals[s:s + step] = np.max(-psi.flat[None, :] - cmat[s:s + step], axis=1)
        return GridPotential(target, vals)
    vals = _sup(psi.flat, psi.grid.points, target.points, lambda a, b: c(b, a), None)
    return GridPotential(target, vals)


def grid_slack(c: CostFunction, grid: Grid, omega: Optional[DomainBox] = None,
               omega_star: Optional[DomainBox] = None) -> float:
    """eps_grid = 2 Lip(c) * max grid spacing, Lip estimated from sampled |c_x|."""
    if omega is None or omega_star is None:
        omega, omega_star = default_domains(c)
    return 2.0 * lipschitz_estimate(c, omega, omega_star) * float(np.max(grid.spacing))


@dataclass
class ConvexityCheck:
    is_c_convex: bool
    deviation: float
    envelope: GridPotential
    tolerance: float


def is_c_convex(phi: GridPotential, c: CostFunction, tol: Optional[float] = None,
                target: Optional[Grid] = None, cmat: Optional[np.ndarray] = None) -> ConvexityCheck:
    """Compare phi with its double transform phi^{cc*} <= phi."""
    if target is None:
        target = Grid(default_domains(c)[1], phi.resolution)
    if tol is None:
        tol = grid_slack(c, phi.grid)
    phic = c_transform(phi, c, target, cmat)
    env = c_star_transform(phic, c, phi.grid, cmat)
    dev = float(np.max(np.abs(env.values - phi.values)))
    return ConvexityCheck(is_c_convex=dev <= tol, deviation=dev, envelope=env, tolerance=tol)


# ---------------------------------------------------------------------------
# contact sets


def count_components(mask: np.ndarray) -> tuple[int, np.ndarray]:
    """Face-adjacent (2n neighbour) connected components of a boolean grid mask."""
    structure = ndimage.generate_binary_structure(mask.ndim, 1)
    labels, k = ndimage.label(mask, structure=structure)
    return int(k), labels


@dataclass
class ContactSet:
    y: np.ndarray
    mask: np.ndarray
    tolerance: float
    component_count: int
    phi_c: float

    @property
    def indices(self) -> np.ndarray:
        return np.argwhere(self.mask)

    @property
    def empty(self) -> bool:
        return not self.mask.any()


def contact_set(phi: GridPotential, phi_c, c: CostFunction, y, tol: Optional[float] = None,
                band: float = CONTACT_BAND) -> ContactSet:
    """Grid nodes x with |phi(x) + phi^c(y) + c(x, y)| <= tol.

    ``phi_c`` may be a transformed :class:`GridPotential` (with ``y`` one of its
    nodes), a float, or ``None`` to take the discrete sup at ``y`` directly.

    Components are counted with hysteresis: face-connected components of the
    wider band {gap <= band * tol} that contain a member.  The gap is
    2 Lip(c)-Lipschitz, so with the default tol = eps_grid every face neighbour
    of a member lies in the wider band; this removes the isolated tip nodes
    that sampling a thin connected set on a grid produces.  ``band=1`` gives
    the plain face-adjacency count of the member set.
    """
    y = np.asarray(y, float)
    cx = c(phi.grid.points, y)
    if phi_c is None:
        val = float(np.max(-phi.flat - cx))
    elif isinstance(phi_c, GridPotential):
        val = float(phi_c.values[phi_c.grid.index_of(y)])
    else:
        val = float(phi_c)
    if tol is None:
        tol = grid_slack(c, phi.grid)
    gap = np.abs(phi.flat + val + cx).reshape(phi.resolution)
    mask = gap <= tol
    if band > 1.0:
        _, labels = count_components(gap <= band * tol)
        k = int(np.unique(labels[mask]).size)
    else:
        k, _ = count_components(mask)
    return ContactSet(y=y, mask=mask, tolerance=float(tol), component_count=k, phi_c=val)


# ---------------------------------------------------------------------------
# sublevel sets


@dataclass
class SublevelReport:
    count: int
    components: int
    violation: float
    pairs_tested: int
    empty: bool

    @property
    def convex(self) -> bool:
        return self.violation == 0.0


def mask_lookup(grid: Grid, mask: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """True where the grid cell containing a point has at least one corner in ``mask``.

    The one-cell dilation absorbs the sampling error of a grid set.
    """
    f = (pts - grid.box.lower) / grid.spacing
    res = np.asarray(grid.resolution)
    inside = np.all((f >= -1e-9) & (f <= res - 1 + 1e-9), axis=-1)
    base = np.clip(np.floor(f).astype(int), 0, res - 2)
    hit = np.zeros(pts.shape[0], dtype=bool)
    n = grid.dim
    for corner in range(1 << n):
        off = np.array([(corner >> k) & 1 for k in range(n)])
        idx = base + off
        hit |= mask[tuple(idx.T)]
    return hit & inside


def sublevel_c_convexity_test(phi: GridPotential, c: CostFunction, y0, h: float, n_pairs: int = 2000,
                              seed: int = 0) -> SublevelReport:
    """Is {phi + c(., y0) <= h} c-convex with respect to y0?

    Nodes of the set are mapped to q = -c_y(x, y0); midpoints of random pairs
    are pulled back with the c*-exponential and must land in the set (up to
    one grid cell).  ``violation`` is the fraction of failing midpoints.
    """
    from .sections import convexity_of_point_set

    y0 = np.asarray(y0, float)
    pts = phi.grid.points
    mask = (phi.flat + c(pts, y0) <= h).reshape(phi.resolution)
    count = int(mask.sum())
    if count == 0:
        return SublevelReport(count=0, components=0, violation=0.0, pairs_tested=0, empty=True)
    k, _ = count_components(mask)
    members = pts[mask.ravel()]
    q = -c.cy(members, y0)

    def inside(qm, seeds):
        b = c_star_exp_batch(c, y0, qm, seeds, box=phi.box)
        ok = b.converged
        return ok & mask_lookup(phi.grid, mask, b.y)

    res = convexity_of_point_set(q, inside=inside, seeds=members, n_pairs=n_pairs, seed=seed)
    return SublevelReport(count=count, components=k, violation=res.violation, pairs_tested=res.pairs,
                          empty=False)


# ---------------------------------------------------------------------------
# local versus global support


@dataclass
class LocalGlobalReport:
    local_ok: np.ndarray
    global_ok: np.ndarray
    indeterminate: np.ndarray
    interior: np.ndarray
    local_deficit: np.ndarray
    global_deficit: np.ndarray
    r_local: float
    tolerance: float

    @property
    def locally_not_globally(self) -> np.ndarray:
        return self.interior & ~self.indeterminate & self.local_ok & ~self.global_ok

    @property
    def count_locally_not_globally(self) -> int:
        return int(self.locally_not_globally.sum())

    def summary(self) -> dict:
        ok = self.interior & ~self.indeterminate
        return {
            "interior_nodes": int(self.interior.sum()),
            "indeterminate": int((self.interior & self.indeterminate).sum()),
            "locally_supported": int((ok & self.local_ok).sum()),
            "globally_supported": int((ok & self.global_ok).sum()),
            "locally_not_globally": self.count_locally_not_globally,
            "r_local": self.r_local,
            "tolerance": self.tolerance,
        }


def local_global_experiment(phi: GridPotential, c: CostFunction, r_local: Optional[float] = None,
                            tol: Optional[float] = None, omega_star: Optional[DomainBox] = None,
                            chunk: int = 256) -> LocalGlobalReport:
    """Candidate support y(x) = c_exp(x, grad phi(x)) tested on a ball and on the whole grid.

    The support inequality is phi(x') >= phi(x) - c(x', y) + c(x, y) - tol.
    Defaults: ``r_local`` = 10% of the box diagonal, ``tol`` = eps_grid * h / diam.
    """
    grid = phi.grid
    if omega_star is None:
        omega_star = default_domains(c)[1]
    h = float(np.max(grid.spacing))
    diam = grid.box.diagonal
    if r_local is None:
        r_local = 0.1 * diam
    if tol is None:
        tol = grid_slack(c, grid, grid.box, omega_star) * h / diam
    pts = grid.points
    vals = phi.flat
    n_nodes = pts.shape[0]

    idx = np.indices(grid.resolution).reshape(grid.dim, -1).T
    interior = np.all((idx > 0) & (idx < np.asarray(grid.resolution) - 1), axis=1)

    grad = phi.gradient()
    sol = c_exp_batch(c, pts, grad, omega_star.center, box=omega_star)
    indeterminate = ~sol.converged
    ys = sol.y

    local_def = np.full(n_nodes, np.nan)
    global_def = np.full(n_nodes, np.nan)
    todo = np.flatnonzero(interior & ~indeterminate)
    for s in range(0, todo.size, chunk):
        ids = todo[s:s + chunk]
        y = ys[ids]
        with np.errstate(all="ignore"):
            deficit = vals[None, :] - vals[ids, None] + c(pts[None, :, :], y[:, None, :]) - c(pts[ids], y)[:, None]
        deficit = np.where(np.isfinite(deficit), deficit, -np.inf)
        near = np.sum((pts[None, :, :] - pts[ids, None, :]) ** 2, axis=-1) <= r_local * r_local
        global_def[ids] = deficit.min(axis=1)
        local_def[ids] = np.where(near, deficit, np.inf).min(axis=1)
    return LocalGlobalReport(
        local_ok=local_def >= -tol, global_ok=global_def >= -tol, indeterminate=indeterminate,
        interior=interior, local_deficit=local_def, global_deficit=global_def, r_local=float(r_local),
        tolerance=float(tol),
    )


# ---------------------------------------------------------------------------
# random c-convex potentials


def random_c_affine_max(c: CostFunction, grid: Grid, targets: np.ndarray, rng: np.random.Generator,
                        spread: float = 0.2):
    """max_i (-psi_i - c(x, y_i)) over given targets with random offsets psi_i.

    Returns (potential, psi).  Any such max is c-convex.
    """
    targets = np.atleast_2d(targets)
    pts = grid.points
    cm = c(pts[:, None, :], targets[None, :, :])
    scale = float(np.ptp(cm)) if np.ptp(cm) > 0 else 1.0
    psi = spread * scale * rng.random(targets.shape[0])
    vals = np.max(-psi[None, :] - cm, axis=1)
    return GridPotential(grid, vals), psi


@dataclass
class SmoothPsi:
    """psi(y) = K |y - center|^2 / 2 + sum_j a_j sin(k_j . y + phase_j)."""

    center: np.ndarray
    K: float
    amps: np.ndarray
    freqs: np.ndarray
    phases: np.ndarray

    def __call__(self, y):
        d = y - self.center
        arg = y @ self.freqs.T + self.phases
        return 0.5 * self.K * np.sum(d * d, -1) + np.sin(arg) @ self.amps

    def grad(self, y):
        arg = y @ self.freqs.T + self.phases
        return self.K * (y - self.center) + (np.cos(arg) * self.amps) @ self.freqs

    def hess(self, y):
        arg = y @ self.freqs.T + self.phases
        n = y.shape[-1]
        w = -np.sin(arg) * self.amps
        return self.K * np.eye(n) + np.einsum("...j,ja,jb->...ab", w, self.freqs, self.freqs)


def random_smooth_c_convex(c: CostFunction, grid: Grid, omega_star: DomainBox, rng: np.random.Generator,
                           modes: int = 3, newton_iter: int = 30):
    """Smooth c-convex potential phi(x) = sup_y (-psi(y) - c(x, y)), psi strongly convex.

    The sup is found by a coarse grid search over ``omega_star`` followed by
    Newton polishing of the first-order condition -grad psi(y) = c_y(x, y).
    Returns (potential, argmax field, psi).
    """
    n = c.dim
    ygrid = Grid(omega_star, 24)
    yp = ygrid.points
    pts = grid.points
    # curvature margin over the target-side Hessian of -c
    from .cost_model import sample_pairs
    xs, ysmp = sample_pairs(c, grid.box, omega_star, 512, np.random.default_rng(7))
    lam = float(np.max(np.linalg.eigvalsh(-c.cyy(xs, ysmp))))
    side = float(np.min(omega_star.upper - omega_star.lower))
    K = (max(lam, 0.0) + 1.0) * rng.uniform(1.5, 3.0)
    freqs = rng.standard_normal((modes, n)) * (2 * np.pi / side)
    amps = rng.uniform(-1, 1, modes) * 0.25 * K / np.maximum(np.sum(freqs ** 2, -1), 1e-12) / modes
    center = omega_star.center + 0.3 * (omega_star.upper - omega_star.lower) * (rng.random(n) - 0.5)
    psi = SmoothPsi(center, K, amps, freqs, rng.uniform(0, 2 * np.pi, modes))

    obj = -psi(yp)[None, :] - c(pts[:, None, :], yp[None, :, :])
    y = yp[np.argmax(obj, axis=1)].copy()
    for _ in range(newton_iter):
        f = -psi.grad(y) - c.cy(pts, y)
        jac = -psi.hess(y) - c.cyy(pts, y)
        step = np.linalg.solve(jac, -f[..., None])[..., 0]
        y = y + step
        if np.max(np.abs(step)) < 1e-14:
            break
    vals = -psi(y) - c(pts, y)
    # guard: never below the coarse-grid sup (a failed polish would break c-convexity)
    vals = np.maximum(vals, obj.max(axis=1))
    return GridPotential(grid, vals), y, psi
