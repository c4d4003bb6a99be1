import numpy as np
import pytest

import oracles
from conftest import PASSING, cost_id, make
from mtwgeom.cost_model import DomainBox, builtin_cost
from mtwgeom.sections import (DegenerateGradient, SectionSpec, c_hyperplane, convexity_of_point_set,
                              hausdorff_convergence, h_theta, hyperplane_trace, nesting_scan, point_to_segments,
                              resolve,
                              section_boundary, section_nesting_test, sff, sff_monotonicity_test, sff_scan,
                              zero_set)

SPEC = SectionSpec([0.1, 0.2], [0.3, -0.4], [-0.2, 0.5], 0.5)


def test_spec_validation():
    with pytest.raises(ValueError):
        SectionSpec([0, 0], [0, 0], [1, 1], 0.0)
    with pytest.raises(ValueError):
        SectionSpec([0, 0], [0, 0], [1, 1], 1.5)


@pytest.mark.parametrize("spec", PASSING, ids=cost_id)
def test_h_theta_basics(spec, rng):
    c, om, om_s = make(*spec)
    s = SectionSpec(om.center + 0.05, om_s.center + [0.1, -0.1], om_s.center + [-0.15, 0.1], 0.5)
    assert h_theta(c, s, s.x0, om_s) == 0.0
    x = om.sample(rng, 20)
    sec1 = resolve(c, s.with_theta(1.0), om_s)
    np.testing.assert_array_equal(sec1.y_theta, s.y1)
    np.testing.assert_allclose(sec1(x), c(x, s.y0) - c(x, s.y1) - c(s.x0, s.y0) + c(s.x0, s.y1), atol=1e-14)
    # h_theta / theta tends to -g as theta -> 0
    hp = c_hyperplane(c, s.x0, s.y0, s.y1)
    t = 1e-5
    ratio = h_theta(c, s.with_theta(t), x, om_s) / t
    np.testing.assert_allclose(ratio, -hp(x), rtol=1e-3, atol=1e-6 * np.abs(hp(x)).max())


def test_quadratic_boundary_is_straight():
    c = builtin_cost("quadratic")
    mesh = section_boundary(c, SPEC, resolution=64)
    assert not mesh.empty
    assert mesh.max_abs_h <= 1e-9
    assert oracles.plane_fit_residual(mesh.points) < 1e-9
    # the line passes through x0 orthogonal to y1 - y0
    np.testing.assert_allclose((mesh.points - SPEC.x0) @ (SPEC.y1 - SPEC.y0), 0.0, atol=1e-9)


def test_neg_log_boundary_against_dense_scan():
    c, om, om_s = make("neg_log")
    spec = SectionSpec(om.center, om_s.center + [0.2, 0.1], om_s.center + [-0.1, 0.3], 0.7)
    mesh = section_boundary(c, spec, resolution=64, omega=om, omega_star=om_s)
    assert mesh.max_abs_h <= 1e-9
    sec = resolve(c, spec, om_s)
    # brute force: sign changes along rows of a 10x finer grid, located by linear interpolation
    n = 640
    xs = np.linspace(om.lower[0], om.upper[0], n)
    ys = np.linspace(om.lower[1], om.upper[1], n)
    found = []
    for a in xs[::8]:
        row = np.stack([np.full(n, a), ys], -1)
        h = sec(row)
        k = np.flatnonzero(np.sign(h[:-1]) != np.sign(h[1:]))
        for j in k:
            t = h[j] / (h[j] - h[j + 1])
            found.append(row[j] + t * (row[j + 1] - row[j]))
    found = np.array(found)
    assert len(found) > 10
    spacing = (ys[1] - ys[0])
    assert point_to_segments(found, mesh.segments()).max() < spacing
    # and every mesh vertex lies on the zero set itself
    assert np.all(np.abs(sec(mesh.points)) <= 1e-9)


def test_empty_mesh_when_boundary_misses_box():
    c = builtin_cost("quadratic")
    mesh = section_boundary(c, SectionSpec([5.0, 5.0], [0, 0], [1, 1], 1.0), resolution=32,
                            omega=DomainBox.cube(-1, 1, 2), omega_star=DomainBox.cube(-2, 2, 2))
    assert mesh.empty and mesh.max_abs_h == 0.0
    assert mesh.to_csv() == "x0,x1,h,polyline\n"


def test_c_hyperplane_quadratic():
    c = builtin_cost("quadratic")
    hp = c_hyperplane(c, SPEC.x0, SPEC.y0, SPEC.y1)
    assert hp(SPEC.x0) == 0.0
    x = np.array([[0.5, -0.3], [-0.7, 0.9]])
    np.testing.assert_allclose(hp(x), -(x - SPEC.x0) @ (SPEC.y1 - SPEC.y0), atol=1e-15)
    tr = hyperplane_trace(hp, resolution=64)
    assert oracles.plane_fit_residual(tr.points) < 1e-9


@pytest.mark.parametrize("name", ["sqrt_plus", "neg_log"])
def test_c_hyperplane_flat_in_dual_coordinates(name, rng):
    c, om, om_s = make(name)
    x0, y0, y1 = om.center + 0.05, om_s.center + [0.2, -0.1], om_s.center + [-0.1, 0.25]
    hp = c_hyperplane(c, x0, y0, y1)
    assert hp(x0) == 0.0
    q = hp.tangent_points(rng.uniform(-0.2, 0.2, (50, 2)))
    x = hp.pull_back(q, om)
    x = x[np.all(np.isfinite(x), axis=1)]
    assert len(x) > 20
    assert np.max(np.abs(hp(x))) < 1e-10
    # image under q = -c_y(., y0) is flat
    assert oracles.plane_fit_residual(-c.cy(x, y0)) < 1e-8
    # and its trace in x is curved for these costs
    assert oracles.plane_fit_residual(x) > 1e-6


def test_hausdorff_quadratic_zero():
    c = builtin_cost("quadratic")
    rep = hausdorff_convergence(c, SPEC.x0, SPEC.y0, SPEC.y1, [0.4, 0.2, 0.1], 0.3, resolution=64)
    assert np.all(rep.distances < 1e-9)
    assert not rep.clipped


@pytest.mark.parametrize("name", ["sqrt_plus", "neg_log"])
def test_hausdorff_linear_rate(name):
    c, om, om_s = make(name)
    x0, y0, y1 = om.center, om_s.center + [0.3, -0.2], om_s.center + [-0.2, 0.35]
    rep = hausdorff_convergence(c, x0, y0, y1, [0.4, 0.2, 0.1, 0.05], 0.1 * om.diagonal, resolution=256,
                                omega=om, omega_star=om_s)
    assert rep.monotone
    assert np.all((rep.ratios > 0.3) & (rep.ratios < 0.8))
    assert rep.to_csv().startswith("theta,hausdorff\n")


def test_hausdorff_clipping_warns():
    c = builtin_cost("quadratic")
    with pytest.warns(UserWarning, match="clipped"):
        rep = hausdorff_convergence(c, [0.9, 0.0], [0, 0], [0.5, 0.5], [0.5], 0.5, resolution=32,
                                    omega=DomainBox.cube(-1, 1, 2), omega_star=DomainBox.cube(-1, 1, 2))
    assert rep.clipped and rep.ball_radius == pytest.approx(0.1)


def test_sff_sphere():
    r = 0.7
    for n in (2, 3):
        x = np.zeros(n)
        x[0] = r
        f = sff(lambda z: np.sum(np.asarray(z) ** 2, axis=-1) - r * r, x)
        tau = np.zeros(n)
        tau[1] = 1.0
        assert f(tau) == pytest.approx(1 / r, rel=1e-6)
        np.testing.assert_allclose(f.matrix, np.eye(n - 1) / r, rtol=1e-6)
        np.testing.assert_allclose(f.normal, np.eye(n)[0], atol=1e-9)


def test_sff_degenerate_gradient():
    with pytest.raises(DegenerateGradient):
        sff(lambda z: np.sum(np.asarray(z) ** 2, axis=-1), np.zeros(2))


def test_sff_quadratic_zero():
    c = builtin_cost("quadratic")
    f = sff(SPEC, SPEC.x0, c=c)
    assert abs(f.matrix[0, 0]) < 1e-12


def test_sff_matches_circle_fit():
    c, om, om_s = make("sqrt_plus")
    spec = SectionSpec(om.center, om_s.center + [0.5, -0.3], om_s.center + [-0.4, 0.5], 1.0)
    f = sff(spec, spec.x0, c=c, box=om_s)
    mesh = section_boundary(c, spec, resolution=512, omega=om, omega_star=om_s)
    near = mesh.points[np.linalg.norm(mesh.points - spec.x0, axis=1) < 0.05]
    kappa, centre = oracles.circle_fit_curvature(near)
    assert abs(f.matrix[0, 0]) == pytest.approx(kappa, rel=0.05)
    # the sign: positive II means the centre of curvature lies inside {h <= 0}
    assert np.sign(f.matrix[0, 0]) == np.sign(-resolve(c, spec, om_s)(centre[None])[0])


@pytest.mark.parametrize("spec", PASSING, ids=cost_id)
def test_shared_tangency(spec):
    c, om, om_s = make(*spec)
    x0, y0, y1 = om.center + 0.03, om_s.center + [0.2, -0.1], om_s.center + [-0.1, 0.2]
    hp = c_hyperplane(c, x0, y0, y1)
    ref = sff(hp, x0).normal
    for t in (0.1, 0.5, 1.0):
        nu = sff(SectionSpec(x0, y0, y1, t), x0, c=c, box=om_s).normal
        assert np.arccos(np.clip(abs(nu @ ref), -1, 1)) < 1e-6


@pytest.mark.parametrize("spec", PASSING, ids=cost_id)
def test_monotonicity_passing(spec):
    c, om, om_s = make(*spec)
    res = sff_monotonicity_test(c, om.center, om_s.center + [0.2, -0.2], om_s.center + [-0.2, 0.1],
                                np.linspace(0.1, 1, 10), box=om_s)
    assert res.values.shape == (10, 1)
    assert res.worst >= -1e-7


def test_monotonicity_replays_violating_scan():
    c, om, om_s = make("power_p", (-1.0,))
    rep = sff_scan(c, om, om_s, configs=200, seed=4)
    assert not rep.passed
    loc = rep.worst_location
    res = sff_monotonicity_test(c, loc["x0"], loc["y0"], loc["y1"], [loc["theta"], loc["theta_next"]],
                                xi_grid=[loc["xi"]], box=om_s)
    assert res.worst == pytest.approx(rep.worst_margin, rel=1e-9)


def test_nesting_quadratic_and_violating():
    c = builtin_cost("quadratic")
    res = section_nesting_test(c, SPEC.x0, SPEC.y0, SPEC.y1, [(0.25, 0.5), (0.5, 1.0)], resolution=64)
    assert res.total == 0
    c, om, om_s = make("perturbed_quadratic", (0.2,))
    rep = nesting_scan(c, om, om_s, configs=50, seed=0, resolution=64)
    assert rep.violations > 0 and not rep.passed
    loc = rep.worst_location
    res = section_nesting_test(c, loc["x0"], loc["y0"], loc["y1"], loc["theta_pairs"], resolution=64,
                               omega=om, omega_star=om_s)
    assert res.total > 0


def test_scans_pass_for_neg_log():
    c, om, om_s = make("neg_log")
    assert sff_scan(c, om, om_s, configs=200, seed=1).passed
    assert nesting_scan(c, om, om_s, configs=10, seed=1, resolution=64).passed


def test_convexity_hull_area():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    r = convexity_of_point_set(sq)
    assert r.violation == 0.0 and r.convex and not r.degenerate
    L = np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]], float)
    r = convexity_of_point_set(L)
    hull = oracles.monotone_chain_hull(L)
    expected = 1 - oracles.shoelace(L) / oracles.shoelace(hull)
    assert r.violation == pytest.approx(expected, abs=1e-12)
    assert r.violation > 0.1 and not r.convex
    assert convexity_of_point_set(sq[:2]).degenerate
    assert convexity_of_point_set(np.array([[0, 0], [1, 1], [2, 2.0]])).degenerate
    with pytest.raises(ValueError):
        convexity_of_point_set(np.zeros((5, 3)))


def test_convexity_midpoint_oracle(rng):
    def in_disk(p, _):
        return np.linalg.norm(p, axis=1) <= 1 + 1e-12

    def in_l(p, _):
        return (p[:, 0] >= 0) & (p[:, 1] >= 0) & (p[:, 0] <= 2) & (p[:, 1] <= 2) & ((p[:, 0] <= 1) | (p[:, 1] <= 1))

    ang = rng.uniform(0, 2 * np.pi, 300)
    circle = np.stack([np.cos(ang), np.sin(ang)], -1)
    assert convexity_of_point_set(circle, inside=in_disk).violation == 0.0
    pts = rng.uniform(0, 2, (2000, 2))
    pts = pts[in_l(pts, None)]
    r = convexity_of_point_set(pts, inside=in_l, n_pairs=4000, seed=2)
    assert r.method == "midpoint" and r.violation > 0.02


def test_zero_set_three_dimensions():
    c = builtin_cost("quadratic", dim=3)
    box = DomainBox.cube(-1, 1, 3)
    spec = SectionSpec([0.1, 0.0, -0.1], [0.2, 0.3, 0.1], [-0.3, 0.1, 0.4], 1.0)
    mesh = section_boundary(c, spec, resolution=16, omega=box, omega_star=box)
    assert mesh.points.shape[1] == 3 and len(mesh.points) > 50
    assert mesh.max_abs_h <= 1e-9 and mesh.multi_crossings == 0
    assert oracles.plane_fit_residual(mesh.points) < 1e-9
    # a sphere: every point at the right radius, traced as a graph over the tangent plane
    sphere = zero_set(lambda z: np.sum(z * z, axis=-1) - 0.25, box, 16, base=np.array([0, 0, 0.5]),
                      normal=np.array([0, 0, 1.0]))
    np.testing.assert_allclose(np.linalg.norm(sphere.points, axis=1), 0.5, atol=1e-9)
