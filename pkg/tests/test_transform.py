import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import make
from mtwgeom.cost_model import DomainBox, builtin_cost
from mtwgeom.transform import (Grid, GridPotential, c_star_transform, c_transform, contact_set, cost_matrix,
                               grid_slack, is_c_convex, local_global_experiment, mask_lookup,
                               random_c_affine_max, random_smooth_c_convex, sublevel_c_convexity_test)

BOX = DomainBox.cube(-1, 1, 2)


def sq(x):
    return 0.5 * np.sum(x * x, axis=-1)


def test_grid_basics():
    g = Grid(BOX, 5)
    assert g.resolution == (5, 5) and g.size == 25
    np.testing.assert_allclose(g.spacing, [0.5, 0.5])
    np.testing.assert_array_equal(g.points[1], [-1.0, -0.5])
    assert g.index_of([0.5, -1.0]) == (3, 0)
    with pytest.raises(ValueError):
        g.index_of([0.1, 0.0])
    with pytest.raises(ValueError):
        Grid(BOX, (5, 5, 5))
    with pytest.raises(ValueError):
        Grid(BOX, 1)
    with pytest.raises(ValueError):
        GridPotential(g, np.zeros(24))
    with pytest.raises(ValueError):
        GridPotential(g, np.full(25, np.nan))


def test_transform_against_brute_force(rng):
    c, om, om_s = make("sqrt_plus")
    src, dst = Grid(om, 7), Grid(om_s, (6, 5))
    phi = GridPotential(src, rng.standard_normal(src.size))
    phic = c_transform(phi, c, dst)
    ref = oracles.brute_c_transform(phi.flat, src.points, dst.points, c)
    np.testing.assert_array_equal(phic.flat, ref)
    np.testing.assert_array_equal(c_transform(phi, c, dst, cost_matrix(c, src, dst)).flat, ref)
    back = c_star_transform(phic, c, src)
    ref2 = oracles.brute_c_transform(phic.flat, dst.points, src.points, lambda y, x: c(x, y))
    np.testing.assert_array_equal(back.flat, ref2)
    np.testing.assert_array_equal(c_star_transform(phic, c, src, cost_matrix(c, src, dst)).flat, ref2)
    with pytest.raises(ValueError):
        c_transform(phi, c, dst, np.zeros((3, 3)))


def test_quadratic_closed_form():
    # (|x|^2/2)^c(y) = -|y|^2/4 for the quadratic cost, attained at x = y/2
    c = builtin_cost("quadratic")
    g = Grid(BOX, 65)
    phic = c_transform(GridPotential.from_function(g, sq), c, Grid(BOX, 33))
    y = Grid(BOX, 33).points
    np.testing.assert_allclose(phic.flat, -0.5 * sq(y), atol=1e-14)


def test_is_c_convex_cases(rng):
    c = builtin_cost("quadratic")
    g = Grid(BOX, 33)
    # phi + |x|^2/2 convex with supporting targets y = x/2 inside the target box
    ok = is_c_convex(GridPotential.from_function(g, lambda x: -0.5 * sq(x)), c)
    assert ok.is_c_convex and ok.deviation <= ok.tolerance
    assert ok.tolerance == pytest.approx(grid_slack(c, g))
    bad_f = GridPotential.from_function(g, lambda x: -np.sum(x * x, -1))
    bad = is_c_convex(bad_f, c)
    assert not bad.is_c_convex and bad.deviation > 2 * bad.tolerance
    # |x|^2/2 is c-convex on the plane, but its supports y = 2x leave the target box
    assert not is_c_convex(GridPotential.from_function(g, sq), c).is_c_convex
    # oracle: phi + |x|^2/2 fails grid midpoint convexity, so phi is not c-convex for this cost
    assert oracles.grid_midpoint_convexity_defect(bad_f.values + sq(g.points).reshape(g.resolution)) > 0.1
    assert np.all(bad.envelope.values <= bad_f.values + 1e-12)
    # maxima of c-affine functions with targets on the target grid are reproduced exactly
    tgt = Grid(BOX, 33)
    pick = tgt.points[rng.choice(tgt.size, 6, replace=False)]
    phi, _ = random_c_affine_max(c, g, pick, rng)
    assert is_c_convex(phi, c, target=tgt).deviation < 1e-12


def test_contact_half_plane():
    c = builtin_cost("quadratic")
    g = Grid(BOX, 41)
    y1, y2 = np.array([0.3, 0.1]), np.array([-0.2, 0.4])
    psi = np.array([0.0, 0.05])
    a1 = -psi[0] - c(g.points, y1)
    a2 = -psi[1] - c(g.points, y2)
    phi = GridPotential(g, np.maximum(a1, a2))
    cs = contact_set(phi, None, c, y1, tol=1e-12)
    assert cs.phi_c == pytest.approx(psi[0], abs=1e-14)
    # oracle: the half-plane {a1 >= a2}, away from its boundary line
    d = (a1 - a2).reshape(g.resolution)
    clear = np.abs(d) > 1e-9
    np.testing.assert_array_equal(cs.mask[clear], (d >= 0)[clear])
    assert cs.component_count == 1
    assert len(cs.indices) == int(cs.mask.sum())
    empty = contact_set(phi, psi[0] + 10.0, c, y1, tol=1e-3)
    assert empty.empty and empty.component_count == 0


def test_contact_components_against_bfs():
    c = builtin_cost("quadratic")
    g = Grid(BOX, 64)
    phi = GridPotential.from_function(g, lambda x: (x[:, 0] ** 2 - 0.25) ** 2 - sq(x))
    tol = 2e-3
    cs = contact_set(phi, None, c, [0.0, 0.0], tol=tol)
    gap = np.abs(phi.flat + cs.phi_c + c(g.points, [0.0, 0.0])).reshape(g.resolution)
    assert cs.component_count == oracles.hysteresis_components(gap <= tol, gap <= 2.5 * tol) == 2
    plain = contact_set(phi, None, c, [0.0, 0.0], tol=tol, band=1.0)
    assert plain.component_count == oracles.bfs_components(gap <= tol)
    # through a transformed potential: phi_c read at the grid node
    phic = c_transform(phi, c, Grid(BOX, 64))
    y = Grid(BOX, 64).points[100]
    a = contact_set(phi, phic, c, y, tol=tol)
    b = contact_set(phi, None, c, y, tol=tol)
    assert a.phi_c == b.phi_c and np.array_equal(a.mask, b.mask)


@pytest.mark.parametrize("name", ["neg_log", "sqrt_plus"])
def test_contact_single_component_for_smooth_potentials(name, rng):
    c, om, om_s = make(name)
    g = Grid(om, 64)
    tg = Grid(om_s, 64)
    phi, _, _ = random_smooth_c_convex(c, g, om_s, rng)
    phic = c_transform(phi, c, tg)
    for j in rng.choice(tg.size, 5, replace=False):
        cs = contact_set(phi, phic, c, tg.points[j])
        assert not cs.empty and cs.component_count == 1


def test_sublevel_cases():
    c = builtin_cost("quadratic")
    g = Grid(BOX, 48)
    disk = sublevel_c_convexity_test(GridPotential.from_function(g, sq), c, [0.0, 0.0], 0.3)
    assert disk.convex and disk.components == 1 and disk.pairs_tested > 0
    wells = GridPotential.from_function(g, lambda x: (x[:, 0] ** 2 - 0.25) ** 2 + x[:, 1] ** 2 - sq(x))
    split = sublevel_c_convexity_test(wells, c, [0.0, 0.0], 0.01)
    assert split.components == 2 and split.violation > 0.1 and not split.convex
    assert sublevel_c_convexity_test(wells, c, [0.0, 0.0], -5.0).empty


def test_mask_lookup():
    g = Grid(BOX, 3)
    mask = np.zeros((3, 3), bool)
    mask[2, 2] = True
    hit = mask_lookup(g, mask, np.array([[0.5, 0.5], [-0.5, -0.5], [2.0, 2.0], [1.0, 1.0]]))
    assert hit.tolist() == [True, False, False, True]


def test_local_global_single_affine_and_convex():
    c, om, om_s = make("neg_log")
    g = Grid(om, 32)
    phi = GridPotential.from_function(g, lambda x: -0.1 - c(x, om_s.center + 0.2))
    rep = local_global_experiment(phi, c, omega_star=om_s)
    s = rep.summary()
    assert s["locally_not_globally"] == 0 and s["globally_supported"] > 0.9 * s["interior_nodes"]
    q = builtin_cost("quadratic")
    rep = local_global_experiment(GridPotential.from_function(Grid(BOX, 32), lambda x: -0.5 * sq(x)), q)
    assert rep.count_locally_not_globally == 0 and rep.global_ok[rep.interior].all()


def test_local_global_positive_control():
    # phi + |x|^2/2 = w(x1) with a double-well w: tangents in the shallow well are only local supports
    c = builtin_cost("quadratic")
    g = Grid(BOX, 48)

    def w(t):
        return (t * t - 0.25) ** 2 + 0.1 * t

    def dw(t):
        return 4 * t * (t * t - 0.25) + 0.1

    phi = GridPotential.from_function(g, lambda x: w(x[:, 0]) - sq(x))
    rep = local_global_experiment(phi, c, omega_star=DomainBox.cube(-5, 5, 2))
    flagged = rep.locally_not_globally
    assert rep.count_locally_not_globally > 100
    # oracle: 1-D tangent line test of w on a fine grid
    t = np.linspace(-1, 1, 4001)
    x1 = g.points[flagged, 0]
    below = np.array([np.min(w(t) - w(a) - dw(a) * (t - a)) for a in x1])
    assert np.mean(below < 0) > 0.95


@pytest.mark.parametrize("name", ["neg_log", "perturbed_quadratic"])
def test_random_smooth_potential_is_c_convex(name, rng):
    params = (-0.2,) if name == "perturbed_quadratic" else ()
    c, om, om_s = make(name, params)
    g = Grid(om, 32)
    phi, yfield, psi = random_smooth_c_convex(c, g, om_s, rng)
    assert is_c_convex(phi, c, target=Grid(om_s, 64)).is_c_convex
    # the argmax field solves the first-order condition
    assert np.max(np.abs(-psi.grad(yfield) - c.cy(g.points, yfield))) < 1e-10
    np.testing.assert_allclose(phi.flat, -psi(yfield) - c(g.points, yfield), atol=1e-12)


def test_io_round_trips(tmp_path, rng):
    g = Grid(DomainBox([-1, 0], [1, 2]), (5, 7))
    phi = GridPotential(g, rng.standard_normal(g.size))
    for binary in (False, True):
        p = tmp_path / f"phi_{binary}"
        phi.save(p, binary=binary)
        back = GridPotential.load(p)
        np.testing.assert_array_equal(back.values, phi.values)
        assert back.resolution == (5, 7)
        np.testing.assert_array_equal(back.box.upper, [1, 2])
    assert GridPotential.from_text(phi.to_text()).values.tobytes() == phi.values.tobytes()
    with pytest.raises(ValueError):
        GridPotential.from_text("dim 2\nlower 0 0\n")
    with pytest.raises(ValueError):
        GridPotential.from_text("dim 2\nlower 0 0\nupper 1 1\nvalues\n1\n")
    with pytest.raises(ValueError):
        GridPotential.from_bytes(b"nope")


def test_constant_shift_and_idempotence(rng):
    c, om, om_s = make("sqrt_plus")
    g, t = Grid(om, 12), Grid(om_s, 12)
    phi = GridPotential(g, rng.standard_normal(g.size))
    a = c_transform(phi, c, t)
    b = c_transform(GridPotential(g, phi.flat + 0.7), c, t)
    np.testing.assert_allclose(b.flat, a.flat - 0.7, atol=1e-14)
    # phi^{c c* c} = phi^c
    again = c_transform(c_star_transform(a, c, g), c, t)
    np.testing.assert_allclose(again.flat, a.flat, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=36, max_size=36), st.lists(st.floats(0, 1), min_size=36, max_size=36))
def test_order_reversing(v, bump):
    c = builtin_cost("neg_log")
    om, om_s = DomainBox.cube(-1, 1, 2), DomainBox.cube(2, 3, 2)
    g, t = Grid(om, 6), Grid(om_s, 5)
    lo = GridPotential(g, np.array(v))
    hi = GridPotential(g, np.array(v) + np.array(bump))
    assert np.all(c_transform(lo, c, t).flat >= c_transform(hi, c, t).flat)
