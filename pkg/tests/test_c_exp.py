import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import fsolve

import oracles
from conftest import ALL_COSTS, cost_id, make
from mtwgeom.c_exp import (CONVERGED, ESCAPED, SINGULAR, CExpError, c_exp, c_exp_batch, c_segment,
                           c_segment_batch, c_star_exp, dual_c_segment)
from mtwgeom.cost_model import CostFunction, DomainBox, builtin_cost, sample_pairs


def test_quadratic_one_step():
    r = c_exp(builtin_cost("quadratic"), [0.2, 0.3], [0.1, -0.1], y_init=[0.0, 0.0])
    np.testing.assert_allclose(r.y, [0.3, 0.2], atol=1e-15)
    assert r.iterations == 1 and r.converged and r.residual < 1e-12


@pytest.mark.parametrize("spec", ALL_COSTS, ids=cost_id)
def test_fixed_point(spec, rng):
    c, om, om_s = make(*spec)
    x, y = sample_pairs(c, om, om_s, 1, rng)
    r = c_exp(c, x[0], -c.cx(x[0], y[0]), y_init=y[0])
    assert r.iterations == 0 and r.residual == 0.0
    np.testing.assert_array_equal(r.y, y[0])


def test_neg_log_example():
    c = builtin_cost("neg_log")
    r = c_exp(c, [1.0, 0.0], [0.9, 0.1], y_init=[0.0, 0.0])
    assert r.converged and r.residual < 1e-12
    # residual re-evaluated independently
    assert np.linalg.norm(-c.cx([1.0, 0.0], r.y) - [0.9, 0.1]) < 1e-12


def test_c_star_exp_quadratic_and_round_trip(rng):
    c = builtin_cost("quadratic")
    np.testing.assert_allclose(c_star_exp(c, [0, 0], [0.4, 0], x_init=[0, 0]).y, [0.4, 0], atol=1e-15)
    c, om, om_s = make("sqrt_plus")
    x, y = sample_pairs(c, om, om_s, 20, rng)
    for xi, yi in zip(x, y):
        r = c_star_exp(c, yi, -c.cy(xi, yi), box=om)
        assert r.residual < 1e-12
        np.testing.assert_allclose(r.y, xi, atol=1e-9)


@pytest.mark.parametrize("spec", ALL_COSTS, ids=cost_id)
def test_round_trip_center_seed(spec):
    c, om, om_s = make(*spec)
    x, y = sample_pairs(c, om, om_s, 1000, np.random.default_rng(5))
    b = c_exp_batch(c, x, -c.cx(x, y), om_s.center, box=om_s)
    assert b.converged.all()
    assert np.max(np.abs(b.y - y)) < 1e-9


@pytest.mark.parametrize("eps", [0.2, -0.2])
def test_cardano_oracle(eps, rng):
    c, om, om_s = make("perturbed_quadratic", (eps,))
    x = om.sample(rng, 500)
    y_true = om_s.sample(rng, 500)
    p = -c.cx(x, y_true)
    y_oracle = oracles.pq_cexp(x, p, eps)
    b = c_exp_batch(c, x, p, om_s.center, box=om_s)
    assert b.converged.all()
    np.testing.assert_allclose(b.y, y_oracle, atol=1e-12)


@pytest.mark.parametrize("spec", ALL_COSTS, ids=cost_id)
def test_jacobian_is_inverse_mixed_hessian(spec, rng):
    c, om, om_s = make(*spec)
    x, y = sample_pairs(c, om, om_s, 20, rng)
    for xi, yi in zip(x, y):
        p = -c.cx(xi, yi)
        jac = oracles.fd_jacobian(lambda q: c_exp(c, xi, q, y_init=yi).y, p, h=1e-6)
        expected = -np.linalg.inv(c.cxy(xi, yi))
        assert np.max(np.abs(jac - expected)) / np.max(np.abs(expected)) < 1e-5


def test_segment_quadratic_straight():
    c = builtin_cost("quadratic")
    th = np.linspace(0, 1, 11)
    seg = c_segment(c, [0.1, 0.2], [-0.5, 0.3], [0.4, -0.6], th)
    expected = (1 - th)[:, None] * [-0.5, 0.3] + th[:, None] * [0.4, -0.6]
    np.testing.assert_allclose(seg.ys, expected, atol=1e-12)
    np.testing.assert_array_equal(seg.ys[0], [-0.5, 0.3])
    np.testing.assert_array_equal(seg.ys[-1], [0.4, -0.6])
    assert seg.theta_samples[5][0] == 0.5


def test_segment_neg_log_half():
    c, om, om_s = make("neg_log")
    x0 = np.array([1.0, 0.0])
    seg = c_segment(c, x0, [0.0, 0.0], [0.2, 0.0], [0.5], box=om_s)
    y = seg.ys[0]
    target = 0.5 * (seg.p0 + seg.p1)
    assert np.linalg.norm(-c.cx(x0, y) - target) < 1e-12


def test_segment_order_independent(rng):
    c, om, om_s = make("sqrt_plus")
    x, y = sample_pairs(c, om, om_s, 200, rng)
    y1 = om_s.sample(rng, 200)
    th = np.linspace(0, 1, 17)
    fwd, s1, _ = c_segment_batch(c, x, y, y1, th, box=om_s)
    bwd, s2, _ = c_segment_batch(c, x, y, y1, th[::-1], box=om_s)
    ok = np.all(s1 == CONVERGED, axis=1) & np.all(s2 == CONVERGED, axis=1)
    assert ok.mean() > 0.95
    assert np.max(np.abs(fwd[ok] - bwd[ok][:, ::-1])) < 1e-9


def test_dual_segment():
    c = builtin_cost("quadratic")
    th = np.linspace(0, 1, 5)
    seg = dual_c_segment(c, [0.0, 0.1], [0.2, 0.3], [-0.4, 0.5], th)
    np.testing.assert_allclose(seg.ys, (1 - th)[:, None] * [0.2, 0.3] + th[:, None] * [-0.4, 0.5], atol=1e-12)
    c, om, om_s = make("sqrt_plus")
    y0 = np.array([0.1, -0.2])
    seg = dual_c_segment(c, y0, [0.5, 0.5], [-0.5, 0.2], th, box=om)
    np.testing.assert_array_equal(seg.ys[0], [0.5, 0.5])
    np.testing.assert_array_equal(seg.ys[-1], [-0.5, 0.2])
    q0, q1 = -c.cy(seg.ys[0], y0), -c.cy(seg.ys[-1], y0)
    for t, x in zip(th, seg.ys):
        assert np.linalg.norm(-c.cy(x, y0) - ((1 - t) * q0 + t * q1)) < 1e-12


def test_independent_solver_agrees(rng):
    # scipy's hybrid solver as a second path for the c-exponential
    c, om, om_s = make("neg_log")
    x = om.sample(rng, 10)
    p = -c.cx(x, om_s.sample(rng, 10))
    for xi, pi in zip(x, p):
        y_ref = fsolve(lambda yy: -c.cx(xi, yy) - pi, om_s.center, xtol=1e-14)
        np.testing.assert_allclose(c_exp(c, xi, pi, box=om_s).y, y_ref, atol=1e-10)


def test_errors():
    deg = CostFunction("x1y1", 2, lambda x, y: x[..., 0] * y[..., 0])
    with pytest.raises(CExpError) as exc:
        c_exp(deg, [0.1, 0.1], [0.2, 0.2], y_init=[0.0, 0.0])
    assert exc.value.status == SINGULAR
    c = builtin_cost("quadratic")
    box = DomainBox.cube(-1, 1, 2)
    b = c_exp_batch(c, [0.0, 0.0], [50.0, 0.0], [0.0, 0.0], box=box)
    assert b.status[0] == ESCAPED
    with pytest.raises(CExpError) as exc:
        c_segment(c, [0.0, 0.0], [0.0, 0.0], [30.0, 0.0], [0.5], box=box)
    assert exc.value.theta == 0.5
    with pytest.raises(ValueError):
        c_segment(c, [0, 0], [0, 0], [1, 0], [1.5])
    with pytest.raises(ValueError):
        c_exp(c, [0, 0], [0, 0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-0.2, 0.2), min_size=4, max_size=4), st.floats(0, 1))
def test_segment_residual_property(v, t):
    c, om, om_s = make("perturbed_quadratic", (0.2,))
    x0 = np.array(v[:2])
    y0, y1 = np.array([0.2, -0.1]), np.array(v[2:])
    seg = c_segment(c, x0, y0, y1, [t], box=om_s)
    assert np.linalg.norm(-c.cx(x0, seg.ys[0]) - seg.p_theta(t)) < 1e-12
