import math

import numpy as np
import pytest

from ellrad.errors import DomainError, FocalPointError, FocalSegmentError
from ellrad.geometry import (EllipseParam, arc_length_element,
                             cartesian_to_elliptic, ellipse_point,
                             ellipse_point_reference, elliptic_to_cartesian,
                             emitter, emitter_deriv, gradient_weight,
                             is_on_focal_segment, level, make_geometry,
                             phi_window, receiver, receiver_deriv,
                             reduce_angle, rotate)
from oracles import adaptive_simpson, central_gradient

TWO_PI = 2.0 * math.pi


def test_make_geometry_pi_third():
    g = make_geometry(math.pi / 3)
    assert abs(g.a - math.sqrt(3.0) / 2.0) < 1e-15
    assert abs(g.b - 0.5) < 1e-15
    assert abs(g.a ** 2 + g.b ** 2 - 1.0) < 1e-14


def test_make_geometry_symmetry_point():
    g = make_geometry(math.pi / 4)
    assert abs(g.a - math.sqrt(2.0) / 2.0) < 1e-15
    assert abs(g.a - g.b) < 1e-15


@pytest.mark.parametrize("alpha", [1.6, 0.0, math.pi / 2, -0.2, math.nan])
def test_make_geometry_rejects_out_of_range(alpha):
    with pytest.raises(DomainError, match=r"\(0, pi/2\)"):
        make_geometry(alpha)


def test_trajectories_at_reference_position(rng):
    for alpha in rng.uniform(0.05, 1.5, 5):
        g = make_geometry(alpha)
        assert np.allclose(emitter(g, math.pi / 2), (g.a, g.b), atol=1e-14)
        assert np.allclose(receiver(g, math.pi / 2), (-g.a, g.b), atol=1e-14)


def test_trajectory_tangency_and_separation(rng):
    g = make_geometry(0.7)
    s = rng.uniform(0.0, TWO_PI, 50)
    e = emitter(g, s)
    r = receiver(g, s)
    assert np.allclose(np.hypot(e[:, 0], e[:, 1]), 1.0, atol=1e-14)
    assert np.allclose(np.hypot(r[:, 0], r[:, 1]), 1.0, atol=1e-14)
    sep = np.hypot(*(e - r).T)
    assert np.allclose(sep, 2.0 * g.a, atol=1e-14)
    assert np.all(np.abs(np.sum(e * emitter_deriv(g, s), axis=1)) < 1e-14)
    assert np.all(np.abs(np.sum(r * receiver_deriv(g, s), axis=1)) < 1e-14)


def test_chord_length_specific():
    g = make_geometry(math.pi / 6)
    sep = np.linalg.norm(emitter(g, 0.0) - receiver(g, 0.0))
    assert abs(sep - 1.0) < 1e-14


def test_reference_tangent_vectors():
    g = make_geometry(0.9)
    assert np.allclose(emitter_deriv(g, math.pi / 2), (-g.b, g.a), atol=1e-14)
    assert np.allclose(receiver_deriv(g, math.pi / 2), (-g.b, -g.a), atol=1e-14)


def test_level_at_origin():
    g = make_geometry(1.1)
    assert abs(level(g, (0.0, 0.0), 2.4) - 2.0) < 1e-14


def test_level_roundtrip_on_ellipse(rng):
    g = make_geometry(0.8)
    for _ in range(20):
        L = rng.uniform(g.diameter_min * 1.01, g.diameter_max * 1.5)
        s = rng.uniform(0.0, TWO_PI)
        phi = rng.uniform(0.0, TWO_PI)
        x = ellipse_point(g, EllipseParam(s, L), phi)
        assert abs(level(g, x, s) - L) < 1e-12


def test_level_focal_midpoint_is_degenerate():
    g = make_geometry(0.6)
    x = (0.0, g.b)
    assert abs(np.linalg.norm(np.asarray(x) - emitter(g, math.pi / 2)) - g.a) < 1e-14
    assert abs(level(g, x, math.pi / 2) - 2.0 * g.a) < 1e-12
    assert is_on_focal_segment(g, x, math.pi / 2)
    assert not is_on_focal_segment(g, (0.0, 0.0), math.pi / 2)


def test_level_raises_at_focus():
    g = make_geometry(0.5)
    with pytest.raises(FocalPointError):
        level(g, emitter(g, 1.0), 1.0)


def test_gradient_weight_at_origin():
    g = make_geometry(1.0)
    vec, mag = gradient_weight(g, (0.0, 0.0), math.pi / 2)
    assert np.allclose(vec, (0.0, -2.0 * g.b), atol=1e-14)
    assert abs(mag - 2.0 * g.b) < 1e-14


def test_gradient_weight_far_field_limit():
    g = make_geometry(0.7)
    x = 200.0 * np.array([math.cos(1.0), math.sin(1.0)])
    _, mag = gradient_weight(g, x, 2.2)
    assert abs(mag - 2.0) < 1e-4


def test_gradient_weight_matches_finite_differences(rng):
    g = make_geometry(0.85)
    checked = 0
    while checked < 100:
        r = 0.95 * g.b * math.sqrt(rng.uniform())
        th = rng.uniform(0.0, TWO_PI)
        x = np.array([r * math.cos(th), r * math.sin(th)])
        s = rng.uniform(0.0, TWO_PI)
        vec, mag = gradient_weight(g, x, s)
        fd = central_gradient(lambda y: float(level(g, y, s)), x, h=1e-6)
        assert np.max(np.abs(fd - vec)) < 1e-6
        assert abs(np.linalg.norm(fd) - mag) < 1e-6
        checked += 1


def test_gradient_weight_raises_on_focal_segment():
    g = make_geometry(0.9)
    mid = 0.5 * (emitter(g, 0.3) + receiver(g, 0.3))
    with pytest.raises(FocalSegmentError):
        gradient_weight(g, mid, 0.3)
    with pytest.raises(FocalPointError):
        gradient_weight(g, emitter(g, 0.3), 0.3)


def test_ellipse_point_vertices():
    g = make_geometry(0.75)
    L = 0.5 * (g.diameter_min + g.diameter_max)
    rho = math.acosh(L / g.diameter_min)
    e = EllipseParam(math.pi / 2, L)
    bottom = ellipse_point(g, e, 1.5 * math.pi)
    assert np.allclose(bottom, (0.0, g.b - g.a * math.sinh(rho)), atol=1e-13)
    right = ellipse_point(g, e, 0.0)
    assert np.allclose(right, (g.a * math.cosh(rho), g.b), atol=1e-13)
    d = (np.linalg.norm(right - np.array([g.a, g.b]))
         + np.linalg.norm(right - np.array([-g.a, g.b])))
    assert abs(d - L) < 1e-12


def test_ellipse_point_rotation_consistency(rng):
    g = make_geometry(0.65)
    for _ in range(10):
        s = rng.uniform(0.0, TWO_PI)
        L = rng.uniform(g.diameter_min * 1.05, g.diameter_max)
        phi = rng.uniform(0.0, TWO_PI)
        direct = ellipse_point(g, EllipseParam(s, L), phi)
        ref = ellipse_point(g, EllipseParam(math.pi / 2, L), phi)
        assert np.allclose(direct, rotate(s - math.pi / 2, ref), atol=1e-13)


def test_ellipse_param_reduces_angle():
    e = EllipseParam(TWO_PI + 0.5, 2.0)
    assert abs(e.s - 0.5) < 1e-12
    with pytest.raises(DomainError):
        EllipseParam(0.1, -1.0)


def test_arc_length_element_special_angles():
    g = make_geometry(0.95)
    L = 1.4 * g.diameter_min
    rho = math.acosh(L / g.diameter_min)
    e = EllipseParam(0.0, L)
    assert abs(arc_length_element(g, e, 0.0) - g.a * math.sinh(rho)) < 1e-14
    assert abs(arc_length_element(g, e, math.pi / 2)
               - g.a * math.cosh(rho)) < 1e-14


def test_perimeter_matches_adaptive_oracle():
    g = make_geometry(0.8)
    L = 1.7 * g.diameter_min
    rho = math.acosh(L / g.diameter_min)
    A = g.a * math.cosh(rho)
    B = g.a * math.sinh(rho)
    e = EllipseParam(0.0, L)

    gx, gw = np.polynomial.legendre.leggauss(8)
    edges = np.linspace(0.0, TWO_PI, 65)
    quad = 0.0
    for k in range(64):
        half = 0.5 * (edges[k + 1] - edges[k])
        phis = edges[k] + half * (gx + 1.0)
        quad += half * np.dot(gw, arc_length_element(g, e, phis))

    oracle = adaptive_simpson(
        lambda t: math.hypot(-A * math.sin(t), B * math.cos(t)),
        0.0, TWO_PI, tol=1e-12)
    assert abs(quad - oracle) < 1e-8


def test_phi_window_empty_outside_range():
    g = make_geometry(0.7)
    for L in (g.diameter_min, g.diameter_max, g.diameter_max + 0.5,
              0.5 * g.diameter_min):
        assert phi_window(g, L).empty
    assert not phi_window(g, 0.5 * (g.diameter_min + g.diameter_max)).empty


def test_diameter_bound_identity(rng):
    for alpha in rng.uniform(0.05, 1.55, 10):
        g = make_geometry(alpha)
        assert abs(g.diameter_max
                   - 2.0 * math.sqrt(1.0 + 3.0 * g.b ** 2)) < 1e-12


def test_phi_window_shrinks_toward_tangency():
    g = make_geometry(math.pi / 4)
    assert abs(g.diameter_max - math.sqrt(10.0)) < 1e-12
    widths = []
    for k in range(2, 7):
        w = phi_window(g, g.diameter_max * (1.0 - 10.0 ** -k))
        assert not w.empty
        assert math.pi < w.phi_min < w.phi_max < TWO_PI
        widths.append(w.width)
    assert all(w1 > w2 for w1, w2 in zip(widths, widths[1:]))
    assert widths[-1] < 0.05


def test_phi_window_membership(rng):
    for _ in range(20):
        g = make_geometry(rng.uniform(0.1, 1.5))
        L = rng.uniform(g.diameter_min * 1.001, g.diameter_max * 0.999)
        w = phi_window(g, L)
        phis = np.linspace(0.0, TWO_PI, 256, endpoint=False)
        pts = ellipse_point_reference(g, L, phis)
        inside = np.hypot(pts[:, 0], pts[:, 1]) < g.b
        in_window = (phis > w.phi_min) & (phis < w.phi_max)
        clear = np.minimum(np.abs(phis - w.phi_min),
                           np.abs(phis - w.phi_max)) > 1e-8
        assert np.array_equal(inside[clear], in_window[clear])


def test_level_bounds_inside_disc(rng):
    g = make_geometry(1.2)
    for _ in range(200):
        r = 0.999 * g.b * math.sqrt(rng.uniform())
        th = rng.uniform(0.0, TWO_PI)
        x = (r * math.cos(th), r * math.sin(th))
        val = float(level(g, x, rng.uniform(0.0, TWO_PI)))
        assert g.diameter_min < val < g.diameter_max


def test_level_rotation_equivariance(rng):
    g = make_geometry(0.55)
    for _ in range(30):
        x = rng.uniform(-0.3, 0.3, 2)
        s = rng.uniform(0.0, TWO_PI)
        th = rng.uniform(0.0, TWO_PI)
        assert abs(level(g, rotate(th, x), s + th) - level(g, x, s)) < 1e-12


def test_elliptic_roundtrip(rng):
    g = make_geometry(0.85)
    done = 0
    while done < 50:
        x = rng.uniform(-1.5, 1.5, 2)
        # skip a neighborhood of the focal segment where the chart folds
        if abs(x[1] - g.b) < 1e-3 and abs(x[0]) < g.a + 1e-3:
            continue
        ec = cartesian_to_elliptic(g, x)
        back = elliptic_to_cartesian(g, ec.rho, ec.phi)
        assert np.max(np.abs(back - x)) < 1e-12
        assert ec.rho >= 0.0
        assert 0.0 <= ec.phi < TWO_PI
        done += 1


def test_reduce_angle_canonical_range(rng):
    vals = np.concatenate([rng.uniform(-30.0, 30.0, 100),
                           [0.0, TWO_PI, -TWO_PI, 4.0 * math.pi]])
    red = reduce_angle(vals)
    assert np.all((red >= 0.0) & (red < TWO_PI))
    assert np.allclose(np.mod(red - vals, TWO_PI), 0.0, atol=1e-9)
