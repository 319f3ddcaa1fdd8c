"""Tests for the periodic Green's function, the Biot-Savart kernel and the cone."""

import numpy as np
import pytest

from macroipm.errors import KernelDomainError, SingularPointError
from macroipm.kernel import (
    FOUR_PI,
    StripPoint,
    canonical_angle,
    cone_membership,
    eval_green,
    eval_k2_complex,
    eval_kernel,
    k2_derivative,
    sample_cone,
    star_norm,
    strip_denominator,
)


def test_canonical_angle_wraps_to_half_open_interval():
    assert canonical_angle(1.5 * np.pi) == pytest.approx(-0.5 * np.pi)
    assert canonical_angle(np.pi) == pytest.approx(-np.pi)
    np.testing.assert_allclose(canonical_angle([0.0, 2.0 * np.pi + 0.1]), [0.0, 0.1], atol=1e-14)


def test_strip_point_is_canonicalised():
    a = StripPoint(2.0 * np.pi + 0.25, 1)
    assert a.a1 == pytest.approx(0.25)
    assert isinstance(a.a2, complex)


def test_star_norm():
    assert star_norm(StripPoint(0.3, 0.4j)) == pytest.approx(0.5)


def test_green_reference_values():
    assert eval_green(np.pi, 0.0) == pytest.approx(np.log(2.0) / FOUR_PI)
    assert eval_green(0.5 * np.pi, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_green_is_even_and_periodic():
    z1 = np.linspace(0.1, 3.0, 7)
    z2 = np.linspace(-2.0, 2.0, 7)
    np.testing.assert_allclose(eval_green(z1, z2), eval_green(-z1, -z2), rtol=1e-13)
    np.testing.assert_allclose(eval_green(z1, z2), eval_green(z1 + 2.0 * np.pi, z2), rtol=1e-12)


def test_kernel_reference_value():
    np.testing.assert_allclose(eval_kernel(0.5 * np.pi, 0.0), [0.0, 1.0 / FOUR_PI], atol=1e-16)


def test_kernel_is_the_perpendicular_gradient_of_green():
    z1, z2, h = 0.7, -0.4, 1e-6
    d1 = (eval_green(z1 + h, z2) - eval_green(z1 - h, z2)) / (2 * h)
    d2 = (eval_green(z1, z2 + h) - eval_green(z1, z2 - h)) / (2 * h)
    k = eval_kernel(z1, z2)
    assert k[0] == pytest.approx(-d2, rel=1e-7)
    assert k[1] == pytest.approx(d1, rel=1e-7)


def test_kernel_decays_exponentially():
    near = np.abs(eval_kernel(0.5 * np.pi, 3.0))
    far = np.abs(eval_kernel(0.5 * np.pi, 4.0))
    assert far[1] / near[1] == pytest.approx(np.exp(-1.0), rel=1e-2)


def test_singular_point_raises():
    with pytest.raises(SingularPointError):
        eval_green(0.0, 0.0)
    with pytest.raises(SingularPointError):
        eval_kernel(np.array([0.0, 1.0]), np.array([0.0, 1.0]))


def test_strip_denominator_matches_closed_form():
    z1, z2 = 0.3, 0.8
    assert strip_denominator(z1, z2) == pytest.approx(np.cosh(z2) - np.cos(z1), rel=1e-14)


def test_k2_derivatives_match_finite_differences():
    a1, a2, h = 0.6, 0.35, 1e-5
    k0 = lambda x: k2_derivative(a1, x, 0)  # noqa: E731
    k1 = lambda x: k2_derivative(a1, x, 1)  # noqa: E731
    assert k2_derivative(a1, a2, 1) == pytest.approx((k0(a2 + h) - k0(a2 - h)) / (2 * h), rel=1e-8)
    assert k2_derivative(a1, a2, 2) == pytest.approx((k1(a2 + h) - k1(a2 - h)) / (2 * h), rel=1e-7)


def test_k2_derivative_rejects_order():
    with pytest.raises(ValueError):
        k2_derivative(0.5, 0.5, 3)


def test_complex_k2_extends_the_real_kernel():
    a = StripPoint(0.8, -0.3)
    assert eval_k2_complex(a, 0) == pytest.approx(complex(eval_kernel(0.8, -0.3)[1]))
    value = eval_k2_complex(StripPoint(0.8, 0.1 + 0.05j), 1)
    assert value.imag != 0.0


def test_complex_k2_domain_error():
    with pytest.raises(KernelDomainError):
        eval_k2_complex(StripPoint(0.0, 0j), 0)


def test_cone_membership_examples():
    assert cone_membership(StripPoint(1.0, 0.2 + 0.1j), 3 / 8)
    assert not cone_membership(StripPoint(0.0, 0.1j), 3 / 8)
    assert not cone_membership(StripPoint(0.5, 2j), 3 / 8)


def test_cone_rejects_kappa_out_of_range():
    with pytest.raises(ValueError):
        cone_membership(StripPoint(1.0, 0j), 0.5)


def test_sample_cone(rng):
    points = sample_cone(200, 0.25, rng, norm_range=(1e-2, 1.0))
    assert len(points) == 200
    assert all(cone_membership(p, 0.25) for p in points)
    norms = np.array([star_norm(p) for p in points])
    assert norms.min() >= 1e-2 * (1 - 1e-12)
    assert norms.max() <= 1.0 * (1 + 1e-12)


def test_k2_derivatives_are_bounded_on_the_cone(rng):
    points = sample_cone(10_000, 3 / 8, rng)
    a1 = np.array([p.a1 for p in points])
    a2 = np.array([p.a2 for p in points])
    norms = np.array([star_norm(p) for p in points])
    for order in range(3):
        scaled = np.abs(k2_derivative(a1, a2, order)) * norms ** (1 + order)
        assert np.all(np.isfinite(scaled))
        assert scaled.max() <= 1.0
