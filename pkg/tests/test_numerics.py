"""Kernel tests.

Frozen reference values were pinned with mpmath at 40 digits before the
kernel was written; the mpmath cross-checks are repeated live where cheap.
"""

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adol.numerics import (
    OdeSpec,
    QuadratureError,
    QuadratureSpec,
    beta_sym,
    exp_integral_e,
    gamma_fn,
    integrate_adaptive,
    integrate_ode,
    norm_cdf,
    solve_quartic,
)

mp.mp.dps = 40


# ---------------------------------------------------------------------- gamma

def test_gamma_trivial_values():
    assert gamma_fn(1.0) == pytest.approx(1.0, rel=1e-14)
    assert gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    assert gamma_fn(5.0) == pytest.approx(24.0, rel=1e-13)


def test_gamma_pinned_oracle_values():
    # pinned with mpmath.gamma at 40 digits
    assert gamma_fn(2.2) == pytest.approx(1.101802490879712732769, rel=1e-13)
    assert gamma_fn(-0.7) == pytest.approx(-4.273669982410843754732, rel=1e-12)
    assert gamma_fn(-1.5) == pytest.approx(2.363271801207354703064, rel=1e-12)


def test_gamma_pole_raises():
    for bad in (0.0, -1.0, -2.0, -7.0):
        with pytest.raises(ValueError):
            gamma_fn(bad)


@given(st.floats(min_value=0.1, max_value=5.0))
@settings(max_examples=200, deadline=None)
def test_gamma_recurrence(x):
    assert gamma_fn(x + 1.0) == pytest.approx(x * gamma_fn(x), rel=1e-12)


@given(st.floats(min_value=-1.95, max_value=4.0))
@settings(max_examples=150, deadline=None)
def test_gamma_matches_mpmath(x):
    if abs(x - round(x)) < 1e-3 and x <= 0.0:
        return  # stay off the poles
    ref = float(mp.gamma(x))
    assert gamma_fn(x) == pytest.approx(ref, rel=1e-12)


# ------------------------------------------------------------------ beta_sym

def test_beta_sym_values():
    assert beta_sym(1.0) == pytest.approx(1.0, rel=1e-14)
    assert beta_sym(0.5) == pytest.approx(math.pi, rel=1e-13)
    # quadrature oracle: B(1.2, 1.2) = int_0^1 t^0.2 (1-t)^0.2 dt
    oracle = integrate_adaptive(lambda t: t ** 0.2 * (1.0 - t) ** 0.2, 0.0, 1.0,
                                QuadratureSpec(1e-13, 1e-13, 8000))
    assert beta_sym(1.2) == pytest.approx(oracle.real, rel=1e-10)
    assert beta_sym(1.2) == pytest.approx(0.6786786707060262439308, rel=1e-12)


def test_beta_sym_domain():
    with pytest.raises(ValueError):
        beta_sym(0.0)
    with pytest.raises(ValueError):
        beta_sym(-1.2)


# --------------------------------------------------------- exponential integral

def test_exp_integral_pinned_values():
    assert exp_integral_e(1.0, 1.0).real == pytest.approx(0.2193839343955202736772, rel=1e-12)
    assert abs(exp_integral_e(1.0, 1.0).imag) < 1e-15
    assert exp_integral_e(0.0, 1.0).real == pytest.approx(math.exp(-1.0), rel=1e-14)
    # negative argument, principal branch; pinned with mpmath.expint
    v = exp_integral_e(0.5, -0.3)
    assert v.real == pytest.approx(-2.219364557856148745169, rel=1e-11)
    assert v.imag == pytest.approx(-3.236043187592832090067, rel=1e-11)
    # continued-fraction regime
    assert exp_integral_e(2.5, 3.7).real == pytest.approx(0.00421705648650755945188, rel=1e-11)
    assert exp_integral_e(1.0, 5.0).real == pytest.approx(0.001148295591275325797331, rel=1e-11)


def test_exp_integral_quadrature_oracle_negative_z():
    # E(nu, z) = z^{nu-1} Gamma(1-nu, z); for z < 0 integrate the defining
    # integral E(nu,z) = int_1^inf e^{-z t} t^{-nu} dt analytically continued:
    # compare against mpmath's principal-branch value instead of guessing.
    for nu, z in [(0.6, -1.0 / 3.0), (0.6, -0.2357022603955158), (0.3, -0.8)]:
        ref = mp.expint(nu, z)
        got = exp_integral_e(nu, z)
        assert got.real == pytest.approx(float(ref.real), rel=1e-10)
        assert got.imag == pytest.approx(float(ref.imag), rel=1e-10)


def test_exp_integral_singular_at_zero():
    with pytest.raises(ValueError):
        exp_integral_e(0.5, 0.0)


def test_exp_integral_e1_series_property():
    # term-by-term series comparison on (0, 1]
    for z in np.linspace(0.05, 1.0, 12):
        acc = -0.5772156649015328606065 - math.log(z)
        term = 1.0
        for k in range(1, 60):
            term *= -z / k
            acc -= term / k
        assert exp_integral_e(1.0, z).real == pytest.approx(acc, abs=1e-10)


def test_exp_integral_integer_recurrence():
    # E_{n+1}(z) = (e^{-z} - z E_n(z)) / n
    for z in (0.3, 0.9, 1.4):
        e1 = exp_integral_e(1.0, z)
        e2 = exp_integral_e(2.0, z)
        assert e2 == pytest.approx((math.exp(-z) - z * e1) / 1.0, rel=1e-11)


# ---------------------------------------------------------------- quadrature

def test_quadrature_trivial():
    spec = QuadratureSpec(1e-12, 1e-12, 2000)
    assert integrate_adaptive(lambda x: x * x, 0.0, 1.0, spec).real == pytest.approx(1.0 / 3.0, rel=1e-12)
    assert integrate_adaptive(lambda x: x ** -0.2, 0.0, 1.0, spec).real == pytest.approx(1.25, rel=1e-9)
    h = 0.3
    val = integrate_adaptive(lambda t: t ** (h - 0.5), 0.0, 0.5, spec).real
    assert val == pytest.approx(0.5 ** 0.8 / 0.8, rel=1e-9)


def test_quadrature_complex_and_reversed():
    spec = QuadratureSpec(1e-12, 1e-12, 2000)
    val = integrate_adaptive(lambda x: complex(math.cos(x), math.sin(x)), 0.0, 1.0, spec)
    assert val.real == pytest.approx(math.sin(1.0), rel=1e-12)
    assert val.imag == pytest.approx(1.0 - math.cos(1.0), rel=1e-12)
    rev = integrate_adaptive(lambda x: complex(math.cos(x), math.sin(x)), 1.0, 0.0, spec)
    assert rev == pytest.approx(-val, rel=1e-12)


@given(
    st.floats(min_value=-2.0, max_value=2.0),
    st.floats(min_value=-2.0, max_value=2.0),
)
@settings(max_examples=50, deadline=None)
def test_quadrature_linearity(a, b):
    spec = QuadratureSpec(1e-11, 1e-11, 2000)
    f = lambda x: math.sin(3.0 * x) + 0.5j * x
    g = lambda x: math.exp(-x * x)
    lhs = integrate_adaptive(lambda x: a * f(x) + b * g(x), 0.0, 1.5, spec)
    rhs = a * integrate_adaptive(f, 0.0, 1.5, spec) + b * integrate_adaptive(g, 0.0, 1.5, spec)
    assert abs(lhs - rhs) < 1e-9 * (1.0 + abs(a) + abs(b))


def test_quadrature_budget_failure_reports_estimate():
    spec = QuadratureSpec(1e-14, 1e-14, 4)
    with pytest.raises(QuadratureError) as exc:
        integrate_adaptive(lambda x: x ** -0.9, 0.0, 1.0, spec)
    assert exc.value.error_bound > 0.0
    assert abs(exc.value.estimate) > 0.0


# ----------------------------------------------------------------------- ode

def test_ode_scalar_growth():
    y = integrate_ode(lambda t, y: y, 0.0, 1.0, [1.0 + 0j], OdeSpec(1e-12, 1e-14, 1.0))
    assert y[0].real == pytest.approx(math.e, rel=1e-10)


def test_ode_decay_and_backward():
    kappa = 2.0
    y = integrate_ode(lambda t, y: -2.0 * kappa * y, 0.0, 0.5, [1.0 + 0j])
    assert y[0].real == pytest.approx(math.exp(-2.0), rel=1e-9)
    # backward integration recovers the initial state
    y0 = integrate_ode(lambda t, y: -2.0 * kappa * y, 0.5, 0.0, y)
    assert y0[0].real == pytest.approx(1.0, rel=1e-9)


def test_ode_coupled_linear_system():
    # y1' = y2, y2' = -4 y1, y1(0)=1, y2(0)=0  ->  y1 = cos 2t, y2 = -2 sin 2t
    def rhs(t, y):
        return np.array([y[1], -4.0 * y[0]], dtype=complex)

    y = integrate_ode(rhs, 0.0, 0.7, [1.0 + 0j, 0.0 + 0j], OdeSpec(1e-12, 1e-14, 0.5))
    assert y[0].real == pytest.approx(math.cos(1.4), abs=1e-10)
    assert y[1].real == pytest.approx(-2.0 * math.sin(1.4), abs=1e-10)


def test_ode_complex_coefficients():
    lam = 0.7 - 1.3j
    y = integrate_ode(lambda t, y: lam * y, 0.0, 1.0, [1.0 + 0j])
    ref = np.exp(lam)
    assert abs(y[0] - ref) < 1e-9


# ------------------------------------------------------------------- quartic

def test_quartic_trivial():
    assert solve_quartic(1.0, 0.0, 0.0, 0.0, -1.0) == pytest.approx([-1.0, 1.0], abs=1e-12)
    # (x-2)^4, multiplicity collapses to one root
    roots = solve_quartic(1.0, -8.0, 24.0, -32.0, 16.0)
    assert len(roots) == 1
    assert roots[0] == pytest.approx(2.0, abs=1e-4)


def test_quartic_degenerate_orders():
    # cubic: (x-1)(x+2)(x-3)
    roots = solve_quartic(0.0, 1.0, -2.0, -5.0, 6.0)
    assert roots == pytest.approx([-2.0, 1.0, 3.0], abs=1e-9)
    # quadratic
    roots = solve_quartic(0.0, 0.0, 1.0, -3.0, 2.0)
    assert roots == pytest.approx([1.0, 2.0], abs=1e-10)
    # no real roots
    assert solve_quartic(1.0, 0.0, 0.0, 0.0, 1.0) == []


@given(st.lists(st.floats(min_value=-3.0, max_value=3.0), min_size=4, max_size=4))
@settings(max_examples=250, deadline=None)
def test_quartic_vs_companion_eigenvalues(cs):
    # round the draw so near-zero coefficients cannot manufacture roots of
    # modulus ~1e-75 whose real/complex classification is ill-posed (an
    # absolute imag filter on np.roots miscounts those)
    c3, c2, c1, c0 = (round(c, 3) for c in cs)
    coeffs = [1.0, c3, c2, c1, c0]
    got = solve_quartic(*coeffs)
    scale = max(abs(c) for c in coeffs)

    # soundness: everything returned really is a root
    for g in got:
        res = ((((coeffs[0] * g + coeffs[1]) * g + coeffs[2]) * g + coeffs[3]) * g + coeffs[4])
        assert abs(res) <= 1e-7 * scale * max(1.0, abs(g)) ** 4

    # completeness: every companion root that is unambiguously real must be
    # recovered; roots with borderline imaginary parts (multiple roots have
    # O(sqrt(eps)) imag noise in np.roots) prove nothing either way
    for r in np.roots(coeffs):
        if abs(r.imag) <= 1e-12 * (1.0 + abs(r.real)):
            assert got, f"missed real root near {r.real}"
            assert min(abs(g - r.real) for g in got) <= 1e-5 * (1.0 + abs(r.real))


def test_norm_cdf():
    assert norm_cdf(0.0) == pytest.approx(0.5, abs=1e-15)
    assert norm_cdf(1.959963984540054) == pytest.approx(0.975, abs=1e-12)
