import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from alloytype.densities import (
    RngStream,
    density_norms,
    graf_bounds,
    ks_critical_value,
    make_density,
    sample,
    singular_integral,
)
from alloytype.errors import ParameterError, UnsupportedNormError

DENSITIES = {
    "uniform": dict(kind="uniform", a=0.0, b=1.0),
    "uniform-wide": dict(kind="uniform", a=-2.0, b=8.0),
    "triangular": dict(kind="triangular", a=0.0, b=1.0),
    "triangular-skew": dict(kind="triangular", a=-1.0, b=2.0, peak=0.0),
    "smooth-bump": dict(kind="smooth-bump", a=0.0, b=2.0),
    "piecewise": dict(kind="piecewise-linear", knots=[0, 1, 2, 4], values=[0, 3, 1, 0]),
    "piecewise-jump": dict(kind="piecewise-linear", knots=[0, 1, 3], values=[1, 2, 0.5]),
}


def build(name):
    spec = dict(DENSITIES[name])
    return make_density(spec.pop("kind"), **spec)


def grid_oracle(rho, n=400_001):
    """Brute-force total variation and |rho'| integral on a fine grid."""
    a, b = rho.support
    pad = 0.01 * (b - a)
    x = np.linspace(a - pad, b + pad, n)
    y = rho.pdf(x)
    tv = np.abs(np.diff(y)).sum()
    return tv, y.max(), np.trapezoid(y, x)


def test_uniform_norms():
    rho = build("uniform")
    assert rho.sup_norm == 1.0
    assert rho.total_variation == 2.0
    assert not rho.has_derivative
    assert make_density("uniform", a=0, b=10).sup_norm == pytest.approx(0.1)
    with pytest.raises(UnsupportedNormError):
        rho.deriv_l1


def test_triangular_norms_by_oracle():
    rho = build("triangular")
    tv, sup, mass = grid_oracle(rho)
    # slopes are +-4 on halves of length 1/2
    assert tv == pytest.approx(4.0, rel=1e-6)
    assert rho.deriv_l1 == 4.0
    assert rho.total_variation == 4.0
    assert rho.sup_norm == 2.0 == pytest.approx(sup, rel=1e-6)


@pytest.mark.parametrize("name", list(DENSITIES))
def test_norms_match_grid_oracle(name):
    rho = build(name)
    tv, sup, mass = grid_oracle(rho)
    assert rho.total_variation == pytest.approx(tv, rel=1e-5)
    assert rho.sup_norm == pytest.approx(sup, rel=1e-5)
    assert mass == pytest.approx(1.0, abs=1e-6)
    assert abs(rho.mass - 1.0) <= 1e-12
    if rho.has_derivative:
        assert rho.deriv_l1 == pytest.approx(rho.total_variation, abs=1e-10)


def test_deriv_presence():
    assert build("piecewise").has_derivative
    assert not build("piecewise-jump").has_derivative
    assert "deriv_l1" not in density_norms(build("piecewise-jump"))
    assert density_norms(build("smooth-bump"))["deriv_l1"] == pytest.approx(2.0)


@pytest.mark.parametrize("kind, params", [
    ("uniform", dict(a=1.0, b=1.0)),
    ("triangular", dict(a=0, b=1, peak=1.0)),
    ("piecewise-linear", dict(knots=[0, 1], values=[0, 0])),
    ("piecewise-linear", dict(knots=[0, 1], values=[1, -1])),
    ("gaussian", dict()),
])
def test_invalid_parameters(kind, params):
    with pytest.raises(ParameterError):
        make_density(kind, **params)


@pytest.mark.parametrize("name", list(DENSITIES))
def test_cdf_is_integral_of_pdf(name):
    rho = build(name)
    a, b = rho.support
    for x in np.linspace(a, b, 7)[1:-1]:
        pts = [float(p) for p in rho.breakpoints if p < x] + [float(x)]
        val = float(mpmath.quad(lambda t: float(rho.pdf(float(t))), pts))
        assert float(rho.cdf(x)) == pytest.approx(val, abs=1e-10)


@pytest.mark.parametrize("name", list(DENSITIES))
def test_ppf_inverts_cdf(name):
    rho = build(name)
    p = np.linspace(0.0005, 0.9995, 301)
    np.testing.assert_allclose(rho.cdf(rho.ppf(p)), p, atol=1e-12)


@pytest.mark.parametrize("name", list(DENSITIES))
def test_sampling_ks(name):
    rho = build(name)
    n = 100_000
    x = rho.sample_many(RngStream(2024, 7).generator(), n)
    a, b = rho.support
    assert x.min() >= a and x.max() <= b
    ks = stats.kstest(x, rho.cdf).statistic
    assert ks < 0.01
    assert ks < ks_critical_value(n, 0.01)


def test_sample_determinism_and_support():
    rho = build("uniform")
    draws1 = [sample(rho, RngStream(5, i)) for i in range(10)]
    draws2 = [sample(rho, RngStream(5, i)) for i in range(10)]
    assert draws1 == draws2
    assert all(0 <= d <= 1 for d in draws1)
    g1 = RngStream(5, 3).generator().random(1000)
    g2 = RngStream(5, 4).generator().random(1000)
    assert not np.array_equal(g1, g2)
    assert abs(np.corrcoef(g1, g2)[0, 1]) < 0.15


def mp_singular(rho, delta, s):
    """Independent oracle: mpmath tanh-sinh quadrature split at breakpoints and Re delta."""
    a, b = rho.support
    pts = sorted({float(p) for p in rho.breakpoints} | ({delta.real} if a < delta.real < b else set()))
    mpmath.mp.dps = 30

    def f(t):
        return float(rho.pdf(float(t))) * abs(t - mpmath.mpc(delta)) ** (-s)

    return float(mpmath.quad(f, pts))


def test_singular_uniform_closed_form():
    rho = build("uniform")
    assert singular_integral(rho, 0.5, 0.5) == pytest.approx(2 * math.sqrt(2), rel=1e-10)
    for d, s in [(0.1, 0.3), (0.9, 0.8), (0.0, 0.5), (1.0, 0.2), (-0.5, 0.5)]:
        exact = (abs(d) ** (1 - s) * np.sign(d) + abs(1 - d) ** (1 - s) * np.sign(1 - d)) / (1 - s)
        assert singular_integral(rho, d, s) == pytest.approx(exact, rel=1e-8)


@pytest.mark.parametrize("x0", [0.5, 0.0, 1e-7, 0.999])
@pytest.mark.parametrize("eta", [1e-300, 1e-14, 1e-12, 1e-6, 1e-2, 1.0])
@pytest.mark.parametrize("s", [0.2, 0.8])
def test_singular_near_real_axis_uniform(x0, eta, s):
    # int_0^T (t^2 + eta^2)^(-s/2) dt = T eta^-s 2F1(1/2, s/2; 3/2; -T^2/eta^2)
    mpmath.mp.dps = 40

    def F(T):
        T = mpmath.mpf(T)
        return T * mpmath.mpf(eta) ** (-s) * mpmath.hyp2f1(0.5, s / 2, 1.5, -(T / eta) ** 2)

    exact = float(F(1 - mpmath.mpf(x0)) + F(x0))
    value = singular_integral(build("uniform"), complex(x0, eta), s)
    assert value == pytest.approx(exact, rel=1e-9)


def test_singular_bounds():
    rho = build("uniform")
    value = singular_integral(rho, 0.5, 0.5)
    first, second = graf_bounds(rho, 0.5, 1.0)
    assert first == pytest.approx(5.0)
    assert second is None
    assert value <= first
    for name in DENSITIES:
        assert singular_integral(build(name), 0.3 + 1j, 0.5) <= 1.0


@pytest.mark.parametrize("name", ["triangular", "triangular-skew", "smooth-bump", "piecewise"])
@pytest.mark.parametrize("delta", [0.5, 0.0, 1.0 + 1e-3j, -0.3 + 0.2j, 1.7])
def test_singular_against_mpmath(name, delta):
    rho = build(name)
    s = 0.6
    assert singular_integral(rho, delta, s) == pytest.approx(mp_singular(rho, complex(delta), s),
                                                             rel=1e-8)


@given(st.sampled_from(["triangular", "smooth-bump", "piecewise"]),
       st.floats(-1, 3), st.floats(0, 2), st.sampled_from([0.2, 0.5, 0.8]),
       st.floats(-3, 3))
@settings(max_examples=60, deadline=None)
def test_graf_property(name, re, im, s, log_lam):
    rho = build(name)
    value = singular_integral(rho, complex(re, im), s)
    first, second = graf_bounds(rho, s, 10.0 ** log_lam)
    assert value <= first * (1 + 1e-9)
    assert value <= second * (1 + 1e-9)
