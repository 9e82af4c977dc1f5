import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvedqgt.core import (
    Domain,
    IntegrandNaNError,
    QuadratureConvergenceError,
)
from curvedqgt.quadrature import QuadratureConfig, integrate, integrate_2d_product


CFG = QuadratureConfig()


def test_gaussian_full_line():
    val, err = integrate(lambda x: np.exp(-x * x), Domain.full_line(), CFG)
    assert abs(val - math.sqrt(math.pi)) < 1e-10
    assert err <= max(CFG.abs_tol, CFG.rel_tol * abs(val)) * 10


def test_anharmonic_norm(anharmonic):
    """Curved norm of the quartic ground state is 1."""
    lam = np.array([1.0, 1.0])

    def f(x):
        w = anharmonic.metric.sqrt_det(lam, x)
        psi = anharmonic.psi.eval(lam, (0,), x)
        return w * np.abs(psi) ** 2

    val, _ = integrate(f, anharmonic.domain_for(lam), CFG)
    assert abs(val - 1.0) < 1e-8


def test_coupled_norm_2d(coupled):
    lam = np.array([1.0, 1.0, 1.0, 1.0])
    domain = coupled.domain_for(lam)

    def f(x, y):
        w = coupled.metric.sqrt_det(lam, x, y)
        psi = coupled.psi.eval(lam, (0, 0), x, y)
        return w * np.abs(psi) ** 2

    val, _ = integrate_2d_product(f, domain.axes[0], domain.axes[1], CFG)
    assert abs(val - 1.0) < 1e-6


def test_2d_separable_gaussian():
    val, _ = integrate_2d_product(
        lambda x, y: np.exp(-x * x - y * y),
        Domain.full_line(), Domain.full_line(), CFG,
    )
    assert abs(val - math.pi) < 1e-9


def test_2d_zero_integrand():
    val, err = integrate_2d_product(
        lambda x, y: np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y))),
        Domain.full_line(), Domain.full_line(), CFG,
    )
    assert val == 0
    assert err <= CFG.abs_tol


def test_finite_interval_gauss_kronrod():
    val, err = integrate(np.sin, Domain.interval(0.0, math.pi), CFG)
    assert abs(val - 2.0) < 1e-10
    assert err < 1e-8


@settings(max_examples=25, deadline=None, derandomize=True)
@given(
    coeffs_f=st.lists(st.floats(-3, 3), min_size=1, max_size=5),
    coeffs_g=st.lists(st.floats(-3, 3), min_size=1, max_size=5),
    a=st.floats(-2, 2),
    b=st.floats(-2, 2),
)
def test_linearity(coeffs_f, coeffs_g, a, b):
    """integrate(a f + b g) == a integrate(f) + b integrate(g)."""
    def f(x):
        return np.polyval(coeffs_f, x) * np.exp(-x * x)

    def g(x):
        return np.polyval(coeffs_g, x) * np.exp(-x * x)

    dom = Domain.full_line()
    vf, ef = integrate(f, dom, CFG)
    vg, eg = integrate(g, dom, CFG)
    vc, ec = integrate(lambda x: a * f(x) + b * g(x), dom, CFG)
    budget = 10.0 * (abs(a) * ef + abs(b) * eg + ec) + 1e-12
    assert abs(vc - (a * vf + b * vg)) <= budget


def test_even_symmetry_full_vs_half():
    """2 sqrt(lam)|x| measure: doubling the half line matches the full line."""
    f = lambda x: 2.0 * np.abs(x) * np.exp(-x ** 4)
    cfg = QuadratureConfig(rel_tol=1e-6, abs_tol=1e-9, max_levels=12)
    vf, ef = integrate(f, Domain.full_line(), cfg)
    vh, eh = integrate(f, Domain.half_line(), cfg)
    assert abs(vf - 2.0 * vh) <= 10.0 * (ef + 2.0 * eh)


def test_even_fold_flag_matches_half_line():
    f = lambda x: np.abs(x) * np.exp(-x * x)
    folded, _ = integrate(f, Domain.full_line(even_fold=True), CFG)
    half, _ = integrate(f, Domain.half_line(), CFG)
    assert abs(folded - 2.0 * half) < 1e-12


def test_nonconvergence_carries_best_value():
    cfg = QuadratureConfig(rel_tol=1e-14, abs_tol=1e-16, max_levels=3)
    with pytest.raises(QuadratureConvergenceError) as err:
        integrate(lambda x: np.exp(-x * x) * np.cos(7 * x), Domain.full_line(), cfg)
    exact = math.sqrt(math.pi) * math.exp(-49.0 / 4.0)
    assert abs(err.value.best_value - exact) < 1e-2
    assert err.value.err_estimate > 0


def test_nan_integrand_reports_location():
    def f(x):
        out = np.exp(-x * x)
        return np.where(x > 3.0, np.nan, out)

    with pytest.raises(IntegrandNaNError) as err:
        integrate(f, Domain.full_line(), CFG)
    assert err.value.location > 3.0


def test_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        QuadratureConfig(max_subdivisions=0)


def test_gk_subdivision_limit():
    cfg = QuadratureConfig(rel_tol=1e-13, abs_tol=1e-15, max_subdivisions=4)
    with pytest.raises(QuadratureConvergenceError):
        integrate(lambda x: np.cos(40.0 * x * x), Domain.interval(0.0, 6.0), cfg)
