import numpy as np
import pytest
import scipy.sparse as sp
from numpy.polynomial import Polynomial
from scipy.special import comb

from nsgfb.exceptions import CommonRoot, Degenerate, NotPositiveDefinite
from nsgfb.filterbank import (AnalysisBank, bezout_polynomials, bezout_synthesis_general,
                              bezout_synthesis_spline, check_assumptions, lift,
                              polynomial_analysis, reconstruction_residual, spline_analysis,
                              spline_bezout_polynomials, subband_error_bound)
from nsgfb.graph import estimate_growth, from_edges
from nsgfb.spectral import GraphFilter, eigendecompose

SAMPLES = np.linspace(0.0, 2.0, 50)


def test_spline_single_edge():
    h = spline_analysis(from_edges([(0, 1)]), 1)
    assert np.allclose(h.h0.toarray(), [[0.5, 0.5], [0.5, 0.5]])
    assert np.allclose(h.h1.toarray(), [[0.5, -0.5], [-0.5, 0.5]])
    assert h.bandwidth == 1


def test_spline_order_two_is_square(rgg64):
    h1 = spline_analysis(rgg64, 1).h0.toarray()
    h2 = spline_analysis(rgg64, 2).h0.toarray()
    assert np.allclose(h2, h1 @ h1, atol=1e-14)


def test_spline_l2_norm_at_most_one(rgg64):
    s = eigendecompose(rgg64)
    for n in (1, 2, 3):
        h = spline_analysis(rgg64, n)
        for f in (h.h0, h.h1):
            assert np.linalg.norm(f.toarray(), 2) <= 1 + 1e-12
    assert s.eigenvalues.max() <= 2


def test_spline_bezout_order_one():
    q0, q1 = spline_bezout_polynomials(1)
    assert np.allclose(q0.coef, [1.0, 0.5])
    assert np.allclose(q1.coef, [0.0, 0.5])


def expand_binomial_identity(n):
    # ((1 - u) + u)^(2n-1) split into the two halves, independent of the library
    u = Polynomial([0.0, 0.5])
    w = Polynomial([1.0, -0.5])
    total = sum(comb(2 * n - 1, k, exact=True) * w ** (2 * n - 1 - k) * u ** k
                for k in range(2 * n))
    return total


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_spline_bezout_identity(n):
    p0, p1 = Polynomial([1.0, -0.5]) ** n, Polynomial([0.0, 0.5]) ** n
    q0, q1 = spline_bezout_polynomials(n)
    assert np.abs(p0(SAMPLES) * q0(SAMPLES) + p1(SAMPLES) * q1(SAMPLES) - 1).max() < 1e-10
    assert np.abs(expand_binomial_identity(n)(SAMPLES) - 1).max() < 1e-10
    assert q0(0.0) == pytest.approx(1.0)
    assert q1(0.0) == 0.0
    assert q0.degree() <= n and q1.degree() <= n


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_general_bezout_recovers_spline_pair(n):
    p0, p1 = Polynomial([1.0, -0.5]) ** n, Polynomial([0.0, 0.5]) ** n
    q0, q1 = bezout_polynomials(p0, p1)
    r0, r1 = spline_bezout_polynomials(n)
    assert np.allclose(q0(SAMPLES), r0(SAMPLES), atol=1e-9)
    assert np.allclose(q1(SAMPLES), r1(SAMPLES), atol=1e-9)


def test_general_bezout_errors():
    with pytest.raises(CommonRoot):
        bezout_polynomials([0.0, 1.0], [0.0, 1.0])
    with pytest.raises(Degenerate):
        bezout_polynomials([0.0], [1.0, 1.0])


def test_zero_residual_keeps_pair():
    a = bezout_polynomials([1.0, -0.5], [0.0, 0.5])
    b = bezout_polynomials([1.0, -0.5], [0.0, 0.5], residual=[0.0])
    assert np.allclose(a[0].coef, b[0].coef) and np.allclose(a[1].coef, b[1].coef)


def test_residual_moves_along_family():
    p0, p1 = Polynomial([1.0, -0.5]), Polynomial([0.0, 0.5])
    q0, q1 = bezout_polynomials(p0, p1, residual=[0.3, 0.1])
    assert np.abs(p0(SAMPLES) * q0(SAMPLES) + p1(SAMPLES) * q1(SAMPLES) - 1).max() < 1e-12


def test_bezout_bank_perfect_reconstruction(rgg64):
    for n in (1, 2, 3):
        h = spline_analysis(rgg64, n)
        s = bezout_synthesis_spline(rgg64, n)
        assert reconstruction_residual(h, s) < 1e-8
        assert s.bandwidth <= h.bandwidth


def test_general_bank_reconstruction(rgg64):
    p0, p1 = [1.0, -0.6, 0.1], [0.0, 0.4, 0.05]
    h = polynomial_analysis(rgg64, p0, p1)
    s = bezout_synthesis_general(p0, p1, rgg64)
    assert reconstruction_residual(h, s) < 1e-8


def test_lift_identity_when_q1_vanishes(rgg64):
    h = spline_analysis(rgg64, 2)
    s = bezout_synthesis_spline(rgg64, 2)
    lifted = lift(s, h)
    assert lifted.provenance == "lifted-bezout"
    assert np.array_equal(lifted.g0.toarray(), s.g0.toarray())
    sd = rgg64.sqrt_degrees()
    assert np.abs(lifted.g1 @ sd).max() < 1e-10
    assert reconstruction_residual(h, lifted) < 1e-8


def test_lift_fixes_nonzero_constant(rgg64):
    h = spline_analysis(rgg64, 2)
    p0, p1 = h.polynomials
    # a constant residual makes Q1(0) nonzero
    s = bezout_synthesis_general(p0, p1, rgg64, residual=[0.7])
    sd = rgg64.sqrt_degrees()
    assert np.abs(s.g1 @ sd).max() > 0.1
    lifted = lift(s, h)
    assert lifted.meta["lift"] == pytest.approx(-0.7)
    assert np.abs(lifted.g1 @ sd).max() < 1e-10
    assert reconstruction_residual(h, s) < 1e-8
    assert reconstruction_residual(h, lifted) < 1e-8


@pytest.mark.parametrize("n", [1, 2])
def test_spline_stability_bounds(rgg64, n):
    rep = check_assumptions(spline_analysis(rgg64, n))
    assert rep.c2 >= 2 ** (-n + 0.5) - 1e-9
    assert rep.d2 <= 1 + 1e-9
    assert rep.c2 <= rep.d2
    assert rep.kappa <= 2 ** (2 * n - 1) + 1e-9
    assert rep.passes_constant and rep.blocks_constant
    assert rep.theta == pytest.approx(np.log(rep.kappa / (rep.kappa - 1)))


def test_identity_pair_has_unit_kappa(rgg64):
    eye = sp.identity(64, format="csr") / np.sqrt(2)
    h = AnalysisBank(GraphFilter(rgg64, eye, 0), GraphFilter(rgg64, eye, 0))
    rep = check_assumptions(h)
    assert rep.kappa == 1.0 and rep.c2 == pytest.approx(1.0) and rep.d2 == pytest.approx(1.0)
    assert rep.theta == np.inf


def test_singular_bank_rejected(rgg64):
    h = polynomial_analysis(rgg64, [0.0, 1.0], [0.0, 0.0, 1.0])
    with pytest.raises(NotPositiveDefinite):
        check_assumptions(h)


def test_lanczos_route_agrees_with_spectrum(rgg256):
    h = spline_analysis(rgg256, 2)
    exact = check_assumptions(h)
    approx = check_assumptions(h, ceiling=100)
    assert approx.kappa_source == "lanczos"
    assert approx.kappa == pytest.approx(exact.kappa, rel=1e-5)


def test_stability_sandwich(rgg64, rng):
    h = spline_analysis(rgg64, 2)
    rep = check_assumptions(h)
    for _ in range(20):
        x = rng.standard_normal(64)
        z0, z1 = h.analyze(x)
        mid = np.sqrt(np.sum(z0 ** 2) + np.sum(z1 ** 2))
        nx = np.linalg.norm(x)
        assert rep.c2 * nx <= mid * (1 + 1e-12)
        assert mid <= rep.d2 * nx * (1 + 1e-12)


def test_lp_bounds_reported(rgg64):
    growth = estimate_growth(rgg64)
    rep = check_assumptions(spline_analysis(rgg64, 1), growth)
    assert 0 < rep.lp_lower <= rep.c2
    assert rep.lp_upper >= rep.d2


def test_subband_error_bound(rgg64, rng):
    h = spline_analysis(rgg64, 2)
    s = lift(bezout_synthesis_spline(rgg64, 2), h)
    growth = estimate_growth(rgg64)
    eps = 0.01
    bound = subband_error_bound(s, growth, eps)
    for _ in range(20):
        x = rng.standard_normal(64)
        z0, z1 = h.analyze(x)
        d0, d1 = rng.uniform(-eps, eps, (2, 64))
        err = np.abs(s.synthesize(z0 + d0, z1 + d1) - x).max()
        assert err <= bound
