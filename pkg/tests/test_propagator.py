"""Unit tests for the propagator scale decomposition."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

import gnflow.propagator as pr


# ---------------------------------------------------------------------------
# transition function
# ---------------------------------------------------------------------------


def test_bump_plateaus_exact():
    for x in (0.0, 0.1, 0.5):
        assert pr.bump(x) == 1.0
    for x in (1.0, 1.5, 100.0):
        assert pr.bump(x) == 0.0


def test_bump_monotone_and_bounded():
    xs = np.linspace(0.0, 1.2, 601)
    vals = np.array([pr.bump(x) for x in xs])
    assert np.all(np.diff(vals) <= 1e-15)
    assert np.all(vals >= 0.0) and np.all(vals <= 1.0)


def test_bump_matches_direct_quadrature():
    # independent oracle: theta(x) = 1 - int_{1/2}^x m / int_{1/2}^1 m
    z, _ = quad(pr._glue, 0.5, 1.0, limit=200)
    for x in (0.55, 0.6, 0.7, 0.8, 0.9, 0.97):
        tail, _ = quad(pr._glue, 0.5, x, limit=200)
        assert abs(pr.bump(x) - (1.0 - tail / z)) < 1e-10


def test_bump_derivative_is_consistent():
    h = 1e-6
    for x in (0.6, 0.75, 0.9):
        fd = (pr.bump(x + h) - pr.bump(x - h)) / (2 * h)
        assert abs(pr.bump_derivative(x) - fd) < 1e-6
    # derivative vanishes on the plateaus
    assert pr.bump_derivative(0.3) == 0.0
    assert pr.bump_derivative(1.1) == 0.0


# ---------------------------------------------------------------------------
# gamma matrices and the free covariance
# ---------------------------------------------------------------------------


def test_gamma_algebra():
    g1, g2 = pr.GAMMA1, pr.GAMMA2
    eye = np.eye(2)
    assert np.allclose(g1 @ g1, eye)
    assert np.allclose(g2 @ g2, eye)
    assert np.allclose(g1 @ g2 + g2 @ g1, 0.0)
    assert np.allclose(g1.T, g1)
    assert np.allclose(g2.T, -g2)


def test_xi_inverts_the_quadratic_form():
    # (1 + i gamma.p)(1 - i gamma.p) = (1 + |p|^2) on the spinor space
    rng = np.random.default_rng(7)
    for _ in range(10):
        p = rng.normal(size=2)
        m = np.eye(2, dtype=complex) + 1.0j * (p[0] * pr.GAMMA1 + p[1] * pr.GAMMA2)
        prod = m @ pr.xi_matrix(p)
        assert np.allclose(prod, (1.0 + p @ p) * np.eye(2), atol=1e-12)


def test_covariance_reflection_relation():
    rng = np.random.default_rng(8)
    for _ in range(10):
        p = rng.normal(size=2)
        mp = pr.covariance_block(p, +1, -1)
        pm = pr.covariance_block(p, -1, +1)
        assert np.allclose(pm, -pr.covariance_block(-p, +1, -1).T, atol=1e-14)
        assert np.allclose(mp, pr.xi_matrix(p) / (1.0 + p @ p), atol=1e-14)
    assert np.allclose(pr.covariance_block(p, +1, +1), 0.0)


# ---------------------------------------------------------------------------
# scale decomposition identities (pointwise in Fourier space, tol 1e-12)
# ---------------------------------------------------------------------------

EPS = 0.05
PVALS = [np.array([0.0, 0.0]), np.array([0.3, -0.4]), np.array([2.0, 1.0]),
         np.array([-5.0, 3.0])]


def test_gdot_vanishes_below_eps():
    for p in PVALS:
        for t in (EPS / 2, EPS):
            assert np.abs(pr.scale_block("Gdot", EPS, t, p)).max() < 1e-12


def test_gpm_vanish_below_half_eps():
    for p in PVALS:
        for t in (EPS / 4, EPS / 2):
            assert np.abs(pr.scale_block("Gplus", EPS, t, p)).max() < 1e-12
            assert np.abs(pr.scale_block("Gminus", EPS, t, p)).max() < 1e-12


def test_gdot_loses_eps_dependence_for_large_t():
    for p in PVALS:
        for t in (4 * EPS, 0.5, 1.0):
            with_eps = pr.scale_block("Gdot", EPS, t, p)
            without = pr.scale_block("Gdot", 0.0, t, p)
            assert np.abs(with_eps - without).max() < 1e-12


def test_gdot_zero_mode_vanishes_below_half():
    p0 = np.array([0.0, 0.0])
    for t in (0.1, 0.25, 0.49):
        assert np.abs(pr.scale_block("Gdot", EPS, t, p0)).max() < 1e-12


def test_gdot_factorizes_through_gpm():
    # Gdot^{+,-} = -(Gplus entry) * (Gminus entry) on the support of the
    # derivative factor, thanks to the exact plateaus of the transition
    rng = np.random.default_rng(9)
    for _ in range(20):
        t = rng.uniform(2 * EPS, 1.0)
        p = rng.normal(scale=1.0 / t, size=2)
        gdot = pr.scale_block("Gdot", EPS, t, p)
        gp = pr.scale_block("Gplus", EPS, t, p)
        gm = pr.scale_block("Gminus", EPS, t, p)
        assert np.abs(gdot - (-(gp @ gm))).max() < 1e-12


def test_telescoping_recovers_g_eps():
    for p in PVALS:
        w = pr.omega(p)
        lhs = pr.bump(2 * EPS * w)
        val, _ = quad(
            lambda t: w * pr.bump_derivative(t * w) * pr.bump(2 * EPS * w),
            EPS, 1.0, limit=200,
        )
        assert abs(lhs + val) < 1e-10
        assert np.abs(pr.scale_block("G_eps_t", EPS, 1.0, p)).max() < 1e-12


# ---------------------------------------------------------------------------
# position space
# ---------------------------------------------------------------------------


def test_radial_route_matches_grid_quadrature():
    rng = np.random.default_rng(0)
    xs = rng.normal(scale=1.5, size=(4, 2))
    cases = [("G_eps", 0.25, 0.0), ("Gdot", 0.05, 0.5),
             ("Gplus", 0.05, 0.25), ("Gminus", 0.05, 0.25)]
    for kind, eps, t in cases:
        rad = pr.position_eval_radial(kind, eps, t, xs)
        for i, x in enumerate(xs):
            direct = pr.position_eval(kind, eps, t, x, n_nodes=256, tol=1e-7)
            assert np.abs(rad[i] - direct).max() < 1e-10


def test_periodize_matches_mode_sum():
    tau, eps = 1.0, 0.05
    rng = np.random.default_rng(1)

    def kern(xv):
        return pr.position_eval_radial("G_eps", eps, 0.0, xv[None, :])[0]

    pmax = math.sqrt((1.0 / (2 * eps)) ** 2 - 1.0)
    nmax = int(math.ceil(pmax / (2 * math.pi * tau))) + 1
    ns = np.arange(-nmax, nmax + 1)
    nx, ny = np.meshgrid(ns, ns, indexing="ij")
    ps = 2 * math.pi * tau * np.stack([nx.ravel(), ny.ravel()], axis=1)
    for _ in range(3):
        x = rng.uniform(-0.5, 0.5, size=2)
        per = pr.periodize(kern, tau, x, nmax=40, tol=1e-8)
        mode = np.zeros((2, 2), dtype=complex)
        for p in ps:
            th = pr.bump(2 * eps * pr.omega(p))
            if th == 0.0:
                continue
            mode += tau ** 2 * th * pr.covariance_block(p, +1, -1) * np.exp(1j * p @ x)
        assert np.abs(per - mode).max() < 1e-8


def test_periodize_tail_certificate_raises():
    eps = 0.25  # weak smoothing: slow spatial decay, 8 shells cannot certify

    def kern(xv):
        return pr.position_eval_radial("G_eps", eps, 0.0, xv[None, :])[0]

    with pytest.raises(pr.TailNotConverged):
        pr.periodize(kern, 0.5, np.zeros(2), nmax=8, tol=1e-9)


def test_decay_constant_stable_across_scales():
    # C(t) in  exp(delta t^{-zf}|x|^{zf}) |d^a G^+(x)| <= C t^{-|a|-2}
    # should be bounded uniformly: require max/min < 2 over a dyadic range
    for a in ((0, 0), (1, 0)):
        delta, _ = pr.decay_fit(a, 0.01, 0.25)
        consts = []
        for t in (0.125, 0.25, 0.5):
            _, c = pr.decay_fit(a, 0.01, t, delta=delta)
            consts.append(c)
        consts = np.array(consts)
        assert consts.max() / consts.min() < 2.0
