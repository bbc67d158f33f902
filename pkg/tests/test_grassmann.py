"""Unit tests for the Grassmann oracle: algebra, Berezin, measures."""

import math

import numpy as np
import pytest

import gnflow.grassmann as gr
import gnflow.propagator as pr


def single_mode(n_flavors, eps=0.2, tau=1.0, sources=()):
    return gr.ModeSet(
        tau=tau, eps=eps, n_flavors=n_flavors,
        mode_filter=lambda n: n == (0, 0), sources=sources,
    )


def three_modes(n_flavors=1, tau=0.5, eps=0.9):
    keep = {(0, 0), (1, 0), (-1, 0)}
    return gr.ModeSet(tau=tau, eps=eps, n_flavors=n_flavors,
                      mode_filter=lambda n: n in keep)


# ---------------------------------------------------------------------------
# algebra
# ---------------------------------------------------------------------------


def test_wedge_nilpotency_unit_anticommutation():
    ms = single_mode(1)
    g1 = ms.generator((0, 0), gr.SpinIndex(-1, 1, 1))
    g2 = ms.generator((0, 0), gr.SpinIndex(+1, 1, 2))
    assert not gr.wedge(g1, g1).terms
    one = gr.Multivector.scalar(1.0, ms)
    assert gr.wedge(one, g1).terms == g1.terms
    lhs = gr.wedge(g1, g2)
    rhs = gr.wedge(g2, g1)
    assert lhs.terms.keys() == rhs.terms.keys()
    for m in lhs.terms:
        assert lhs.terms[m] == -rhs.terms[m]


def test_anticommutation_exhaustive_small_universe():
    ms = single_mode(1)
    gens = [ms.generator(g.mode, g.spin) for g in ms.generators]
    for a in gens:
        for b in gens:
            s = a * b + b * a
            assert not s.terms


def test_universe_mismatch_raises():
    a = single_mode(1)
    b = single_mode(1)
    with pytest.raises(ValueError):
        _ = a.generator((0, 0), gr.SpinIndex(-1, 1, 1)) * b.generator(
            (0, 0), gr.SpinIndex(-1, 1, 1)
        )


def test_generator_cap_enforced():
    with pytest.raises(ValueError):
        gr.ModeSet(tau=0.5, eps=0.05, n_flavors=3)


def test_exp_odd_raises():
    ms = single_mode(1)
    with pytest.raises(ValueError):
        ms.generator((0, 0), gr.SpinIndex(-1, 1, 1)).exp()


# ---------------------------------------------------------------------------
# Berezin integral
# ---------------------------------------------------------------------------


def test_berezin_pairing_monomial_is_one():
    ms = single_mode(1)
    mv = gr.Multivector.scalar(1.0, ms)
    for spinor in (1, 2):
        mv = mv * ms.generator((0, 0), gr.SpinIndex(-1, 1, spinor))
        mv = mv * ms.generator((0, 0), gr.SpinIndex(+1, 1, spinor))
    assert gr.berezin_integrate(mv) == 1.0


def test_berezin_lower_degree_vanishes():
    ms = single_mode(1)
    g = ms.generator((0, 0), gr.SpinIndex(-1, 1, 1))
    assert gr.berezin_integrate(g) == 0.0
    assert gr.berezin_integrate(gr.Multivector.scalar(3.0, ms)) == 0.0


def test_berezin_swap_sign_bruteforce():
    # reordering the top monomial multiplies the integral by the permutation
    # sign; verified against an explicit inversion count
    import itertools
    ms = single_mode(1)
    gens = [(g.mode, g.spin) for g in ms.generators]
    base = list(range(4))
    for perm in itertools.permutations(base):
        mv = gr.Multivector.scalar(1.0, ms)
        for i in perm:
            mv = mv * ms.generator(*gens[i])
        inv = sum(
            1 for a in range(4) for b in range(a + 1, 4) if perm[a] > perm[b]
        )
        expected = (-1 if inv % 2 else 1) * ms.pairing_sign
        assert gr.berezin_integrate(mv) == expected


# ---------------------------------------------------------------------------
# Gaussian measure
# ---------------------------------------------------------------------------


def test_partition_single_mode():
    assert gr.gaussian_partition(single_mode(2)) == pytest.approx(1.0)
    assert gr.gaussian_partition(single_mode(1)) == pytest.approx(1.0)


def test_partition_matches_closed_form_multimode():
    ms = three_modes()
    got = gr.gaussian_partition(ms)
    assert got.imag == pytest.approx(0.0, abs=1e-12)
    assert got.real == pytest.approx(gr.partition_closed_form(ms), rel=1e-12)


def test_generator_moments_match_covariance():
    # E[b_p^{s2} abar_q^{s1}] = tau^{-2} delta_{q,-p} FG^{+,s2;-,s1}(p)
    ms = three_modes()
    ema = (-gr.free_action(ms).multivector()).exp()
    for n in ms.modes:
        for q in ms.modes:
            for s1 in (1, 2):
                for s2 in (1, 2):
                    b = ms.generator(n, gr.SpinIndex(+1, 1, s2))
                    a = ms.generator(q, gr.SpinIndex(-1, 1, s1))
                    val = gr.gaussian_expectation(ms, b * a, ema)
                    expect = 0.0
                    if q == tuple(-c for c in n):
                        expect = pr.fourier_covariance(
                            ms.momentum(n), (+1, 1, s2), (-1, 1, s1)
                        ) / ms.tau ** 2
                    assert abs(val - expect) < 1e-12


def test_wick_equals_berezin_moments():
    rng = np.random.default_rng(3)
    ms = three_modes(tau=0.5, eps=0.2)
    ema = (-gr.free_action(ms).multivector()).exp()
    for m in (2, 4):
        for _ in range(3):
            ins = []
            for i in range(m):
                sigma = gr.SpinIndex(
                    -1 if i % 2 == 0 else +1, 1, int(rng.integers(1, 3))
                )
                ins.append((rng.uniform(0, 2.0, size=2), sigma))
            w = gr.free_moment(ms, ins)
            b = gr.berezin_free_moment(ms, ins, exp_minus_a=ema)
            assert abs(w - b) < 1e-12


def test_odd_moment_vanishes():
    ms = single_mode(1)
    ins = [(np.zeros(2), gr.SpinIndex(-1, 1, 1))]
    assert gr.free_moment(ms, ins) == 0.0
    assert abs(gr.berezin_free_moment(ms, ins)) == 0.0


def test_translation_invariance_of_moments():
    ms = three_modes(tau=0.5, eps=0.2)
    s1, s2 = gr.SpinIndex(-1, 1, 1), gr.SpinIndex(+1, 1, 2)
    x = np.array([0.3, 0.7])
    y = np.array([1.1, 0.2])
    h = np.array([0.45, -0.8])
    v1 = gr.berezin_free_moment(ms, [(x, s1), (y, s2)])
    v2 = gr.berezin_free_moment(ms, [(x + h, s1), (y + h, s2)])
    assert abs(v1 - v2) < 1e-12


def test_berezin_translation_invariance_with_sources():
    # int F(psi + phi) dpsi = int F(psi) dpsi for a source-valued shift phi
    ms = single_mode(1, sources=("eta1", "eta2"))
    rng = np.random.default_rng(5)
    gens = [ms.generator(g.mode, g.spin) for g in ms.generators[: ms.n_field]]
    eta = [ms.source("eta1"), ms.source("eta2")]
    shifted = [
        g + eta[i % 2] * complex(*rng.normal(size=2)) for i, g in enumerate(gens)
    ]

    def functional(fields):
        f = gr.Multivector.scalar(1.0, ms)
        # random even polynomial: sum of quadratic and quartic words
        f = f + fields[0] * fields[1] * 1.3 + fields[2] * fields[3] * (0.2 + 1j)
        f = f + fields[0] * fields[1] * fields[2] * fields[3] * 0.7
        return f

    lhs = gr.berezin_integrate(functional(shifted))
    rhs = gr.berezin_integrate(functional(gens))
    diff = lhs - rhs
    assert all(abs(c) < 1e-12 for c in diff.terms.values())


# ---------------------------------------------------------------------------
# interacting measure
# ---------------------------------------------------------------------------


def test_interacting_reduces_to_free_at_zero_coupling():
    ms = single_mode(2)
    ins = [(np.zeros(2), gr.SpinIndex(-1, 1, 1)), (np.zeros(2), gr.SpinIndex(+1, 1, 1))]
    assert gr.interacting_moment(ms, ins, 0.0, 0.0) == pytest.approx(
        gr.berezin_free_moment(ms, ins)
    )


def test_interacting_mass_shift_closed_form():
    # single mode, r-term only: every pair mass is 1 - r, so the two-point
    # moment is -1/(1-r)
    ms = single_mode(2)
    ins = [(np.zeros(2), gr.SpinIndex(-1, 1, 1)), (np.zeros(2), gr.SpinIndex(+1, 1, 1))]
    for r in (0.05, -0.3):
        got = gr.interacting_moment(ms, ins, 0.0, r)
        assert got == pytest.approx(-1.0 / (1.0 - r), rel=1e-12)


def test_interacting_first_order_perturbative():
    # d/d(g_inv) mu(F) at 0 = nu(F U4) - nu(F) nu(U4) via Wick; compare the
    # numeric derivative of the exact quotient with the covariance expansion
    ms = single_mode(2)
    ins = [(np.zeros(2), gr.SpinIndex(-1, 1, 1)), (np.zeros(2), gr.SpinIndex(+1, 1, 1))]
    u4 = gr.interaction_quartic(ms)
    f = gr._insertion_product(ms, ins)
    nu_f = gr.gaussian_expectation(ms, f)
    nu_u = gr.gaussian_expectation(ms, u4)
    nu_fu = gr.gaussian_expectation(ms, f * u4)
    connected = nu_fu - nu_f * nu_u
    h = 1e-6
    fd = (
        gr.interacting_moment(ms, ins, h, 0.0)
        - gr.interacting_moment(ms, ins, -h, 0.0)
    ) / (2 * h)
    assert abs(fd - connected) < 1e-6


def test_interacting_ordering_independent():
    # the measure quotient does not depend on the insertion order beyond the
    # antisymmetry sign
    ms = single_mode(2)
    a = (np.zeros(2), gr.SpinIndex(-1, 1, 1))
    b = (np.zeros(2), gr.SpinIndex(+1, 1, 1))
    m1 = gr.interacting_moment(ms, [a, b], 0.01, 0.0)
    m2 = gr.interacting_moment(ms, [b, a], 0.01, 0.0)
    assert m1 == pytest.approx(-m2, rel=1e-12)


def test_zero_partition_raises():
    ms = single_mode(2)
    ins = [(np.zeros(2), gr.SpinIndex(-1, 1, 1)), (np.zeros(2), gr.SpinIndex(+1, 1, 1))]
    with pytest.raises(gr.ZeroPartition):
        gr.interacting_moment(ms, ins, 0.0, 1.0)
