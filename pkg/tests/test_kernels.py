"""Unit tests for kernels: weights, norms, symmetries, serialization."""

import math

import numpy as np
import pytest

import gnflow.kernels as kn


def random_kernel(rng, m=2, n_flavors=2, n_seeds=5, extent=3):
    k = kn.DiscreteKernel(m, n_flavors=n_flavors)
    spins = kn.all_spins(n_flavors)
    for _ in range(n_seeds):
        a = tuple(kn.MULTI_INDICES[rng.integers(9)] for _ in range(m))
        s = tuple(spins[rng.integers(len(spins))] for _ in range(m))
        rel = tuple(
            (int(rng.integers(-extent, extent + 1)),
             int(rng.integers(-extent, extent + 1)))
            for _ in range(m - 1)
        )
        k.add(a, s, rel, complex(*rng.normal(size=2)))
    return k


# ---------------------------------------------------------------------------
# diameter and weights
# ---------------------------------------------------------------------------


def test_diameter_basics():
    assert kn.diameter([(0.0, 0.0)]) == 0.0
    assert kn.diameter([(0.0, 0.0), (3.0, 4.0)]) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        kn.diameter([])


def test_diameter_matches_bruteforce():
    rng = np.random.default_rng(0)
    for _ in range(20):
        pts = rng.normal(size=(3, 2))
        brute = max(
            np.linalg.norm(pts[i] - pts[j])
            for i in range(3) for j in range(3)
        )
        assert kn.diameter(pts) == pytest.approx(brute)


def test_weight_trivia():
    spec = kn.WeightSpec(2, 0.5, 0.0)
    assert kn.weight(spec, [(0, 0), (0, 0)]) == pytest.approx(1.0)
    pts = [(0.0, 0.0), (1.0, 2.0)]
    d = kn.diameter(pts)
    w0 = kn.weight(kn.WeightSpec(2, 0.5, 0.0), pts)
    w12 = kn.weight(kn.WeightSpec(2, 0.5, 0.5), pts)
    assert w0 / w12 == pytest.approx((1.0 + d) ** 0.5)


def test_weight_log_consistency():
    spec = kn.WeightSpec(3, 0.3, 0.5)
    pts = [(1.0, 0.5), (-2.0, 1.0), (0.0, 3.0)]
    assert math.log(kn.weight(spec, pts)) == pytest.approx(
        kn.log_weight(spec, pts)
    )


def test_weight_suite_zero_violations_smoke():
    rep = kn.weight_suite(
        n_draws=500, seed=0, frozen_c=kn.FROZEN_WEIGHT_F_CONSTANT
    )
    assert all(rep[k] == 0 for k in "abcdef")


def test_frozen_constant_covers_fit():
    c = kn.fit_weight_constant(n_draws=500, seed=1)
    assert c < kn.FROZEN_WEIGHT_F_CONSTANT


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def test_m_norm_dirac_diagonal_is_one():
    # the lattice surrogate of the coincident-point Dirac kernel: value
    # h^{-2(m-1)} at rel = 0 so the L1 sum equals 1
    for m in (2, 4):
        k = kn.DiscreteKernel(m, h=0.125)
        a = tuple(((0, 0),) * m)
        sigma = tuple(((-1, 1, 1),) * m)
        k.add(a, sigma, ((0, 0),) * (m - 1), k.h ** (-2 * (m - 1)))
        assert k.entry_norm(a, sigma) == pytest.approx(1.0)
        spec = kn.WeightSpec(m, 0.5, 0.0)
        assert k.entry_norm(a, sigma, spec) == pytest.approx(1.0)


def test_m_norm_homogeneity_and_zero():
    rng = np.random.default_rng(1)
    k = random_kernel(rng)
    assert kn.DiscreteKernel(2).m_norm() == 0.0
    assert k.scale(-2.5).m_norm() == pytest.approx(2.5 * k.m_norm())


def test_m_norm_convex_translates_triangle():
    rng = np.random.default_rng(2)
    k = random_kernel(rng)
    shifted = kn.DiscreteKernel(2, k.h, n_flavors=k.n_flavors)
    weights = [0.3, 0.7]
    deltas = [(2, -1), (-3, 2)]
    for c, d in zip(weights, deltas):
        for (a, s), relmap in k.entries.items():
            for rel, v in relmap.items():
                moved = ((rel[0][0] + d[0], rel[0][1] + d[1]),)
                shifted.add(a, s, moved, c * v)
    assert shifted.m_norm() <= k.m_norm() + 1e-12


# ---------------------------------------------------------------------------
# antisymmetrization and symmetries
# ---------------------------------------------------------------------------


def test_antisymmetrize_idempotent():
    rng = np.random.default_rng(3)
    for m in (2, 3):
        k = random_kernel(rng, m=m)
        v = kn.antisymmetrize(k)
        again = kn.antisymmetrize(v)
        assert (v - again).prune(1e-13).max_abs() == 0.0


def test_antisymmetrize_kills_symmetric_m2():
    k = kn.DiscreteKernel(2)
    a = (((0, 0),) * 2)
    sigma = (((-1, 1, 1),) * 2)
    k.add(a, sigma, ((0, 0),), 1.0)  # even under the slot swap
    assert kn.antisymmetrize(k).prune(1e-14).max_abs() == 0.0


def test_pairing_antisymmetry_of_projected_kernel():
    rng = np.random.default_rng(4)
    v = kn.antisymmetrize(random_kernel(rng))
    phis = [kn.random_test_function(rng, 2, components=kn._slot_components(v, i))
            for i in range(2)]
    lhs = kn.pair_kernel(v, phis)
    rhs = kn.pair_kernel(v, [phis[1], phis[0]])
    assert abs(lhs + rhs) < 1e-12


def test_conjugation_duality():
    rng = np.random.default_rng(5)
    k = random_kernel(rng)
    phis = [kn.random_test_function(rng, 2, components=kn._slot_components(k, i))
            for i in range(2)]
    lhs = kn.pair_kernel(kn.conjugate_slots(k, {0, 1}), phis)
    rhs = kn.pair_kernel(k, [kn.conjugate_test_function(p) for p in phis])
    assert abs(lhs - rhs) < 1e-12
    # the slot conjugation and the reality map are involutions
    twice = kn.conjugate_slots(kn.conjugate_slots(k, {0, 1}), {0, 1})
    assert (twice - k).prune(0.0).max_abs() < 1e-14
    real_twice = kn.reality_conjugate(kn.reality_conjugate(k))
    assert (real_twice - k).prune(0.0).max_abs() < 1e-14


@pytest.mark.parametrize("m", [2, 4])
def test_symmetric_class_passes_all_checks(m):
    rng = np.random.default_rng(6)
    v, w = kn.random_symmetric_kernel(m, 2, rng, n_seeds=2)
    assert v.max_abs() > 0.0
    assert kn.symmetry_check(v, "torus", n_trials=4) < 1e-10
    assert kn.symmetry_check(v, "charge_conjugation", n_trials=4) < 1e-10
    assert kn.symmetry_check(v, "internal", n_trials=4) < 1e-10
    assert kn.symmetry_check(v, "flavor_rotations", n_trials=4) < 1e-10
    assert kn.symmetry_check(v, "plane", n_trials=4) < 1e-10
    assert kn.symmetry_check(v, "flow_of_charge", n_trials=4, witness=w) < 1e-10


def test_plane_rotation_duality():
    # <rotate_kernel(V, e), phi...> = <V, (T phi)...> for every element
    rng = np.random.default_rng(11)
    k = random_kernel(rng, m=2, n_seeds=4)
    phis = [kn.random_test_function(rng, 2, n_components=6) for _ in range(2)]
    for element in kn.DIHEDRAL_ELEMENTS:
        lhs = kn.pair_kernel(kn.rotate_kernel(k, element), phis)
        rhs = kn.pair_kernel(k, [kn.rotate_test_function(p, element)
                                 for p in phis])
        assert abs(lhs - rhs) < 1e-12


def test_point_symmetry_projectors_idempotent():
    rng = np.random.default_rng(12)
    k = random_kernel(rng, m=2, n_seeds=4)
    for proj in (kn.project_plane, kn.project_flow_of_charge,
                 kn.project_flavor_rotations, kn.project_charge_neutral):
        once = proj(k)
        twice = proj(once)
        assert (twice - once).prune(0.0).max_abs() < 1e-13


def test_charge_neutral_projection_splits_the_kernel():
    k = kn.DiscreteKernel(2, n_flavors=2)
    neutral = ((-1, 1, 1), (+1, 1, 1))
    charged = ((-1, 1, 1), (-1, 1, 2))
    k.add(((0, 0), (0, 0)), neutral, ((1, 0),), 2.0)
    k.add(((0, 0), (0, 0)), charged, ((1, 0),), 3.0)
    out = kn.project_charge_neutral(k)
    assert out.entries.get((((0, 0), (0, 0)), neutral)) == {((1, 0),): 2.0}
    assert (((0, 0), (0, 0)), charged) not in out.entries


def test_flavor_rotation_projection_output_is_invariant():
    # the projected kernel pairs identically with rotated test functions
    rng = np.random.default_rng(13)
    k = kn.project_charge_neutral(random_kernel(rng, m=2, n_seeds=6))
    proj = kn.project_flavor_rotations(k)
    assert kn.symmetry_check(proj, "flavor_rotations", n_trials=6) < 1e-12


def test_canonical_witness_fixed_point_and_failure():
    rng = np.random.default_rng(14)
    raw = random_kernel(rng, m=2, n_seeds=4)
    w = kn.canonical_witness(raw)
    again = kn.canonical_witness(w)
    assert (again - w).prune(0.0).max_abs() < 1e-12 * max(w.max_abs(), 1.0)
    with pytest.raises(kn.ClassProjectionNotConverged):
        kn.canonical_witness(raw, max_iter=0)


def test_local_quartic_content_of_class_is_one_dimensional():
    # [DERIVED] project a dense random coincident-point quartic onto the
    # admissible class: the surviving local tensor must be a multiple of
    # the antisymmetrized scalar quartic coupling
    import itertools

    rng = np.random.default_rng(42)
    a0 = (((0, 0),) * 4)
    rel0 = (((0, 0),) * 3)
    raw = kn.DiscreteKernel(4, n_flavors=2)
    mats = rng.normal(size=(2, 2, 2)) + 1j * rng.normal(size=(2, 2, 2))
    for flavors in itertools.product((1, 2), repeat=2):
        for sp in itertools.product((1, 2), repeat=4):
            coeff = mats[0][sp[0] - 1, sp[1] - 1] * mats[1][sp[2] - 1, sp[3] - 1]
            sigma = ((-1, flavors[0], sp[0]), (+1, flavors[0], sp[1]),
                     (-1, flavors[1], sp[2]), (+1, flavors[1], sp[3]))
            raw.add(a0, sigma, rel0, coeff)
    v = kn.antisymmetrize(kn.canonical_witness(raw)).prune(0.0)

    def local_tensor(kernel):
        t = np.zeros((8,) * 4, dtype=complex)
        for (a, sigma), relmap in kernel.entries.items():
            if a != a0 or rel0 not in relmap:
                continue
            idx = tuple(
                (0 if c == -1 else 4) + 2 * (f - 1) + (s - 1)
                for (c, f, s) in sigma
            )
            t[idx] += relmap[rel0]
        return t.ravel()

    scalar_quartic = kn.DiscreteKernel(4, n_flavors=2)
    for a_fl in (1, 2):
        for b_fl in (1, 2):
            for s in (1, 2):
                for u in (1, 2):
                    scalar_quartic.add(
                        a0,
                        ((-1, a_fl, s), (+1, a_fl, s),
                         (-1, b_fl, u), (+1, b_fl, u)),
                        rel0, 1.0,
                    )
    ref = local_tensor(kn.antisymmetrize(scalar_quartic))
    got = local_tensor(v)
    assert np.linalg.norm(got) > 0.1
    c = (ref.conj() @ got) / (ref.conj() @ ref)
    resid = np.linalg.norm(got - c * ref) / np.linalg.norm(got)
    assert resid < 1e-12


def test_unprojected_kernel_fails_checks():
    rng = np.random.default_rng(7)
    v = kn.antisymmetrize(random_kernel(rng))
    assert kn.symmetry_check(v, "charge_conjugation", n_trials=8) > 1e-8
    assert kn.symmetry_check(v, "internal", n_trials=16) > 1e-8


def test_odd_arity_flow_of_charge_must_vanish():
    rng = np.random.default_rng(8)
    v = random_kernel(rng, m=3)
    assert kn.symmetry_check(v, "flow_of_charge") == v.max_abs() > 0


# ---------------------------------------------------------------------------
# hierarchy and scale-graded norm
# ---------------------------------------------------------------------------


def test_hierarchy_cap():
    h = kn.KernelHierarchy(t=0.5, max_arity=6)
    with pytest.raises(ValueError):
        h.set_level(kn.DiscreteKernel(8))


def test_v_norm_zero_path_and_monotonicity():
    rng = np.random.default_rng(9)
    kernel = random_kernel(rng)
    hier = kn.KernelHierarchy(t=1.0)
    hier.set_level(kernel)
    grid = kn.scale_grid(6)

    def path(s):
        return hier

    def lam(s):
        return 1.0 / (50.0 - 2.0 * math.log(s) / math.pi)

    empty = kn.KernelHierarchy(t=1.0)
    assert kn.v_norm(lambda s: empty, grid, -0.008, 1.0, 1.0, lam) == 0.0
    base = kn.v_norm(path, grid, -0.008, 1.0, 1.0, lam)
    assert base > 0.0
    # lowering alpha or beta never increases the norm
    assert kn.v_norm(path, grid, -0.008, 0.5, 1.0, lam) <= base
    assert kn.v_norm(path, grid, -0.008, 1.0, 0.5, lam) <= base


def test_rho_additivity():
    # rho_{g1+g2}(m) = rho_{g1}(k+1) + rho_{g2}(m-k+1) - 4 kappa
    for m in (2, 4, 6):
        for k in range(1, m):
            lhs = kn.rho(-0.016, m)
            rhs = kn.rho(-0.008, k + 1) + kn.rho(-0.008, m - k + 1) - 4 * kn.KAPPA
            assert lhs == pytest.approx(rhs)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_json_roundtrip_bit_exact():
    rng = np.random.default_rng(10)
    v = kn.antisymmetrize(random_kernel(rng, m=2, n_seeds=4))
    text = v.to_json()
    back = kn.DiscreteKernel.from_json(text)
    assert back.to_json() == text
    assert (v - back).prune(0.0).max_abs() == 0.0
