"""Exact Grassmann calculus on finite mode sets.

Finite-dimensional Grassmann algebra generated by the Fourier modes of a
Dirac field on a torus of size 1/tau with an ultraviolet mode cutoff, plus
Berezin integration, the free Gaussian measure, and the interacting measure
of the Gross-Neveu model.  Everything here is exact (up to floating point)
and serves as the reference oracle for every other module.

Conventions
-----------
Generators are the Fourier coefficients u_p^sigma with sigma = (charge,
flavor, spinor); charge -1 is the conjugate field psi-bar, charge +1 the
field psi-under.  The canonical generator order is lexicographic in (mode,
charge, flavor, spinor) with charge -1 first; optional external source
generators come after all field generators.  The Berezin integral is
normalized to 1 on the reference monomial prod_p prod_{f,s} abar_p^{f,s}
b_p^{f,s} (mode-major pairing order); the permutation sign relating the
canonical order to the pairing order is computed once per mode set.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .propagator import GAMMA1, GAMMA2, bump, fourier_covariance, omega

MAX_GENERATORS = 24


class ZeroPartition(Exception):
    """Raised when an interacting normalization integral vanishes."""


@dataclass(frozen=True, order=True)
class SpinIndex:
    """Field index sigma = (charge, flavor, spinor); charge in {-1, +1}."""

    charge: int
    flavor: int
    spinor: int

    def conjugate(self):
        return SpinIndex(-self.charge, self.flavor, self.spinor)


@dataclass(frozen=True)
class Generator:
    """One anticommuting generator: a field mode or an external source."""

    kind: str  # 'field' or 'source'
    mode: tuple | None = None
    spin: SpinIndex | None = None
    label: object = None


class ModeSet:
    """Momentum lattice {p in (2 pi tau Z)^2 : eps * omega(p) <= 4} plus the
    generator bookkeeping of the associated Grassmann algebra.

    Modes are stored as integer lattice vectors n with p = 2 pi tau n, sorted
    lexicographically; the set is symmetric under n -> -n because omega is
    even.  `mode_filter` restricts to a sub-lattice (it must stay symmetric
    under negation).  `sources` is a tuple of hashable labels for external
    source generators, placed after all field generators in the canonical
    order.  The total generator count is capped at MAX_GENERATORS.
    """

    def __init__(self, tau, eps, n_flavors, mode_filter=None, sources=()):
        self.tau = float(tau)
        self.eps = float(eps)
        self.n_flavors = int(n_flavors)
        step = 2.0 * math.pi * self.tau
        # eps*omega(p) <= 4  <=>  |p|^2 <= (4/eps)^2 - 1
        r2 = (4.0 / self.eps) ** 2 - 1.0
        nmax = int(math.sqrt(max(r2, 0.0)) / step) + 1
        modes = []
        for nx in range(-nmax, nmax + 1):
            for ny in range(-nmax, nmax + 1):
                p2 = step * step * (nx * nx + ny * ny)
                if self.eps * math.sqrt(1.0 + p2) <= 4.0:
                    if mode_filter is None or mode_filter((nx, ny)):
                        modes.append((nx, ny))
        self.modes = sorted(modes)
        if any(tuple(-c for c in n) not in set(self.modes) for n in self.modes):
            raise ValueError("mode set must be symmetric under negation")
        spins = sorted(
            SpinIndex(charge, flavor, spinor)
            for charge in (-1, +1)
            for flavor in range(1, self.n_flavors + 1)
            for spinor in (1, 2)
        )
        self.generators = [
            Generator("field", mode=n, spin=s) for n in self.modes for s in spins
        ] + [Generator("source", label=lab) for lab in sources]
        self.sources = tuple(sources)
        self.n_field = len(self.modes) * len(spins)
        if len(self.generators) > MAX_GENERATORS:
            raise ValueError(
                f"{len(self.generators)} generators exceed the cap "
                f"{MAX_GENERATORS}; shrink the mode set or flavor count"
            )
        self._field_index = {
            (g.mode, g.spin): i for i, g in enumerate(self.generators[: self.n_field])
        }
        self._source_index = {
            lab: self.n_field + k for k, lab in enumerate(self.sources)
        }
        self.field_mask = (1 << self.n_field) - 1
        self._pairing_sign = self._compute_pairing_sign()

    # -- indexing -----------------------------------------------------------

    def index(self, n, sigma):
        return self._field_index[(tuple(n), sigma)]

    def source_index(self, label):
        return self._source_index[label]

    def momentum(self, n):
        return 2.0 * math.pi * self.tau * np.asarray(n, dtype=float)

    def generator(self, n, sigma):
        """Grade-1 multivector for the single field generator u_n^sigma."""
        return Multivector({1 << self.index(n, sigma): 1.0 + 0.0j}, self)

    def source(self, label):
        """Grade-1 multivector for the single source generator."""
        return Multivector({1 << self.source_index(label): 1.0 + 0.0j}, self)

    # -- Berezin reference sign --------------------------------------------

    def _compute_pairing_sign(self):
        """Parity of the permutation from canonical order to pairing order
        prod_p prod_{f,s} abar_p^{f,s} b_p^{f,s}."""
        pairing = []
        for n in self.modes:
            for flavor in range(1, self.n_flavors + 1):
                for spinor in (1, 2):
                    pairing.append(self.index(n, SpinIndex(-1, flavor, spinor)))
                    pairing.append(self.index(n, SpinIndex(+1, flavor, spinor)))
        inversions = sum(
            1
            for i, j in itertools.combinations(range(len(pairing)), 2)
            if pairing[i] > pairing[j]
        )
        return -1 if inversions % 2 else +1

    @property
    def pairing_sign(self):
        return self._pairing_sign


def _product_sign(mask_a, mask_b):
    """Sign of concatenating ordered monomials a and b (disjoint masks)."""
    swaps = 0
    b = mask_b
    while b:
        low = b & -b
        # generators of a with index above this bit must move past it
        swaps += (mask_a >> low.bit_length()).bit_count()
        b ^= low
    return -1 if swaps % 2 else +1


class Multivector:
    """Sparse element of the Grassmann algebra over a ModeSet.

    Terms are stored as {bitmask: coefficient}; a bitmask encodes the ordered
    monomial of generators in the canonical order, bit i = generator i.
    Immutable by convention: operations return new instances.
    """

    __slots__ = ("terms", "modes")

    def __init__(self, terms, modes):
        self.terms = {m: c for m, c in terms.items() if c != 0}
        self.modes = modes

    @classmethod
    def scalar(cls, value, modes):
        return cls({0: complex(value)}, modes)

    def __add__(self, other):
        if np.isscalar(other):
            other = Multivector.scalar(other, self.modes)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0.0) + c
        return Multivector(out, self.modes)

    __radd__ = __add__

    def __neg__(self):
        return Multivector({m: -c for m, c in self.terms.items()}, self.modes)

    def __sub__(self, other):
        if np.isscalar(other):
            other = Multivector.scalar(other, self.modes)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            return Multivector(
                {m: c * other for m, c in self.terms.items()}, self.modes
            )
        if other.modes is not self.modes:
            raise ValueError("multivectors live over different generator universes")
        out = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                if ma & mb:
                    continue
                m = ma | mb
                out[m] = out.get(m, 0.0) + ca * cb * _product_sign(ma, mb)
        return Multivector(out, self.modes)

    def __rmul__(self, other):
        if np.isscalar(other):
            return self * other
        return NotImplemented

    def coefficient(self, mask):
        return self.terms.get(mask, 0.0 + 0.0j)

    @property
    def is_even(self):
        return all(m.bit_count() % 2 == 0 for m in self.terms)

    def exp(self):
        """exp of an even multivector; the series terminates by nilpotency."""
        if not self.is_even:
            raise ValueError("exp is only defined for even multivectors")
        s = complex(self.terms.get(0, 0.0))
        nil = self - s
        result = Multivector.scalar(1.0, self.modes)
        power = Multivector.scalar(1.0, self.modes)
        for k in range(1, len(self.modes.generators) // 2 + 1):
            power = power * nil * (1.0 / k)
            if not power.terms:
                break
            result = result + power
        return result * cmath.exp(s)


def wedge(a, b):
    """Exterior product of two multivectors over the same universe."""
    return a * b


def berezin_integrate(mv):
    """Berezin integral over the field generators.

    Returns the coefficient of the top field monomial, normalized so that
    the mode-major pairing monomial integrates to 1.  Source generators pass
    through as spectators: with sources present the result is a multivector
    over the source sub-algebra, otherwise a complex number.
    """
    modes = mv.modes
    full = modes.field_mask
    out = {}
    for mask, coeff in mv.terms.items():
        if mask & full != full:
            continue
        # canonical monomials factor as (field part)(source part), so no
        # extra sign arises when stripping the field part
        out[mask & ~full] = out.get(mask & ~full, 0.0) + coeff * modes.pairing_sign
    if not modes.sources:
        return out.get(0, 0.0 + 0.0j)
    return Multivector(out, modes)


def _scalar_part(value):
    """Scalar coefficient of a Berezin result (complex passes through)."""
    if isinstance(value, Multivector):
        return value.coefficient(0)
    return value


# ---------------------------------------------------------------------------
# free action and Gaussian measure
# ---------------------------------------------------------------------------


@dataclass
class QuadraticAction:
    """Bilinear action A = sum_{i<j} matrix[i,j] u_i u_j over the field
    generators, stored as an antisymmetric coefficient matrix."""

    modes: ModeSet
    matrix: np.ndarray

    def multivector(self):
        terms = {}
        n = self.modes.n_field
        for i in range(n):
            for j in range(i + 1, n):
                c = self.matrix[i, j]
                if c != 0:
                    terms[(1 << i) | (1 << j)] = c
        return Multivector(terms, self.modes)


def _bilinear_matrix(modes, coeff):
    """Antisymmetric matrix of sum_p sum_{f,s1,s2} coeff(p)[s1,s2]
    abar_{-p}^{f,s1} b_p^{f,s2}."""
    n = modes.n_field
    mat = np.zeros((n, n), dtype=complex)
    for nn in modes.modes:
        block = coeff(nn)
        neg = tuple(-c for c in nn)
        for flavor in range(1, modes.n_flavors + 1):
            for s1 in (1, 2):
                for s2 in (1, 2):
                    c = block[s1 - 1, s2 - 1]
                    if c == 0:
                        continue
                    i = modes.index(neg, SpinIndex(-1, flavor, s1))
                    j = modes.index(nn, SpinIndex(+1, flavor, s2))
                    if i < j:
                        mat[i, j] += c
                    else:
                        mat[j, i] -= c
    return mat


def free_action(modes):
    """A = tau^2 sum_p abar_{-p}.(1 + i gamma.p) b_p (mass + kinetic)."""
    tau2 = modes.tau ** 2

    def coeff(n):
        p = modes.momentum(n)
        return tau2 * (
            np.eye(2, dtype=complex) + 1.0j * (p[0] * GAMMA1 + p[1] * GAMMA2)
        )

    return QuadraticAction(modes, _bilinear_matrix(modes, coeff))


def gaussian_partition(action):
    """int exp(-A) dpsi by honest Berezin expansion of the exponential."""
    if isinstance(action, ModeSet):
        action = free_action(action)
    return berezin_integrate((-action.multivector()).exp())


def partition_closed_form(modes):
    """prod_p (tau^4 (1+|p|^2))^N, the closed form of the free partition."""
    out = 1.0
    for n in modes.modes:
        p = modes.momentum(n)
        out *= (modes.tau ** 4 * (1.0 + float(p @ p))) ** modes.n_flavors
    return out


def gaussian_expectation(modes, mv, exp_minus_a=None):
    """Free Gaussian moment E[mv] = int mv e^{-A} / int e^{-A}."""
    if exp_minus_a is None:
        exp_minus_a = (-free_action(modes).multivector()).exp()
    denom = _scalar_part(berezin_integrate(exp_minus_a))
    if denom == 0:
        raise ZeroPartition("free partition function vanishes")
    return berezin_integrate(mv * exp_minus_a) * (1.0 / denom)


# ---------------------------------------------------------------------------
# smeared fields and local interactions
# ---------------------------------------------------------------------------


def smeared_field(modes, sigma, x):
    """Phi^sigma(x) = tau^2 sum_p theta(2 eps omega(p))^{1/2} u_p^sigma e^{ipx}.

    The smearing is the convolution with the kernel whose Fourier transform
    is theta(2 eps omega)^{1/2}.
    """
    x = np.asarray(x, dtype=float)
    terms = {}
    tau2 = modes.tau ** 2
    for n in modes.modes:
        p = modes.momentum(n)
        th = bump(2.0 * modes.eps * omega(p))
        if th == 0.0:
            continue
        i = modes.index(n, sigma)
        c = tau2 * math.sqrt(th) * complex(math.cos(p @ x), math.sin(p @ x))
        terms[1 << i] = terms.get(1 << i, 0.0) + c
    return Multivector(terms, modes)


def _smeared_pair_sum(modes):
    """int (smeared psi-bar . smeared psi-under)(x) dx as a multivector:
    tau^2 sum_p theta(2 eps omega(p)) abar_p . b_{-p}."""
    tau2 = modes.tau ** 2

    def coeff(n):
        p = modes.momentum(n)
        return tau2 * bump(2.0 * modes.eps * omega(p)) * np.eye(2, dtype=complex)

    return QuadraticAction(modes, _bilinear_matrix(modes, coeff)).multivector()


def _smeared_kinetic_sum(modes):
    """int smeared psi-bar . (gamma.d) smeared psi-under dx."""
    tau2 = modes.tau ** 2

    def coeff(n):
        p = modes.momentum(n)
        th = bump(2.0 * modes.eps * omega(p))
        return tau2 * th * 1.0j * (p[0] * GAMMA1 + p[1] * GAMMA2)

    return QuadraticAction(modes, _bilinear_matrix(modes, coeff)).multivector()


def _pair(modes, n_bar, n_under):
    """abar_{n_bar} . b_{n_under} summed over flavor and spinor."""
    terms = {}
    for flavor in range(1, modes.n_flavors + 1):
        for spinor in (1, 2):
            i = modes.index(n_bar, SpinIndex(-1, flavor, spinor))
            j = modes.index(n_under, SpinIndex(+1, flavor, spinor))
            mask = (1 << i) | (1 << j)
            sign = 1 if i < j else -1
            terms[mask] = terms.get(mask, 0.0) + sign
    return Multivector(terms, modes)


def interaction_quartic(modes):
    """int (smeared psi-bar . smeared psi-under)^2 dx.

    Exact mode sum: tau^6 sum_{p1+p2+p3+p4=0} prod theta^{1/2}
    (abar_{p1}.b_{p2})(abar_{p3}.b_{p4}).
    """
    tau = modes.tau
    thr = {}
    for n in modes.modes:
        p = modes.momentum(n)
        thr[n] = math.sqrt(bump(2.0 * modes.eps * omega(p)))
    terms = Multivector({}, modes)
    mode_list = [n for n in modes.modes if thr[n] > 0.0]
    for n1 in mode_list:
        for n2 in mode_list:
            for n3 in mode_list:
                n4 = tuple(-(a + b + c) for a, b, c in zip(n1, n2, n3))
                if thr.get(n4, 0.0) == 0.0:
                    continue
                w = tau ** 6 * thr[n1] * thr[n2] * thr[n3] * thr[n4]
                terms = terms + _pair(modes, n1, n2) * _pair(modes, n3, n4) * w
    return terms


def interaction(modes, g_inv, r, z=0.0):
    """U = g_inv int (psibar.psi)^2 + r int psibar.psi + z int psibar.(gamma.d)psi,
    with all fields smeared at scale eps."""
    u = Multivector({}, modes)
    if g_inv != 0.0:
        u = u + interaction_quartic(modes) * g_inv
    if r != 0.0:
        u = u + _smeared_pair_sum(modes) * r
    if z != 0.0:
        u = u + _smeared_kinetic_sum(modes) * z
    return u


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------


def two_point_mode_sum(modes, sigma1, sigma2, dx):
    """nu(Phi^{sigma1}(x) Phi^{sigma2}(y)) = tau^2 sum_p theta(2 eps omega)
    FG^{sigma1,sigma2}(p) e^{ip.(x-y)} with dx = x - y."""
    acc = 0.0 + 0.0j
    dx = np.asarray(dx, dtype=float)
    for n in modes.modes:
        p = modes.momentum(n)
        th = bump(2.0 * modes.eps * omega(p))
        if th == 0.0:
            continue
        val = fourier_covariance(p, sigma1, sigma2)
        if val == 0:
            continue
        acc += modes.tau ** 2 * th * val * complex(math.cos(p @ dx), math.sin(p @ dx))
    return acc


def free_moment(modes, insertions):
    """nu(Phi^{sigma_1}(x_1) ... Phi^{sigma_m}(x_m)) by the fermionic Wick
    rule; `insertions` is a list of (x, SpinIndex) pairs."""
    m = len(insertions)
    if m % 2:
        return 0.0 + 0.0j
    cov = {}

    def pair_value(i, j):
        if (i, j) not in cov:
            xi, si = insertions[i]
            xj, sj = insertions[j]
            cov[(i, j)] = two_point_mode_sum(
                modes, si, sj, np.asarray(xi, float) - np.asarray(xj, float)
            )
        return cov[(i, j)]

    def wick(indices):
        if not indices:
            return 1.0 + 0.0j
        first, rest = indices[0], indices[1:]
        total = 0.0 + 0.0j
        for k, j in enumerate(rest):
            sign = -1 if k % 2 else +1
            total += sign * pair_value(first, j) * wick(rest[:k] + rest[k + 1:])
        return total

    return wick(list(range(m)))


def _insertion_product(modes, insertions):
    mv = Multivector.scalar(1.0, modes)
    for x, sigma in insertions:
        mv = mv * smeared_field(modes, sigma, x)
    return mv


def berezin_free_moment(modes, insertions, exp_minus_a=None):
    """Same moment as `free_moment` but by direct Berezin integration."""
    return gaussian_expectation(
        modes, _insertion_product(modes, insertions), exp_minus_a=exp_minus_a
    )


def interacting_weight(modes, g_inv, r, z=0.0):
    """exp(-A + U) as a multivector."""
    return (interaction(modes, g_inv, r, z) - free_action(modes).multivector()).exp()


def interacting_moment(modes, insertions, g_inv, r, z=0.0, weight=None):
    """mu(Phi^{sigma_1}(x_1)...Phi^{sigma_m}(x_m)) for the interacting
    measure with weight exp(-A + U); `insertions` is a list of
    (x, SpinIndex) pairs.  Raises ZeroPartition when the interacting
    normalization vanishes.  `weight` may carry a precomputed
    exp(-A + U) multivector to amortize the expansion over many moments.
    """
    if weight is None:
        weight = interacting_weight(modes, g_inv, r, z)
    denom = _scalar_part(berezin_integrate(weight))
    if denom == 0:
        raise ZeroPartition("interacting partition function vanishes")
    num = berezin_integrate(_insertion_product(modes, insertions) * weight)
    return num / denom
