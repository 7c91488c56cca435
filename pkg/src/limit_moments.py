"""
Exact limit moments of the Poisson-divisor model.

As n -> infinity, F(gamma^a) -> sum_{d | a} d Z_d with independent
Z_d ~ Poisson(1/d), shared by all powers of one primitive class and
independent across classes. Centered counts are
U(gamma^a) = sum_{d | a} (d Z_d - 1).

Everything combinatorial (Poisson moments, R, partitions) is exact
``Fraction`` arithmetic; only the window factors H are floating point.
"""

import itertools
import logging
import math
import threading
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sympy import divisor_count, divisor_sigma as sympy_divisor_sigma, divisors
from sympy.functions.combinatorial.numbers import stirling
from sympy.utilities.iterables import multiset_partitions

from src.config import BRUTE_FORCE_MAX_CLASSES, MAX_MOMENT_ORDER
from src.geodesic_terms import GeodesicTerms, build_terms, character_values
from src.kernels import TestFunctionSpec, WindowParams, psi_hat_eval
from src.spectrum import LengthSpectrum
from src.surface_group import Character

logger = logging.getLogger(__name__)


# === partitions ===
@dataclass(frozen=True)
class PartitionOfK:
    parts: Tuple[int, ...]

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts or any(p < 1 for p in parts) or list(parts) != sorted(parts, reverse=True):
            raise ValueError(f"partition parts must be positive and descending: {parts}")
        object.__setattr__(self, "parts", parts)

    @property
    def k(self) -> int:
        return sum(self.parts)

    def has_singleton(self) -> bool:
        return 1 in self.parts

    def is_pairing(self) -> bool:
        return all(p == 2 for p in self.parts)


def partitions(k: int) -> List[PartitionOfK]:
    """All partitions of k, largest part first: (4), (3,1), (2,2), (2,1,1), (1,1,1,1)."""
    if k < 1:
        raise ValueError("k must be positive")
    out = []

    def grow(remaining: int, cap: int, prefix: Tuple[int, ...]):
        if remaining == 0:
            out.append(PartitionOfK(prefix))
            return
        for part in range(min(remaining, cap), 0, -1):
            grow(remaining - part, part, prefix + (part,))

    grow(k, k, ())
    return out


def sym_count(r: PartitionOfK) -> int:
    """Number of permutations of equal parts."""
    return math.prod(math.factorial(m) for m in Counter(r.parts).values())


def multinomial(k: int, r: PartitionOfK) -> int:
    if r.k != k:
        raise ValueError(f"{r.parts} is not a partition of {k}")
    return math.factorial(k) // math.prod(math.factorial(p) for p in r.parts)


# === arithmetic ===
def divisor_sigma(n: int) -> int:
    return int(sympy_divisor_sigma(n))


def num_divisors(n: int) -> int:
    return int(divisor_count(n))


def G(a: int, b: int) -> int:
    """Limiting covariance of F(gamma^a) and F(gamma^b): sigma(gcd(a, b))."""
    return divisor_sigma(math.gcd(a, b))


# === Poisson moments ===
def poisson_raw_moment(m: int, lam: Fraction) -> Fraction:
    """E[Z^m] = sum_i S(m, i) lam^i (Touchard polynomial)."""
    lam = Fraction(lam)
    if m == 0:
        return Fraction(1)
    return sum((int(stirling(m, i)) * lam ** i for i in range(1, m + 1)), Fraction(0))


def poisson_central_moment(m: int, lam: Fraction) -> Fraction:
    lam = Fraction(lam)
    return sum((math.comb(m, j) * poisson_raw_moment(j, lam) * (-lam) ** (m - j)
                for j in range(m + 1)), Fraction(0))


@dataclass(frozen=True)
class LimitMomentKey:
    """Powers (a_1, ..., a_r) carried by one primitive class."""

    powers: Tuple[int, ...]

    def __post_init__(self):
        powers = tuple(sorted(int(a) for a in self.powers))
        if any(a < 1 for a in powers):
            raise ValueError(f"powers must be positive: {powers}")
        object.__setattr__(self, "powers", powers)


class MomentTable:
    """
    Memo for Poisson moments and single-class moments.

    Lookups are cache-transparent: disabling the table changes speed only.
    """

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self._lock = threading.Lock()
        self._poisson: Dict[Tuple[int, Fraction, bool], Fraction] = {}
        self._single: Dict[Tuple[Tuple[int, ...], bool], Fraction] = {}

    def _remember(self, store: Dict, key, compute):
        if not self.enabled:
            return compute()
        value = store.get(key)
        if value is None:
            value = compute()
            with self._lock:
                store[key] = value
        return value

    def poisson(self, m: int, lam: Fraction, centered: bool) -> Fraction:
        fn = poisson_central_moment if centered else poisson_raw_moment
        return self._remember(self._poisson, (m, Fraction(lam), centered), lambda: fn(m, lam))

    def single_class(self, key: LimitMomentKey, centered: bool) -> Fraction:
        """
        lim E[prod_i X(gamma^{a_i})] for X = U (centered) or F (raw).

        Expand every factor over divisors d_i | a_i and group equal d's: the
        groups are independent and contribute d^m times the m-th moment of
        Z_d. A centered singleton group has mean zero and kills its branch.
        """
        def compute() -> Fraction:
            total = Fraction(0)
            for ds in itertools.product(*(divisors(a) for a in key.powers)):
                groups = Counter(int(d) for d in ds)
                if centered and 1 in groups.values():
                    continue
                term = Fraction(1)
                for d, m in groups.items():
                    term *= Fraction(d) ** m * self.poisson(m, Fraction(1, d), centered)
                    if term == 0:
                        break
                total += term
            return total

        return self._remember(self._single, (key.powers, centered), compute)


DEFAULT_TABLE = MomentTable()


def R_exact(key: LimitMomentKey, table: Optional[MomentTable] = None) -> Fraction:
    """R(a_1, ..., a_r) = lim E[U(gamma^{a_1}) ... U(gamma^{a_r})]."""
    return (table or DEFAULT_TABLE).single_class(key, centered=True)


def limit_cross_moment(keys: Sequence[LimitMomentKey], centered: bool = False,
                       table: Optional[MomentTable] = None) -> Fraction:
    """Cross moment over distinct classes: the product of single-class moments."""
    table = table or DEFAULT_TABLE
    out = Fraction(1)
    for key in keys:
        out *= table.single_class(key, centered)
    return out


# === window factors ===
def H_eval(lengths: Sequence[float], chi_values: Sequence[complex], powers: Sequence[int],
           p: WindowParams, spec: TestFunctionSpec) -> float:
    """
    prod_i Re chi(gamma_i^{a_i}) l_i psi_hat(a_i l_i / L) cos(alpha a_i l_i) / sinh(a_i l_i / 2).
    """
    out = 1.0
    for l, v, a in zip(lengths, chi_values, powers):
        x = a * l
        if x >= p.L * spec.support_radius:
            return 0.0
        out *= (complex(v) ** a).real * l * psi_hat_eval(spec, x / p.L) * math.cos(p.alpha * x) \
            / math.sinh(x / 2.0)
    return out


def _class_moment_vector(terms: GeodesicTerms, r: int, table: MomentTable) -> np.ndarray:
    """M_r(gamma) = sum over power tuples of prod h(gamma, a_j) * R(a_1..a_r), per class."""
    h = terms.h
    out = np.zeros(terms.num_classes)
    starts = np.concatenate([[0], np.cumsum(terms.max_power)[:-1]]).astype(np.int64)
    for kmax in sorted(set(int(k) for k in terms.max_power)):
        members = np.flatnonzero(terms.max_power == kmax)
        base = starts[members]
        acc = np.zeros(len(members))
        for tup in itertools.combinations_with_replacement(range(1, kmax + 1), r):
            weight = float(R_exact(LimitMomentKey(tup), table))
            if weight == 0.0:
                continue
            arrangements = math.factorial(r) // math.prod(
                math.factorial(c) for c in Counter(tup).values())
            prod = np.ones(len(members))
            for a in tup:
                prod *= h[base + a - 1]
            acc += arrangements * weight * prod
        out[members] = acc
    return out


def _distinct_sum(vectors: Sequence[np.ndarray]) -> float:
    """
    sum over pairwise distinct (g_1, ..., g_t) of prod_i vectors[i][g_i].

    Inclusion-exclusion over set partitions of the slots: a block of
    coincident slots contributes (-1)^(|B|-1) (|B|-1)! sum_g prod_{i in B} v_i(g).
    """
    t = len(vectors)
    total = 0.0
    for blocks in multiset_partitions(list(range(t))):
        term = 1.0
        for block in blocks:
            size = len(block)
            coincident = np.prod([vectors[i] for i in block], axis=0)
            term *= (-1) ** (size - 1) * math.factorial(size - 1) * float(np.sum(coincident))
        total += term
    return total


def _distinct_pairing_sum(x: np.ndarray, m: int) -> float:
    """
    sum over distinct (g_1..g_m) of prod x(g_i), from power sums p_j = sum x^j:
    the product of per-class sums p_1^m corrected by every coarser coincidence pattern.
    """
    total = 0.0
    for lam in partitions(m):
        counts = Counter(lam.parts)
        z = math.prod(part ** c * math.factorial(c) for part, c in counts.items())
        sign = (-1) ** (m - len(lam.parts))
        total += sign * math.factorial(m) / z * math.prod(float(np.sum(x ** part)) for part in lam.parts)
    return total


def B_from_terms(r: PartitionOfK, terms: GeodesicTerms,
                 table: Optional[MomentTable] = None) -> float:
    table = table or DEFAULT_TABLE
    if r.has_singleton():
        return 0.0
    if terms.num_classes == 0:
        return 0.0
    if r.is_pairing():
        return _distinct_pairing_sum(_class_moment_vector(terms, 2, table), len(r.parts))
    vectors = {part: _class_moment_vector(terms, part, table) for part in set(r.parts)}
    return _distinct_sum([vectors[part] for part in r.parts])


def B_eval(r: PartitionOfK, s: LengthSpectrum, p: WindowParams, chi: Character,
           spec: TestFunctionSpec, table: Optional[MomentTable] = None) -> float:
    """B(r) = sum over distinct class tuples and power tuples of H * lim E[U ...]."""
    return B_from_terms(r, build_terms(s, p, chi, spec), table)


def B_brute_force(r: PartitionOfK, s: LengthSpectrum, p: WindowParams, chi: Character,
                  spec: TestFunctionSpec, table: Optional[MomentTable] = None) -> float:
    """Literal tuple summation; only for spectra of a handful of classes."""
    table = table or DEFAULT_TABLE
    terms = build_terms(s, p, chi, spec)
    if terms.num_classes > BRUTE_FORCE_MAX_CLASSES:
        raise ValueError(f"brute force is limited to {BRUTE_FORCE_MAX_CLASSES} classes")
    all_values = character_values(s, chi)
    chi_of_class = [all_values[i] for i in terms.spectrum_index]
    total = 0.0
    for classes in itertools.permutations(range(terms.num_classes), len(r.parts)):
        power_ranges = []
        for cls, part in zip(classes, r.parts):
            power_ranges += [range(1, int(terms.max_power[cls]) + 1)] * part
        owners = [cls for cls, part in zip(classes, r.parts) for _ in range(part)]
        for powers in itertools.product(*power_ranges):
            weight = H_eval([terms.class_lengths[c] for c in owners],
                            [chi_of_class[c] for c in owners], powers, p, spec)
            if weight == 0.0:
                continue
            keys, pos = [], 0
            for part in r.parts:
                keys.append(LimitMomentKey(powers[pos:pos + part]))
                pos += part
            total += weight * float(limit_cross_moment(keys, centered=True, table=table))
    return total


def central_moment_from_terms(k: int, terms: GeodesicTerms,
                              table: Optional[MomentTable] = None) -> float:
    if not 1 <= k <= MAX_MOMENT_ORDER:
        raise ValueError(f"moment order must lie in [1, {MAX_MOMENT_ORDER}]")
    total = 0.0
    for r in partitions(k):
        if r.has_singleton():
            continue
        total += multinomial(k, r) / sym_count(r) * B_from_terms(r, terms, table)
    return (2.0 / terms.window.L) ** k * total


def central_moment_limit(k: int, s: LengthSpectrum, p: WindowParams, chi: Character,
                         spec: TestFunctionSpec, table: Optional[MomentTable] = None) -> float:
    """
    Exact k-th central moment of the centered statistic in the limit model:
    (2/L)^k * sum_{r |- k} multinomial(k; r) / #Sym(r) * B(r).
    """
    return central_moment_from_terms(k, build_terms(s, p, chi, spec), table)


def gaussian_moment(k: int, sigma2: float) -> float:
    """(k - 1)!! sigma^k for even k, 0 for odd k."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if k % 2:
        return 0.0
    return float(math.prod(range(k - 1, 0, -2))) * sigma2 ** (k // 2)


def cumulant_from_terms(m: int, terms: GeodesicTerms) -> float:
    """
    m-th cumulant of the centered statistic, an independent route to its moments.

    The statistic is sum over (gamma, d) of c_{gamma,d} (Z_d - 1/d) with
    c_{gamma,d} = (2/L) d sum_{d | a} h(gamma, a), so kappa_m = sum c^m / d.
    """
    if m < 2:
        return 0.0
    coeff = 2.0 / terms.window.L * terms.h
    total = 0.0
    for cls in range(terms.num_classes):
        rows = terms.rows_of(cls)
        kmax = int(terms.max_power[cls])
        for d in range(1, kmax + 1):
            c = d * sum(coeff[rows[a - 1]] for a in range(d, kmax + 1, d))
            total += c ** m / d
    return total


def diag_mean_limit(terms: GeodesicTerms) -> float:
    """Limit-model E[Diag] for T >> 1: (1/2pi) sum s(gamma, a)^2 sigma(a)."""
    sig = np.array([divisor_sigma(int(a)) for a in terms.power], dtype=float)
    return float(np.sum(terms.s ** 2 * sig)) / (2.0 * math.pi)
