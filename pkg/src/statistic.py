"""
Statistic evaluation - the trace-formula sum over cover samples and over the
Poisson limit model, the Diag/Off split and the centered energy variance.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy import stats

from src.config import FREQUENCY_TOLERANCE
from src.errors import InvariantViolation, SpectrumTooShort, WordsAbsent
from src.geodesic_terms import GeodesicTerms, build_terms, truncation
from src.kernels import (QuadratureConfig, TestFunctionSpec, TrigSeries, WindowParams,
                         expect_over_alpha, n_det, w_hat_eval)
from src.limit_moments import num_divisors
from src.permutations import HomSample, fix_count_table
from src.spectrum import LengthSpectrum
from src.surface_group import Character

logger = logging.getLogger(__name__)

POISSON_TABLE_SIZE = 64  # P(Z >= 64) is far below double precision for lambda <= 1


# === finite n ===
def _class_words(spectrum: LengthSpectrum, terms: GeodesicTerms):
    if terms.num_classes and not spectrum.has_words:
        raise WordsAbsent("evaluating F on covers needs class words")
    return [spectrum.classes[i].key.letters for i in terms.spectrum_index]


def fix_counts_for_terms(gens: np.ndarray, spectrum: LengthSpectrum,
                         terms: GeodesicTerms) -> np.ndarray:
    """F(gamma^a) for every row of the term table, for a batch of homs (B, 2g, n)."""
    words = _class_words(spectrum, terms)
    return fix_count_table(gens, words, [int(k) for k in terms.max_power])


def n_osc_finite(s: HomSample, spec: TestFunctionSpec, spectrum: LengthSpectrum,
                 p: WindowParams, chi: Character) -> float:
    """
    Oscillating term (2/L) sum h(gamma, a) F(gamma^a), summed in spectrum order
    then by power.
    """
    if spectrum.cutoff < p.L * (1 - 1e-12):
        raise SpectrumTooShort(f"spectrum cutoff {spectrum.cutoff} is below L={p.L}")
    terms = build_terms(spectrum, p, chi, spec)
    if len(terms) == 0:
        return 0.0
    counts = fix_counts_for_terms(s.as_array()[None], spectrum, terms)[0]
    return math.fsum(terms.coefficients * counts)


def n_statistic_finite(s: HomSample, spec: TestFunctionSpec, spectrum: LengthSpectrum,
                       p: WindowParams, chi: Character,
                       cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """N = N^det + N^osc for one cover."""
    return n_det(s.n, s.genus, spec, p, cfg) + n_osc_finite(s, spec, spectrum, p, chi)


# === limit model ===
@dataclass(frozen=True)
class LimitLayout:
    """
    Columns (class, d) of independent Poisson(1/d) variables, d = 1..max power.

    F(gamma^a) = sum over d | a of d Z_(gamma, d); the expansion arrays list
    every (row, column, d) triple of that sum, sorted by row.
    """

    L: float
    support_radius: float
    spectrum_index: np.ndarray
    max_power: np.ndarray
    column_class: np.ndarray
    column_d: np.ndarray
    expand_row: np.ndarray
    expand_col: np.ndarray
    expand_d: np.ndarray
    num_rows: int

    @classmethod
    def from_spectrum(cls, spectrum: LengthSpectrum, L: float,
                      support_radius: float = 1.0) -> "LimitLayout":
        if spectrum.cutoff < L * (1 - 1e-12):
            raise SpectrumTooShort(f"spectrum cutoff {spectrum.cutoff} is below L={L}")
        kept, max_power = truncation(spectrum.lengths, L * support_radius)
        column_class = np.repeat(np.arange(len(kept), dtype=np.int64), max_power)
        column_d = np.concatenate([np.arange(1, k + 1) for k in max_power]).astype(np.int64) \
            if len(kept) else np.zeros(0, dtype=np.int64)
        # rows and columns share the (class, 1..kmax) layout
        rows, cols, ds = [], [], []
        offset = 0
        for kmax in max_power:
            for a in range(1, kmax + 1):
                for d in range(1, a + 1):
                    if a % d == 0:
                        rows.append(offset + a - 1)
                        cols.append(offset + d - 1)
                        ds.append(d)
            offset += int(kmax)
        return cls(L, support_radius, kept, max_power, column_class, column_d,
                   np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64),
                   np.array(ds, dtype=np.int64), offset)

    @property
    def num_columns(self) -> int:
        return len(self.column_d)

    def divisor_counts(self) -> np.ndarray:
        """tau(a) per row, the limit mean of F(gamma^a)."""
        return np.bincount(self.expand_row, minlength=self.num_rows).astype(float)

    def expand(self, z: np.ndarray) -> np.ndarray:
        """F per row from Z per column; z has shape (..., columns)."""
        z = np.asarray(z, dtype=np.int64)
        if self.num_rows == 0:
            return np.zeros(z.shape[:-1] + (0,), dtype=np.int64)
        contrib = z[..., self.expand_col] * self.expand_d
        # every row has the d = 1 entry, so row starts are strictly increasing
        starts = np.searchsorted(self.expand_row, np.arange(self.num_rows))
        return np.add.reduceat(contrib, starts, axis=-1)

    def matches(self, terms: GeodesicTerms) -> bool:
        return (abs(terms.window.L - self.L) <= 1e-12 * self.L
                and np.array_equal(terms.spectrum_index, self.spectrum_index)
                and np.array_equal(terms.max_power, self.max_power))


@dataclass(frozen=True)
class PoissonDraw:
    """One draw of the limit model: Z values for every (class, d) column."""

    spectrum: LengthSpectrum
    layout: LimitLayout
    z: np.ndarray

    def __post_init__(self):
        if self.z.shape != (self.layout.num_columns,) or np.any(self.z < 0):
            raise InvariantViolation("a Poisson draw needs one nonnegative value per column")

    def fix_counts(self) -> np.ndarray:
        return self.layout.expand(self.z)

    def centered_counts(self) -> np.ndarray:
        return self.fix_counts() - self.layout.divisor_counts()


def poisson_inversion_tables(ds: np.ndarray) -> np.ndarray:
    """CDF rows of Poisson(1/d) for each distinct d, padded to a common length."""
    support = np.arange(POISSON_TABLE_SIZE)
    return np.stack([stats.poisson.cdf(support, 1.0 / d) for d in ds])


def sample_poisson_columns(layout: LimitLayout, rng: np.random.Generator, size: int) -> np.ndarray:
    """Z of shape (size, columns) by inversion of the Poisson(1/d) cdf."""
    u = rng.random((size, layout.num_columns))
    z = np.zeros(u.shape, dtype=np.int64)
    unique_d = np.unique(layout.column_d)
    if len(unique_d) == 0:
        return z
    cdfs = poisson_inversion_tables(unique_d)
    for row, d in enumerate(unique_d):
        cols = np.flatnonzero(layout.column_d == d)
        z[:, cols] = np.searchsorted(cdfs[row], u[:, cols], side="right")
    return z


def sample_limit_model(spectrum: LengthSpectrum, L: float, rng: np.random.Generator,
                       support_radius: float = 1.0) -> PoissonDraw:
    layout = LimitLayout.from_spectrum(spectrum, L, support_radius)
    return PoissonDraw(spectrum, layout, sample_poisson_columns(layout, rng, 1)[0])


class LimitStatistic:
    """
    The oscillating term as a linear form in the Z columns.

    N^osc = sum_col w_col Z_col with w_col = d * sum_{d | a} coefficient(gamma, a);
    the centered statistic subtracts sum coefficient * tau(a).
    """

    def __init__(self, spectrum: LengthSpectrum, p: WindowParams, chi: Character,
                 spec: TestFunctionSpec):
        self.spectrum = spectrum
        self.terms = build_terms(spectrum, p, chi, spec)
        self.layout = LimitLayout.from_spectrum(spectrum, p.L, spec.support_radius)
        coeff = self.terms.coefficients
        lay = self.layout
        self.weights = np.bincount(lay.expand_col, weights=lay.expand_d * coeff[lay.expand_row],
                                   minlength=lay.num_columns)
        self.offset = -math.fsum(coeff[lay.expand_row])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return sample_poisson_columns(self.layout, rng, size)

    def n_osc(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float) @ self.weights

    def centered(self, z: np.ndarray) -> np.ndarray:
        return self.n_osc(z) + self.offset


def _terms_for_draw(draw: PoissonDraw, spec: TestFunctionSpec, p: WindowParams,
                    chi: Character) -> GeodesicTerms:
    terms = build_terms(draw.spectrum, p, chi, spec)
    if not draw.layout.matches(terms):
        raise InvariantViolation("the draw was made for a different window or spectrum")
    return terms


def n_osc_limit(draw: PoissonDraw, spec: TestFunctionSpec, p: WindowParams,
                chi: Character) -> float:
    terms = _terms_for_draw(draw, spec, p, chi)
    return math.fsum(terms.coefficients * draw.fix_counts())


def t_centered_limit(draw: PoissonDraw, spec: TestFunctionSpec, p: WindowParams,
                     chi: Character) -> float:
    """Centered by the exact limit means tau(a)."""
    terms = _terms_for_draw(draw, spec, p, chi)
    return math.fsum(terms.coefficients * draw.centered_counts())


# === Diag / Off and energy variance ===
CountSource = Union[PoissonDraw, HomSample]


def centered_values(source: CountSource, spectrum: LengthSpectrum, terms: GeodesicTerms,
                    means: Optional[np.ndarray] = None) -> np.ndarray:
    """
    f(gamma, a) = s(gamma, a) * (F(gamma^a) - mean) per row.

    Limit draws are centered at tau(a); covers at `means` when given (an
    empirical batch mean), else at tau(a) too.
    """
    if isinstance(source, PoissonDraw):
        counts = source.centered_counts()
    else:
        raw = fix_counts_for_terms(source.as_array()[None], spectrum, terms)[0].astype(float)
        if means is None:
            means = np.array([num_divisors(int(a)) for a in terms.power], dtype=float)
        counts = raw - means
    return terms.s * counts


@dataclass(frozen=True)
class PairTable:
    """Row pairs i < j of distinct classes with |x_i - x_j| < 1/T, and their w_hat weights."""

    first: np.ndarray
    second: np.ndarray
    weight: np.ndarray

    @classmethod
    def build(cls, terms: GeodesicTerms, T: float) -> "PairTable":
        x = terms.x
        order = np.argsort(x, kind="stable")
        xs = x[order]
        stop = np.searchsorted(xs, xs + 1.0 / T, side="left")
        span = np.maximum(stop - np.arange(len(xs)) - 1, 0)
        i_sorted = np.repeat(np.arange(len(xs)), span)
        starts = np.repeat(np.cumsum(span) - span, span)
        j_sorted = i_sorted + 1 + (np.arange(len(i_sorted)) - starts)
        first, second = order[i_sorted], order[j_sorted]
        distinct = terms.class_index[first] != terms.class_index[second]
        first, second = first[distinct], second[distinct]
        weight = np.asarray(w_hat_eval(T * (x[first] - x[second])), dtype=float).reshape(-1)
        return cls(first, second, weight)


def diag_off_values(f: np.ndarray, pairs: PairTable) -> Tuple[float, float]:
    diag = math.fsum(f * f) / (2.0 * math.pi)
    off = 2.0 * math.fsum(f[pairs.first] * f[pairs.second] * pairs.weight)
    return diag, off


def diag_off(source: CountSource, spec: TestFunctionSpec, spectrum: LengthSpectrum,
             p: WindowParams, chi: Character) -> Tuple[float, float]:
    """
    Diag = (1/2pi) sum f^2 and Off = sum over rows of distinct classes of
    f f w_hat(T (x - x')), with T = p.T.

    Same-class pairs of different powers sit at least one systole apart and
    drop out once T * systole >= 1.
    """
    terms = build_terms(spectrum, p, chi, spec)
    f = centered_values(source, spectrum, terms)
    return diag_off_values(f, PairTable.build(terms, p.T))


class EnergyKernel:
    """
    Quadratic form of the spectral route for fixed (terms, T):

    V = (4 pi / L^2) sum_ij f_i f_j [w_hat(T(x_i - x_j)) + w_hat(T(x_i + x_j))] - (E_T)^2,
    E_T = (2/L) sum_i f_i 2 pi w_hat(T x_i).
    """

    def __init__(self, terms: GeodesicTerms, T: float):
        self.terms = terms
        self.T = T
        x = terms.x
        self.matrix = (np.asarray(w_hat_eval(T * np.subtract.outer(x, x)))
                       + np.asarray(w_hat_eval(T * np.add.outer(x, x)))).reshape(len(x), len(x))
        self.mean_weights = 2.0 * math.pi * np.asarray(w_hat_eval(T * x), dtype=float).reshape(-1)

    def variance(self, f: np.ndarray) -> np.ndarray:
        """Works for one draw (rows,) or a batch (B, rows)."""
        L = self.terms.window.L
        quad_form = np.sum((f @ self.matrix) * f, axis=-1)
        mean = 2.0 / L * (f @ self.mean_weights)
        return 4.0 * math.pi / L ** 2 * quad_form - mean ** 2


def energy_series(f: np.ndarray, terms: GeodesicTerms) -> TrigSeries:
    """The centered statistic as a cosine series in alpha."""
    return TrigSeries.from_terms(terms.x, 2.0 / terms.window.L * f, tol=FREQUENCY_TOLERANCE)


def energy_variance_quadrature(f: np.ndarray, terms: GeodesicTerms, T: float,
                               cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """
    V_T of the centered statistic by adaptive quadrature over alpha.

    The integrand evaluates sum_i (2/L) f_i cos(alpha x_i) row by row; the
    cosine expansion only supplies the Fejer tail beyond the quadrature core.
    """
    coeffs = 2.0 / terms.window.L * np.asarray(f, dtype=float)
    if not np.any(coeffs):
        return 0.0
    x = terms.x

    def statistic(alpha: float) -> float:
        return float(coeffs @ np.cos(alpha * x))

    series = energy_series(f, terms)
    mean = expect_over_alpha(statistic, T, cfg, expansion=series)
    second = expect_over_alpha(lambda a: statistic(a) ** 2, T, cfg, expansion=series.squared())
    return second - mean * mean


def energy_variance(source: CountSource, spec: TestFunctionSpec, spectrum: LengthSpectrum,
                    p: WindowParams, chi: Character, route: str = "spectral",
                    cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """
    Centered energy variance V_{T,L} of one draw or cover, T = p.T.

    route "spectral" evaluates the w_hat-weighted double sum; route
    "quadrature" averages over alpha numerically. Both see the same f values.
    """
    terms = build_terms(spectrum, p, chi, spec)
    f = centered_values(source, spectrum, terms)
    if route == "spectral":
        return float(EnergyKernel(terms, p.T).variance(f))
    if route == "quadrature":
        return energy_variance_quadrature(f, terms, p.T, cfg)
    raise ValueError(f"unknown route {route!r}")
