"""
Verification suite - exact identities by default, Monte Carlo and spectrum
checks with ``full=True``.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional

import numpy as np
from scipy import stats

from src.cache import ContentCache, cached_spectrum
from src.config import DEFAULT_ALPHA, STREAM_HOMS, ExperimentConfig
from src.experiments import energy_variance_experiment
from src.fuchsian import load_model, word_to_matrix
from src.kernels import (TestFunctionSpec, TrigSeries, WindowParams, expect_over_alpha,
                         fejer_cosine_average, h_hat_eval, h_hat_quadrature, sigma_for_character,
                         sigma_goe, w_hat_eval)
from src.limit_moments import (G, B_brute_force, B_eval, LimitMomentKey, PartitionOfK, R_exact,
                               central_moment_limit, limit_cross_moment,
                               multinomial, poisson_central_moment, sym_count)
from src.monte_carlo import block_rng, character_from_config, mc_central_moments
from src.permutations import (enumerate_hom_array, exact_finite_expectations, hom_count_formula,
                              sample_hom_array)
from src.spectrum import LengthSpectrum, counting_N0, enumerate_spectrum, synthetic_spectrum
from src.surface_group import Character

logger = logging.getLogger(__name__)

BOLZA_SYSTOLE = 2.0 * math.acosh(1.0 + math.sqrt(2.0))
SMALL_SPECTRUM = (3.0571418389619964, 3.4, 4.896905, 5.2, 5.828071)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


Check = Callable[[], CheckResult]


# === exact checks ===
def check_r_is_sigma_gcd() -> CheckResult:
    bad = [(a, b) for a in range(1, 25) for b in range(1, 25)
           if R_exact(LimitMomentKey((a, b))) != G(a, b)]
    return CheckResult("R(a,b) = sigma(gcd(a,b)), a,b <= 24", not bad,
                       f"mismatches: {bad[:5]}" if bad else "576 pairs exact")


def check_worked_example() -> CheckResult:
    inner = limit_cross_moment([LimitMomentKey((2, 3))])
    outer = limit_cross_moment([LimitMomentKey((2, 3)), LimitMomentKey((4,))])
    single = limit_cross_moment([LimitMomentKey((4,))])
    ok = inner == 5 and outer == 15 and single == 3
    return CheckResult("E[F(g^2)F(g^3)F(d^4)] = 15", ok, f"inner {inner}, full {outer}, E[F(d^4)] {single}")


def check_single_power_vanishes() -> CheckResult:
    values = [R_exact(LimitMomentKey((a,))) for a in range(1, 11)]
    consistent = (limit_cross_moment([LimitMomentKey((2, 3))]) - 2 * 2
                  == R_exact(LimitMomentKey((2, 3))) == 1)
    return CheckResult("R(a) = 0 and raw/centered consistency", all(v == 0 for v in values) and consistent,
                       f"R(1..10) = {[str(v) for v in values]}")


def check_poisson_moments() -> CheckResult:
    got = (poisson_central_moment(2, Fraction(1, 2)), poisson_central_moment(4, Fraction(1)),
           poisson_central_moment(3, Fraction(1, 3)))
    return CheckResult("Poisson central moments", got == (Fraction(1, 2), 4, Fraction(1, 3)),
                       ", ".join(str(v) for v in got))


def check_pairing_identity() -> CheckResult:
    ok = True
    for k in (2, 4, 6):
        r = PartitionOfK((2,) * (k // 2))
        ok &= Fraction(multinomial(k, r), sym_count(r)) == math.prod(range(k - 1, 0, -2))
    return CheckResult("multinomial / #Sym of 2^(k) = (k-1)!!", ok, "k = 2, 4, 6")


def check_hom_counts() -> CheckResult:
    found = {n: len(enumerate_hom_array(n, 2)) for n in (2, 3, 4)}
    formula = {n: hom_count_formula(n, 2) for n in (2, 3, 4)}
    ok = found == formula == {2: 16, 3: 486, 4: 34176}
    return CheckResult("#Hom(Gamma_2, S_n) for n = 2, 3, 4", ok, f"enumerated {found}, formula {formula}")


def check_h_hat_identity() -> CheckResult:
    spec = TestFunctionSpec()
    p = WindowParams(DEFAULT_ALPHA, 6.0)
    grid = np.linspace(0.05, 1.1 * p.L, 100)
    err = max(abs(h_hat_quadrature(spec, p, float(z)) - h_hat_eval(spec, p, float(z))) for z in grid)
    return CheckResult("closed-form h_hat vs quadrature", err <= 1e-6, f"max error {err:.2e}")


def check_fejer_average() -> CheckResult:
    grid = np.linspace(0.0, 2.0, 41)
    err = max(abs(fejer_cosine_average(float(x)) - 2.0 * math.pi * w_hat_eval(float(x))) for x in grid)
    for x in (0.5, 1.0, 3.0):
        for T in (8.0, 32.0):
            direct = expect_over_alpha(lambda a: math.cos(a * x), T,
                                       expansion=TrigSeries.from_terms([x], [1.0]))
            err = max(err, abs(direct - 2.0 * math.pi * w_hat_eval(T * x)))
    return CheckResult("E_T[cos(alpha x)] = 2 pi w_hat(T x)", err <= 1e-6,
                       f"max error {err:.2e} over T x in [0, 2] and x in (0.5, 1, 3), T in (8, 32)")


def check_gue_halving_exact() -> CheckResult:
    spec = TestFunctionSpec()
    goe = sigma_goe(spec)
    gue = sigma_for_character(spec, character_from_config("gue", 2))
    return CheckResult("Sigma^2_GUE = Sigma^2_GOE / 2", gue * 2 == goe, f"GOE {goe:.12g}, GUE {gue:.12g}")


def check_finite_expectations() -> CheckResult:
    got = {n: exact_finite_expectations(n, 2, [(0,)], [2])[0] for n in (2, 3)}
    ok = got == {2: [Fraction(1), Fraction(2)], 3: [Fraction(10, 9), Fraction(2)]}
    detail = "; ".join(f"n={n}: " + ", ".join(str(v) for v in vals) for n, vals in got.items())
    return CheckResult("exact E_n[F(a1^k)], k = 1, 2", ok, detail)


def check_b_structure() -> CheckResult:
    spectrum = synthetic_spectrum(SMALL_SPECTRUM, cutoff=10.0)
    p = WindowParams(DEFAULT_ALPHA, 10.0)
    spec = TestFunctionSpec()
    chi = Character.trivial(2)
    zero = all(B_eval(PartitionOfK(r), spectrum, p, chi, spec) == 0.0
               for r in ((2, 1), (1, 1), (3, 1), (2, 1, 1)))
    fast = B_eval(PartitionOfK((2, 2)), spectrum, p, chi, spec)
    brute = B_brute_force(PartitionOfK((2, 2)), spectrum, p, chi, spec)
    rel = abs(fast - brute) / max(abs(brute), 1e-300)
    return CheckResult("B(r) structure", zero and rel <= 1e-9,
                       f"parts of 1 vanish: {zero}; B(2,2) factorized vs brute force rel gap {rel:.2e}")


DEFAULT_CHECKS: List[Check] = [
    check_r_is_sigma_gcd, check_worked_example, check_single_power_vanishes, check_poisson_moments,
    check_pairing_identity, check_hom_counts, check_h_hat_identity, check_fejer_average,
    check_gue_halving_exact, check_finite_expectations, check_b_structure,
]


# === full checks ===
class FullChecks:
    """Checks needing the built-in spectrum or long Monte Carlo runs."""

    def __init__(self, cache: Optional[ContentCache] = None, samples: int = 100_000, seed: int = 0,
                 jobs: int = 1):
        self.cache = cache or ContentCache()
        self.samples = samples
        self.seed = seed
        self.jobs = jobs
        self._spectrum: Optional[LengthSpectrum] = None
        self._goe_report = None

    @property
    def spectrum(self) -> LengthSpectrum:
        if self._spectrum is None:
            self._spectrum = cached_spectrum("bolza", 10.0, cache=self.cache)
        return self._spectrum

    def spectrum_integrity(self) -> CheckResult:
        model = load_model("bolza")
        relator = word_to_matrix(model, model.presentation.relator)
        wider = enumerate_spectrum(model, 10.0, horizon=self.spectrum.horizon_word_length + 2)
        stable = wider.matches(self.spectrum)
        sys_gap = abs(self.spectrum.systole - BOLZA_SYSTOLE)
        n0 = counting_N0(self.spectrum, 10.0)
        ratio = n0 * 10.0 / math.exp(10.0)
        ok = relator.is_plus_minus_identity() and stable and sys_gap <= 1e-6 and math.isfinite(ratio)
        return CheckResult("spectrum integrity", ok,
                           f"horizon stable: {stable}; systole gap {sys_gap:.1e}; "
                           f"N0(10) = {n0}, N0 T / e^T = {ratio:.4f}")

    def sampler_fit(self) -> CheckResult:
        n, g = 3, 2
        points = enumerate_hom_array(n, g)
        base = n ** np.arange(2 * g * n)
        codes = points.reshape(len(points), -1) @ base
        order = np.argsort(codes)
        gens, _ = sample_hom_array(n, g, block_rng(self.seed, STREAM_HOMS), self.samples)
        index = np.searchsorted(codes[order], gens.reshape(len(gens), -1) @ base)
        counts = np.bincount(index, minlength=len(points))
        pvalue = float(stats.chisquare(counts).pvalue)
        fixed = np.count_nonzero(gens[:, 0] == np.arange(n), axis=-1)
        exact = np.count_nonzero(points[:, 0] == np.arange(n), axis=-1).mean()
        se = fixed.std(ddof=1) / math.sqrt(len(fixed))
        ok = pvalue > 1e-3 and abs(fixed.mean() - exact) <= 3 * se
        return CheckResult("uniform hom sampler (n=3, g=2)", ok,
                           f"chi-square p = {pvalue:.3g}; E[F(a1)] {fixed.mean():.4f} vs {exact:.4f}")

    def variance_trend(self) -> CheckResult:
        spec = TestFunctionSpec()
        chi = Character.trivial(2)
        goe = sigma_goe(spec)
        gaps = [abs(central_moment_limit(2, self.spectrum, WindowParams(DEFAULT_ALPHA, L), chi, spec)
                    / goe - 1.0) for L in (6.0, 8.0, 10.0)]
        ok = gaps[0] > gaps[1] > gaps[2] and gaps[2] <= 0.25
        return CheckResult("variance ratio trend", ok, "|V/Sigma^2 - 1| = " + ", ".join(f"{x:.3f}" for x in gaps))

    def odd_moment_decay(self) -> CheckResult:
        spec = TestFunctionSpec()
        chi = Character.trivial(2)
        Ls = np.array([5.0, 8.0, 10.0])
        k3 = np.array([abs(central_moment_limit(3, self.spectrum, WindowParams(DEFAULT_ALPHA, L), chi, spec))
                       for L in Ls])
        slope = float(np.polyfit(np.log(Ls), np.log(k3), 1)[0])
        return CheckResult("third moment decay", slope <= -2.0, f"fitted exponent {slope:.2f}")

    def _clt_config(self, chi) -> ExperimentConfig:
        return ExperimentConfig(kind="clt", mode="limit", L=10.0, samples=self.samples, seed=self.seed,
                                jobs=self.jobs, chi=chi, moments=[2, 3, 4])

    def _goe(self):
        if self._goe_report is None:
            self._goe_report = mc_central_moments(self._clt_config("trivial"), self.spectrum)
        return self._goe_report

    def clt(self) -> CheckResult:
        report = self._goe()
        refs = report.references
        return CheckResult("limit-model CLT at L=10", report.passed,
                           f"skew {refs['standardized_skew']:.3f}, kurtosis {refs['standardized_kurtosis']:.3f}; "
                           + ", ".join(f"{k}={v}" for k, v in report.flags.items()))

    def gue_halving(self) -> CheckResult:
        goe = self._goe()
        gue = mc_central_moments(self._clt_config("gue"), self.spectrum)
        ratio = gue.estimates[0]["value"] / goe.estimates[0]["value"]
        return CheckResult("GUE / GOE variance ratio at L=10", 0.4 <= ratio <= 0.6, f"ratio {ratio:.3f}")

    def energy_variance(self) -> CheckResult:
        cfg = ExperimentConfig(kind="energy-variance", mode="limit", grid=[[6, 48], [8, 64], [10, 80]],
                               samples=200, seed=self.seed, dual_route_draws=20)
        report = energy_variance_experiment(cfg, self.spectrum)
        medians = [e["value"] for e in report.estimates if e["k"] == "median_abs_deviation"]
        return CheckResult("energy variance", report.passed,
                           f"medians {', '.join(f'{m:.4f}' for m in medians)}; dual-route gap "
                           f"{report.references['dual_route_max_relative_gap']:.1e}")

    def checks(self) -> List[Check]:
        return [self.spectrum_integrity, self.sampler_fit, self.variance_trend, self.odd_moment_decay,
                self.clt, self.gue_halving, self.energy_variance]


def run_checks(full: bool = False, cache: Optional[ContentCache] = None, jobs: int = 1,
               on_result: Optional[Callable[[CheckResult], None]] = None) -> List[CheckResult]:
    """Run every check; an exception inside one check fails that check only."""
    checks = list(DEFAULT_CHECKS)
    if full:
        checks += FullChecks(cache, jobs=jobs).checks()
    results = []
    for check in checks:
        try:
            result = check()
        except Exception as exc:  # a crashing check is a failed check
            logger.exception("check %s raised", getattr(check, "__name__", check))
            result = CheckResult(getattr(check, "__name__", "check"), False, f"{type(exc).__name__}: {exc}")
        logger.info("%s: %s", result.name, "PASS" if result.passed else "FAIL")
        results.append(result)
        if on_result is not None:
            on_result(result)
    return results
