"""
Monte Carlo Engine - central moments of the centered statistic

Draws come in fixed-size blocks, each with its own generator keyed by
(seed, stream, block), so the sample set does not depend on how many
workers share the blocks. Accumulators are merged in block order.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from src.cache import ContentCache, cached_spectrum
from src.config import (DEFAULT_GUE_PHASES, ENUMERATION_MAX_DEGREE, JSON_DIGITS, MAX_MOMENT_ORDER,
                        MC_BLOCK_SIZE, REPORT_SCHEMA, STREAM_FINITE, STREAM_LIMIT,
                        ExperimentConfig)
from src.errors import ConfigError, SpectrumTooShort
from src.geodesic_terms import build_terms
from src.kernels import QuadratureConfig, TestFunctionSpec, WindowParams, sigma_for_character
from src.limit_moments import central_moment_from_terms, gaussian_moment
from src.permutations import enumerate_hom_array, sample_hom_array
from src.spectrum import LengthSpectrum, load_spectrum
from src.statistic import LimitStatistic, fix_counts_for_terms
from src.surface_group import Character

logger = logging.getLogger(__name__)


# === random streams ===
def block_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for one block; key is (stream, ..., block)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def block_sizes(total: int, block: int = MC_BLOCK_SIZE) -> List[int]:
    full, rest = divmod(total, block)
    return [block] * full + ([rest] if rest else [])


# === accumulators ===
@dataclass
class RunningMoments:
    """
    Power sums of (x - shift) per batch, up to max_order.

    Central moments come from the pooled sums; their standard errors from
    the spread of per-batch estimates (batch means).
    """

    max_order: int = MAX_MOMENT_ORDER
    shift: float = 0.0
    batches: List[np.ndarray] = field(default_factory=list)

    def add(self, values: Sequence[float]) -> "RunningMoments":
        y = np.asarray(values, dtype=float) - self.shift
        row = np.array([float(len(y))] + [math.fsum(y ** p) for p in range(1, self.max_order + 1)])
        self.batches.append(row)
        return self

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        if other.max_order != self.max_order or other.shift != self.shift:
            raise ValueError("cannot merge accumulators of different order or shift")
        return RunningMoments(self.max_order, self.shift, self.batches + other.batches)

    @property
    def totals(self) -> np.ndarray:
        if not self.batches:
            return np.zeros(self.max_order + 1)
        return np.array([math.fsum(col) for col in np.array(self.batches).T])

    @property
    def count(self) -> int:
        return int(self.totals[0])

    def _shifted_mean(self) -> float:
        t = self.totals
        return t[1] / t[0]

    @staticmethod
    def _central(sums: np.ndarray, center: float, k: int) -> float:
        n = sums[0]
        return math.fsum(math.comb(k, j) * (sums[j] / n if j else 1.0) * (-center) ** (k - j)
                         for j in range(k + 1))

    def mean(self) -> float:
        return self._shifted_mean() + self.shift

    def central_moment(self, k: int) -> float:
        if not 1 <= k <= self.max_order:
            raise ValueError(f"order must lie in [1, {self.max_order}]")
        if self.count == 0:
            return math.nan
        return self._central(self.totals, self._shifted_mean(), k)

    def standard_error(self, k: int) -> float:
        """Batch-means standard error of the k-th central moment (nan with fewer than 2 batches)."""
        if len(self.batches) < 2:
            return math.nan
        center = self._shifted_mean()
        estimates = np.array([self._central(b, center, k) for b in self.batches])
        weights = np.array([b[0] for b in self.batches])
        # unequal batch sizes are weighted by their share of the draws
        mean = np.average(estimates, weights=weights)
        var = np.average((estimates - mean) ** 2, weights=weights) * len(estimates) / (len(estimates) - 1)
        return float(math.sqrt(var / len(estimates)))

    def standardized(self, k: int) -> float:
        return self.central_moment(k) / self.central_moment(2) ** (k / 2.0)


def population_central_moments(values: np.ndarray, orders: Sequence[int]) -> Dict[int, float]:
    """Central moments of a finite distribution given by equally weighted values."""
    values = np.asarray(values, dtype=float)
    centered = values - math.fsum(values) / len(values)
    return {k: math.fsum(centered ** k) / len(values) for k in orders}


def run_blocks(draw_block: Callable[[int, int], np.ndarray], total: int, jobs: int = 1,
               progress: Optional[Callable[[int], None]] = None) -> RunningMoments:
    """Evaluate every block (possibly in threads) and accumulate in block order."""
    sizes = block_sizes(total)

    def work(block: int) -> np.ndarray:
        values = draw_block(block, sizes[block])
        if progress is not None:
            progress(sizes[block])
        return values

    acc = RunningMoments()
    if jobs == 1:
        for b in range(len(sizes)):
            acc.add(work(b))
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for values in pool.map(work, range(len(sizes))):
                acc.add(values)
    logger.debug("accumulated %d draws in %d blocks", acc.count, len(sizes))
    return acc


# === reports ===
def rounded(x: Any) -> Any:
    """Round floats for JSON output; non-finite values become None."""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return float(f"{x:.{JSON_DIGITS}g}") if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, dict):
        return {k: rounded(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [rounded(v) for v in x]
    return x


@dataclass
class Report:
    kind: str
    config: Dict[str, Any]
    estimates: List[Dict[str, Any]] = field(default_factory=list)
    references: Dict[str, Any] = field(default_factory=dict)
    flags: Dict[str, bool] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    rows: List[Dict[str, Any]] = field(default_factory=list)
    timing: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def to_dict(self) -> Dict[str, Any]:
        """Report document; timing is kept out so reruns are byte-identical."""
        return rounded({
            "schema": REPORT_SCHEMA,
            "kind": self.kind,
            "config": self.config,
            "estimates": self.estimates,
            "references": self.references,
            "flags": self.flags,
            "notes": self.notes,
        })


# === experiment inputs ===
def character_from_config(chi, genus: int) -> Character:
    if chi == "trivial":
        return Character.trivial(genus)
    if chi == "gue":
        phases = list(DEFAULT_GUE_PHASES)
        extra = 6
        while len(phases) < 2 * genus:
            if int(math.isqrt(extra)) ** 2 != extra:
                phases.append(math.sqrt(extra))
            extra += 1
        return Character.from_phases(phases[:2 * genus])
    return Character.from_phases([float(v) for v in chi])


def psi_spec_from_config(cfg: ExperimentConfig) -> TestFunctionSpec:
    return TestFunctionSpec(cfg.psi.family, cfg.psi.support_radius, cfg.psi.scale)


def quadrature_from_config(cfg: ExperimentConfig) -> QuadratureConfig:
    return QuadratureConfig(cfg.quad.tol, cfg.quad.limit)


def resolve_spectrum(cfg: ExperimentConfig, progress=None) -> LengthSpectrum:
    """The configured spectrum file, or the model spectrum from the cache."""
    need = max(cfg.window_scales())
    if cfg.spectrum:
        spectrum = load_spectrum(cfg.spectrum)
    else:
        cache = ContentCache(cfg.cache_dir) if cfg.cache_dir else ContentCache()
        spectrum = cached_spectrum(cfg.model, cfg.required_cutoff(), cache=cache, progress=progress)
    if spectrum.cutoff < need * (1 - 1e-12):
        raise SpectrumTooShort(f"spectrum cutoff {spectrum.cutoff} is below L={need}")
    if spectrum.genus != cfg.genus:
        raise ConfigError(f"spectrum genus {spectrum.genus} does not match config genus {cfg.genus}")
    return spectrum


# === central moments ===
def _estimate_rows(cfg: ExperimentConfig, acc_values: Dict[int, float], ses: Dict[int, float],
                   exact: Dict[int, float]) -> List[Dict[str, Any]]:
    return [{"L": cfg.L, "T": cfg.T, "k": k, "estimate": acc_values[k], "se": ses[k],
             "exact_ref": exact.get(k)} for k in cfg.moments]


def mc_central_moments(cfg: ExperimentConfig, spectrum: Optional[LengthSpectrum] = None,
                       progress: Optional[Callable[[int], None]] = None) -> Report:
    """
    Central moments k in cfg.moments of the statistic, with batch-means SEs.

    limit mode samples the Poisson model and centers exactly; finite-n mode
    samples uniform covers and centers at the empirical mean. With
    cfg.oracle and n <= 4 the finite-n distribution is enumerated instead.

    Args:
        cfg: validated experiment configuration.
        spectrum: length spectrum; resolved from cfg when None.
        progress: optional callback receiving the size of each finished block.

    Returns:
        Report with one row per moment order, exact and Gaussian references
        where known, and bias flags.

    Raises:
        SpectrumTooShort: the spectrum cutoff is below cfg.L.
        ConfigError: genus mismatch, or the oracle asked for n above the cap.
    """
    started = time.perf_counter()
    spectrum = spectrum or resolve_spectrum(cfg)
    p = WindowParams(cfg.alpha, cfg.L, cfg.T or 1.0)
    chi = character_from_config(cfg.chi, cfg.genus)
    spec = psi_spec_from_config(cfg)
    terms = build_terms(spectrum, p, chi, spec)
    report = Report(cfg.kind, cfg.to_dict())

    values: Dict[int, float] = {}
    ses: Dict[int, float] = {}
    if cfg.mode == "limit":
        stat = LimitStatistic(spectrum, p, chi, spec)

        def draw_block(block: int, size: int) -> np.ndarray:
            return stat.centered(stat.sample(block_rng(cfg.seed, STREAM_LIMIT, block), size))

        acc = run_blocks(draw_block, cfg.samples, cfg.jobs, progress)
        report.notes.append("centering: exact limit means")
    elif cfg.oracle:
        if cfg.n > ENUMERATION_MAX_DEGREE:
            raise ConfigError(f"the enumeration oracle needs n <= {ENUMERATION_MAX_DEGREE}")
        gens = enumerate_hom_array(cfg.n, cfg.genus)
        dist = fix_counts_for_terms(gens, spectrum, terms) @ terms.coefficients
        exact_values = population_central_moments(dist, cfg.moments)
        acc = None
        values = exact_values
        ses = {k: 0.0 for k in cfg.moments}
        report.notes.append(f"finite-n enumeration oracle over {len(gens)} homs")
        report.references["finite_n_mean"] = math.fsum(dist) / len(dist)
    else:
        coefficients = terms.coefficients

        def draw_block(block: int, size: int) -> np.ndarray:
            gens, _ = sample_hom_array(cfg.n, cfg.genus, block_rng(cfg.seed, STREAM_FINITE, block), size)
            return fix_counts_for_terms(gens, spectrum, terms) @ coefficients

        acc = run_blocks(draw_block, cfg.samples, cfg.jobs, progress)
        report.notes.append("centering: empirical mean of the sampled covers")

    if acc is not None:
        values = {k: acc.central_moment(k) for k in cfg.moments}
        ses = {k: acc.standard_error(k) for k in cfg.moments}
        report.references["sample_mean"] = acc.mean()

    exact = {k: central_moment_from_terms(k, terms) for k in cfg.moments}
    sigma2 = sigma_for_character(spec, chi, quadrature_from_config(cfg))
    report.references.update({
        "exact_limit": {str(k): v for k, v in exact.items()},
        "gaussian": {str(k): gaussian_moment(k, exact[2] if 2 in exact else sigma2)
                     for k in cfg.moments},
        "sigma2": sigma2,
        "terms": len(terms),
        "classes": terms.num_classes,
    })
    report.estimates = [{"k": k, "value": values[k], "se": ses[k]} for k in cfg.moments]
    report.rows = _estimate_rows(cfg, values, ses, exact)

    if 2 in values and values[2] > 0:
        skew = values[3] / values[2] ** 1.5 if 3 in values else None
        kurt = values[4] / values[2] ** 2 if 4 in values else None
        report.references["standardized_skew"] = skew
        report.references["standardized_kurtosis"] = kurt
        if cfg.mode == "limit":
            for k in (2, 3, 4):
                if k in values:
                    report.flags[f"moment_{k}_within_3se"] = bool(
                        abs(values[k] - exact[k]) <= 3.0 * ses[k])
            if skew is not None:
                report.flags["skew_small"] = bool(abs(skew) <= 0.3)
            if kurt is not None:
                report.flags["kurtosis_gaussian"] = bool(2.4 <= kurt <= 3.6)
    report.timing["seconds"] = time.perf_counter() - started
    logger.info("central moments (%s mode, L=%g): %s", cfg.mode, cfg.L,
                ", ".join(f"k={k}: {values[k]:.6g}" for k in cfg.moments))
    return report
