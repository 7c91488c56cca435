"""
Geodesic terms - the (class, power) table shared by every trace-formula sum.

A pair (gamma, a) enters iff a * l_gamma < L * rho (rho = support radius of
psi_hat). Rows are in spectrum order, then by power.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.errors import SpectrumTooShort, WordsAbsent
from src.kernels import TestFunctionSpec, WindowParams, psi_hat_eval
from src.spectrum import LengthSpectrum
from src.surface_group import Character, char_eval

logger = logging.getLogger(__name__)


@dataclass
class GeodesicTerms:
    """
    Column arrays over the (class, power) rows.

    s = Re chi(gamma^a) * l * psi_hat(a l / L) / sinh(a l / 2) and
    h = s * cos(alpha a l); the oscillating sum is (2/L) * sum h * F(gamma^a).
    """

    window: WindowParams
    class_index: np.ndarray
    power: np.ndarray
    length: np.ndarray
    chi_re: np.ndarray
    s: np.ndarray
    max_power: np.ndarray  # per class
    class_lengths: np.ndarray
    spectrum_index: np.ndarray  # class -> position in the spectrum

    @property
    def x(self) -> np.ndarray:
        return self.power * self.length

    @property
    def h(self) -> np.ndarray:
        return self.s * np.cos(self.window.alpha * self.x)

    @property
    def coefficients(self) -> np.ndarray:
        """Weights of F(gamma^a) in the oscillating term."""
        return 2.0 / self.window.L * self.h

    @property
    def num_classes(self) -> int:
        return len(self.max_power)

    def __len__(self) -> int:
        return len(self.power)

    def rows_of(self, cls: int) -> np.ndarray:
        return np.flatnonzero(self.class_index == cls)


def character_values(spectrum: LengthSpectrum, chi: Character) -> np.ndarray:
    """chi(gamma) per class; trivial characters need no words."""
    if all(v == 1 for v in chi.values):
        return np.ones(len(spectrum.classes), dtype=complex)
    if not spectrum.has_words and spectrum.classes:
        raise WordsAbsent("a nontrivial character needs class words")
    return np.array([char_eval(chi, c.key.cyclic_word) for c in spectrum.classes], dtype=complex)


def truncation(lengths: np.ndarray, reach: float) -> Tuple[np.ndarray, np.ndarray]:
    """Classes with l < reach and, for each, the largest power a with a * l < reach."""
    kept = np.flatnonzero(lengths < reach)
    max_power = np.zeros(len(kept), dtype=np.int64)
    for j, i in enumerate(kept):
        kmax = int(math.ceil(reach / lengths[i])) - 1
        while (kmax + 1) * lengths[i] < reach:
            kmax += 1
        while kmax > 0 and kmax * lengths[i] >= reach:
            kmax -= 1
        max_power[j] = kmax
    return kept, max_power


def build_terms(spectrum: LengthSpectrum, p: WindowParams, chi: Character,
                spec: TestFunctionSpec) -> GeodesicTerms:
    if spectrum.cutoff < p.L * (1 - 1e-12):
        raise SpectrumTooShort(f"spectrum cutoff {spectrum.cutoff} is below L={p.L}")
    lengths = spectrum.lengths
    values = character_values(spectrum, chi)
    kept, max_power = truncation(lengths, p.L * spec.support_radius)
    cls_arr = np.repeat(np.arange(len(kept), dtype=np.int64), max_power)
    pw = np.concatenate([np.arange(1, k + 1, dtype=np.int64) for k in max_power]) \
        if len(kept) else np.zeros(0, dtype=np.int64)
    ln = lengths[kept][cls_arr]
    chi_re = (values[kept][cls_arr] ** pw).real
    x = pw * ln
    s = chi_re * ln * np.asarray(psi_hat_eval(spec, x / p.L)) / np.sinh(x / 2.0)
    logger.debug("built %d geodesic terms over %d classes (L=%.3f)", len(pw), len(kept), p.L)
    return GeodesicTerms(p, cls_arr, pw, ln, chi_re, s, max_power, lengths[kept], kept)
