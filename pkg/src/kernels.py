"""
Analysis kernels - test function, window, weight and their transforms.

Fourier convention: psi_hat(s) = (1/2pi) * int psi(x) exp(-isx) dx, so
psi(x) = int psi_hat(s) exp(isx) ds. The window is
h(r) = psi(L(r - alpha)) + psi(L(r + alpha)) and the averaging weight is the
Fejer kernel w with triangular w_hat.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, List, Optional, Tuple, Union

import numpy as np
from scipy import integrate
from scipy.integrate import IntegrationWarning
from scipy.special import sici

from src.config import (ALPHA_QUAD_CORE, DEFAULT_PSI_FAMILY, DEFAULT_QUAD_LIMIT, DEFAULT_QUAD_TOL,
                        DEFAULT_SUPPORT_RADIUS, FEJER_CORE, FREQUENCY_TOLERANCE,
                        N_DET_HALF_WIDTH, OSCILLATION_SPLIT, PERIODS_PER_PANEL, PSI_FAMILIES,
                        PSI_NODES)
from src.errors import QuadratureFailure
from src.surface_group import Character, SymmetryClass, char_symmetry_class

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class QuadratureConfig:
    tol: float = DEFAULT_QUAD_TOL
    limit: int = DEFAULT_QUAD_LIMIT

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("quadrature tolerance must be positive")


@dataclass(frozen=True)
class TestFunctionSpec:
    """
    psi_hat(s) = scale * e * exp(-1 / (1 - (s/rho)^2)) on |s| < rho, so psi_hat(0) = scale.

    The "zero" family is the identically vanishing test function.
    """

    __test__ = False  # not a pytest class

    family: str = DEFAULT_PSI_FAMILY
    support_radius: float = DEFAULT_SUPPORT_RADIUS
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in PSI_FAMILIES:
            raise ValueError(f"unknown psi family {self.family!r}")
        if not 0 < self.support_radius <= 1:
            raise ValueError("support radius must lie in (0, 1]")

    @property
    def normalization(self) -> float:
        return 0.0 if self.family == "zero" else self.scale * math.e


@dataclass(frozen=True)
class WeightSpec:
    """Fejer kernel: w(x) = (1/2pi) (sin(x/2) / (x/2))^2, w_hat(s) = max(0, 1 - |s|) / 2pi."""

    support: float = 1.0


@dataclass(frozen=True)
class WindowParams:
    alpha: float
    L: float
    T: float = 1.0

    def __post_init__(self):
        if self.L <= 0 or self.T <= 0:
            raise ValueError("window scales L and T must be positive")


def quad(func: Callable, a: float, b: float, cfg: QuadratureConfig = QuadratureConfig(),
         **kwargs) -> float:
    """scipy quad with integration warnings promoted to QuadratureFailure."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, _ = integrate.quad(func, a, b, epsabs=cfg.tol, epsrel=cfg.tol,
                                      limit=cfg.limit, **kwargs)
        except IntegrationWarning as exc:
            raise QuadratureFailure(f"quadrature on [{a}, {b}] failed: {exc}") from exc
    return float(value)


# === test function ===
def psi_hat_eval(spec: TestFunctionSpec, s: ArrayLike) -> ArrayLike:
    s = np.asarray(s, dtype=float)
    t = s / spec.support_radius
    inside = np.abs(t) < 1.0
    safe = np.where(inside, t, 0.0)
    out = np.where(inside, spec.normalization * np.exp(-1.0 / (1.0 - safe * safe)), 0.0)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=None)
def _legendre_nodes(count: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(count)


def _psi_vectorized(spec: TestFunctionSpec, x: np.ndarray) -> np.ndarray:
    nodes, weights = _legendre_nodes(PSI_NODES)
    rho = spec.support_radius
    s = 0.5 * rho * (nodes + 1.0)
    wts = 0.5 * rho * weights * psi_hat_eval(spec, s)
    return 2.0 * np.cos(np.multiply.outer(x, s)) @ wts


def psi_eval(spec: TestFunctionSpec, r: ArrayLike, cfg: QuadratureConfig = QuadratureConfig()) -> ArrayLike:
    """
    psi(r) = 2 int_0^rho psi_hat(s) cos(sr) ds.

    Scalars go through adaptive cosine-weighted quadrature; arrays through a
    fixed Gauss-Legendre rule, accurate to ~1e-12 for |r| up to a few hundred.
    """
    if spec.family == "zero":
        return np.zeros_like(np.asarray(r, dtype=float)) if np.ndim(r) else 0.0
    if np.ndim(r) == 0:
        return 2.0 * quad(lambda s: psi_hat_eval(spec, s), 0.0, spec.support_radius, cfg,
                          weight="cos", wvar=abs(float(r)))
    return _psi_vectorized(spec, np.asarray(r, dtype=float))


def psi_integral(spec: TestFunctionSpec) -> float:
    """int psi = 2 pi psi_hat(0)."""
    return 2.0 * math.pi * psi_hat_eval(spec, 0.0)


# === window ===
def h_eval(spec: TestFunctionSpec, p: WindowParams, r: ArrayLike) -> ArrayLike:
    r = np.asarray(r, dtype=float)
    args = np.stack([np.atleast_1d(p.L * (r - p.alpha)), np.atleast_1d(p.L * (r + p.alpha))])
    vals = _psi_vectorized(spec, args).sum(axis=0) if spec.family != "zero" else np.zeros(args.shape[1:])
    return float(vals[0]) if r.ndim == 0 else vals


def h_hat_eval(spec: TestFunctionSpec, p: WindowParams, zeta: ArrayLike) -> ArrayLike:
    """Closed form (2 cos(alpha zeta) / L) psi_hat(zeta / L); zero for |zeta| >= L rho."""
    zeta = np.asarray(zeta, dtype=float)
    out = 2.0 * np.cos(p.alpha * zeta) / p.L * np.asarray(psi_hat_eval(spec, zeta / p.L))
    return float(out) if out.ndim == 0 else out


def _panels(lo: float, hi: float, width: float) -> List[Tuple[float, float]]:
    count = max(1, int(math.ceil((hi - lo) / width)))
    edges = np.linspace(lo, hi, count + 1)
    return list(zip(edges[:-1], edges[1:]))


def h_hat_quadrature(spec: TestFunctionSpec, p: WindowParams, zeta: float,
                     cfg: QuadratureConfig = QuadratureConfig(),
                     half_width: float = 200.0) -> float:
    """
    (1/2pi) int h(x) exp(-i zeta x) dx = (1/pi) int_0^inf h(x) cos(zeta x) dx by direct quadrature.

    Only the parts of [0, inf) where one of the two bumps of h is not
    negligible are integrated; they are split into panels short against both
    the oscillation of cos(zeta x) and the width 1/L of the bumps.
    """
    reach = half_width / p.L
    segments = [(max(0.0, p.alpha - reach), p.alpha + reach)]
    if reach > p.alpha:
        segments = [(0.0, p.alpha + reach)]
    width = 20.0 / p.L
    if zeta > 0:
        width = min(width, OSCILLATION_SPLIT / zeta)
    total = 0.0
    for lo, hi in segments:
        for a, b in _panels(lo, hi, width):
            total += quad(lambda x: h_eval(spec, p, x), a, b, cfg, weight="cos", wvar=zeta)
    return total / math.pi


# === variance functionals ===
def sigma_goe(spec: TestFunctionSpec, cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """Sigma^2_GOE = 2 int |x| psi_hat(x)^2 dx."""
    if spec.family == "zero":
        return 0.0
    return 4.0 * quad(lambda x: x * psi_hat_eval(spec, x) ** 2, 0.0, spec.support_radius, cfg)


def sigma_goe_legendre(spec: TestFunctionSpec, nodes: int = 400) -> float:
    """Same functional by a fixed Gauss-Legendre rule (independent cross-check)."""
    x, w = _legendre_nodes(nodes)
    s = 0.5 * spec.support_radius * (x + 1.0)
    return 4.0 * float(np.sum(0.5 * spec.support_radius * w * s * psi_hat_eval(spec, s) ** 2))


def sigma_for_character(spec: TestFunctionSpec, chi: Character,
                        cfg: QuadratureConfig = QuadratureConfig()) -> float:
    goe = sigma_goe(spec, cfg)
    return goe if char_symmetry_class(chi) is SymmetryClass.GOE else goe / 2.0


# === deterministic term ===
def n_det(n: int, g: int, spec: TestFunctionSpec, p: WindowParams,
          cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """
    N^det = n (g - 1) int h(r) r tanh(pi r) dr
          = (2 n (g - 1) / L) int psi(u) rho(alpha + u / L) du,  rho(r) = r tanh(pi r).
    """
    if g < 2:
        raise ValueError("genus must be at least 2")
    if spec.family == "zero":
        return 0.0

    def integrand(u: float) -> float:
        r = p.alpha + u / p.L
        return float(_psi_vectorized(spec, np.array([u]))[0]) * r * math.tanh(math.pi * r)

    total = sum(quad(integrand, a, b, cfg)
                for a, b in _panels(-N_DET_HALF_WIDTH, N_DET_HALF_WIDTH, 20.0))
    return 2.0 * n * (g - 1) * total / p.L


def mean_asymptotic(n: int, g: int, spec: TestFunctionSpec, p: WindowParams) -> float:
    """Large-alpha leading term n (g - 1) C_alpha (1/L) int psi with C_alpha = 2 alpha tanh(pi alpha)."""
    c_alpha = 2.0 * p.alpha * math.tanh(math.pi * p.alpha)
    return n * (g - 1) * c_alpha * psi_integral(spec) / p.L


# === averaging weight ===
def w_eval(x: ArrayLike) -> ArrayLike:
    out = np.sinc(np.asarray(x, dtype=float) / (2.0 * math.pi)) ** 2 / (2.0 * math.pi)
    return float(out) if out.ndim == 0 else out


def w_hat_eval(s: ArrayLike) -> ArrayLike:
    out = np.maximum(0.0, 1.0 - np.abs(np.asarray(s, dtype=float))) / (2.0 * math.pi)
    return float(out) if out.ndim == 0 else out


def _cosine_tail(a: float, start: float, cfg: QuadratureConfig) -> float:
    """int_start^inf cos(a u) / u^2 du."""
    if a * start < 1e-9:
        return 1.0 / start
    return quad(lambda u: 1.0 / (u * u), start, np.inf, cfg, weight="cos", wvar=a)


@lru_cache(maxsize=200_000)
def _fejer_cosine(omega: float, tol: float, limit: int) -> float:
    cfg = QuadratureConfig(tol, limit)
    core = sum(quad(w_eval, a, b, cfg, weight="cos", wvar=omega)
               for a, b in _panels(0.0, FEJER_CORE, 20.0 * math.pi))
    # w(u) = (1 - cos u) / (pi u^2) beyond the core
    tail = (_cosine_tail(omega, FEJER_CORE, cfg)
            - 0.5 * _cosine_tail(omega + 1.0, FEJER_CORE, cfg)
            - 0.5 * _cosine_tail(abs(omega - 1.0), FEJER_CORE, cfg)) / math.pi
    return 2.0 * (core + tail)


def fejer_cosine_average(omega: float, cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """int w(u) cos(omega u) du by quadrature (equals 2 pi w_hat(omega))."""
    return _fejer_cosine(round(abs(float(omega)), 12), cfg.tol, cfg.limit)


@dataclass
class TrigSeries:
    """f(alpha) = constant + sum_j coeffs[j] cos(freqs[j] alpha), frequencies > 0 and distinct."""

    freqs: np.ndarray
    coeffs: np.ndarray
    constant: float = 0.0

    @classmethod
    def from_terms(cls, freqs: Iterable[float], coeffs: Iterable[float], constant: float = 0.0,
                   tol: float = FREQUENCY_TOLERANCE) -> "TrigSeries":
        """Merge terms whose frequencies agree to tol; zero frequencies join the constant."""
        f = np.abs(np.asarray(list(freqs), dtype=float))
        c = np.asarray(list(coeffs), dtype=float)
        order = np.argsort(f, kind="stable")
        f, c = f[order], c[order]
        merged_f: List[float] = []
        merged_c: List[float] = []
        for fi, ci in zip(f, c):
            if fi <= tol:
                constant += ci
            elif merged_f and fi - merged_f[-1] <= tol * max(1.0, fi):
                merged_c[-1] += ci
            else:
                merged_f.append(fi)
                merged_c.append(ci)
        return cls(np.array(merged_f), np.array(merged_c), constant)

    def __call__(self, alpha: ArrayLike) -> ArrayLike:
        alpha = np.asarray(alpha, dtype=float)
        out = self.constant + np.cos(np.multiply.outer(alpha, self.freqs)) @ self.coeffs
        return float(out) if out.ndim == 0 else out

    @property
    def bandwidth(self) -> float:
        return float(self.freqs.max()) if len(self.freqs) else 0.0

    def squared(self) -> "TrigSeries":
        """Product-to-sum: cos x cos y = (cos(x - y) + cos(x + y)) / 2."""
        f, c = self.freqs, self.coeffs
        diff = np.abs(np.subtract.outer(f, f)).ravel()
        summ = np.add.outer(f, f).ravel()
        prod = 0.5 * np.multiply.outer(c, c).ravel()
        freqs = np.concatenate([diff, summ, f])
        coeffs = np.concatenate([prod, prod, 2.0 * self.constant * c])
        return TrigSeries.from_terms(freqs, coeffs, self.constant ** 2)


def _cos_over_square(a: ArrayLike, start: float) -> ArrayLike:
    """int_start^inf cos(a u) / u^2 du for a >= 0, through the sine integral."""
    a = np.asarray(a, dtype=float)
    si, _ = sici(a * start)
    out = np.cos(a * start) / start - a * (0.5 * math.pi - si)
    return float(out) if out.ndim == 0 else out


def fejer_tail(F: TrigSeries, T: float, start: float) -> float:
    """2 int_start^inf F(T u) w(u) du in closed form, w(u) = (1 - cos u) / (pi u^2)."""
    a = T * F.freqs
    per_term = (_cos_over_square(a, start) - 0.5 * _cos_over_square(a + 1.0, start)
                - 0.5 * _cos_over_square(np.abs(a - 1.0), start))
    constant = _cos_over_square(0.0, start) - _cos_over_square(1.0, start)
    return 2.0 / math.pi * (F.constant * constant + math.fsum(np.asarray(F.coeffs * per_term).ravel()))


def fejer_core(F: Callable[[float], float], T: float, start: float, bandwidth: float,
               cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """
    2 int_0^start F(T u) w(u) du for an even F by adaptive quadrature.

    Args:
        F: even function of alpha, evaluated pointwise.
        T: averaging scale.
        start: end of the core in u = alpha / T.
        bandwidth: largest angular frequency of F in alpha; panels span
            PERIODS_PER_PANEL periods of F(T u).

    Returns:
        The core part of E_T[F].
    """
    omega = T * bandwidth
    width = 20.0 * math.pi
    if omega > 0:
        width = min(width, PERIODS_PER_PANEL * 2.0 * math.pi / omega)
    return 2.0 * math.fsum(quad(lambda u: F(T * u) * w_eval(u), a, b, cfg)
                           for a, b in _panels(0.0, start, width))


def expect_over_alpha(F: Union[TrigSeries, Callable[[float], float]], T: float,
                      cfg: QuadratureConfig = QuadratureConfig(),
                      expansion: Optional[TrigSeries] = None) -> float:
    """
    E_T[F] = (1/T) int F(alpha) w(alpha / T) d alpha.

    Cosine series are averaged term by term (each term one cached quadrature).
    Other callables are integrated directly in u = alpha / T. When an
    ``expansion`` (a cosine series equal to F) is given, F itself is integrated
    over |u| <= ALPHA_QUAD_CORE and only the tail beyond uses the expansion,
    in closed form.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if isinstance(F, TrigSeries):
        return F.constant + float(sum(
            c * fejer_cosine_average(T * f, cfg) for f, c in zip(F.freqs, F.coeffs)))
    if expansion is not None:
        return (fejer_core(F, T, ALPHA_QUAD_CORE, expansion.bandwidth, cfg)
                + fejer_tail(expansion, T, ALPHA_QUAD_CORE))

    def envelope(u: float) -> float:
        return (F(T * u) + F(-T * u)) / (math.pi * u * u)

    core = sum(quad(lambda u: (F(T * u) + F(-T * u)) * w_eval(u), a, b, cfg)
               for a, b in _panels(0.0, FEJER_CORE, 20.0 * math.pi))
    # w(u) = (1 - cos u) / (pi u^2) beyond the core
    tail = (quad(envelope, FEJER_CORE, np.inf, cfg)
            - quad(envelope, FEJER_CORE, np.inf, cfg, weight="cos", wvar=1.0))
    return core + tail


def variance_over_alpha(F: TrigSeries, T: float, cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """V_T[F] = E_T[F^2] - E_T[F]^2."""
    mean = expect_over_alpha(F, T, cfg)
    return expect_over_alpha(F.squared(), T, cfg) - mean * mean
