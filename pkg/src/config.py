"""
Configuration constants and experiment configuration.

Constants are grouped by the module that consumes them; ExperimentConfig
mirrors the TOML/JSON documents accepted by the command line.
"""

import json
import math
import os
import tomllib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from src.errors import ConfigError

# === Paths ===
PROJECT_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = PROJECT_ROOT / "content" / "data"
BUILTIN_MODELS = {"bolza": DATA_DIR / "bolza.json"}
CACHE_ENV_VAR = "COVERS_CACHE_DIR"
DEFAULT_CACHE_DIR = ".covers_cache"

# === Words ===
LETTER_NAMES = "ab"  # a_i, b_i; capitals are inverses in the text format

# === Permutations / covers ===
ENUMERATION_MAX_DEGREE = 4
DEFAULT_MAX_ATTEMPTS = 10_000_000
SAMPLER_BATCH = 4096

# === Fuchsian models ===
DET_TOLERANCE = 1e-9
RELATION_TOLERANCE = 1e-9
HYPERBOLIC_MARGIN = 1e-9
MODEL_CHECK_WORD_LENGTH = 4

# === Spectrum enumeration ===
DEFAULT_DISPLACEMENT_SLACK = 1.0
SPECTRUM_CSV_DIGITS = 12
LENGTH_TRACE_TOLERANCE = 1e-9
MAX_BFS_NODES = 20_000_000

# === Test function / weight ===
DEFAULT_SUPPORT_RADIUS = 1.0
DEFAULT_PSI_FAMILY = "bump"
PSI_FAMILIES = ("bump", "zero")
DEFAULT_QUAD_TOL = 1e-10
DEFAULT_QUAD_LIMIT = 200
OSCILLATION_SPLIT = 100.0  # split oscillatory integrals at periods beyond this phase
PSI_NODES = 1024
N_DET_HALF_WIDTH = 400.0  # x-range for psi in the N^det integral
FEJER_CORE = 200.0  # core interval of the alpha-average, tail handled analytically
ALPHA_QUAD_CORE = 20.0  # core of direct alpha-quadrature when the tail comes from a cosine expansion
PERIODS_PER_PANEL = 8.0
JSON_DIGITS = 15

# === Window defaults ===
DEFAULT_ALPHA = 70.5
DEFAULT_GUE_PHASES = (1.0, math.sqrt(2.0), math.sqrt(3.0), math.sqrt(5.0))

# === Exact moments ===
MAX_MOMENT_ORDER = 6
BRUTE_FORCE_MAX_CLASSES = 6

# === Monte Carlo ===
MC_BLOCK_SIZE = 2000
FREQUENCY_TOLERANCE = 1e-9
STREAM_LIMIT = 1
STREAM_FINITE = 3
STREAM_HOMS = 4

# === Reports ===
REPORT_SCHEMA = "v1"
CSV_COLUMNS = ("L", "T", "k", "estimate", "se", "exact_ref")

EXPERIMENT_KINDS = ("clt", "energy-variance", "diag-trend")
EXPERIMENT_MODES = ("limit", "finite-n")


def cache_root(override: Optional[str] = None) -> Path:
    """Cache directory: explicit override, then the environment, then the default."""
    return Path(override or os.environ.get(CACHE_ENV_VAR) or DEFAULT_CACHE_DIR)


@dataclass(frozen=True)
class PsiConfig:
    support_radius: float = DEFAULT_SUPPORT_RADIUS
    family: str = DEFAULT_PSI_FAMILY
    scale: float = 1.0


@dataclass(frozen=True)
class QuadConfig:
    tol: float = DEFAULT_QUAD_TOL
    limit: int = DEFAULT_QUAD_LIMIT


@dataclass
class ExperimentConfig:
    """One experiment run. Mirrors the accepted config documents key for key."""

    kind: str = "clt"
    mode: str = "limit"
    n: int = 4
    genus: int = 2
    alpha: float = DEFAULT_ALPHA
    L: float = 10.0
    T: Optional[float] = None
    grid: List[List[float]] = field(default_factory=list)
    samples: int = 100_000
    seed: int = 0
    jobs: int = 1
    spectrum: Optional[str] = None
    model: str = "bolza"
    lmax: Optional[float] = None
    chi: Union[str, List[float]] = "trivial"
    moments: List[int] = field(default_factory=lambda: [2, 3, 4, 5, 6])
    oracle: bool = False
    dual_route_draws: int = 20
    psi: PsiConfig = field(default_factory=PsiConfig)
    quad: QuadConfig = field(default_factory=QuadConfig)
    out: Optional[str] = None
    cache_dir: Optional[str] = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"kind must be one of {EXPERIMENT_KINDS}, got {self.kind!r}")
        if self.mode not in EXPERIMENT_MODES:
            raise ConfigError(f"mode must be one of {EXPERIMENT_MODES}, got {self.mode!r}")
        if self.genus < 2:
            raise ConfigError("genus must be at least 2")
        if self.n < 1:
            raise ConfigError("n must be positive")
        if self.L <= 0:
            raise ConfigError("L must be positive")
        if self.T is not None and self.T <= 0:
            raise ConfigError("T must be positive")
        if self.samples < 2:
            raise ConfigError("samples must be at least 2")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if self.lmax is not None and self.lmax <= 0:
            raise ConfigError("lmax must be positive")
        if isinstance(self.chi, str):
            if self.chi not in ("trivial", "gue"):
                raise ConfigError("chi must be 'trivial', 'gue' or a list of 2g phases")
        elif len(self.chi) != 2 * self.genus:
            raise ConfigError(f"chi needs {2 * self.genus} phases, got {len(self.chi)}")
        for k in self.moments:
            if not 2 <= k <= MAX_MOMENT_ORDER:
                raise ConfigError(f"moment orders must lie in [2, {MAX_MOMENT_ORDER}]")
        for point in self.grid:
            if len(point) not in (1, 2) or any(v <= 0 for v in point):
                raise ConfigError(f"grid entries are [L] or [L, T] with positive values, got {point}")
        if self.psi.family not in PSI_FAMILIES:
            raise ConfigError(f"psi.family must be one of {PSI_FAMILIES}")
        if not 0 < self.psi.support_radius <= 1:
            raise ConfigError("psi.support_radius must lie in (0, 1]")
        if self.quad.tol <= 0:
            raise ConfigError("quad.tol must be positive")
        if self.dual_route_draws < 0:
            raise ConfigError("dual_route_draws must be nonnegative")

    def window_scales(self) -> List[float]:
        """Every L the experiment touches."""
        if self.grid:
            return [point[0] for point in self.grid]
        return [self.L]

    def required_cutoff(self) -> float:
        return self.lmax if self.lmax is not None else max(self.window_scales())

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _build(cls, raw: Dict[str, Any], where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a table, got {type(raw).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = dict(raw)
    if cls is ExperimentConfig:
        if "psi" in kwargs:
            kwargs["psi"] = _build(PsiConfig, kwargs["psi"], "psi")
        if "quad" in kwargs:
            kwargs["quad"] = _build(QuadConfig, kwargs["quad"], "quad")
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(raw: Dict[str, Any]) -> ExperimentConfig:
    return _build(ExperimentConfig, raw, "config")


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Load a TOML or JSON config, rejecting unknown keys at every level."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        if path.suffix == ".toml":
            with open(path, "rb") as f:
                raw = tomllib.load(f)
        elif path.suffix == ".json":
            with open(path, "r", encoding="utf-8") as f:
                raw = json.load(f)
        else:
            raise ConfigError(f"unsupported config format: {path.suffix}")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(raw)
