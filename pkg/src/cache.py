"""
Content cache - sha256-addressed JSON files for spectra and cover batches.

The file name is the digest of the canonical key document. A second write
under an existing key must reproduce the stored bytes exactly.
"""

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from src.config import DEFAULT_DISPLACEMENT_SLACK, MC_BLOCK_SIZE, STREAM_HOMS, cache_root
from src.errors import InvariantViolation, ParseError
from src.fuchsian import load_model
from src.permutations import relation_holds, sample_hom_array
from src.spectrum import LengthSpectrum, enumerate_spectrum, spectrum_from_dict, spectrum_to_dict

logger = logging.getLogger(__name__)


def _canonical(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


class ContentCache:
    def __init__(self, root: Optional[Union[str, Path]] = None):
        self.root = Path(root) if root is not None else cache_root()

    def key_digest(self, kind: str, key: Dict[str, Any]) -> str:
        return hashlib.sha256(_canonical({"kind": kind, "key": key}).encode("utf-8")).hexdigest()

    def path_for(self, kind: str, key: Dict[str, Any]) -> Path:
        return self.root / kind / f"{self.key_digest(kind, key)}.json"

    def load(self, kind: str, key: Dict[str, Any]) -> Optional[Dict[str, Any]]:
        path = self.path_for(kind, key)
        if not path.exists():
            return None
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"corrupt cache entry {path}: {exc}") from exc
        if doc.get("key") != key:
            raise InvariantViolation(f"cache entry {path} was written for another key")
        logger.debug("cache hit %s/%s", kind, path.name)
        return doc["value"]

    def store(self, kind: str, key: Dict[str, Any], value: Any) -> Path:
        path = self.path_for(kind, key)
        text = _canonical({"key": key, "value": value})
        if path.exists():
            if path.read_text(encoding="utf-8") != text:
                raise InvariantViolation(f"cache collision with different content at {path}")
            return path
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(text, encoding="utf-8")
        tmp.replace(path)
        logger.debug("cache store %s/%s", kind, path.name)
        return path


def cached_spectrum(model: str, L_max: float, horizon: Optional[int] = None,
                    slack: float = DEFAULT_DISPLACEMENT_SLACK,
                    cache: Optional[ContentCache] = None, progress=None) -> LengthSpectrum:
    """Spectrum of a built-in or file model, enumerated once per (model, L_max, horizon, slack)."""
    cache = cache or ContentCache()
    key = {"model": str(model), "lmax": float(L_max), "horizon": horizon, "slack": float(slack)}
    doc = cache.load("spectra", key)
    if doc is not None:
        return spectrum_from_dict(doc)
    spectrum = enumerate_spectrum(load_model(model), L_max, horizon, slack, progress)
    cache.store("spectra", key, spectrum_to_dict(spectrum))
    return spectrum


def hom_batch_rng(seed: int, block: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STREAM_HOMS, block)))


def sample_hom_blocks(n: int, g: int, seed: int, count: int, jobs: int = 1) -> np.ndarray:
    """Uniform homs drawn block by block from keyed streams; the result does not depend on jobs."""
    sizes = [min(MC_BLOCK_SIZE, count - start) for start in range(0, count, MC_BLOCK_SIZE)]

    def work(block: int) -> np.ndarray:
        return sample_hom_array(n, g, hom_batch_rng(seed, block), sizes[block])[0]

    if jobs == 1 or len(sizes) <= 1:
        parts = [work(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    if not parts:
        return np.zeros((0, 2 * g, n), dtype=np.int64)
    return np.concatenate(parts)


def cached_homs(n: int, g: int, seed: int, count: int,
                cache: Optional[ContentCache] = None, jobs: int = 1) -> np.ndarray:
    """Uniform homs for (n, g, seed, count), sampled once and then read back."""
    cache = cache or ContentCache()
    key = {"n": n, "g": g, "seed": seed, "count": count}
    doc = cache.load("homs", key)
    if doc is not None:
        gens = np.asarray(doc, dtype=np.int64).reshape(count, 2 * g, n)
        if not np.all(relation_holds(gens, g)):
            raise InvariantViolation("cached cover batch violates the surface relation")
        return gens
    gens = sample_hom_blocks(n, g, seed, count, jobs)
    cache.store("homs", key, gens.tolist())
    return gens
