"""
Length Spectrum - primitive unoriented closed geodesics up to a cutoff

Enumeration is a breadth-first walk over freely reduced words that never
contain more than half of a relator rotation (so no nonempty word is
trivial). A branch is dropped once its displacement of the base point
exceeds L_max plus twice the covering radius plus a slack: a closed geodesic
of length l has a conjugate whose axis passes within the covering radius of
the base point. Candidates with |trace| <= 2 cosh(L_max / 2) are
canonicalized and kept when primitive.
"""

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import numpy as np
from scipy.special import expi

from src.config import (DEFAULT_DISPLACEMENT_SLACK, HYPERBOLIC_MARGIN,
                        LENGTH_TRACE_TOLERANCE, MAX_BFS_NODES, SPECTRUM_CSV_DIGITS)
from src.errors import (CutoffExceeded, HorizonTooSmall, InvariantViolation,
                        NotHyperbolic, ParseError, WordsAbsent)
from src.fuchsian import FuchsianModel, translation_length, word_to_matrix
from src.surface_group import (Character, ConjClassKey, SurfaceGroupPresentation, Word,
                               cyclic_reduce_letters, canonical_class, canonicalizer_for, char_eval,
                               format_word, least_rotation, parse_word, primitive_root)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PrimitiveGeodesic:
    key: Optional[ConjClassKey]
    length: float
    trace: float
    word_length: int = 0

    def __post_init__(self):
        if self.length <= 0:
            raise InvariantViolation(f"geodesic length must be positive, got {self.length}")
        expected = 2.0 * math.acosh(max(abs(self.trace), 2.0) / 2.0)
        if abs(expected - self.length) > LENGTH_TRACE_TOLERANCE * max(1.0, self.length):
            raise InvariantViolation(
                f"length {self.length!r} does not match trace {self.trace!r}")

    @property
    def word(self) -> Optional[Word]:
        return self.key.cyclic_word if self.key is not None else None


@dataclass
class LengthSpectrum:
    cutoff: float
    classes: List[PrimitiveGeodesic]
    horizon_word_length: int = 0
    genus: int = 2
    model: str = "synthetic"
    meta: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.classes = sorted(self.classes, key=_order_key)
        keys = [c.key for c in self.classes if c.key is not None]
        if len(set(keys)) != len(keys):
            raise InvariantViolation("duplicate class keys in spectrum")
        for c in self.classes:
            if c.length > self.cutoff * (1 + 1e-12):
                raise InvariantViolation(f"length {c.length} exceeds cutoff {self.cutoff}")

    @property
    def systole(self) -> float:
        return self.classes[0].length if self.classes else math.inf

    @property
    def has_words(self) -> bool:
        return bool(self.classes) and all(c.key is not None for c in self.classes)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([c.length for c in self.classes], dtype=float)

    def truncated(self, cutoff: float) -> "LengthSpectrum":
        return LengthSpectrum(min(cutoff, self.cutoff),
                              [c for c in self.classes if c.length <= cutoff],
                              self.horizon_word_length, self.genus, self.model, dict(self.meta))

    def matches(self, other: "LengthSpectrum", tol: float = 1e-9) -> bool:
        if len(self.classes) != len(other.classes):
            return False
        return all(
            a.key == b.key and abs(a.length - b.length) <= tol * max(1.0, a.length)
            for a, b in zip(self.classes, other.classes)
        )


def _order_key(c: PrimitiveGeodesic):
    letters = c.key.letters if c.key is not None else ()
    return (c.length, len(letters), letters)


# === enumeration ===
def _multiply_rows(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.stack([
        a[:, 0] * x[0] + a[:, 1] * x[2],
        a[:, 0] * x[1] + a[:, 1] * x[3],
        a[:, 2] * x[0] + a[:, 3] * x[2],
        a[:, 2] * x[1] + a[:, 3] * x[3],
    ], axis=1)


def _geodesic_for(model: FuchsianModel, key: ConjClassKey) -> PrimitiveGeodesic:
    m = word_to_matrix(model, key.cyclic_word)
    return PrimitiveGeodesic(key, translation_length(m), m.trace, len(key.letters))


def enumerate_spectrum(model: FuchsianModel, L_max: float, horizon: Optional[int] = None,
                       slack: float = DEFAULT_DISPLACEMENT_SLACK,
                       progress=None) -> LengthSpectrum:
    """
    All primitive 𝒫₀ classes of length <= L_max.

    With ``horizon=None`` the walk runs until the displacement bound empties
    the frontier or the frontier is provably too long (c_min * (W - 4g) >
    L_max). With an explicit horizon W the walk stops at word length W and
    raises HorizonTooSmall unless that completeness test holds there.

    Args:
        model: Fuchsian model; needs a covering radius to bound the search.
        L_max: length cutoff.
        horizon: optional maximal word length W.
        slack: displacement allowed beyond L_max when pruning the frontier.
        progress: optional callback receiving per-level search counts.

    Returns:
        LengthSpectrum with cutoff L_max.

    Raises:
        HorizonTooSmall: the horizon or the node budget does not reach L_max.
        NotHyperbolic: a reduced word has |trace| <= 2.
    """
    p = model.presentation
    rank2 = 2 * p.rank
    half = p.half
    if model.covering_radius_cosh is None:
        raise ValueError(f"model {model.name} has no covering radius; cannot bound the search")
    margin = 2.0 * math.log(model.covering_radius_cosh)
    cosh_bound = math.cosh(L_max + margin + slack)
    trace_bound = 2.0 * math.cosh(L_max / 2.0) * (1 + 1e-12)

    letters = model.letter_matrices()
    forbidden = np.array(sorted(
        sum(c * rank2 ** (half - i) for i, c in enumerate(piece)) for piece in p.long_pieces
    ), dtype=np.int64)
    tail_mod = rank2 ** half

    canon = canonicalizer_for(p)
    seen_rotations = set()
    found: Dict[ConjClassKey, PrimitiveGeodesic] = {}

    mats = np.array([[1.0, 0.0, 0.0, 1.0]])
    words = np.zeros((1, 0), dtype=np.int8)
    tails = np.zeros(1, dtype=np.int64)
    nodes = 0
    level = 0
    c_min = math.inf
    while len(mats):
        if horizon is not None and level >= horizon:
            break
        last = words[:, -1] if level else np.full(len(mats), -1)
        new_mats, new_words, new_tails = [], [], []
        for x in range(rank2):
            ok = last != (x ^ 1)
            codes = tails * rank2 + x
            if level >= half:
                ok &= ~np.isin(codes, forbidden)
            idx = np.flatnonzero(ok)
            if not len(idx):
                continue
            prod = _multiply_rows(mats[idx], letters[x])
            keep = (prod ** 2).sum(axis=1) / 2.0 <= cosh_bound
            idx, prod = idx[keep], prod[keep]
            new_mats.append(prod)
            new_words.append(np.concatenate([words[idx], np.full((len(idx), 1), x, np.int8)], axis=1))
            new_tails.append(codes[idx] % tail_mod)
        level += 1
        if not new_mats:
            mats = np.zeros((0, 4))
            break
        mats = np.concatenate(new_mats)
        words = np.concatenate(new_words)
        tails = np.concatenate(new_tails)
        nodes += len(mats)
        if nodes > MAX_BFS_NODES:
            raise HorizonTooSmall(f"search exceeded {MAX_BFS_NODES} nodes at word length {level}")
        if not len(mats):
            break

        traces = np.abs(mats[:, 0] + mats[:, 3])
        bad = np.flatnonzero(traces <= 2.0 + HYPERBOLIC_MARGIN)
        if len(bad):
            w = Word(tuple(int(c) for c in words[bad[0]]))
            raise NotHyperbolic(f"word {format_word(w)} has |trace| {traces[bad[0]]!r}")
        for i in np.flatnonzero(traces <= trace_bound):
            cyc = least_rotation(cyclic_reduce_letters(words[i].tolist()))
            if cyc in seen_rotations:
                continue
            seen_rotations.add(cyc)
            key = canon.key(Word(cyc))
            if key in found:
                continue
            root, q = primitive_root(key, p)
            if q == 1:
                found[key] = _geodesic_for(model, key)
            elif root not in found:
                geo = _geodesic_for(model, root)
                if geo.length <= L_max:
                    found[root] = geo

        c_min = float(np.min(2.0 * np.arccosh(traces / 2.0))) / level
        logger.debug("word length %d: frontier %d, classes %d", level, len(mats), len(found))
        if progress is not None:
            progress(level, len(mats), len(found))
        if horizon is None and c_min * (level - 4 * p.genus) > L_max:
            break

    if horizon is not None and len(mats) and c_min * (horizon - 4 * p.genus) <= L_max:
        raise HorizonTooSmall(
            f"horizon {horizon} is too small for L_max={L_max} (c_min={c_min:.4f})")
    classes = [g for g in found.values() if g.length <= L_max]
    logger.info("enumerated %d primitive classes up to length %.3f (%d nodes, word length %d)",
                len(classes), L_max, nodes, level)
    return LengthSpectrum(L_max, classes, horizon_word_length=level, genus=p.genus,
                          model=model.name, meta={"slack": slack, "nodes": nodes})


# === counting functions ===
def _check_cutoff(s: LengthSpectrum, T: float) -> None:
    if T > s.cutoff * (1 + 1e-12):
        raise CutoffExceeded(f"T={T} exceeds the spectrum cutoff {s.cutoff}")


def counting_N0(s: LengthSpectrum, T: float) -> int:
    """Oriented primitive geodesics of length <= T."""
    _check_cutoff(s, T)
    return 2 * int(np.count_nonzero(s.lengths <= T))


def counting_N(s: LengthSpectrum, T: float) -> int:
    """Oriented closed geodesics (all powers) of length <= T."""
    _check_cutoff(s, T)
    return 2 * int(sum(math.floor(T / l) for l in s.lengths if l <= T))


def counting_Nchi(s: LengthSpectrum, T: float, chi: Character) -> float:
    _check_cutoff(s, T)
    total = 0.0
    for c in s.classes:
        if c.length > T:
            break
        if chi.values and all(v == 1 for v in chi.values):
            value = 1.0 + 0j
        elif c.key is None:
            raise WordsAbsent("twisted counts need class words")
        else:
            value = char_eval(chi, c.key.cyclic_word)
        total += sum((value ** k).real for k in range(1, math.floor(T / c.length) + 1))
    return 2.0 * total


def counting_li(T: float) -> float:
    """Li(e^T) = Ei(T), the main term of the oriented prime count."""
    return float(expi(T))


# === files ===
def spectrum_to_csv(s: LengthSpectrum) -> str:
    buf = io.StringIO()
    buf.write(f"# cutoff={s.cutoff!r}\n")
    buf.write(f"# horizon={s.horizon_word_length}\n")
    buf.write(f"# genus={s.genus}\n")
    buf.write(f"# model={s.model}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["word", "length", "trace"])
    fmt = f"{{:.{SPECTRUM_CSV_DIGITS}g}}"
    for c in s.classes:
        word = format_word(c.key.cyclic_word) if c.key is not None else ""
        writer.writerow([word, fmt.format(c.length), fmt.format(c.trace)])
    return buf.getvalue()


def save_spectrum(s: LengthSpectrum, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(spectrum_to_csv(s), encoding="utf-8")


def load_spectrum(path: Union[str, Path], check_primitive: bool = True) -> LengthSpectrum:
    """Read a spectrum CSV; words may be empty for synthetic spectra."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read spectrum {path}: {exc}") from exc
    return parse_spectrum(text, check_primitive=check_primitive)


def parse_spectrum(text: str, check_primitive: bool = True) -> LengthSpectrum:
    meta: Dict[str, str] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            name, _, value = line[1:].strip().partition("=")
            meta[name.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    if not rows or [h.strip() for h in rows[0]] != ["word", "length", "trace"]:
        raise ParseError("spectrum header must be word,length,trace")
    genus = int(meta.get("genus", 2))
    presentation = SurfaceGroupPresentation(genus)
    classes = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise ParseError(f"line {lineno}: expected 3 fields, got {len(row)}")
        try:
            length, trace = float(row[1]), float(row[2])
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
        key = None
        if row[0].strip():
            word = parse_word(row[0], genus)
            key = canonical_class(word, presentation)
            if key.letters != word.letters:
                raise InvariantViolation(f"line {lineno}: {row[0]!r} is not a canonical class word")
            if check_primitive and primitive_root(key, presentation)[1] != 1:
                raise InvariantViolation(f"line {lineno}: {row[0]!r} is not primitive")
        classes.append(PrimitiveGeodesic(key, length, trace, len(key.letters) if key else 0))
    try:
        cutoff = float(meta["cutoff"]) if "cutoff" in meta else max(
            (c.length for c in classes), default=0.0)
        horizon = int(meta.get("horizon", 0))
    except ValueError as exc:
        raise ParseError(f"bad spectrum metadata: {exc}") from exc
    return LengthSpectrum(cutoff, classes, horizon, genus, meta.get("model", "synthetic"))


def synthetic_spectrum(lengths: Iterable[float], cutoff: Optional[float] = None,
                       genus: int = 2) -> LengthSpectrum:
    """Word-free spectrum from bare lengths; usable by the limit model only."""
    classes = [PrimitiveGeodesic(None, float(l), 2.0 * math.cosh(float(l) / 2.0)) for l in lengths]
    top = max((c.length for c in classes), default=0.0)
    return LengthSpectrum(cutoff if cutoff is not None else top, classes, 0, genus, "synthetic")


def spectrum_to_dict(s: LengthSpectrum) -> Dict:
    """Full-precision JSON form used by the cache."""
    return {
        "cutoff": s.cutoff,
        "horizon": s.horizon_word_length,
        "genus": s.genus,
        "model": s.model,
        "meta": s.meta,
        "classes": [
            [list(c.key.letters) if c.key is not None else None, c.length, c.trace, c.word_length]
            for c in s.classes
        ],
    }


def spectrum_from_dict(doc: Dict) -> LengthSpectrum:
    classes = []
    for letters, length, trace, word_length in doc["classes"]:
        key = ConjClassKey(Word(tuple(letters), reduced=True)) if letters is not None else None
        classes.append(PrimitiveGeodesic(key, length, trace, word_length))
    return LengthSpectrum(doc["cutoff"], classes, doc["horizon"], doc["genus"],
                          doc["model"], dict(doc.get("meta", {})))
