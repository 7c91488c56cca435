"""
Permutations and covers - Hom(Gamma, S_n)

Permutations compose left to right: (p . q)(i) = q(p(i)), so the monodromy
of a path reads in the order its letters are traversed. Batches of
permutations are numpy arrays of shape (..., n), and the same convention is
``np.take_along_axis(q, p, axis=-1)``.
"""

import itertools
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from sympy.utilities.iterables import partitions as sympy_partitions

from src.config import DEFAULT_MAX_ATTEMPTS, ENUMERATION_MAX_DEGREE, SAMPLER_BATCH
from src.errors import (AttemptsExhausted, DegreeMismatch, DegreeTooLarge,
                        InvariantViolation, ParseError)
from src.surface_group import SurfaceGroupPresentation, Word

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CycleType:
    """Cycle lengths c with multiplicities m_c, sorted by c."""

    counts: Tuple[Tuple[int, int], ...]

    @property
    def n(self) -> int:
        return sum(c * m for c, m in self.counts)

    def fix_count(self, k: int) -> int:
        return sum(c * m for c, m in self.counts if k % c == 0)


@dataclass(frozen=True)
class Permutation:
    images: Tuple[int, ...]

    def __post_init__(self):
        images = tuple(int(i) for i in self.images)
        if sorted(images) != list(range(len(images))):
            raise ValueError(f"not a permutation of range({len(images)}): {images}")
        object.__setattr__(self, "images", images)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def from_cycles(cls, n: int, cycles: Sequence[Sequence[int]]) -> "Permutation":
        images = list(range(n))
        for cyc in cycles:
            for a, b in zip(cyc, list(cyc[1:]) + [cyc[0]]):
                images[a] = b
        return cls(tuple(images))

    @property
    def n(self) -> int:
        return len(self.images)

    def inverse(self) -> "Permutation":
        out = [0] * self.n
        for i, j in enumerate(self.images):
            out[j] = i
        return Permutation(tuple(out))

    def is_identity(self) -> bool:
        return all(i == j for i, j in enumerate(self.images))

    def cycle_type(self) -> CycleType:
        seen = [False] * self.n
        lengths: Counter = Counter()
        for start in range(self.n):
            if seen[start]:
                continue
            length, i = 0, start
            while not seen[i]:
                seen[i] = True
                i = self.images[i]
                length += 1
            lengths[length] += 1
        return CycleType(tuple(sorted(lengths.items())))


def compose(p: Permutation, q: Permutation) -> Permutation:
    """Left-to-right product: first p, then q."""
    if p.n != q.n:
        raise DegreeMismatch(f"cannot compose degrees {p.n} and {q.n}")
    return Permutation(tuple(q.images[i] for i in p.images))


def fix_count_power(p: Permutation, k: int) -> int:
    """#Fix(p^k) from the cycle type."""
    if k < 1:
        raise ValueError("power must be positive")
    return p.cycle_type().fix_count(k)


@dataclass(frozen=True)
class HomSample:
    """Images of a1, b1, ..., ag, bg under a homomorphism Gamma -> S_n."""

    n: int
    genus: int
    gens: Tuple[Permutation, ...]
    attempts: int = field(default=1, compare=False)

    def __post_init__(self):
        if len(self.gens) != 2 * self.genus:
            raise ValueError(f"need {2 * self.genus} generators, got {len(self.gens)}")
        if any(g.n != self.n for g in self.gens):
            raise DegreeMismatch("generator degrees disagree with n")
        relator = SurfaceGroupPresentation(self.genus).relator
        if not _evaluate(self.gens, relator, self.n).is_identity():
            raise InvariantViolation("generators do not satisfy the surface relation")

    @classmethod
    def from_array(cls, genus: int, gens: np.ndarray, attempts: int = 1) -> "HomSample":
        return cls(gens.shape[-1], genus, tuple(Permutation(tuple(row)) for row in gens), attempts)

    def as_array(self) -> np.ndarray:
        return np.array([g.images for g in self.gens], dtype=np.int64)


def _evaluate(gens: Sequence[Permutation], w: Word, n: int) -> Permutation:
    out = Permutation.identity(n)
    inverses = {}
    for c in w.letters:
        g = gens[c // 2]
        if c & 1:
            if c not in inverses:
                inverses[c] = g.inverse()
            g = inverses[c]
        out = compose(out, g)
    return out


def evaluate_hom(s: HomSample, w: Word) -> Permutation:
    if any(c >= 4 * s.genus for c in w.letters):
        raise DegreeMismatch(f"word uses generators beyond genus {s.genus}")
    return _evaluate(s.gens, w, s.n)


def F_statistic(s: HomSample, word: Word, power: int) -> int:
    """Number of fixed points of the monodromy of word^power."""
    return fix_count_power(evaluate_hom(s, word), power)


# === vectorized batches ===
def _identity_batch(batch: int, n: int) -> np.ndarray:
    return np.broadcast_to(np.arange(n), (batch, n)).copy()


def batch_compose(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.take_along_axis(q, p, axis=-1)


def batch_inverse(p: np.ndarray) -> np.ndarray:
    return np.argsort(p, axis=-1)


def evaluate_word_batch(gens: np.ndarray, letters: Sequence[int],
                        inverses: Optional[np.ndarray] = None) -> np.ndarray:
    """Monodromy of a word for a batch of homs; gens has shape (B, 2g, n)."""
    if inverses is None:
        inverses = batch_inverse(gens)
    out = _identity_batch(gens.shape[0], gens.shape[-1])
    for c in letters:
        step = inverses[:, c // 2] if c & 1 else gens[:, c // 2]
        out = batch_compose(out, step)
    return out


def relation_holds(gens: np.ndarray, genus: int) -> np.ndarray:
    relator = SurfaceGroupPresentation(genus).relator
    product = evaluate_word_batch(gens, relator.letters)
    return np.all(product == np.arange(gens.shape[-1]), axis=-1)


def cycle_lengths(p: np.ndarray) -> np.ndarray:
    """Length of the cycle through each point, for a batch of permutations."""
    n = p.shape[-1]
    points = np.arange(n)
    lengths = np.zeros(p.shape, dtype=np.int64)
    cur = p.copy()
    for m in range(1, n + 1):
        hit = (cur == points) & (lengths == 0)
        lengths[hit] = m
        if m < n:
            cur = np.take_along_axis(p, cur, axis=-1)
    return lengths


def fix_count_table(gens: np.ndarray, words: Sequence[Sequence[int]],
                    max_powers: Sequence[int]) -> np.ndarray:
    """
    F(word^k) for every hom in the batch, every word and k = 1..max_power.

    Columns are ordered word by word, then by k.
    """
    inverses = batch_inverse(gens)
    columns = []
    for letters, kmax in zip(words, max_powers):
        lengths = cycle_lengths(evaluate_word_batch(gens, letters, inverses))
        for k in range(1, kmax + 1):
            columns.append(np.count_nonzero(k % lengths == 0, axis=-1))
    if not columns:
        return np.zeros((gens.shape[0], 0), dtype=np.int64)
    return np.stack(columns, axis=-1)


def random_permutations(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    return rng.permuted(np.tile(np.arange(n), (count, 1)), axis=-1)


def sample_hom_array(n: int, g: int, rng: np.random.Generator, count: int,
                     max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> Tuple[np.ndarray, int]:
    """
    Rejection sampler: 2g independent uniform permutations, kept iff the relation holds.

    Returns (accepted gens of shape (count, 2g, n), total attempts).
    """
    if n < 1 or g < 2:
        raise ValueError("need n >= 1 and g >= 2")
    accepted: List[np.ndarray] = []
    have, attempts = 0, 0
    while have < count:
        if attempts >= max_attempts:
            raise AttemptsExhausted(
                f"{attempts} attempts gave {have}/{count} homs for n={n}, g={g}")
        batch = min(SAMPLER_BATCH, max_attempts - attempts)
        gens = random_permutations(rng, batch * 2 * g, n).reshape(batch, 2 * g, n)
        ok = np.flatnonzero(relation_holds(gens, g))
        need = count - have
        if len(ok) >= need:
            attempts += int(ok[need - 1]) + 1
            ok = ok[:need]
        else:
            attempts += batch
        accepted.append(gens[ok])
        have += len(ok)
    logger.debug("sampled %d homs n=%d g=%d in %d attempts", count, n, g, attempts)
    return np.concatenate(accepted, axis=0), attempts


def sample_uniform_hom(n: int, g: int, rng: np.random.Generator,
                       max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> HomSample:
    gens, attempts = sample_hom_array(n, g, rng, 1, max_attempts)
    return HomSample.from_array(g, gens[0], attempts)


# === exact enumeration ===
def enumerate_hom_array(n: int, g: int) -> np.ndarray:
    """
    Every relation-satisfying tuple, in a fixed order, as an array (N, 2g, n).

    Meet in the middle: the last commutator must invert the product of the
    others, so pairs are bucketed by their commutator.
    """
    if n > ENUMERATION_MAX_DEGREE:
        raise DegreeTooLarge(f"enumeration is capped at n={ENUMERATION_MAX_DEGREE}, got {n}")
    if g < 2:
        raise ValueError("genus must be at least 2")
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(-1, n)
    m = len(perms)
    xs = np.repeat(perms, m, axis=0)
    ys = np.tile(perms, (m, 1))
    pairs = np.stack([xs, ys], axis=1)
    comm = evaluate_word_batch(pairs, (0, 2, 1, 3))

    buckets: Dict[Tuple[int, ...], List[int]] = {}
    for idx, c in enumerate(map(tuple, comm)):
        buckets.setdefault(c, []).append(idx)

    identity = np.arange(n)
    rows: List[np.ndarray] = []
    for head in itertools.product(range(len(pairs)), repeat=g - 1):
        prod = identity
        for idx in head:
            prod = comm[idx][prod]
        need = tuple(np.argsort(prod))
        for last in buckets.get(need, ()):
            rows.append(np.concatenate([pairs[i] for i in head] + [pairs[last]], axis=0))
    logger.debug("enumerated %d homs for n=%d g=%d", len(rows), n, g)
    if not rows:
        return np.zeros((0, 2 * g, n), dtype=np.int64)
    return np.stack(rows, axis=0)


def enumerate_homs(n: int, g: int) -> Iterator[HomSample]:
    for gens in enumerate_hom_array(n, g):
        yield HomSample.from_array(g, gens)


def _hook_dimension(parts: Sequence[int]) -> int:
    """dim of the S_n irreducible for a partition, by the hook length formula."""
    n = sum(parts)
    conj = [sum(1 for p in parts if p > j) for j in range(parts[0])] if parts else []
    hooks = 1
    for i, row in enumerate(parts):
        for j in range(row):
            hooks *= (row - j - 1) + (conj[j] - i - 1) + 1
    return math.factorial(n) // hooks


def partitions_of(n: int) -> List[Tuple[int, ...]]:
    out = []
    for p in sympy_partitions(n):
        parts = []
        for part, mult in sorted(p.items(), reverse=True):
            parts += [part] * mult
        out.append(tuple(parts))
    return out


def hom_count_formula(n: int, g: int) -> int:
    """#Hom(Gamma_g, S_n) = (n!)^(2g-1) * sum over irreducibles of dim^(2-2g)."""
    zeta = sum(Fraction(1, _hook_dimension(parts) ** (2 * g - 2)) for parts in partitions_of(n))
    total = Fraction(math.factorial(n)) ** (2 * g - 1) * zeta
    if total.denominator != 1:
        raise InvariantViolation(f"non-integral hom count {total}")
    return total.numerator


def exact_finite_expectations(n: int, g: int, words: Sequence[Sequence[int]],
                              max_powers: Sequence[int]) -> List[List[Fraction]]:
    """Exact E_n[F(word^k)] over all of Hom(Gamma, S_n), as rationals."""
    gens = enumerate_hom_array(n, g)
    table = fix_count_table(gens, words, max_powers)
    total = len(gens)
    sums = table.sum(axis=0)
    out, col = [], 0
    for kmax in max_powers:
        out.append([Fraction(int(sums[col + k]), total) for k in range(kmax)])
        col += kmax
    return out


# === cover cache files ===
def save_homs(gens: np.ndarray, header: Dict, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"header": dict(header, count=int(len(gens))), "samples": gens.tolist()}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, separators=(",", ":"))


def load_homs(path: Union[str, Path]) -> Tuple[Dict, np.ndarray]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
        header = doc["header"]
        gens = np.asarray(doc["samples"], dtype=np.int64)
        n, g = int(header["n"]), int(header["g"])
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read cover file {path}: {exc}") from exc
    if len(gens) == 0:
        gens = gens.reshape(0, 2 * g, n)
    if gens.shape[1:] != (2 * g, n) or header.get("count") != len(gens):
        raise InvariantViolation(f"cover file {path} does not match its header")
    if not np.all(relation_holds(gens, g)):
        raise InvariantViolation(f"cover file {path} holds tuples violating the relation")
    return header, gens
