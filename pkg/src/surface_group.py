"""
Surface Group - words, reduction and conjugacy classes

Words in the genus-g surface group
    < a1, b1, ..., ag, bg | [a1, b1] ... [ag, bg] >
are tuples of integer letter codes: generator j (0-based, in the order
a1, b1, a2, b2, ...) is code 2j and its inverse is 2j + 1, so inversion is
``code ^ 1`` and integer order is the letter order a1 < A1 < b1 < B1 < a2 ...

Conjugacy classes are decided with Dehn's algorithm: any cyclic subword longer
than half a rotation of the relator (or its inverse) is replaced by the
inverse of the complementary piece. Dehn-reduced spellings of one class are
not unique (half-relator pieces can be swapped, and a shorter spelling can be
rewritten through a longer one), so the key is the lexicographic minimum over
the closure of all minimal spellings under those moves, their rotations and
their inverses.
"""

import cmath
import logging
import threading
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from src.errors import IdentityWord, ParseError

logger = logging.getLogger(__name__)

Letters = Tuple[int, ...]


def invert_letter(code: int) -> int:
    return code ^ 1


@dataclass(frozen=True)
class GeneratorSymbol:
    """Generator a_i or b_i (index 1..2g in the order a1, b1, a2, b2, ...), possibly inverted."""

    index: int
    inverted: bool = False

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"generator index must be positive, got {self.index}")

    @property
    def code(self) -> int:
        return 2 * (self.index - 1) + int(self.inverted)

    @classmethod
    def from_code(cls, code: int) -> "GeneratorSymbol":
        return cls(index=code // 2 + 1, inverted=bool(code & 1))

    @property
    def name(self) -> str:
        pair = (self.index - 1) // 2 + 1
        letter = "a" if (self.index - 1) % 2 == 0 else "b"
        return f"{letter.upper() if self.inverted else letter}{pair}"


@dataclass(frozen=True)
class Word:
    letters: Letters = ()
    reduced: bool = False

    @classmethod
    def from_symbols(cls, symbols: Iterable[GeneratorSymbol]) -> "Word":
        return cls(tuple(s.code for s in symbols))

    def symbols(self) -> List[GeneratorSymbol]:
        return [GeneratorSymbol.from_code(c) for c in self.letters]

    def __len__(self) -> int:
        return len(self.letters)

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def inverse(self) -> "Word":
        return Word(tuple(invert_letter(c) for c in reversed(self.letters)), self.reduced)

    def power(self, q: int) -> "Word":
        if q < 0:
            return self.inverse().power(-q)
        return Word(self.letters * q)

    def __str__(self) -> str:
        return format_word(self)


def parse_word(text: str, genus: Optional[int] = None) -> Word:
    """Parse the text format ``a1 B1 a2 ...``; capital letters are inverses."""
    codes = []
    for token in text.split():
        head, tail = token[0], token[1:]
        if head.lower() not in "ab" or not tail.isdigit() or int(tail) < 1:
            raise ParseError(f"bad letter {token!r} in word {text!r}")
        pair = int(tail)
        if genus is not None and pair > genus:
            raise ParseError(f"letter {token!r} out of range for genus {genus}")
        index = 2 * (pair - 1) + (0 if head.lower() == "a" else 1) + 1
        codes.append(GeneratorSymbol(index, head.isupper()).code)
    return Word(tuple(codes))


def format_word(w: Word) -> str:
    return " ".join(s.name for s in w.symbols())


def free_reduce(w: Word) -> Word:
    """Cancel adjacent inverse pairs until none remain."""
    stack: List[int] = []
    for c in w.letters:
        if stack and stack[-1] == invert_letter(c):
            stack.pop()
        else:
            stack.append(c)
    return Word(tuple(stack), reduced=True)


def cyclic_reduce_letters(letters: Sequence[int]) -> List[int]:
    stack: List[int] = []
    for c in letters:
        if stack and stack[-1] == invert_letter(c):
            stack.pop()
        else:
            stack.append(c)
    lo, hi = 0, len(stack)
    while hi - lo > 1 and stack[lo] == invert_letter(stack[hi - 1]):
        lo += 1
        hi -= 1
    return stack[lo:hi]


def least_rotation(letters: Sequence[int]) -> Letters:
    t = tuple(letters)
    if not t:
        return t
    return min(t[i:] + t[:i] for i in range(len(t)))


def _inverse_letters(letters: Sequence[int]) -> Letters:
    return tuple(invert_letter(c) for c in reversed(letters))


def smallest_period(letters: Sequence[int]) -> int:
    """Smallest p dividing len(letters) with letters = block^(len/p)."""
    n = len(letters)
    for p in range(1, n + 1):
        if n % p == 0 and all(letters[i] == letters[i - p] for i in range(p, n)):
            return p
    return n


@dataclass(frozen=True)
class SurfaceGroupPresentation:
    genus: int
    relator: Word = field(default=None)

    def __post_init__(self):
        if self.genus < 2:
            raise ValueError("surface groups need genus >= 2")
        if self.relator is None:
            object.__setattr__(self, "relator", self._standard_relator(self.genus))
        if len(self.relator) != 4 * self.genus or free_reduce(self.relator).letters != self.relator.letters:
            raise ValueError("relator must be freely reduced of length 4g")

    @staticmethod
    def _standard_relator(genus: int) -> Word:
        letters = []
        for i in range(genus):
            a, b = 4 * i, 4 * i + 2
            letters += [a, b, a ^ 1, b ^ 1]
        return Word(tuple(letters), reduced=True)

    @property
    def rank(self) -> int:
        return 2 * self.genus

    @property
    def half(self) -> int:
        return 2 * self.genus

    @cached_property
    def rotations(self) -> Tuple[Letters, ...]:
        """All cyclic rotations of the relator and of its inverse."""
        out = []
        for r in (self.relator.letters, _inverse_letters(self.relator.letters)):
            out += [r[i:] + r[:i] for i in range(len(r))]
        return tuple(out)

    @cached_property
    def long_pieces(self) -> FrozenSet[Letters]:
        """Prefixes of length 2g+1 of relator rotations; a word containing one is not Dehn-reduced."""
        return frozenset(r[: self.half + 1] for r in self.rotations)

    def contains_letter(self, code: int) -> bool:
        return 0 <= code < 2 * self.rank


class SymmetryClass(Enum):
    GOE = "GOE"
    GUE = "GUE"


@dataclass(frozen=True)
class ConjClassKey:
    cyclic_word: Word
    canonical: bool = True

    def __post_init__(self):
        if not self.cyclic_word.letters:
            raise IdentityWord("a class key cannot be the empty word")

    @property
    def letters(self) -> Letters:
        return self.cyclic_word.letters

    def __lt__(self, other: "ConjClassKey") -> bool:
        return (len(self.letters), self.letters) < (len(other.letters), other.letters)

    def __str__(self) -> str:
        return format_word(self.cyclic_word)


class ConjugacyCanonicalizer:
    """
    Canonical 𝒫₀ keys for one presentation.

    Results are memoized per minimal spelling; the memo only ever maps a
    spelling to its unique key, so concurrent callers see identical results.
    """

    def __init__(self, presentation: SurfaceGroupPresentation):
        self.p = presentation
        self._memo: Dict[Letters, Tuple[Letters, Tuple[Letters, ...]]] = {}
        self._lock = threading.Lock()
        by_first: Dict[int, List[Letters]] = {}
        for r in presentation.rotations:
            by_first.setdefault(r[0], []).append(r)
        self._by_first = by_first

    # === Dehn reduction ===
    def _pieces_at(self, w: Sequence[int], i: int, length: int) -> List[Letters]:
        n = len(w)
        if length > n:
            return []
        return [
            r for r in self._by_first.get(w[i], ())
            if all(w[(i + k) % n] == r[k] for k in range(length))
        ]

    @staticmethod
    def _replace(w: Sequence[int], i: int, length: int, rotation: Letters) -> List[int]:
        n = len(w)
        rest = [w[(i + length + t) % n] for t in range(n - length)]
        return rest + list(_inverse_letters(rotation[length:]))

    def dehn_reduce(self, letters: Sequence[int]) -> List[int]:
        """Cyclically and Dehn-reduce until no piece longer than half a relator remains."""
        w = cyclic_reduce_letters(letters)
        full = len(self.p.relator)
        changed = True
        while changed:
            changed = False
            n = len(w)
            for i in range(n):
                for r in self._by_first.get(w[i], ()):
                    k = 0
                    while k < full and k < n and w[(i + k) % n] == r[k]:
                        k += 1
                    if k > self.p.half:
                        w = cyclic_reduce_letters(self._replace(w, i, k, r))
                        changed = True
                        break
                if changed:
                    break
        return w

    # === closure of minimal spellings ===
    def _closure(self, letters: Sequence[int]) -> Tuple[Letters, Tuple[Letters, ...]]:
        w = self.dehn_reduce(letters)
        if not w:
            raise IdentityWord("word is trivial in the surface group")
        half = self.p.half
        while True:
            m = len(w)
            start = least_rotation(w)
            cached = self._memo.get(start)
            if cached is not None:
                return cached
            seen = {start}
            queue = [start]
            minimal = [start]
            restart = None
            while queue and restart is None:
                cur = queue.pop()
                n = len(cur)
                moves = []
                for i in range(n):
                    for r in self._pieces_at(cur, i, half):
                        moves.append(self._replace(cur, i, half, r))
                    if n == m:
                        for r in self._pieces_at(cur, i, half - 1):
                            moves.append(self._replace(cur, i, half - 1, r))
                    if n > m:
                        for length in range(half + 1, min(2 * half, n) + 1):
                            for r in self._pieces_at(cur, i, length):
                                moves.append(self._replace(cur, i, length, r))
                for move in moves:
                    nw = cyclic_reduce_letters(move)
                    if len(nw) < m:
                        restart = self.dehn_reduce(nw)
                        break
                    if len(nw) > m + 2:
                        continue
                    nr = least_rotation(nw)
                    if nr in seen:
                        continue
                    seen.add(nr)
                    queue.append(nr)
                    if len(nr) == m:
                        minimal.append(nr)
            if restart is not None:
                if not restart:
                    raise IdentityWord("word is trivial in the surface group")
                w = restart
                continue
            best = min(min(s, least_rotation(_inverse_letters(s))) for s in minimal)
            result = (best, tuple(minimal))
            with self._lock:
                for s in minimal:
                    self._memo[s] = result
                    self._memo[least_rotation(_inverse_letters(s))] = result
            return result

    def key(self, w: Word) -> ConjClassKey:
        best, _ = self._closure(w.letters)
        return ConjClassKey(Word(best, reduced=True))

    def minimal_spellings(self, k: ConjClassKey) -> Tuple[Letters, ...]:
        return self._closure(k.letters)[1]

    def is_dehn_reduced(self, letters: Sequence[int]) -> bool:
        n = len(letters)
        return all(
            not self._pieces_at(letters, i, self.p.half + 1) for i in range(n)
        ) if n > self.p.half else True


@lru_cache(maxsize=None)
def canonicalizer_for(p: SurfaceGroupPresentation) -> ConjugacyCanonicalizer:
    return ConjugacyCanonicalizer(p)


def canonical_class(w: Word, p: SurfaceGroupPresentation) -> ConjClassKey:
    """Canonical key of the 𝒫₀ class of w (conjugation and inversion identified)."""
    return canonicalizer_for(p).key(w)


def primitive_root(k: ConjClassKey, p: SurfaceGroupPresentation) -> Tuple[ConjClassKey, int]:
    """
    Split k = root^q with q maximal.

    The exponent is read off the minimal spellings: a proper power always
    has a minimal spelling that is a literal power of a block, so the
    largest literal exponent over the closure is the true one.
    """
    canon = canonicalizer_for(p)
    best_q, best_block = 1, k.letters
    for s in canon.minimal_spellings(k):
        period = smallest_period(s)
        q = len(s) // period
        if q > best_q:
            best_q, best_block = q, s[:period]
    if best_q == 1:
        return k, 1
    return canon.key(Word(best_block)), best_q


@dataclass(frozen=True)
class Character:
    """A unitary character given by its values on a1, b1, ..., ag, bg."""

    values: Tuple[complex, ...]
    squared_trivial: bool = field(init=False)

    def __post_init__(self):
        vals = tuple(complex(v) for v in self.values)
        for v in vals:
            if abs(abs(v) - 1.0) > 1e-12:
                raise ValueError(f"character values must have modulus 1, got {v}")
        object.__setattr__(self, "values", vals)
        real = all(abs(v.imag) <= 1e-12 for v in vals)
        object.__setattr__(self, "squared_trivial", real)

    @classmethod
    def trivial(cls, genus: int) -> "Character":
        return cls((1.0,) * (2 * genus))

    @classmethod
    def from_phases(cls, phases: Sequence[float]) -> "Character":
        return cls(tuple(cmath.exp(1j * t) for t in phases))

    @property
    def genus(self) -> int:
        return len(self.values) // 2


def char_eval(chi: Character, w: Word) -> complex:
    exponents = [0] * len(chi.values)
    for c in w.letters:
        exponents[c // 2] += -1 if c & 1 else 1
    out = 1 + 0j
    for v, e in zip(chi.values, exponents):
        if e:
            out *= v ** e
    return out


def char_symmetry_class(chi: Character) -> SymmetryClass:
    """GOE when every generator value is real (so chi squared is trivial), GUE otherwise."""
    return SymmetryClass.GOE if chi.squared_trivial else SymmetryClass.GUE


def r_chi(chi: Character) -> int:
    """2 for real characters, 1 otherwise; the limiting variance is (r_chi / 2) * Sigma^2_GOE."""
    return 2 if chi.squared_trivial else 1
