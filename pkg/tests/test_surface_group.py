import cmath
import itertools
import math

import numpy as np
import pytest

from src.errors import IdentityWord, ParseError
from src.surface_group import (Character, ConjClassKey, GeneratorSymbol, SurfaceGroupPresentation,
                               SymmetryClass, Word, canonical_class, char_eval,
                               char_symmetry_class, format_word, free_reduce, parse_word,
                               primitive_root, r_chi)

P = SurfaceGroupPresentation(2)
A1, INV_A1, B1, INV_B1, A2, INV_A2, B2, INV_B2 = range(8)


def reduced_words(max_length):
    for length in range(1, max_length + 1):
        for letters in itertools.product(range(8), repeat=length):
            if all(letters[i + 1] != letters[i] ^ 1 for i in range(length - 1)):
                yield Word(letters)


def random_reduced_word(rng, length):
    letters = [int(rng.integers(8))]
    while len(letters) < length:
        c = int(rng.integers(8))
        if c != letters[-1] ^ 1:
            letters.append(c)
    return Word(tuple(letters))


class TestWords:
    def test_generator_codes_and_names(self):
        assert GeneratorSymbol(1).code == A1
        assert GeneratorSymbol(2, inverted=True).code == INV_B1
        assert [GeneratorSymbol.from_code(c).name for c in range(8)] == \
            ["a1", "A1", "b1", "B1", "a2", "A2", "b2", "B2"]

    def test_parse_and_format(self):
        w = parse_word("a1 B1 a2")
        assert w.letters == (A1, INV_B1, A2)
        assert format_word(w) == "a1 B1 a2"
        with pytest.raises(ParseError):
            parse_word("c1")
        with pytest.raises(ParseError):
            parse_word("a3", genus=2)

    def test_free_reduce(self):
        assert free_reduce(Word((A1, INV_A1))).letters == ()
        assert free_reduce(Word((A1, B1, INV_B1, A2))).letters == (A1, A2)
        w = Word((A1, B1, A2))
        assert free_reduce(w).letters == w.letters
        assert free_reduce(free_reduce(Word((A1, B1, INV_B1, INV_A1, B2)))).letters == (B2,)

    def test_standard_relator(self):
        assert P.relator.letters == (A1, B1, INV_A1, INV_B1, A2, B2, INV_A2, INV_B2)
        with pytest.raises(ValueError):
            SurfaceGroupPresentation(1)


class TestConjugacyClasses:
    def test_examples(self):
        a1 = canonical_class(Word((A1,)), P)
        assert canonical_class(Word((B2, A1, INV_B2)), P) == a1
        assert canonical_class(Word((INV_A1,)), P) == a1
        assert canonical_class(Word((A1, B1)), P) == canonical_class(Word((B1, A1)), P)

    def test_identity_words_raise(self):
        with pytest.raises(IdentityWord):
            canonical_class(Word((A1, INV_A1)), P)
        with pytest.raises(IdentityWord):
            canonical_class(P.relator, P)
        with pytest.raises(IdentityWord):
            ConjClassKey(Word(()))

    def test_half_relator_spellings_share_a_key(self):
        # a1 b1 A1 B1 equals (a2 b2 A2 B2)^-1 = b2 a2 B2 A2
        assert canonical_class(Word((A1, B1, INV_A1, INV_B1)), P) == \
            canonical_class(Word((B2, A2, INV_B2, INV_A2)), P)

    def test_inversion_invariance(self):
        for w in reduced_words(4):
            assert canonical_class(w.inverse(), P) == canonical_class(w, P)

    def test_conjugation_invariance(self):
        rng = np.random.default_rng(20)
        for w in reduced_words(4):
            key = canonical_class(w, P)
            for _ in range(2):
                u = random_reduced_word(rng, int(rng.integers(1, 7)))
                assert canonical_class(u * w * u.inverse(), P) == key, (w.letters, u.letters)

    def test_relator_insertions(self):
        rng = np.random.default_rng(21)
        words = list(reduced_words(4))
        for idx in rng.choice(len(words), size=400, replace=False):
            w = words[idx]
            key = canonical_class(w, P)
            letters = w.letters
            for _ in range(int(rng.integers(1, 4))):
                cut = int(rng.integers(0, len(letters) + 1))
                rotation = P.rotations[int(rng.integers(len(P.rotations)))]
                letters = letters[:cut] + rotation + letters[cut:]
            u = random_reduced_word(rng, int(rng.integers(1, 7)))
            assert canonical_class(u * Word(letters) * u.inverse(), P) == key, (w.letters, letters)

    def test_keys_are_least_among_rotations_and_inverses(self):
        for w in reduced_words(3):
            letters = canonical_class(w, P).letters
            n = len(letters)
            inverse = tuple(c ^ 1 for c in reversed(letters))
            for i in range(n):
                assert letters <= letters[i:] + letters[:i]
                assert letters <= inverse[i:] + inverse[:i]


class TestPrimitiveRoot:
    def test_examples(self):
        a1 = canonical_class(Word((A1,)), P)
        assert primitive_root(a1, P) == (a1, 1)
        assert primitive_root(canonical_class(Word((A1, A1)), P), P) == (a1, 2)
        ab = canonical_class(Word((A1, B1)), P)
        assert primitive_root(canonical_class(Word((A1, B1) * 3), P), P) == (ab, 3)

    def test_reraising_the_root_reproduces_the_key(self):
        for letters in [(A1, B2), (A1, B1, A2), (INV_A1, B2, B2)]:
            root = canonical_class(Word(letters), P)
            for q in (2, 3):
                key = canonical_class(Word(letters).power(q), P)
                found, exponent = primitive_root(key, P)
                assert (found, exponent) == (root, q)
                assert canonical_class(found.cyclic_word.power(exponent), P) == key


class TestCharacters:
    def test_examples(self):
        chi = Character.from_phases([0.3, 1.1, -0.7, 2.0])
        assert char_eval(chi, Word(())) == 1
        assert abs(char_eval(chi, P.relator) - 1) < 1e-12
        minus = Character((-1.0,) * 4)
        assert char_eval(minus, Word((A1, B1))) == 1

    def test_multiplicative_and_conjugate_on_inverse(self):
        chi = Character.from_phases([0.3, math.sqrt(2), 1.0, -0.4])
        words = list(itertools.islice(reduced_words(3), 0, 400, 7))
        for u, v in zip(words, reversed(words)):
            assert abs(char_eval(chi, u * v) - char_eval(chi, u) * char_eval(chi, v)) < 1e-12
            assert abs(char_eval(chi, u.inverse()) - char_eval(chi, u).conjugate()) < 1e-12

    def test_symmetry_class(self):
        assert char_symmetry_class(Character.trivial(2)) is SymmetryClass.GOE
        assert char_symmetry_class(Character((1, -1, 1, -1))) is SymmetryClass.GOE
        gue = Character((cmath.exp(1j * math.pi / 3), 1, 1, 1))
        assert char_symmetry_class(gue) is SymmetryClass.GUE
        assert r_chi(Character.trivial(2)) == 2
        assert r_chi(gue) == 1

    def test_values_must_be_unimodular(self):
        with pytest.raises(ValueError):
            Character((2.0, 1.0, 1.0, 1.0))
