import math

import numpy as np
import pytest

from src.errors import CutoffExceeded, InvariantViolation, NotHyperbolic, ParseError
from src.fuchsian import MobiusMatrix, translation_length, word_to_matrix
from src.spectrum import (LengthSpectrum, counting_li, counting_N, counting_N0, counting_Nchi,
                          enumerate_spectrum, load_spectrum, parse_spectrum,
                          save_spectrum, spectrum_from_dict, spectrum_to_dict, synthetic_spectrum)
from src.surface_group import Character, Word, canonical_class, primitive_root

BOLZA_SYSTOLE = 2.0 * math.acosh(1.0 + math.sqrt(2.0))


def lengths_with_multiplicity(spectrum):
    values, counts = np.unique(np.round(spectrum.lengths, 6), return_counts=True)
    return dict(zip(values.tolist(), counts.tolist()))


class TestMatrices:
    def test_model_relation_and_identity(self, bolza):
        assert word_to_matrix(bolza, bolza.presentation.relator).is_plus_minus_identity()
        assert word_to_matrix(bolza, Word(())).is_plus_minus_identity()
        w = Word((0, 2, 5, 7))
        assert word_to_matrix(bolza, w * w.inverse()).is_plus_minus_identity()

    def test_translation_length(self, bolza):
        m = MobiusMatrix(2.5, 1.0, -1.0, 0.0)
        assert translation_length(m) == pytest.approx(2.0 * math.acosh(1.25), abs=1e-12)
        with pytest.raises(NotHyperbolic):
            translation_length(MobiusMatrix.identity())
        g = word_to_matrix(bolza, Word((0, 2)))
        assert translation_length(g @ g) / translation_length(g) == pytest.approx(2.0, abs=1e-8)

    def test_conjugate_words_share_traces(self, bolza):
        w = Word((0, 2, 4))
        for u in (Word((1,)), Word((6, 3)), Word((2, 2, 5))):
            conj = u * w * u.inverse()
            assert abs(word_to_matrix(bolza, conj).trace) == pytest.approx(
                abs(word_to_matrix(bolza, w).trace), rel=1e-9)

    def test_determinant_is_checked(self):
        with pytest.raises(InvariantViolation):
            MobiusMatrix(2.0, 0.0, 0.0, 2.0)


class TestEnumeration:
    def test_bolza_up_to_six(self, bolza_6):
        assert len(bolza_6.classes) == 48
        assert bolza_6.systole == pytest.approx(BOLZA_SYSTOLE, abs=1e-6)
        assert list(lengths_with_multiplicity(bolza_6).values()) == [12, 12, 24]

    def test_classes_are_canonical_primitive_and_consistent(self, bolza, bolza_6):
        p = bolza.presentation
        for c in bolza_6.classes:
            assert canonical_class(c.word, p) == c.key
            assert primitive_root(c.key, p)[1] == 1
            trace = word_to_matrix(bolza, c.word).trace
            assert abs(trace) == pytest.approx(abs(c.trace), rel=1e-9)
        assert list(bolza_6.lengths) == sorted(bolza_6.lengths)

    def test_power_lengths(self, bolza, bolza_6):
        for c in bolza_6.classes[::6]:
            m = word_to_matrix(bolza, c.word)
            for q in (2, 3):
                assert translation_length(word_to_matrix(bolza, c.word.power(q))) == \
                    pytest.approx(q * translation_length(m), rel=1e-7)

    def test_below_systole_is_empty(self, bolza):
        assert enumerate_spectrum(bolza, 3.0).classes == []

    @pytest.mark.slow
    def test_horizon_stability(self, bolza, bolza_6):
        wider = enumerate_spectrum(bolza, 6.0, horizon=bolza_6.horizon_word_length + 2)
        assert wider.matches(bolza_6)

    @pytest.mark.slow
    def test_bolza_up_to_ten(self, bolza_10):
        assert len(bolza_10.truncated(8.0).classes) == 196
        assert len(bolza_10.classes) == 1258


class TestCounting:
    def test_counts(self, bolza_6):
        assert counting_N0(bolza_6, 3.0) == counting_N(bolza_6, 3.0) == 0
        assert counting_Nchi(bolza_6, 3.0, Character.trivial(2)) == 0
        assert counting_N0(bolza_6, 6.0) == 96
        assert counting_N(bolza_6, 6.0) == 96
        assert counting_Nchi(bolza_6, 6.0, Character.trivial(2)) == counting_N(bolza_6, 6.0)

    def test_powers_enter_N(self):
        s = synthetic_spectrum([2.0, 3.5], cutoff=7.0)
        assert counting_N0(s, 7.0) == 4
        assert counting_N(s, 7.0) == 2 * (3 + 2)

    def test_twisted_count_is_bounded_by_N(self, bolza_6):
        chi = Character.from_phases([0.4, 1.3, -2.0, 0.9])
        assert abs(counting_Nchi(bolza_6, 6.0, chi)) <= counting_N(bolza_6, 6.0)

    def test_cutoff_exceeded(self, bolza_6):
        with pytest.raises(CutoffExceeded):
            counting_N0(bolza_6, 7.0)

    def test_li(self):
        assert counting_li(10.0) == pytest.approx(2492.228976, rel=1e-8)


class TestFiles:
    def test_csv_round_trip(self, bolza_6, tmp_path):
        path = tmp_path / "bolza.csv"
        save_spectrum(bolza_6, path)
        loaded = load_spectrum(path)
        assert loaded.matches(bolza_6)
        assert loaded.cutoff == bolza_6.cutoff
        assert loaded.genus == 2

    def test_dict_round_trip(self, bolza_6):
        assert spectrum_from_dict(spectrum_to_dict(bolza_6)).matches(bolza_6, tol=0.0)

    def test_length_trace_mismatch(self):
        text = "# cutoff=5.0\nword,length,trace\n,3.0,5.0\n"
        with pytest.raises(InvariantViolation):
            parse_spectrum(text)

    def test_bad_header(self):
        with pytest.raises(ParseError):
            parse_spectrum("length,trace\n3.0,4.7\n")

    def test_non_primitive_word(self):
        word = "a1 a1"
        trace = 2.0 * math.cosh(1.0)
        with pytest.raises(InvariantViolation):
            parse_spectrum(f"word,length,trace\n{word},2.0,{trace!r}\n")

    def test_synthetic_spectrum_has_no_words(self, tmp_path):
        s = synthetic_spectrum([3.2, 4.1], cutoff=6.0)
        assert not s.has_words
        path = tmp_path / "synthetic.csv"
        save_spectrum(s, path)
        loaded = load_spectrum(path)
        assert not loaded.has_words
        assert loaded.lengths == pytest.approx(s.lengths, rel=1e-11)

    def test_duplicate_keys_rejected(self, bolza_6):
        c = bolza_6.classes[0]
        with pytest.raises(InvariantViolation):
            LengthSpectrum(6.0, [c, c])
