from fractions import Fraction

import numpy as np
import pytest

from src.errors import AttemptsExhausted, DegreeMismatch, DegreeTooLarge, InvariantViolation
from src.permutations import (HomSample, Permutation, compose, enumerate_hom_array, enumerate_homs,
                              evaluate_hom, exact_finite_expectations, F_statistic,
                              fix_count_power, fix_count_table, hom_count_formula, load_homs,
                              partitions_of, sample_hom_array, sample_uniform_hom, save_homs)
from src.surface_group import SurfaceGroupPresentation, Word

RELATOR = SurfaceGroupPresentation(2).relator


def literal_power(p: Permutation, k: int) -> Permutation:
    out = Permutation.identity(p.n)
    for _ in range(k):
        out = compose(out, p)
    return out


class TestPermutation:
    def test_compose_left_to_right(self):
        p = Permutation((1, 0, 2))  # (01)
        q = Permutation((0, 2, 1))  # (12)
        pq = compose(p, q)
        assert pq.images == (2, 0, 1)
        assert pq.cycle_type().counts == ((3, 1),)
        assert compose(p, p.inverse()).is_identity()
        assert compose(Permutation.identity(3), q) == q

    def test_compose_rejects_mixed_degrees(self):
        with pytest.raises(DegreeMismatch):
            compose(Permutation.identity(2), Permutation.identity(3))

    def test_not_a_permutation(self):
        with pytest.raises(ValueError):
            Permutation((0, 0, 1))

    def test_fix_count_examples(self):
        assert fix_count_power(Permutation.identity(5), 7) == 5
        three_cycle = Permutation.from_cycles(4, [[0, 1, 2]])
        assert fix_count_power(three_cycle, 2) == 1
        assert fix_count_power(three_cycle, 3) == 4

    def test_fix_count_matches_literal_powers(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            n = int(rng.integers(1, 13))
            k = int(rng.integers(1, 31))
            p = Permutation(tuple(rng.permutation(n)))
            fixed = sum(1 for i, j in enumerate(literal_power(p, k).images) if i == j)
            assert fix_count_power(p, k) == fixed


class TestEnumeration:
    @pytest.mark.parametrize("n, expected", [(2, 16), (3, 486), (4, 34176)])
    def test_counts_match_formula(self, n, expected):
        assert len(enumerate_hom_array(n, 2)) == expected
        assert hom_count_formula(n, 2) == expected

    def test_enumerated_tuples_are_distinct_and_valid(self):
        gens = enumerate_hom_array(3, 2)
        assert len({g.tobytes() for g in gens}) == len(gens)
        for s in list(enumerate_homs(3, 2))[::37]:
            assert evaluate_hom(s, RELATOR).is_identity()

    def test_cap(self):
        with pytest.raises(DegreeTooLarge):
            enumerate_hom_array(5, 2)

    def test_formula_beyond_enumeration(self):
        assert hom_count_formula(1, 3) == 1
        assert hom_count_formula(5, 2) > 0
        assert sorted(partitions_of(4)) == sorted([(4,), (3, 1), (2, 2), (2, 1, 1), (1, 1, 1, 1)])

    def test_exact_expectations_for_small_degrees(self):
        # S_2 is abelian: a1 is uniform, a1^2 is the identity
        assert exact_finite_expectations(2, 2, [(0,)], [2]) == [[Fraction(1), Fraction(2)]]
        # character count over S_3: 108 homs fix a1 = e, 72 per transposition, 81 per 3-cycle
        assert exact_finite_expectations(3, 2, [(0,)], [2]) == [[Fraction(10, 9), Fraction(2)]]


class TestSampling:
    def test_degree_one_accepts_immediately(self):
        s = sample_uniform_hom(1, 2, np.random.default_rng(0))
        assert s.attempts == 1
        assert all(g.is_identity() for g in s.gens)

    def test_abelian_degree_accepts_everything(self):
        gens, attempts = sample_hom_array(2, 2, np.random.default_rng(0), 500)
        assert attempts == 500
        assert gens.shape == (500, 4, 2)

    def test_samples_satisfy_the_relation(self):
        rng = np.random.default_rng(5)
        for n in (2, 3, 4, 6):
            gens, _ = sample_hom_array(n, 2, rng, 50)
            for row in gens[:10]:
                s = HomSample.from_array(2, row)
                assert evaluate_hom(s, RELATOR).is_identity()

    def test_attempts_exhausted(self):
        with pytest.raises(AttemptsExhausted):
            sample_hom_array(6, 2, np.random.default_rng(0), 1000, max_attempts=10)

    def test_same_seed_same_samples(self):
        a, _ = sample_hom_array(4, 2, np.random.default_rng(9), 30)
        b, _ = sample_hom_array(4, 2, np.random.default_rng(9), 30)
        assert np.array_equal(a, b)


class TestHomSample:
    def test_rejects_tuples_violating_the_relation(self):
        bad = (Permutation((1, 0, 2)), Permutation((0, 2, 1)), Permutation.identity(3), Permutation.identity(3))
        with pytest.raises(InvariantViolation):
            HomSample(3, 2, bad)

    def test_homomorphism_property(self):
        s = sample_uniform_hom(4, 2, np.random.default_rng(2))
        u, v = Word((0, 3, 4)), Word((7, 7, 1, 2))
        assert evaluate_hom(s, u * v) == compose(evaluate_hom(s, u), evaluate_hom(s, v))
        assert evaluate_hom(s, Word(())).is_identity()
        assert evaluate_hom(s, Word((0,))) == s.gens[0]

    def test_fix_statistic(self):
        identity = HomSample(5, 2, (Permutation.identity(5),) * 4)
        assert F_statistic(identity, Word((0, 2, 5)), 3) == 5
        s = sample_uniform_hom(4, 2, np.random.default_rng(8))
        w = Word((0, 2, 5))
        for k in (1, 2, 3):
            assert F_statistic(s, w, k) == F_statistic(s, w.inverse(), k)

    def test_fix_count_table_matches_single_evaluation(self):
        gens, _ = sample_hom_array(4, 2, np.random.default_rng(4), 20)
        words = [(0,), (0, 2), (1, 4, 6)]
        table = fix_count_table(gens, words, [3, 2, 2])
        for b in range(len(gens)):
            s = HomSample.from_array(2, gens[b])
            expected = [F_statistic(s, Word(w), k) for w, kmax in zip(words, [3, 2, 2])
                        for k in range(1, kmax + 1)]
            assert table[b].tolist() == expected


class TestCoverFiles:
    def test_round_trip(self, tmp_path):
        gens, _ = sample_hom_array(3, 2, np.random.default_rng(1), 12)
        path = tmp_path / "covers.json"
        save_homs(gens, {"n": 3, "g": 2, "seed": 1}, path)
        header, loaded = load_homs(path)
        assert header["count"] == 12
        assert np.array_equal(loaded, gens)

    def test_invalid_tuples_are_rejected(self, tmp_path):
        bad = np.array([[[1, 0, 2], [0, 2, 1], [0, 1, 2], [0, 1, 2]]])
        path = tmp_path / "bad.json"
        save_homs(bad, {"n": 3, "g": 2, "seed": 0}, path)
        with pytest.raises(InvariantViolation):
            load_homs(path)
