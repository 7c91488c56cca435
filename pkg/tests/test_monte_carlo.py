import cmath
import math

import numpy as np
import pytest

from src.config import ExperimentConfig
from src.errors import ConfigError, SpectrumTooShort
from src.kernels import WindowParams
from src.monte_carlo import (Report, RunningMoments, block_rng, block_sizes, character_from_config,
                             mc_central_moments, population_central_moments, resolve_spectrum,
                             rounded, run_blocks)
from src.permutations import enumerate_homs
from src.spectrum import save_spectrum
from src.statistic import n_osc_finite


class TestBlocks:
    def test_sizes(self):
        assert block_sizes(4500, 2000) == [2000, 2000, 500]
        assert block_sizes(4000, 2000) == [2000, 2000]
        assert block_sizes(0, 2000) == []

    def test_generators_are_keyed(self):
        a = block_rng(7, 1, 0).random(5)
        assert np.array_equal(a, block_rng(7, 1, 0).random(5))
        assert not np.array_equal(a, block_rng(7, 1, 1).random(5))
        assert not np.array_equal(a, block_rng(7, 3, 0).random(5))

    def test_worker_count_does_not_change_results(self):
        def draw(block, size):
            return block_rng(11, 1, block).standard_normal(size)

        seen = []
        one = run_blocks(draw, 7000, jobs=1, progress=seen.append)
        three = run_blocks(draw, 7000, jobs=3)
        assert sum(seen) == 7000
        assert one.count == three.count == 7000
        assert np.array_equal(one.totals, three.totals)
        assert one.standard_error(4) == three.standard_error(4)


class TestRunningMoments:
    @pytest.fixture(scope="class")
    def values(self):
        return np.random.default_rng(2).standard_normal(5000) * 0.7 + 0.3

    def test_against_numpy(self, values):
        acc = RunningMoments()
        for chunk in np.array_split(values, 5):
            acc.add(chunk)
        assert acc.count == 5000
        assert acc.mean() == pytest.approx(values.mean(), rel=1e-12)
        for k in range(2, 7):
            expected = np.mean((values - values.mean()) ** k)
            assert acc.central_moment(k) == pytest.approx(expected, rel=1e-8, abs=1e-12)
        assert population_central_moments(values, [2, 4])[4] == pytest.approx(
            acc.central_moment(4), rel=1e-10)

    def test_merge(self, values):
        left = RunningMoments().add(values[:2000])
        right = RunningMoments().add(values[2000:])
        both = RunningMoments().add(values[:2000]).add(values[2000:])
        assert np.array_equal(left.merge(right).totals, both.totals)
        with pytest.raises(ValueError):
            left.merge(RunningMoments(max_order=4))

    def test_standard_errors(self, values):
        single = RunningMoments().add(values)
        assert math.isnan(single.standard_error(2))
        acc = RunningMoments()
        for chunk in np.array_split(values, 10):
            acc.add(chunk)
        # Var of the sample variance of a normal is 2 sigma^4 / N
        assert acc.standard_error(2) == pytest.approx(math.sqrt(2 * 0.7 ** 4 / 5000), rel=0.6)
        assert acc.standardized(4) == pytest.approx(3.0, abs=0.3)

    def test_orders_are_bounded(self):
        with pytest.raises(ValueError):
            RunningMoments().add([1.0, 2.0]).central_moment(7)
        assert math.isnan(RunningMoments().central_moment(2))

    def test_population_moments(self):
        assert population_central_moments(np.array([0.0, 1.0, 2.0, 3.0]), [2, 3]) == {2: 1.25, 3: 0.0}


class TestReports:
    def test_rounding(self):
        assert rounded(1.0 / 3.0) == 0.333333333333333
        assert rounded(float("nan")) is None
        assert rounded({"a": (np.int64(2), np.float64(0.5))}) == {"a": [2, 0.5]}
        assert rounded("text") == "text"

    def test_timing_is_not_part_of_the_document(self):
        report = Report("clt", {"seed": 1}, timing={"seconds": 1.5})
        doc = report.to_dict()
        assert "timing" not in doc
        assert doc["kind"] == "clt"
        assert report.passed
        report.flags["moment_2_within_3se"] = False
        assert not report.passed


class TestInputs:
    def test_characters(self):
        assert character_from_config("trivial", 2).values == (1, 1, 1, 1)
        chi = character_from_config("gue", 3)
        assert len(chi.values) == 6
        assert chi.values[4] == pytest.approx(cmath.exp(1j * math.sqrt(6.0)))
        assert chi.values[5] == pytest.approx(cmath.exp(1j * math.sqrt(7.0)))
        listed = character_from_config([0.0, math.pi, 0.0, 0.0], 2)
        assert listed.values[1] == pytest.approx(-1.0)

    def test_spectrum_file_checks(self, small_spectrum, tmp_path):
        path = tmp_path / "small.csv"
        save_spectrum(small_spectrum, path)
        assert resolve_spectrum(ExperimentConfig(spectrum=str(path), L=10.0)).matches(small_spectrum)
        with pytest.raises(SpectrumTooShort):
            resolve_spectrum(ExperimentConfig(spectrum=str(path), L=12.0))
        with pytest.raises(ConfigError):
            resolve_spectrum(ExperimentConfig(spectrum=str(path), L=10.0, genus=3))


class TestCentralMoments:
    def test_limit_mode(self, small_spectrum):
        cfg = ExperimentConfig(kind="clt", mode="limit", L=10.0, samples=50_000, seed=3,
                               moments=[2, 3, 4])
        report = mc_central_moments(cfg, small_spectrum)
        est = {e["k"]: e for e in report.estimates}
        exact = report.references["exact_limit"]
        assert abs(est[2]["value"] - exact["2"]) <= 5.0 * est[2]["se"]
        assert abs(report.references["sample_mean"]) <= 5.0 * math.sqrt(exact["2"] / 50_000)
        assert report.references["gaussian"]["4"] == pytest.approx(3.0 * exact["2"] ** 2)
        assert "centering: exact limit means" in report.notes
        assert set(report.flags) >= {"moment_2_within_3se", "skew_small", "kurtosis_gaussian"}
        assert [row["k"] for row in report.rows] == [2, 3, 4]

    def test_same_seed_same_report(self, small_spectrum):
        cfg = ExperimentConfig(mode="limit", L=10.0, samples=3000, seed=5, moments=[2, 4], jobs=2)
        first = mc_central_moments(cfg, small_spectrum).to_dict()
        second = mc_central_moments(cfg, small_spectrum).to_dict()
        assert first == second

    def test_enumeration_oracle(self, bolza_6, trivial, spec):
        cfg = ExperimentConfig(mode="finite-n", oracle=True, n=2, L=6.0, moments=[2, 3, 4])
        report = mc_central_moments(cfg, bolza_6)
        p = WindowParams(cfg.alpha, 6.0)
        values = np.array([n_osc_finite(s, spec, bolza_6, p, trivial) for s in enumerate_homs(2, 2)])
        centered = values - values.mean()
        for e in report.estimates:
            assert e["se"] == 0.0
            assert e["value"] == pytest.approx(np.mean(centered ** e["k"]), rel=1e-9, abs=1e-14)
        assert report.references["finite_n_mean"] == pytest.approx(values.mean(), rel=1e-9, abs=1e-14)
        assert report.flags == {}

    def test_oracle_degree_cap(self, bolza_6):
        cfg = ExperimentConfig(mode="finite-n", oracle=True, n=5, L=6.0)
        with pytest.raises(ConfigError):
            mc_central_moments(cfg, bolza_6)

    def test_finite_mode_centers_empirically(self, bolza_6):
        cfg = ExperimentConfig(mode="finite-n", n=3, L=6.0, samples=400, seed=1, moments=[2, 3])
        report = mc_central_moments(cfg, bolza_6)
        assert any("empirical" in note for note in report.notes)
        assert report.estimates[0]["value"] > 0.0
        assert report.passed
