import json

import numpy as np
import pytest

from src.cache import ContentCache, cached_homs, cached_spectrum, sample_hom_blocks
from src.errors import InvariantViolation
from src.permutations import relation_holds


class TestContentCache:
    def test_store_and_load(self, tmp_path):
        cache = ContentCache(tmp_path)
        key = {"n": 3, "seed": 1}
        assert cache.load("homs", key) is None
        path = cache.store("homs", key, [1, 2, 3])
        assert path.name == cache.key_digest("homs", key) + ".json"
        assert cache.load("homs", key) == [1, 2, 3]
        # an identical second write is accepted
        assert cache.store("homs", key, [1, 2, 3]) == path

    def test_key_order_does_not_matter(self, tmp_path):
        cache = ContentCache(tmp_path)
        assert cache.key_digest("x", {"a": 1, "b": 2}) == cache.key_digest("x", {"b": 2, "a": 1})
        assert cache.key_digest("x", {"a": 1}) != cache.key_digest("y", {"a": 1})

    def test_conflicting_content(self, tmp_path):
        cache = ContentCache(tmp_path)
        cache.store("homs", {"n": 3}, [1])
        with pytest.raises(InvariantViolation):
            cache.store("homs", {"n": 3}, [2])

    def test_entry_for_another_key(self, tmp_path):
        cache = ContentCache(tmp_path)
        path = cache.store("homs", {"n": 3}, [1])
        path.write_text(json.dumps({"key": {"n": 4}, "value": [1]}), encoding="utf-8")
        with pytest.raises(InvariantViolation):
            cache.load("homs", {"n": 3})

    def test_environment_root(self, monkeypatch, tmp_path):
        monkeypatch.setenv("COVERS_CACHE_DIR", str(tmp_path / "env"))
        assert ContentCache().root == tmp_path / "env"


class TestCachedData:
    def test_homs_are_sampled_once(self, tmp_path):
        cache = ContentCache(tmp_path)
        first = cached_homs(3, 2, seed=5, count=40, cache=cache)
        second = cached_homs(3, 2, seed=5, count=40, cache=cache)
        assert np.array_equal(first, second)
        assert first.shape == (40, 4, 3)
        assert np.all(relation_holds(first, 2))
        assert len(list((tmp_path / "homs").iterdir())) == 1

    def test_worker_count_does_not_change_the_sample(self):
        one = sample_hom_blocks(3, 2, seed=6, count=4500, jobs=1)
        three = sample_hom_blocks(3, 2, seed=6, count=4500, jobs=3)
        assert one.shape == (4500, 4, 3)
        assert np.array_equal(one, three)
        assert np.all(relation_holds(three, 2))
        assert sample_hom_blocks(3, 2, seed=6, count=0).shape == (0, 4, 3)

    def test_jobs_flag_reaches_the_sampler(self, tmp_path):
        serial = cached_homs(3, 2, seed=7, count=2500, cache=ContentCache(tmp_path / "a"))
        threaded = cached_homs(3, 2, seed=7, count=2500, cache=ContentCache(tmp_path / "b"), jobs=2)
        assert np.array_equal(serial, threaded)

    def test_spectrum(self, tmp_path):
        cache = ContentCache(tmp_path)
        spectrum = cached_spectrum("bolza", 4.0, cache=cache)
        assert len(spectrum.classes) == 12
        again = cached_spectrum("bolza", 4.0, cache=cache)
        assert again.matches(spectrum, tol=0.0)
