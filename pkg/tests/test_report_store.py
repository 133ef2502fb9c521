import sqlite3

import pytest

from ReportStore import ReportStore, config_hash, memoize_to_db


class Runner:
    def __init__(self, store):
        self.store = store
        self.calls = 0

    @memoize_to_db("reports")
    def compute(self, config: dict) -> dict:
        self.calls += 1
        return {"command": config["command"], "value": config["q"] * 2, "stable": config.get("stable", True)}


@pytest.fixture
def store(tmp_path):
    return ReportStore(base_dir=str(tmp_path))


def test_hash_ignores_key_order():
    assert config_hash({"q": 0.5, "cutoff": 40}) == config_hash({"cutoff": 40, "q": 0.5})
    assert config_hash({"q": 0.5}) != config_hash({"q": 0.25})


def test_save_and_fetch(store):
    store.save("k", "index", {"q": 0.5}, {"stable": True, "values": [1, 2]})
    assert store.fetch("k") == {"stable": True, "values": [1, 2]}
    assert store.fetch("missing") is None
    assert store.count() == 1
    store.clear()
    assert store.count() == 0


def test_stable_reports_are_memoized(store):
    runner = Runner(store)
    first = runner.compute({"command": "index", "q": 0.5})
    second = runner.compute({"command": "index", "q": 0.5})
    assert first == second
    assert runner.calls == 1
    assert store.count() == 1


def test_unstable_reports_are_not_stored(store):
    runner = Runner(store)
    runner.compute({"command": "index", "q": 0.5, "stable": False})
    runner.compute({"command": "index", "q": 0.5, "stable": False})
    assert runner.calls == 2
    assert store.count() == 0


def test_no_store_means_no_cache():
    runner = Runner(None)
    runner.compute({"command": "index", "q": 0.5})
    runner.compute({"command": "index", "q": 0.5})
    assert runner.calls == 2


def test_database_errors_fall_back_to_computing(store, monkeypatch):
    def broken(*args, **kwargs):
        raise sqlite3.OperationalError("disk I/O error")

    monkeypatch.setattr(store, "fetch", broken)
    monkeypatch.setattr(store, "save", broken)
    runner = Runner(store)
    assert runner.compute({"command": "index", "q": 0.5})["value"] == 1.0
    assert runner.calls == 1


def test_store_honours_the_cache_directory(tmp_path, monkeypatch):
    monkeypatch.setenv("QSU2_CACHE_DIR", str(tmp_path / "cache"))
    store = ReportStore()
    assert store.db_path == str(tmp_path / "cache" / "reports.db")
