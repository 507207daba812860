import hashlib
import os

import path_utils


def test_empty_path_passes_through():
    assert path_utils.normalize_path(None) is None
    assert path_utils.normalize_path("") == ""


def test_home_and_env_vars_expand_to_absolute(monkeypatch, tmp_path):
    monkeypatch.setenv("GRAPH_DATA", str(tmp_path))
    out = path_utils.normalize_path("$GRAPH_DATA/prices.csv")
    assert out == os.path.join(str(tmp_path), "prices.csv")

    home = os.path.expanduser("~")
    out = path_utils.normalize_path("~/data/x.csv")
    assert "~" not in out
    assert out.startswith(home.rstrip("/") + "/")


def test_relative_path_resolves_against_cwd(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    assert path_utils.normalize_path("outputs/graph.json") == os.path.join(str(tmp_path), "outputs", "graph.json")


def test_ensure_parent_creates_directories(tmp_path):
    target = tmp_path / "a" / "b" / "graph.json"
    out = path_utils.ensure_parent(target)
    assert out == str(target)
    assert target.parent.is_dir()
    # second call is a no-op
    assert path_utils.ensure_parent(target) == str(target)


def test_file_digest_is_sha256(tmp_path):
    path = tmp_path / "x.csv"
    payload = b"node,t1\nA,1\n" * 10_000
    path.write_bytes(payload)
    assert path_utils.file_digest(path) == hashlib.sha256(payload).hexdigest()
