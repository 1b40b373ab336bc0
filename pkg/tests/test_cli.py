import json

import pytest

from pressurelab import cli
from pressurelab import config as C
from pressurelab.errors import ConfigInvalid


def _write(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _manifest(d):
    return json.loads((d / "manifest.json").read_text())


def test_parse_text_and_errors():
    raw = C.parse_text("group = schottky  # comment\n\nfamily.t = 0.03\n")
    assert raw == {"group": "schottky", "family.t": "0.03"}
    for bad in ("novalue", "a = 1\na = 2", "bad key = 1"):
        with pytest.raises(ConfigInvalid):
            C.parse_text(bad)


def test_from_mapping_velocities():
    V = ",".join(["1", "0", "0", "0", "-1", "0", "0", "0", "0"])
    cfg = C.from_mapping({"family.v1.a": V, "family.v1.b": V, "phi": "alpha1"})
    assert len(cfg.velocities) == 1 and cfg.velocities[0].shape == (2, 3, 3)
    with pytest.raises(ConfigInvalid):
        C.from_mapping({"family.v1.a": V})
    with pytest.raises(ConfigInvalid):
        C.from_mapping({"family.v1.a": "1,0,0,0,0,0,0,0,0", "family.v1.b": V})  # not trace-zero
    with pytest.raises(ConfigInvalid):
        C.from_mapping({"unknown": "1"})
    with pytest.raises(ConfigInvalid):
        C.from_mapping({"n": "ten"})
    with pytest.raises(ConfigInvalid):
        C.from_mapping({"seed": "-1"})


@pytest.mark.parametrize("text", ["group = hyperbolic\n", "route = fast\n", "phi = nope\n", "d = 1\n"])
def test_invalid_config_exit_2(tmp_path, text):
    cfg = _write(tmp_path, text)
    out = tmp_path / "o"
    assert cli.main(["enumerate", "--config", str(cfg), "--out", str(out)]) == 2
    assert _manifest(out)["error"] == "ConfigInvalid"


def test_missing_config_exit_2(tmp_path):
    assert cli.main(["enumerate", "--config", str(tmp_path / "none.cfg"), "--out", str(tmp_path / "o")]) == 2


def test_unsupported_group_exit_3(tmp_path):
    cfg = _write(tmp_path, "group = punctured_torus\nroute = slope\ngram.k = 1\nmax_word_length = 8\n")
    out = tmp_path / "o"
    assert cli.main(["pressure-form", "--config", str(cfg), "--out", str(out)]) == 3
    m = _manifest(out)
    assert m["status"] == "numerical_failure" and m["error"] == "UnsupportedGroup"


def test_enumerate_deterministic_and_manifest(tmp_path):
    cfg = _write(tmp_path, "max_word_length = 6\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["enumerate", "--config", str(cfg), "--out", str(a)]) == 0
    assert cli.main(["enumerate", "--config", str(cfg), "--out", str(b)]) == 0
    for name in ("classes.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    m = _manifest(a)
    assert len(m["config_sha256"]) == 64 and m["version"] and "loxodromy_gap" in m["tolerances"]
    assert m["results"]["per_length"]["1"] == 4


def test_intersect_same_eta(tmp_path):
    cfg = _write(tmp_path, "eta = same\nmax_word_length = 9\nn = 8\n")
    out = tmp_path / "o"
    assert cli.main(["intersect", "--config", str(cfg), "--out", str(out)]) == 0
    res = _manifest(out)["results"]
    assert res["J_orbital"] == 1.0
    assert res["I_orbital"] == pytest.approx(1.0)


def test_trace_check(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["trace-check", "--out", str(out)]) == 0
    res = _manifest(out)["results"]
    assert res["max_rel_error"] < 1e-5
    assert res["min_target"] > 1e-8 and res["transversality_margin"] > 0


def test_entropy_torus(tmp_path):
    cfg = _write(tmp_path, "group = punctured_torus\nphi = alpha1\nmax_word_length = 14\n")
    out = tmp_path / "o"
    assert cli.main(["entropy", "--config", str(cfg), "--out", str(out)]) == 0
    assert 0.85 <= _manifest(out)["results"]["h_estimate"] <= 1.15
    assert (out / "refined_ratio.csv").exists()


def test_validate_and_seed_override(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["validate", "--out", str(out), "--seed", "7", "--threads", "2"]) == 0
    m = _manifest(out)
    assert m["config"]["seed"] == 7 and m["config"]["threads"] == 2
    assert m["results"]["rho"]["ok"] and m["results"]["eta"]["ok"]


def test_lengths_writes_both_tables(tmp_path):
    cfg = _write(tmp_path, "max_word_length = 7\n")
    out = tmp_path / "o"
    assert cli.main(["lengths", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "lengths_rho.csv").exists() and (out / "lengths_eta.csv").exists()
