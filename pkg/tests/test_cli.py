import json

import pytest

from hyperdisp import report
from hyperdisp.cli import EXIT_ABSTAINED, EXIT_ERROR, EXIT_MISMATCH, EXIT_OK, is_match, main, strict_status
from hyperdisp.config import ConfigError, parse_config

SMALL_SIM = {"nodes": 2048, "radius": 16.0, "t0": 1.0, "t1": 100.0, "count": 16, "fit_window": [10.0, 100.0]}


def write(tmp_path, d, name="job.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return str(p)


def kg_job(**extra):
    d = {"name": "kg", "symbol": {"corpus": "kg_1d"}, "analysis": {"radius": 4.0, "count": 201},
         "simulation": dict(SMALL_SIM), "sweep": [{"p": 1, "q": "inf"}]}
    d.update(extra)
    return d


@pytest.mark.parametrize("bad,where", [
    ({"symbol": {"corpus": "nope"}}, "symbol.corpus"),
    ({"symbol": {"corpus": "kg_1d", "inline": {}}}, "symbol"),
    ({"analysis": {"radius": 4.0, "colour": 1}}, "analysis"),
    ({"simulation": {"nodes": 999}}, "simulation"),
    ({"sweep": [{"p": 3, "q": "inf"}]}, "sweep[0]"),
    ({"sweep": [{"q": "inf"}]}, "sweep[0]"),
    ({"tolerances": {"aliasing": 0.5}}, "tolerances.aliasing"),
    ({"tolerances": {"mystery": 0.5}}, "tolerances.mystery"),
    ({"extra": 1}, "<root>"),
])
def test_config_errors_carry_paths(bad, where):
    d = kg_job()
    d.update(bad)
    with pytest.raises(ConfigError) as exc:
        parse_config(d)
    assert str(exc.value).startswith(where)


def test_config_sources(tmp_path):
    assert parse_config(kg_job()).symbol.name == "kg_1d"
    fp = parse_config({"symbol": {"fokker_planck": {"N": 1, "n": 1}}})
    assert fp.symbol.order == 2 and fp.sweep[0].key() == "p=1,q=inf,r=0,alpha=0"
    system = {"dimension": 1, "matrix": [[[], [{"alpha": [1], "re": 1.0}]], [[{"alpha": [1], "re": 1.0}], []]]}
    assert parse_config({"symbol": {"system": system}}).symbol.order == 2
    with pytest.raises(ConfigError, match="symbol.file"):
        parse_config({"symbol": {"file": "missing.json"}}, base=tmp_path)


def test_missing_and_malformed_config_files(tmp_path, capsys):
    assert main(["analyze", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == EXIT_ERROR
    p = tmp_path / "broken.json"
    p.write_text("{\n  \"name\": }")
    assert main(["analyze", "--config", str(p), "--out", str(tmp_path)]) == EXIT_ERROR
    assert "line 2" in capsys.readouterr().err


def test_corpus_commands(capsys):
    assert main(["corpus", "list"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) >= 7 and any(line.startswith("grad13") for line in lines)
    assert main(["corpus", "show", "grad13"]) == EXIT_OK
    assert "degree-9" in capsys.readouterr().out
    assert main(["corpus", "show", "no_such_symbol"]) == EXIT_ERROR
    assert "unknown" in capsys.readouterr().err


def test_analyze_schema_and_determinism(tmp_path):
    cfg = write(tmp_path, {"name": "diss", "symbol": {"corpus": "dissipative_wave_1d"},
                           "analysis": {"radius": 4.0, "count": 201}})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["analyze", "--config", cfg, "--out", str(a)]) == EXIT_OK
    assert main(["analyze", "--config", cfg, "--out", str(b)]) == EXIT_OK
    ja = (a / "diss.analysis.json").read_bytes()
    assert ja == (b / "diss.analysis.json").read_bytes()
    doc = report.read_json(a / "diss.analysis.json")
    report.validate(doc, "analysis")
    first = doc["predictions"][0]
    assert first["kappa"] == "1/2" and first["strichartz"]["q"] == "4/3"
    assert doc["interpolation_identity"] is True
    assert "kappa" in (a / "diss.analysis.txt").read_text()


def test_analyze_strict_abstains_on_unstable(tmp_path):
    cfg = write(tmp_path, {"name": "anti", "symbol": {"corpus": "anti_dissipative_1d"},
                           "analysis": {"radius": 2.0, "count": 41}})
    assert main(["analyze", "--config", cfg, "--out", str(tmp_path), "--strict"]) == EXIT_ABSTAINED
    doc = report.read_json(tmp_path / "anti.analysis.json")
    assert "no decay expected" in doc["abstained"]


def test_verify_unstable_reports_no_decay(tmp_path):
    cfg = write(tmp_path, {"name": "anti", "symbol": {"corpus": "anti_dissipative_1d"},
                           "analysis": {"radius": 2.0, "count": 41}})
    assert main(["verify", "--config", cfg, "--out", str(tmp_path), "--strict"]) == EXIT_ABSTAINED
    doc = report.read_json(tmp_path / "anti.verify.json")
    assert doc["summary"] == {"match": 0, "mismatch": 0, "abstained": 1}
    assert "no decay expected" in doc["note"]
    assert main(["verify", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK


def test_verify_kg_matches_and_strict_codes(tmp_path):
    cfg = write(tmp_path, kg_job())
    assert main(["verify", "--config", cfg, "--out", str(tmp_path), "--strict"]) == EXIT_OK
    doc = report.read_json(tmp_path / "kg.verify.json")
    (entry,) = doc["entries"]
    assert entry["verdict"] == "match" and entry["predicted"] == "1/2"
    assert abs(entry["measured"] - 0.5) < 0.15
    # an entry the experiment cannot measure turns the strict status into "abstained"
    cfg2 = write(tmp_path, kg_job(sweep=[{"p": 1, "q": "inf"}, {"p": 2, "q": 2}]), "job2.json")
    assert main(["verify", "--config", cfg2, "--out", str(tmp_path), "--strict"]) == EXIT_ABSTAINED


def test_strict_status_and_match_rule():
    assert strict_status({"match": 3, "mismatch": 0, "abstained": 0}) == EXIT_OK
    assert strict_status({"match": 3, "mismatch": 1, "abstained": 2}) == EXIT_MISMATCH
    assert strict_status({"match": 0, "mismatch": 0, "abstained": 2}) == EXIT_ABSTAINED
    assert is_match(0.5, 0.64, 0.01) and not is_match(0.5, 0.66, 0.01)
    assert is_match(0.5, 0.8, 0.2)


def test_simulate_writes_csv_and_sidecar(tmp_path, capsys):
    d = kg_job(sweep=[{"p": 1, "q": "inf", "r": 0}, {"p": 1, "q": "inf", "r": 1}])
    cfg = write(tmp_path, d)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path), "--seed", "3"]) == EXIT_OK
    for stem in ("kg.r0a0", "kg.r1a0"):
        lines = (tmp_path / f"{stem}.csv").read_text().splitlines()
        assert lines[0] == "t,q,r,abs_alpha,norm" and len(lines) == 1 + 2 * 16
        side = report.read_json(tmp_path / f"{stem}.json")
        report.validate(side, "simulation")
        assert len(side["times"]) == 16
    assert "fitted exponent" in capsys.readouterr().out


def test_simulate_single_time(tmp_path):
    sim = dict(SMALL_SIM, t0=5.0, t1=5.0, count=1)
    cfg = write(tmp_path, kg_job(simulation=sim))
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "kg.r0a0.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[1].startswith("5")
