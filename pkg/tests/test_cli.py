import json

import numpy as np
import pytest

from capred import ParseError
from capred.cli import JobSettings, JobSpec, parse_map_source, run_cli, run_job
from capred.report import canonical_json

LOG2 = np.log(2)


def settings(**kw):
    defaults = dict(restarts=2, max_iter=120, tol=1e-7, seed=42, threads=1)
    defaults.update(kw)
    return JobSettings(**defaults)


def run(command, sources=(), **kw):
    code, text = run_job(JobSpec(command, tuple(sources), settings(**kw)))
    return code, text


def result_of(text):
    return json.loads(text)["result"]


def test_parse_constructors():
    assert parse_map_source("id:[2]").source.blocks == (2,)
    pinch = parse_map_source("pinch:[3];blocks=1,2")
    assert pinch.certificate == "Pinching"
    dstoch = parse_map_source("dstoch:[[0.9,0.1],[0.1,0.9]]")
    assert dstoch.source.blocks == (1, 1)
    dc = parse_map_source("depolcorner:[3];rank=2")
    assert dc.certificate == "DepolarizeCorner"
    combined = parse_map_source("tensor(pinch:[2];blocks=1,1,id:[2])")
    assert combined.source.blocks == (4,)
    composed = parse_map_source("compose(depol:[2],pinch:[2];blocks=1,1)")
    assert composed.source.blocks == (2,)
    summed = parse_map_source("dsum(id:[1],id:[2])")
    assert summed.source.blocks == (1, 2)


def test_parse_errors_carry_position():
    with pytest.raises(ParseError) as err:
        parse_map_source("pinch:[3];blocks=1,1")
    assert "position" in str(err.value)
    with pytest.raises(ParseError):
        parse_map_source("dstoch:[[0.9,0.1],[0.1,")
    with pytest.raises(ParseError):
        parse_map_source("nonsense:[2]")
    with pytest.raises(ParseError):
        parse_map_source("no-such-file.json")


def test_reduce_diagonal_pinching():
    code, text = run("reduce", ["pinch:[3];blocks=1,1,1"])
    assert code == 0
    result = result_of(text)
    assert result["value"] == pytest.approx(np.log(3), abs=1e-9)
    assert len(result["children"]) == 3
    assert all(c["method"] == "Exact" for c in result["children"])


def test_capacity_routes_stochastic_to_blahut_arimoto():
    code, text = run("capacity", ["dstoch:[[1,0],[0,1]]"])
    assert code == 0
    result = result_of(text)
    assert result["method"] == "BlahutArimoto"
    assert result["value"] == pytest.approx(LOG2, abs=1e-9)


def test_capacity_ascent_path():
    code, text = run("capacity", ["depol:[2]"], max_iter=60)
    assert code == 0
    result = result_of(text)
    assert result["method"] == "EnsembleAscent"
    assert abs(result["value"]) <= 1e-9


def test_verify_lemma1():
    code, text = run("verify-lemma1", shape="[3]", samples=200, seed=7)
    assert code == 0
    result = result_of(text)
    assert result["pass"] is True
    assert result["minSlack"] >= -1e-9
    assert len(result["slacks"]) == 200


def test_decompose_schema():
    code, text = run("decompose", ["depolcorner:[3];rank=2"])
    assert code == 0
    result = result_of(text)
    assert set(result) == {"definiteDim", "ergodic", "partition", "gramSpectrum"}
    assert result["definiteDim"] == 2
    assert result["ergodic"] is False
    ranks = sorted(p["rank"] for p in result["partition"])
    assert ranks == [1, 2]
    assert len(result["gramSpectrum"]) == 9


def test_restriction_command():
    code, text = run("restriction", ["depolcorner:[3];rank=2"], restarts=4, max_iter=250)
    assert code == 0
    result = result_of(text)
    assert abs(result["gap"]) <= 2e-3
    assert result["full"]["value"] == pytest.approx(LOG2, abs=2e-3)


def test_additivity_command():
    code, text = run("additivity", ["depol:[2]", "depol:[2]"], max_iter=60)
    assert code == 0
    result = result_of(text)
    assert result["sum"] == pytest.approx(0.0, abs=1e-9)
    assert result["deficit"] >= -5e-3


def test_tensor_id_command():
    code, text = run("tensor-id", ["depol:[2]"], id_shape="[2]", max_iter=60)
    assert code == 0
    result = result_of(text)
    assert result["expected"] == pytest.approx(LOG2, abs=1e-9)
    assert result["tensor"]["value"] == pytest.approx(LOG2, abs=1e-9)


def test_reports_are_reproducible():
    a = run("reduce", ["depolcorner:[3];rank=2"], seed=9)
    b = run("reduce", ["depolcorner:[3];rank=1"], seed=9)  # different job
    c = run("reduce", ["depolcorner:[3];rank=2"], seed=9)
    assert a == c
    assert a != b


def test_csv_row_count():
    code, text = run("reduce", ["pinch:[3];blocks=1,1,1"], output="csv")
    assert code == 0
    lines = [ln for ln in text.strip().splitlines() if not ln.startswith("#")]
    assert len(lines) == 1 + 3  # header + one row per corner


def test_bits_mode():
    code, text = run("capacity", ["dstoch:[[1,0],[0,1]]"], log_base="bits")
    result = result_of(text)
    assert result["value"] == pytest.approx(1.0, abs=1e-9)


def test_human_output():
    code, text = run("reduce", ["pinch:[2];blocks=1,1"], output="human")
    assert code == 0
    assert "job: reduce" in text
    assert "cornerRank" in text


def test_float_serialization_roundtrip():
    code, text = run("capacity", ["dstoch:[[0.9,0.1],[0.1,0.9]]"])
    parsed = json.loads(text)
    value = parsed["result"]["value"]
    assert abs(value - (LOG2 - (-0.1 * np.log(0.1) - 0.9 * np.log(0.9)))) < 1e-6
    # every float in the canonical form round-trips to 12 significant digits
    assert canonical_json(parsed) is not None


def test_exit_codes(capsys):
    assert run_cli(["capacity", "dstoch:[[1,0],[0,1]]"]) == 0
    capsys.readouterr()
    assert run_cli(["capacity", "dstoch:[[1,0],[0,"]) == 2
    assert "error" in capsys.readouterr().err
    assert run_cli(["capacity", "id:[2]", "--tol", "5"]) == 2
    capsys.readouterr()
    assert run_cli(["capacity", "id:[2]", "--restarts", "4000"]) == 2
    capsys.readouterr()
    assert run_cli(["capacity", "missing-file.json"]) == 2
    capsys.readouterr()


def test_map_file_input(tmp_path):
    from capred import PtpuMap
    path = tmp_path / "transpose.json"
    payload = PtpuMap([2], [2], np.diag([1.0, 1.0, 1.0, -1.0]), "UserAsserted",
                      "transpose").to_json()
    path.write_text(json.dumps(payload))
    code, text = run("capacity", [str(path)], max_iter=60)
    assert code == 0
    result = result_of(text)
    assert result["positivityUnverified"] is True
    # the transpose is an isometry on hermitian coordinates: capacity log 2
    assert result["value"] == pytest.approx(LOG2, abs=2e-3)


def test_figures(tmp_path):
    outdir = tmp_path / "figs"
    code, text = run("reduce", ["pinch:[2];blocks=1,1"], figures=str(outdir))
    assert code == 0
    paths = json.loads(text)["figures"]
    assert len(paths) == 1
    from pathlib import Path
    assert Path(paths[0]).stat().st_size > 0


def test_timings_flag():
    code, text = run("capacity", ["dstoch:[[1,0],[0,1]]"], timings=True)
    parsed = json.loads(text)
    assert parsed["timings_ms"]["total"] >= 0.0
    code, text = run("capacity", ["dstoch:[[1,0],[0,1]]"])
    assert json.loads(text)["timings_ms"] is None


def test_threads_env_override(monkeypatch):
    monkeypatch.setenv("CAPRED_THREADS", "3")
    from capred.cli import _resolve_threads
    assert _resolve_threads(8) == 3
    monkeypatch.delenv("CAPRED_THREADS")
    assert _resolve_threads(8) == 8
