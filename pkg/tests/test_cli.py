from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import pytest

from app.config import load_settings
from app.main import EXIT_CONFIG, EXIT_OK, EXIT_STRUCTURE, main, sweep_grid
from app.runconfig import ConfigError, parse_run_config
from app.store import dumps_csv, dumps_json, read_json

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path: Path, data: dict, name: str = "run.json") -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def _z2(sites: int = 3, **extra) -> dict:
    data = {
        "spec_version": 1,
        "model": {"name": "z2", "parameters": {"gamma_x": 0.4, "gamma_f": 1.0, "gamma_z": 0.5}},
        "lattice": {"geometry": "chain", "sites": sites},
    }
    data.update(extra)
    return data


def _run(argv: list[str], capsys) -> tuple[int, str, str]:
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_spectrum_of_the_z2_chain(tmp_path, capsys):
    out = tmp_path / "spectrum.json"
    code = main(["spectrum", "--config", str(CONFIGS / "z2_chain4.json"), "--output", str(out)])
    assert code == EXIT_OK
    result = read_json(out)
    assert result["command"] == "spectrum"
    assert result["exit_code"] == 0
    assert result["result"]["method"] == "blocks"
    assert result["result"]["real"] is True
    assert result["result"]["spectrum"]["gap"] == pytest.approx(0.2, abs=1e-9)
    assert result["result"]["spectrum"]["size"] == 256
    assert sum(b["size"] for b in result["result"]["block_summary"]) == 256


def test_emission_single_site_eigenvalues(capsys):
    code, stdout, _ = _run(["spectrum", "--config", str(CONFIGS / "emission_single.json")], capsys)
    assert code == EXIT_OK
    values = json.loads(stdout)["result"]["spectrum"]["eigenvalues"]
    assert [v[0] for v in values] == pytest.approx([0.0, -0.5, -0.5, -1.0], abs=1e-12)
    assert all(abs(v[1]) < 1e-12 for v in values)


def test_malformed_config_exits_with_config_error(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    code, stdout, stderr = _run(["spectrum", "--config", str(path)], capsys)
    assert code == EXIT_CONFIG
    assert stdout == ""
    assert "config error" in stderr


def test_unknown_config_keys_are_rejected(tmp_path, capsys):
    data = _z2(analyses=["spectrum", "verify"])
    code, stdout, stderr = _run(["spectrum", "--config", str(_write(tmp_path, data))], capsys)
    assert code == EXIT_CONFIG
    assert stdout == ""
    assert "analyses" in stderr


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_parse(tmp_path, path):
    data = json.loads(path.read_text(encoding="utf-8"))
    assert parse_run_config(data, load_settings(tmp_path)).model == data["model"]["name"]


def test_unknown_model_and_missing_file(tmp_path, capsys):
    data = _z2()
    data["model"]["name"] = "ising"
    assert main(["gap", "--config", str(_write(tmp_path, data))]) == EXIT_CONFIG
    assert main(["gap", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_missing_subcommand_is_an_argparse_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_verify_passes_for_z2(tmp_path, capsys):
    code, stdout, _ = _run(["verify", "--config", str(_write(tmp_path, _z2()))], capsys)
    assert code == EXIT_OK
    payload = json.loads(stdout)["result"]
    assert payload["passed"] is True
    names = [s["name"] for s in payload["suites"]]
    assert names == [
        "biorthonormality",
        "trace_preservation",
        "triangularity",
        "hermiticity",
        "negativity",
        "bound_soundness",
        "weyl",
        "detailed_balance",
    ]
    skipped = {s["name"] for s in payload["suites"] if s["skipped"]}
    assert skipped == {"detailed_balance"}


def test_verify_flags_the_wrong_basis(capsys):
    code, stdout, _ = _run(["verify", "--config", str(CONFIGS / "z2_wrong_basis.json")], capsys)
    assert code == EXIT_STRUCTURE
    suites = {s["name"]: s for s in json.loads(stdout)["result"]["suites"]}
    assert suites["hermiticity"]["passed"] is False


def test_verify_davies_detailed_balance(capsys):
    code, stdout, _ = _run(["verify", "--config", str(CONFIGS / "davies_qubit.json")], capsys)
    assert code == EXIT_OK
    suites = {s["name"]: s for s in json.loads(stdout)["result"]["suites"]}
    assert suites["detailed_balance"]["passed"] is True
    assert not suites["detailed_balance"]["skipped"]
    assert suites["detailed_balance"]["worst"] <= 1e-10


def test_blocks_command_reports_the_partition(tmp_path, capsys):
    code, stdout, _ = _run(["blocks", "--config", str(_write(tmp_path, _z2(2)))], capsys)
    assert code == EXIT_OK
    payload = json.loads(stdout)["result"]
    assert payload["triangularity"]["is_triangular"] is True
    assert [b["size"] for b in payload["partition"]["blocks"]] == [1, 6, 9]
    assert all(b["symmetry"] == "hermitian" for b in payload["blocks"])


def test_blocks_command_fails_without_a_triangular_orientation(tmp_path, capsys):
    data = _z2(2, basis="bz", grading="ketbra_updown")
    assert main(["blocks", "--config", str(_write(tmp_path, data))]) == EXIT_STRUCTURE


def test_forced_block_method_on_non_triangular_matrix(tmp_path, capsys):
    data = _z2(2, basis="bz", grading="ketbra_updown", method="blocks")
    assert main(["spectrum", "--config", str(_write(tmp_path, data))]) == EXIT_STRUCTURE
    data["method"] = "auto"
    code, stdout, _ = _run(["spectrum", "--config", str(_write(tmp_path, data))], capsys)
    assert code == EXIT_OK
    assert json.loads(stdout)["result"]["method"] == "dense"


def test_bounds_are_sound(tmp_path, capsys):
    code, stdout, _ = _run(["bounds", "--config", str(_write(tmp_path, _z2()))], capsys)
    assert code == EXIT_OK
    rows = json.loads(stdout)["result"]["blocks"]
    assert rows and all(r["sound"] for r in rows)
    assert all(r["upper_slack"] >= -1e-10 for r in rows)


def test_sweep_gap_follows_gamma_x(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code = main(["sweep", "--config", str(CONFIGS / "z2_sweep.json"), "--output", str(out)])
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out.read_text(encoding="utf-8"))))
    assert len(rows) == 11
    for row in rows:
        gamma_x = float(row["gamma_x"])
        if gamma_x == 0.0:
            assert int(row["steady_dim"]) == 2
        else:
            assert float(row["gap"]) == pytest.approx(gamma_x / 2, abs=1e-9)
            assert int(row["steady_dim"]) == 1


def test_xx_sweep_keeps_the_gap(tmp_path, capsys):
    code, stdout, _ = _run(["sweep", "--config", str(CONFIGS / "emission_xx.json")], capsys)
    assert code == EXIT_OK
    rows = json.loads(stdout)["result"]["rows"]
    assert [r["J"] for r in rows] == [0.0, 0.5, 1.0, 2.0]
    assert all(r["gap"] == pytest.approx(0.5, abs=1e-7) for r in rows)


def test_json_output_round_trips_byte_for_byte(tmp_path, capsys):
    out = tmp_path / "gap.json"
    assert main(["gap", "--config", str(CONFIGS / "emission_xxz.json"), "--output", str(out)]) == EXIT_OK
    text = out.read_text(encoding="utf-8")
    assert dumps_json(read_json(out)) == text
    assert read_json(out)["result"]["spectrum"]["gap"] == pytest.approx(0.5, abs=1e-9)


def test_floats_are_written_with_17_significant_digits():
    text = dumps_json({"x": 0.1, "n": [2.0, -0.0, 0.5], "s": "é"})
    assert text == '{\n  "n": [\n    2.0,\n    0.0,\n    0.5\n  ],\n  "s": "é",\n  "x": 0.10000000000000001\n}\n'
    assert json.loads(text)["x"] == 0.1
    row = dumps_csv([{"gap": 0.1, "pair": [0.5, None], "ok": True}]).splitlines()[1]
    assert row == '0.10000000000000001,"[0.5, null]",True'


def test_float_free_json_matches_the_standard_layout():
    data = {"b": [1, "é", None, True], "a": {}, "c": [], "d": {"z": [[]], "y": "q"}}
    assert dumps_json(data) == json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def test_identical_configs_give_identical_results(tmp_path, capsys):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    config = str(_write(tmp_path, _z2()))
    assert main(["spectrum", "--config", config, "--output", str(first)]) == EXIT_OK
    assert main(["spectrum", "--config", config, "--output", str(second), "--threads", "3"]) == EXIT_OK
    assert read_json(first)["result_fp"] == read_json(second)["result_fp"]


def test_auto_output_lands_in_the_output_dir(tmp_path, capsys):
    code = main(["gap", "--config", str(_write(tmp_path, _z2())), "--output", "auto"])
    assert code == EXIT_OK
    written = list((tmp_path / "data").glob("gap-*.json"))
    assert len(written) == 1
    assert (tmp_path / "logs" / "run.log").exists()


def test_csv_spectrum_rows(tmp_path, capsys):
    code, stdout, _ = _run(
        ["spectrum", "--config", str(CONFIGS / "emission_single.json"), "--format", "csv"],
        capsys,
    )
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(stdout)))
    assert [float(r["re"]) for r in rows] == pytest.approx([0.0, -0.5, -0.5, -1.0], abs=1e-12)


def test_flag_overrides(tmp_path):
    settings = load_settings(tmp_path)
    cfg = parse_run_config(_z2(), settings, {"basis": "pauli", "grading": "none", "tol": 1e-8})
    assert cfg.basis == "pauli"
    assert cfg.grading is None
    assert cfg.tol == 1e-8
    with pytest.raises(ConfigError):
        parse_run_config(_z2(), settings, {"basis": "bz", "grading": "nynz"})
    with pytest.raises(ConfigError):
        parse_run_config({**_z2(), "spec_version": 2}, settings)
    with pytest.raises(ConfigError):
        parse_run_config(_z2(7, method="dense"), settings)


def test_sweep_grid_is_a_product():
    grid = sweep_grid({"a": [1, 2], "b": [0.5]})
    assert grid == [{"a": 1, "b": 0.5}, {"a": 2, "b": 0.5}]
