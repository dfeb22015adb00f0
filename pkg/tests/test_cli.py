import csv
import io
import json
import math
from pathlib import Path

import jsonschema
import pytest

from blockmeasures import schemas
from blockmeasures.cli import RunConfig, main

DATA = Path(__file__).parent / "data"


def run(args, capsys):
    buf = io.StringIO()
    code = main(args, out=buf)
    return code, buf.getvalue(), capsys.readouterr().err


def test_simulate_matches_golden(capsys):
    code, out, _ = run(["simulate", "--model", "asep", "--p", "0.7", "--sector", "0",
                        "--t-max", "1e4", "--seed", "42"], capsys)
    assert code == 0
    assert out == (DATA / "simulate_asep_sector0_seed42.txt").read_text()
    meta = json.loads(out.strip().splitlines()[-1])
    jsonschema.validate(meta, schemas.SIMULATE)
    assert meta["observers"]["ConservedObserver"]["violations"] == 0


def test_simulate_reservoir_run(capsys):
    code, out, _ = run(["simulate", "--model", "zrp_rate1", "--p", "0.7", "--ell", "-8",
                        "--t-max", "1e3"], capsys)
    assert code == 0
    meta = json.loads(out.strip().splitlines()[-1])
    jsonschema.validate(meta, schemas.SIMULATE)
    cur = meta["observers"]["CurrentObserver"]
    assert cur["right_in"] > 0 and meta["t"] == 1000.0


def test_simulate_is_reproducible(capsys):
    args = ["simulate", "--model", "k_exclusion", "--K", "2", "--p", "0.8", "--max-events", "3000",
            "--seed", "5"]
    assert run(args, capsys)[1] == run(args, capsys)[1]


def test_missing_p_is_usage_error(capsys):
    with pytest.raises(SystemExit) as err:
        main(["simulate", "--model", "asep", "--t-max", "10"], out=io.StringIO())
    assert err.value.code == 2


def test_invalid_model_parameter(capsys):
    code, _, err = run(["simulate", "--model", "k_exclusion", "--K", "1", "--p", "0.7",
                        "--t-max", "1"], capsys)
    assert code == 2 and "error" in err


def test_verify_detailed_balance(capsys):
    code, out, err = run(["verify", "detailed-balance", "--model", "asep", "--sites", "4",
                          "--p", "0.7", "--c", "0"], capsys)
    assert code == 0 and err.startswith("PASS")
    payload = json.loads(out)
    jsonschema.validate(payload, schemas.VERIFY)
    assert payload["pass"] and payload["max_residual"] < 1e-12


def test_verify_jacobi(capsys):
    code, out, err = run(["verify", "jacobi", "--x", "0.5", "--y", "1", "--tol", "1e-10"], capsys)
    assert code == 0 and "residual" in err
    jsonschema.validate(json.loads(out), schemas.VERIFY)


def test_verify_jacobi_domain(capsys):
    code, _, err = run(["verify", "jacobi", "--x", "1.5", "--y", "1"], capsys)
    assert code == 2


@pytest.mark.parametrize("args", [
    ["verify", "stationarity", "--model", "bricklayers", "--p", "0.7", "--sites", "2", "--cap", "-3..4"],
    ["verify", "shift-identity", "--model", "k_exclusion", "--K", "2", "--p", "0.7", "--c", "0.2",
     "--count", "40"],
    ["verify", "decomposition", "--p", "0.7", "--c", "0", "--window", "5"],
    ["verify", "meq", "--p", "0.7", "--c", "0", "--count", "10"],
    ["verify", "combi", "--p", "0.9", "--c", "-1", "--count", "10"],
])
def test_verify_checks_pass(args, capsys):
    code, out, _ = run(args, capsys)
    assert code == 0, out
    jsonschema.validate(json.loads(out), schemas.VERIFY)


def test_verify_failure_exit_code(capsys):
    """A tolerance below rounding makes a passing check fail with exit 1."""
    code, out, err = run(["verify", "detailed-balance", "--model", "asep", "--sites", "6",
                          "--p", "0.9", "--c", "0.3", "--tol", "0"], capsys)
    payload = json.loads(out)
    if payload["max_residual"] > 0:
        assert code == 1 and err.startswith("FAIL")
    else:
        assert code == 0


def test_sample_marginals(capsys):
    code, out, _ = run(["sample", "marginals", "--model", "asep", "--p", "0.7", "--c", "0",
                        "--sites", "-10..10"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 21
    lr = math.log(0.7 / 0.3)
    for row in rows:
        i = int(row["site"])
        assert float(row["pmf_1"]) == pytest.approx(1 / (1 + math.exp(-i * lr)), rel=1e-14)


def test_sample_sector(capsys, tmp_path):
    meta_path = tmp_path / "meta.json"
    code, out, _ = run(["sample", "sector", "--model", "asep", "--p", "0.7", "--n", "0",
                        "--count", "100", "--seed", "7", "--json", str(meta_path)], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 100
    from blockmeasures.state import Configuration, conserved_n
    assert all(conserved_n(Configuration.from_text(r["configuration"])) == 0 for r in rows)
    meta = json.loads(meta_path.read_text())
    jsonschema.validate(meta, schemas.SAMPLE)
    assert meta["rows"] == 100


def test_sample_weights(capsys):
    code, out, _ = run(["sample", "weights", "--p", "0.8", "--c", "0", "--n", "-8..8"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 17
    total = math.fsum(float(r["weight"]) for r in rows)
    assert total == pytest.approx(1.0, abs=1e-15)
    assert float(rows[8]["weight"]) == pytest.approx(1 / 2.5317401904617327, rel=1e-14)


def test_config_file_round_trip_and_override(capsys, tmp_path):
    cfg = RunConfig("sample", "weights", {"p": "0.8", "c": "0", "n": "-2..2"})
    assert RunConfig.from_text(cfg.to_text()) == cfg
    path = tmp_path / "run.cfg"
    path.write_text(cfg.to_text())
    code, out, _ = run(["--config", str(path)], capsys)
    assert code == 0 and len(out.strip().splitlines()) == 6
    code, out2, _ = run(["--config", str(path), "sample", "weights", "--n", "0..1"], capsys)
    assert code == 0 and len(out2.strip().splitlines()) == 3


def test_schemas_are_valid():
    for schema in schemas.ALL.values():
        jsonschema.Draft7Validator.check_schema(schema)
