import json

import numpy as np
import pytest

import oracle_values as ov
from embedded_spectra.cli import bundled_config, load_config, main
from embedded_spectra.errors import ConfigError


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return str(path)


def read_csv(path):
    lines = path.read_text().splitlines()
    meta = dict(l[2:].split(": ", 1) for l in lines if l.startswith("# "))
    body = [l.split(",") for l in lines if not l.startswith("#")]
    return meta, body[0], body[1:]


def run(tmp_path, command, cfg, *extra):
    out = tmp_path / "out"
    code = main([command, "--config", write_cfg(tmp_path, cfg), "--out", str(out), *extra])
    return code, out


EX5 = {"potential": "example5", "lambda0": ov.LAMBDA0, "beta": 2.0}


def test_bundled_config_valid():
    cfg, raw = load_config(bundled_config())
    assert cfg["potential"] == "example5"
    assert raw.startswith(b"{")


def test_free_bands_single(tmp_path, capsys):
    code, out = run(tmp_path, "bands", {"potential": "free",
                                        "bands": {"lambda_range": [0.5, 3.5], "samples": 61}})
    assert code == 0
    _, cols, rows = read_csv(out / "band_edges.csv")
    assert cols == ["band", "lower", "upper"] and len(rows) == 1
    assert "1 band(s)" in capsys.readouterr().out


def test_mathieu_bands(tmp_path):
    code, out = run(tmp_path, "bands", {"potential": "mathieu",
                                        "bands": {"lambda_range": [-1.0, 4.0], "samples": 121}})
    assert code == 0
    _, _, rows = read_csv(out / "band_edges.csv")
    assert len(rows) >= 2
    assert abs(float(rows[0][1]) - ov.MATHIEU_A0) < 1e-6
    meta, cols, data = read_csv(out / "bands.csv")
    assert cols == ["lambda", "discriminant", "in_band"] and len(data) == 121
    assert meta["command"] == "bands" and len(meta["config_sha256"]) == 64


def test_beta_violation_cites_constraint(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "potential": "example5",\n  "beta": 0.5\n}\n')
    assert main(["bands", "--config", str(path), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "X_beta" in err and "bad.json:3:" in err


@pytest.mark.parametrize("text", ['{"potential": "example5",}', '{"potential": "moon"}',
                                  '{"potential": "free", "colour": 1}',
                                  '{"potential": "free", "matching": {"tol": -1}}'])
def test_invalid_configs_exit_2(tmp_path, text):
    path = tmp_path / "bad.json"
    path.write_text(text)
    assert main(["monodromy", "--config", str(path), "--out", str(tmp_path)]) == 2


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")


def test_monodromy_report(tmp_path):
    code, out = run(tmp_path, "monodromy", EX5)
    assert code == 0
    meta, _, rows = read_csv(out / "monodromy.csv")
    assert int(meta["center_count"]) == 2 and int(meta["iota_range_codim"]) == 3
    assert abs(float(meta["det_M"]) - 1) < 1e-7
    assert sorted(r[-1] for r in rows) == ["c", "c", "s", "u"]


def test_eig_unperturbed(tmp_path):
    code, out = run(tmp_path, "eig", EX5)
    assert code == 0
    meta, _, rows = read_csv(out / "eigen.csv")
    assert meta["result"] == "eigenvalue"
    lam, sigma, flagged = float(rows[0][0]), float(rows[0][1]), rows[0][2]
    assert abs(lam - ov.LAMBDA0) < 1e-7 and sigma < 1e-5 and flagged == "1"
    assert abs(float(rows[0][4]) - 1) < 0.02
    _, cols, ef = read_csv(out / "eigenfunction.csv")
    assert cols == ["x", "u1", "u2"] and len(ef) > 100


def test_eig_diagonal_shift(tmp_path):
    cfg = dict(EX5, perturbation={"class": "diagonal", "profile": "sech2", "epsilon": 0.01})
    code, out = run(tmp_path, "eig", cfg)
    assert code == 0
    _, _, rows = read_csv(out / "eigen.csv")
    assert abs(float(rows[0][0]) - ov.SHOOT_LAMBDA_EPS001) < 1e-8


def test_eig_coupling_reports_none(tmp_path, capsys):
    cfg = dict(EX5, perturbation={"class": "T_beta", "profile": "sech2", "epsilon": 0.05})
    code, out = run(tmp_path, "eig", cfg)
    assert code == 0
    meta, _, rows = read_csv(out / "eigen.csv")
    assert meta["result"] == "no eigenvalue in interval" and rows[0][2] == "0"
    assert "no eigenvalue" in capsys.readouterr().out
    _, _, mm = read_csv(out / "mismatch.csv")
    assert len(mm) == 21


def test_numerical_failure_exit_1(tmp_path, capsys):
    # free particle inside a band: no hyperbolic directions to match
    code, _ = run(tmp_path, "eig", {"potential": "free", "lambda0": 1.0})
    assert code == 1
    assert "numerical error" in capsys.readouterr().err


def test_persist_single_direction(tmp_path):
    cfg = dict(EX5, persist={"epsilons": [0.04, 0.02, 0.01], "directions": ["diagonal"]})
    code, out = run(tmp_path, "persist", cfg)
    assert code == 0
    meta, cols, rows = read_csv(out / "persistence.csv")
    assert cols == ["direction", "epsilon", "lambda_min", "sigma_min", "flagged"]
    assert len(rows) == 3 and all(r[-1] == "1" for r in rows)
    assert meta["all_flagged[diagonal]"] == "1"


def test_decay_command(tmp_path):
    cfg = dict(EX5, decay={"trials": 3, "horizon": 20.0})
    code, out = run(tmp_path, "decay", cfg, "--seed", "11")
    assert code == 0
    _, _, fit = read_csv(out / "decay_fit.csv")
    assert [r[0] for r in fit] == ["left", "right"]
    assert all(abs(float(r[1]) - 1) < 0.02 for r in fit)
    meta, _, rough = read_csv(out / "roughness.csv")
    assert meta["seed"] == "11" and len(rough) == 3 and all(r[-1] == "1" for r in rough)


def test_seed_range_checked(tmp_path):
    with pytest.raises(SystemExit):
        main(["decay", "--config", str(bundled_config()), "--seed", str(2 ** 64)])


def test_deterministic_bands(tmp_path):
    cfg = {"potential": "mathieu", "bands": {"lambda_range": [-1.0, 2.0], "samples": 41}}
    path = write_cfg(tmp_path, cfg)
    main(["bands", "--config", path, "--out", str(tmp_path / "a")])
    main(["bands", "--config", path, "--out", str(tmp_path / "b"), "--threads", "3"])
    assert (tmp_path / "a" / "bands.csv").read_bytes() == (tmp_path / "b" / "bands.csv").read_bytes()
