"""Command-line entry points and exit codes."""
import json

import numpy as np
import pytest

from sqdkit.cli import main
from sqdkit.fock import build_dense
from sqdkit.hamiltonian import write_fcidump
from tests.util import random_hamiltonian


@pytest.fixture()
def dump(tmp_path):
    h = random_hamiltonian(4, 2, 2, seed=0, scale=0.5)
    path = tmp_path / "toy.fcidump"
    path.write_text(write_fcidump(h))
    return h, str(path)


def test_oracle_command(dump, capsys):
    h, path = dump
    assert main(["oracle", "--fcidump", path]) == 0
    out = json.loads(capsys.readouterr().out)
    e0 = np.linalg.eigvalsh(build_dense(h, (2, 2)))[0]
    assert out["energy"] == pytest.approx(e0, abs=1e-10)
    assert out["d"] == 36


def test_oracle_cap_numerical_exit(dump, capsys):
    _, path = dump
    assert main(["oracle", "--fcidump", path, "--cap", "2"]) == 2


def test_hci_command(dump, capsys):
    h, path = dump
    assert main(["hci", "--fcidump", path, "--eps", "1e-12"]) == 0
    out = json.loads(capsys.readouterr().out)
    e0 = np.linalg.eigvalsh(build_dense(h, (2, 2)))[0]
    assert out["energy"] == pytest.approx(e0, abs=1e-8)


def test_shots_generate_and_inspect(dump, tmp_path, capsys):
    _, path = dump
    shots_path = tmp_path / "shots.txt"
    code = main(
        [
            "shots",
            "--fcidump",
            path,
            "--n-shots",
            "500",
            "--seed",
            "3",
            "--out",
            str(shots_path),
        ]
    )
    assert code == 0
    assert shots_path.exists()
    capsys.readouterr()
    assert main(["shots", "--in", str(shots_path)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n_shots"] == 500
    assert summary["m"] == 4
    assert summary["alpha_counts"] == {"2": 500}  # noiseless generation


def test_shots_requires_source(capsys):
    assert main(["shots"]) == 1


def test_run_command(dump, tmp_path, capsys):
    h, path = dump
    cfg = {
        "label": "pt",
        "fcidump": path,
        "method": "casci_oracle",
        "seed": 1,
    }
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(cfg_path), "--out-dir", str(tmp_path / "o")]) == 0
    out = json.loads(capsys.readouterr().out)
    e0 = np.linalg.eigvalsh(build_dense(h, (2, 2)))[0]
    assert out["energy"] == pytest.approx(e0, abs=1e-10)
    assert (tmp_path / "o" / "pt.json").exists()


def test_pes_dry_run_and_full_run(dump, tmp_path, capsys):
    _, path = dump
    cfg = {
        "method": "casci_oracle",
        "out_dir": str(tmp_path / "out"),
        "points": [
            {"label": "near", "fcidump": path},
            {"label": "far", "fcidump": path, "unbound": True},
        ],
    }
    cfg_path = tmp_path / "pes.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["pes", "--config", str(cfg_path), "--dry-run"]) == 0
    plan = json.loads(capsys.readouterr().out)
    assert [row["label"] for row in plan] == ["near", "far"]
    assert not (tmp_path / "out").exists()

    assert main(["pes", "--config", str(cfg_path), "--plot"]) == 0
    assert (tmp_path / "out" / "pes.csv").exists()
    assert (tmp_path / "out" / "pes.png").exists()


def test_pes_config_error_exit(tmp_path):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text(json.dumps({"points": []}))
    assert main(["pes", "--config", str(cfg_path)]) == 1


def test_extrapolate_command(tmp_path, capsys):
    log = tmp_path / "runs.jsonl"
    # Records whose x = variance / energy^2 lie exactly on a line.
    xs = [0.04, 0.02, 0.01]
    records = [
        {"batch_size": b, "energy": -1.0 + 0.5 * x, "variance": x * (-1.0 + 0.5 * x) ** 2}
        for b, x in zip([9000, 11000, 14000], xs)
    ]
    log.write_text("\n".join(json.dumps(r) for r in records) + "\n")
    out_json = tmp_path / "fit.json"
    png = tmp_path / "fit.png"
    code = main(
        [
            "extrapolate",
            "--log",
            str(log),
            "--batch-sizes",
            "9000,11000,14000",
            "--out",
            str(out_json),
            "--plot",
            str(png),
        ]
    )
    assert code == 0
    fit = json.loads(out_json.read_text())
    assert fit["intercept"] == pytest.approx(-1.0, abs=1e-10)
    assert png.exists()


def test_extrapolate_singular_exit(tmp_path):
    log = tmp_path / "runs.jsonl"
    log.write_text(
        '{"batch_size": 1, "energy": -1.0, "variance": 0.01}\n'
        '{"batch_size": 2, "energy": -1.0, "variance": 0.01}\n'
    )
    assert main(["extrapolate", "--log", str(log)]) in (1, 2)


def test_unknown_flag_exits_one(capsys):
    assert main(["oracle", "--bogus"]) == 1


def test_missing_fcidump_is_config_error(tmp_path):
    assert main(["oracle", "--fcidump", str(tmp_path / "nope.fcidump")]) in (1, 2)
