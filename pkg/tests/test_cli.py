import json
import subprocess
import sys

import pytest

from distinf import cli, leakage


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if code == 0 and out.strip().startswith("{") else out), err


def test_nleaked(capsys):
    code, out, _ = run(capsys, "nleaked", "--alpha0", "0.5", "--alpha1", "0.52", "--omega", "0.95")
    assert code == 0 and out["n_leaked_binary"] == pytest.approx(42.343218)
    code, out, _ = run(capsys, "nleaked", "--alpha", "0.5", "--mse", "0.0025")
    assert out["n_leaked_regression"] == pytest.approx(100.0)
    code, out, _ = run(capsys, "nleaked", "--zipf", "10,2,10,1", "--omega", "1.0")
    assert out["n_leaked_degree"] == "inf"


def test_nleaked_errors(capsys):
    code, _, err = run(capsys, "nleaked", "--alpha0", "0.5", "--alpha1", "0.5", "--omega", "0.9")
    assert code == 2 and "identical" in err
    code, _, err = run(capsys, "nleaked", "--alpha0", "0.5")
    assert code == 2 and "--alpha1" in err


def test_bound_and_oracle(capsys):
    _, out, _ = run(capsys, "bound", "--alpha0", "0.2", "--alpha1", "0.6", "--n", "7")
    assert out["binary_accuracy_bound"] == pytest.approx(round(leakage.binary_accuracy_bound((0.2, 0.6), 7), 6))
    _, out, _ = run(capsys, "bound", "--zipf", "10,2,10,1", "--n", "1")
    assert out["zipf_accuracy_bound"] == pytest.approx(0.84311, abs=1e-5)
    _, out, _ = run(capsys, "oracle", "binary", "--alpha0", "0.5", "--alpha1", "1", "--n", "1")
    assert out["exact_optimal_accuracy"] == 0.75
    _, out, _ = run(capsys, "oracle", "regress", "--alpha", "0.3", "--n", "7")
    assert out["exact_regression_mse"] == pytest.approx(0.03)
    _, out, _ = run(capsys, "oracle", "zipf", "--zipf", "5,1,10,1", "--n", "1", "--trials", "5000", "--seed", "3")
    assert out["trials"] == 5000 and 0.5 <= out["mean"] <= 1.0


def test_pool_attack_round_trip(tmp_path, capsys):
    common = ["--signal-strength", "2", "--coupling", "1", "--m", "150"]
    for a in ("0.0", "1.0"):
        for role in ("victim", "adversary"):
            code, _, _ = run(capsys, "train-pool", *common, "--alpha", a, "--role", role, "--count", "3",
                             "--epochs", "5", "--out", str(tmp_path / f"{role}{a}"))
            assert code == 0
        run(capsys, "gen", *common, "--alpha", a, "--pool", "adversary", "--seed", "5", "--out", str(tmp_path / f"t{a}.csv"))
    pools = ["--victim0", str(tmp_path / "victim0.0"), "--victim1", str(tmp_path / "victim1.0"),
             "--shadow0", str(tmp_path / "adversary0.0"), "--shadow1", str(tmp_path / "adversary1.0"),
             "--test0", str(tmp_path / "t0.0.csv"), "--test1", str(tmp_path / "t1.0.csv"),
             "--shadow", str(tmp_path / "adversary0.0"), str(tmp_path / "adversary1.0"),
             "--alpha0", "0", "--alpha1", "1", "--meta-epochs", "3"]
    for mode in ("loss", "threshold", "meta", "meta-regress"):
        out_file = tmp_path / f"{mode}.json"
        code, _, err = run(capsys, "attack", "--mode", mode, *pools, "--out", str(out_file))
        assert code == 0, err
        rep = leakage.LeakageReport.from_dict(json.loads(out_file.read_text()))
        assert rep.attack == mode and rep.n_eval == 6 and 0.0 <= rep.accuracy <= 1.0
    code, out, _ = run(capsys, "attack", "--mode", "layer-rank", "--shadow0", str(tmp_path / "adversary0.0"),
                       "--shadow1", str(tmp_path / "adversary1.0"), "--holdout0", str(tmp_path / "victim0.0"),
                       "--holdout1", str(tmp_path / "victim1.0"), "--candidates", str(tmp_path / "t0.0.csv"))
    assert code == 0 and [r["layer"] for r in out["ranking"]] in ([1, 3], [3, 1])
    code, _, err = run(capsys, "attack", "--mode", "threshold", "--victim0", str(tmp_path / "victim0.0"),
                       "--victim1", str(tmp_path / "victim1.0"))
    assert code == 2 and "--test0" in err
    code, _, err = run(capsys, "attack", "--mode", "loss", "--victim0", str(tmp_path), "--victim1", str(tmp_path),
                       "--test0", "x", "--test1", "y")
    assert code == 2 and "pool manifest" in err


def test_sweep_and_report(tmp_path, capsys):
    cfg = {"alpha_grid": [0.0, 1.0], "n_victim": 2, "n_shadow": 2, "dataset_size": 100, "test_size": 100,
           "train": {"epochs": 3}, "meta": {"epochs": 3, "latent": 4, "rho_hidden": 4}, "attacks": ["loss", "meta"]}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert cli.main(["sweep", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    capsys.readouterr()
    code, out, _ = run(capsys, "report", "--dir", str(tmp_path / "o"))
    assert code == 0 and set(out["attacks"]) == {"loss", "meta"}
    code, out, _ = run(capsys, "report", "--dir", str(tmp_path / "o"), "--heatmap", "loss")
    assert code == 0 and out == (tmp_path / "o" / "heatmap_loss.csv").read_text()
    stored = (tmp_path / "o" / "summary.json").read_text()
    (tmp_path / "o" / "summary.json").unlink()
    code, out, _ = run(capsys, "report", "--dir", str(tmp_path / "o"))
    assert code == 0 and out["config_hash"] == json.loads(stored)["config_hash"]
    bad = tmp_path / "bad.json"
    bad.write_text('{"alpha_grid": [2.0]}')
    assert cli.main(["sweep", "--config", str(bad)]) == 2


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "distinf.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "train-pool" in proc.stdout
