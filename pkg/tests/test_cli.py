import json
import subprocess
import sys


from gridrobust.cli import main
from gridrobust.evaluation import calibrate_lambda


def test_usage_errors_exit_one(capsys):
    assert main(["frobnicate"]) == 1
    assert main([]) == 1
    assert main(["calibrate-lambda"]) == 1


def test_bad_config_exits_one(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert main(["run", "--config", str(cfg)]) == 1
    cfg.write_text(json.dumps({"scenarios": ["bundled:atlantis"]}))
    assert main(["run", "--config", str(cfg)]) == 1
    assert main(["run", "--config", str(tmp_path / "absent.json")]) == 1


def test_calibrate_lambda_output(capsys):
    assert main(["calibrate-lambda", "--n-lines", "10"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == f"lambda {calibrate_lambda(10, 0.95, 0.2)!r}"
    assert out[1].startswith("ratio 0.949999999999")
    assert "(worst 2 of 10 scores)" in out[1]


def test_score_output(capsys):
    args = ["score", "--return", "1008", "--steps", "2016", "--g-dn", "300",
            "--steps-dn", "600", "--n-steps", "2016"]
    assert main(args) == 0
    assert capsys.readouterr().out.strip() == "score 80.00"
    assert main(["score", "--return", "0", "--steps", "0", "--g-dn", "300",
                 "--steps-dn", "600", "--n-steps", "2016"]) == 0
    assert capsys.readouterr().out.strip() == "score -100.00"
    assert main(["score", "--return", "5"]) == 1


def test_gen_chronics(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert main(["gen-chronics", "--seed", "3", "--days", "1", "--level", "0.5",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("step,") and len(lines) == 289
    assert main(["gen-chronics", "--days", "0"]) == 1
    assert main(["gen-chronics", "--scenario", "nowhere"]) == 1


def test_run_evaluate_score_round_trip(tmp_path, capsys):
    scn = tmp_path / "c.csv"
    main(["gen-chronics", "--seed", "4", "--days", "1", "--level", "0.5",
          "--maintenance-per-week", "0", "--out", str(scn)])
    out = tmp_path / "run"
    code = main(["run", "--agent", "do_nothing", "--opponent", "do_nothing",
                 "--scenario", str(scn), "--seed", "1", "--out", str(out)])
    text = capsys.readouterr().out
    assert code == 0
    assert "score 0.00" in text
    ep = out / "episodes" / "do_nothing__c__s1.jsonl"
    assert ep.is_file()
    csv_out = tmp_path / "e.csv"
    assert main(["evaluate", "--episode", str(ep), "--chronics", str(scn),
                 "--stride", "12", "--out", str(csv_out)]) == 0
    assert len(csv_out.read_text().splitlines()) == 1 + 288 // 12
    assert main(["score", "--episode", str(ep), "--anchor",
                 str(out / "episodes" / "anchor__c__s1.jsonl")]) == 0
    assert capsys.readouterr().out.strip() == "score 0.00"
    assert main(["report", "--out", str(out)]) == 0
    assert main(["report", "--out", str(tmp_path)]) == 1


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "gridrobust.cli", "--version"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("gridrobust ")
