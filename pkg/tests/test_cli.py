import json
import subprocess
import sys

import pytest

from conftest import CARD
from ivkit.cli import main, run

BASE = [
    "--data", str(CARD), "--outcome", "lwage", "--exposure", "educ",
    "--instruments", "nearc4", "--covariates", "exper,expersq,black,south,smsa",
]


def test_summary_text():
    out = run(["summary", *BASE])
    assert "F=16.71759, df1=1, df2=3003, p-value is 4.4515e-05" in out
    assert "TSLS   1.000000 0.132289   0.049233   2.687  0.00725 **" in out
    assert "OLS    0.000000 0.074009   0.003505  21.113  < 2e-16 ***" in out
    assert "Signif. codes:" in out


def test_summary_json_matches_text():
    payload = json.loads(run(["summary", *BASE, "--format", "json"]))
    assert payload["kclass"]["tsls"]["estimate"] == pytest.approx(0.132289, abs=1e-6)
    text = run(["summary", *BASE])
    assert f"F={payload['first_stage']['f_stat']:.7g}" in text
    assert f"{payload['kclass']['fuller']['estimate']:.6f}" in text
    assert f"p-value is {payload['ar']['p_value']:.5g}" in text


def test_confint_text_and_alpha_nesting():
    out = run(["confint", *BASE])
    assert "AR     0.03839860 0.26118365" in out
    assert "OLS    0.06713570 0.08088229" in out
    wide = json.loads(run(["confint", *BASE, "--format", "json"]))["intervals"]
    narrow = json.loads(run(["confint", *BASE, "--format", "json", "--alpha", "0.5"]))["intervals"]
    for name, cs in narrow.items():
        assert wide[name]["lo"] < cs["lo"] < cs["hi"] < wide[name]["hi"], name


def test_power_and_samplesize():
    assert run(["power", *BASE, "--beta", "0.1"]).strip() == "0.5286761"
    assert run(["samplesize", *BASE, "--beta", "0.1", "--method", "ar"]).strip() == "5482"


def test_power_grid_csv_and_plot(tmp_path):
    svg = tmp_path / "power.svg"
    out = run(["power", *BASE, "--beta", "0.1", "--n-grid", "20:2000:20", "--plot", str(svg)])
    lines = out.strip().splitlines()
    assert lines[0] == "n,power_tsls,power_ar"
    rows = [list(map(float, line.split(","))) for line in lines[1:]]
    assert len(rows) == 100
    for col in (1, 2):
        assert all(b[col] >= a[col] for a, b in zip(rows, rows[1:]))
    assert svg.read_text().startswith("<?xml")


def test_sensitivity_blocks():
    out = run(["sensitivity", *BASE, "--delta", "-0.07,0.07"])
    assert "ncp=2.71656, p-value is 0.16499" in out
    assert " [-0.0538384" in out and ", 0.5354824" in out
    no_south = [a if a != "exper,expersq,black,south,smsa" else "exper,expersq,black,smsa" for a in BASE]
    payload = json.loads(run(["sensitivity", *no_south, "--delta", "-0.07,0.07", "--format", "json"]))
    assert payload["sensitivity"]["ci"]["lo"] == pytest.approx(0.03797, abs=1e-5)


def test_diagnose_orders_smsa_first(tmp_path):
    svg = tmp_path / "bias.svg"
    out = run(["diagnose", *BASE, "--format", "csv", "--plot", str(svg)])
    assert out.splitlines()[1].startswith("smsa,")
    assert svg.exists()


def test_cor_text():
    out = run(["cor", *BASE])
    assert out.splitlines()[1].split() == ["nearc4", "1.00", "0.14", "-0.06", "-0.06", "-0.08", "-0.22", "0.35", "0.16"]


def test_unknown_column_exit_code(capsys):
    args = [a if a != "nearc4" else "nearc9" for a in BASE]
    assert main(["summary", *args]) == 2
    assert "nearc9" in capsys.readouterr().err


def test_flag_consistency_errors(capsys):
    assert main(["summary", *BASE, "--se", "cluster"]) == 2
    assert main(["sensitivity", *BASE]) == 2
    assert main(["samplesize", *BASE, "--beta", "0.1", "--method", "arsens"]) == 2


def test_several_instruments_sensitivity_unsupported(tmp_path, capsys):
    text = CARD.read_text().splitlines()
    rows = [text[0] + ",z2"] + [f"{line},{i % 7}" for i, line in enumerate(text[1:])]
    path = tmp_path / "two.csv"
    path.write_text("\n".join(rows) + "\n")
    args = ["--data", str(path), "--outcome", "lwage", "--exposure", "educ", "--instruments", "nearc4,z2"]
    assert main(["sensitivity", *args, "--delta", "-0.05,0.05"]) == 3
    assert main(["summary", *args]) == 0


def test_config_env_defaults(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "data": str(CARD), "outcome": "lwage", "exposure": "educ", "instruments": "nearc4",
        "covariates": ["exper", "expersq", "black", "south", "smsa"],
    }))
    monkeypatch.setenv("IVKIT_CONFIG", str(cfg))
    assert run(["power", "--beta", "0.1", "--method", "ar"]).strip() == "0.5461072"


def test_output_deterministic():
    a = subprocess.run([sys.executable, "-m", "ivkit", "summary", *BASE], capture_output=True, text=True)
    b = subprocess.run([sys.executable, "-m", "ivkit", "summary", *BASE], capture_output=True, text=True)
    assert a.returncode == 0 and a.stdout == b.stdout
