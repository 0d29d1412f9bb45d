from hedgeplots.cli import main

HEADER = "strategy,config_id,mean_std,var95,cvar95,mean_cost,premium_income,n_episodes,seed"


def _fixture(tmp_path):
    csv = tmp_path / "summary.csv"
    csv.write_text(HEADER + "\n"
                   + "delta,c1,10,12,14,0,9,100,0\n"
                   + "delta_vega,c1,8,9,10,2,9,100,0\n")
    return csv


def test_cli_metrics(tmp_path, capsys):
    csv = _fixture(tmp_path)
    out = tmp_path / "charts"
    rc = main(["--in", str(csv), "--out", str(out), "--group-by", "config_id"])
    assert rc == 0
    printed = capsys.readouterr().out.strip().splitlines()
    assert len(printed) == 1
    assert (out / "metrics_c1.png").exists()


def test_cli_both_kinds(tmp_path):
    csv = _fixture(tmp_path)
    out = tmp_path / "charts"
    rc = main(["--in", str(csv), "--out", str(out), "--kind", "both"])
    assert rc == 0
    assert (out / "metrics_c1.png").exists()
    assert (out / "cost_profit_config_id.png").exists()


def test_cli_schema_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    out = tmp_path / "charts"
    rc = main(["--in", str(bad), "--out", str(out)])
    assert rc == 1
    assert "missing required columns" in capsys.readouterr().err
    assert not out.exists() or not any(out.iterdir())
