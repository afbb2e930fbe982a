import hashlib

import numpy as np
import pytest

from hetrisk.cli import main
from hetrisk.facmodel import load_model
from hetrisk.panel import load_hierarchy, load_prices


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_synth_deterministic(tmp_path):
    for d in ("a", "b"):
        assert main(["synth", "--n", "12", "--days", "30", "--clusters", "4,2,1", "--seed", "42",
                     "--out", str(tmp_path / d)]) == 0
    for f in ("prices.csv", "hierarchy.csv"):
        assert sha(tmp_path / "a" / f) == sha(tmp_path / "b" / f)
    hier = load_hierarchy(tmp_path / "a" / "hierarchy.csv")
    assert len(hier.tickers) == 12 and hier.depth == 3
    header = (tmp_path / "a" / "hierarchy.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 4


def test_build_fixture(tmp_path, capsys):
    from conftest import DATA
    rc = main(["build", "--returns", f"{DATA}/fixture12/returns.csv",
               "--hierarchy", f"{DATA}/fixture12/hierarchy.csv", "--out", str(tmp_path / "m")])
    assert rc == 0
    out = capsys.readouterr().out
    dev = float(out.strip().splitlines()[-1].split("=")[1])
    assert dev <= 1e-10
    for f in ("spec_risk.csv", "fac_load.csv", "fac_cov.csv", "meta.csv", "level0_loadings.csv",
              "level2_fac_cov.csv"):
        assert (tmp_path / "m" / f).exists()
    first = {f.name: sha(f) for f in (tmp_path / "m").iterdir()}
    main(["build", "--returns", f"{DATA}/fixture12/returns.csv",
          "--hierarchy", f"{DATA}/fixture12/hierarchy.csv", "--out", str(tmp_path / "m")])
    assert first == {f.name: sha(f) for f in (tmp_path / "m").iterdir()}
    assert main(["invert", "--model", str(tmp_path / "m")]) == 0
    model = load_model(tmp_path / "m")
    inv = np.loadtxt(tmp_path / "m" / "inv_cov.csv", delimiter=",", skiprows=1,
                     usecols=range(1, 13))
    assert np.abs(model.cov_mat @ inv - np.eye(12)).max() < 1e-8


def test_build_missing_hierarchy(tmp_path, capsys):
    from conftest import DATA
    rc = main(["build", "--returns", f"{DATA}/fixture12/returns.csv",
               "--hierarchy", str(tmp_path / "none.csv"), "--out", str(tmp_path / "m")])
    assert rc == 2
    assert "FormatError" in capsys.readouterr().err


def test_k_style_without_columns(tmp_path, capsys):
    from conftest import DATA
    rc = main(["build", "--returns", f"{DATA}/fixture12/returns.csv",
               "--hierarchy", f"{DATA}/fixture12/hierarchy.csv", "--k-style", "1",
               "--out", str(tmp_path / "m")])
    assert rc == 2
    assert "ConfigError" in capsys.readouterr().err


def test_style_kappa_backtest(tmp_path):
    assert main(["synth", "--n", "30", "--days", "70", "--clusters", "5,2", "--seed", "3",
                 "--out", str(tmp_path)]) == 0
    prices = str(tmp_path / "prices.csv")
    hier = str(tmp_path / "hierarchy.csv")
    assert main(["style", "--prices", prices, "--out", str(tmp_path / "style.csv")]) == 0
    header = (tmp_path / "style.csv").read_text().splitlines()[0]
    assert header == "ticker,prc,mom,hlv,vol"
    assert main(["kappa", "--prices", prices, "--hierarchy", hier,
                 "--out", str(tmp_path / "kappa.csv")]) == 0
    lines = (tmp_path / "kappa.csv").read_text().splitlines()
    assert lines[0] == "period,style,cluster,n,kappa" and len(lines) > 1
    assert main(["backtest", "--prices", prices, "--hierarchy", hier, "--model", "capm",
                 "--style-cols", "prc", "--q", "0.25", "--out", str(tmp_path / "bt")]) == 0
    report = (tmp_path / "bt" / "report.csv").read_text().splitlines()
    assert report[0].startswith("model,roc_pct,sr,cps")
    assert len((tmp_path / "bt" / "pnl.csv").read_text().splitlines()) == 70 - 22 + 1
    assert main(["build", "--prices", prices, "--hierarchy", hier, "--style-cols", "prc,hlv",
                 "--k-style", "2", "--out", str(tmp_path / "capm")]) == 0


def test_inputs_not_mutated(tmp_path):
    assert main(["synth", "--n", "20", "--days", "40", "--clusters", "4,2", "--seed", "1",
                 "--out", str(tmp_path)]) == 0
    before = sha(tmp_path / "prices.csv")
    main(["build", "--prices", str(tmp_path / "prices.csv"),
          "--hierarchy", str(tmp_path / "hierarchy.csv"), "--out", str(tmp_path / "m")])
    assert sha(tmp_path / "prices.csv") == before
    assert load_prices(tmp_path / "prices.csv").n == 20


def test_bad_bounds_flag(tmp_path, capsys):
    main(["synth", "--n", "10", "--days", "30", "--clusters", "2", "--out", str(tmp_path)])
    rc = main(["backtest", "--prices", str(tmp_path / "prices.csv"),
               "--hierarchy", str(tmp_path / "hierarchy.csv"), "--bounds", "cap:3",
               "--out", str(tmp_path / "bt")])
    assert rc == 2 and "ConfigError" in capsys.readouterr().err


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
