import os

import pytest

from adflux.cli import RunConfig, main, run


def test_patch_experiment(tmp_path, capsys):
    out = tmp_path / "patch"
    code = main(["patch", "--n", "4", "--outdir", str(out)])
    assert code == 0
    assert "PASS" in capsys.readouterr().out
    for name in (
        "conservation_raw.csv",
        "conservation_pp.csv",
        "h1_convergence.csv",
        "edge_metrics.csv",
    ):
        assert (out / name).exists()


def test_example1_small_sweep(tmp_path, capsys):
    out = tmp_path / "ex1"
    code = main(["example1", "--n", "4,8", "--outdir", str(out)])
    assert code == 0
    assert "PASS" in capsys.readouterr().out
    assert (out / "h1_convergence.csv").exists()


def test_example3_short_run(tmp_path, capsys):
    out = tmp_path / "ex3"
    config = RunConfig(
        experiment="example3", ns=[12], steps=8, t_final=0.4, outdir=str(out)
    )
    assert run(config) == 0
    assert "PASS" in capsys.readouterr().out
    snapshots = [f for f in os.listdir(out) if f.startswith("snapshot_t")]
    assert len(snapshots) == 5
    assert (out / "conservation_pp.csv").exists()


def test_drift_small_run(tmp_path, capsys):
    out = tmp_path / "drift"
    code = main(["drift", "--n", "8,16", "--outdir", str(out)])
    assert code == 0
    assert "PASS" in capsys.readouterr().out
    for carrier in ("n", "p"):
        assert (out / f"conservation_pp_{carrier}.csv").exists()
        assert (out / f"edge_metrics_{carrier}.csv").exists()


def test_invalid_configuration():
    with pytest.raises(ValueError):
        RunConfig(experiment="bogus")
    with pytest.raises(ValueError):
        RunConfig(experiment="example2", mode="cgfem")
    with pytest.raises(SystemExit):
        main(["example2", "--mode", "cgfem"])


def test_default_mesh_sweeps():
    assert RunConfig(experiment="patch").ns == [4]
    assert RunConfig(experiment="example2").ns == [40, 80, 160, 320]
    assert RunConfig(experiment="example2", large=True).ns[-1] == 1280
    assert RunConfig(experiment="example3").ns == [128]
