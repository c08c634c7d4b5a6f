import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from burdengap import __version__
from burdengap.cli import config_hash, load_config, main, parse_grid, read_csv, UsageError
from burdengap.datagen import generate_adult_like, write_csv_dataset
from burdengap.domain import LinearClassifier, dumps_classifier, ThresholdClassifier
from burdengap.metrics import social_burden_gap
from burdengap.domain import LinearCostMultiD, PSI_SR

from conftest import make_1d

SMALL_SWEEP = ["--set", "counts=[3000,600]", "--set", "test_size=500",
               "--set", 'grid={"start":1,"stop":100,"step":9}']
SMALL_TRAIN = ["--set", "n=600", "--set", "repetitions=1", "--set", "epsilon_grid=[-0.5,0.5]",
               "--set", "g_grid=[0.0]"]


def test_parse_grid():
    assert parse_grid({"start": 1, "stop": 5, "step": 2}) == [1, 3, 5]
    assert parse_grid([0.5, 2]) == [0.5, 2.0]
    with pytest.raises(UsageError):
        parse_grid([])
    with pytest.raises(UsageError):
        parse_grid({"start": 5, "stop": 1, "step": 1})


def test_config_rejects_unknown_keys(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"repetitions": 2, "typo": 1}))
    with pytest.raises(UsageError, match="typo"):
        load_config("synth", str(p), {})
    with pytest.raises(UsageError):
        load_config("synth", None, {"repetitions": "many"})


def test_flags_override_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"seed": 3, "repetitions": 2}))
    cfg = load_config("synth", str(p), {"seed": 9, "psi": None})
    assert cfg["seed"] == 9 and cfg["repetitions"] == 2


def test_synth_one_row(tmp_path):
    rc = main(["synth", "--out", str(tmp_path), "--set", "repetitions=1", "--set", "sigma0_grid=[2.0]",
               "--set", "n_per_group=60"])
    assert rc == 0
    lines = (tmp_path / "synth_sr.csv").read_text().splitlines()
    assert lines[0].startswith(f"# burdengap {__version__} config_sha256=")
    rows = read_csv(tmp_path / "synth_sr.csv")
    assert len(rows) == 1 and rows[0]["hcon_g_stderr"] == "0.0"
    ET.parse(tmp_path / "synth_sr.svg")


def test_synth_default_schema_one_row_per_sigma(tmp_path):
    assert main(["synth", "--out", str(tmp_path), "--set", "repetitions=2", "--set", "n_per_group=50"]) == 0
    rows = read_csv(tmp_path / "synth_sr.csv")
    assert [float(r["sigma0"]) for r in rows] == [1, 2, 3, 4, 5]
    assert {"hcon_g_mean", "hcon_g_stderr", "gcon_g_mean", "gcon_g_stderr"} <= set(rows[0])


def test_empty_grid_is_usage_error(tmp_path):
    assert main(["sweep", "--out", str(tmp_path), "--set", "grid=[]"]) == 2
    assert main(["synth", "--out", str(tmp_path), "--set", "grid_points=0"]) == 2


def test_bad_flags_exit_2(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--psi", "fpr"])
    assert exc.value.code == 2
    assert main(["sweep", "--out", str(tmp_path), "--set", "nope=1"]) == 2


def test_sweep_outputs(tmp_path):
    assert main(["sweep", "--out", str(tmp_path), *SMALL_SWEEP]) == 0
    for name in ("linear", "quadratic"):
        rows = read_csv(tmp_path / f"sweep_{name}.csv")
        assert len(rows) == 12 * 12
        assert list(rows[0])[:3] == ["tau0", "tau1", "accuracy"]
        feas = read_csv(tmp_path / f"feasible_{name}_sr.csv")
        assert all(float(r["constraint_lhs_sr"]) <= 0 for r in feas)
        opt = read_csv(tmp_path / f"optimum_{name}.csv")
        assert [r["selection"] for r in opt] == ["unconstrained", "constrained", "constrained"]
        for psi in ("sr", "tpr"):
            for kind in ("h_vs_g", "accuracy_vs_g"):
                ET.parse(tmp_path / f"{name}_{psi}_{kind}.svg")


def test_sweep_shared_thresholds_nonnegative(tmp_path):
    assert main(["sweep", "--out", str(tmp_path), *SMALL_SWEEP, "--set", 'costs=["linear"]']) == 0
    rows = read_csv(tmp_path / "sweep_linear.csv")
    shared = [r for r in rows if r["tau0"] == r["tau1"]]
    assert shared and all(float(r["g_sr"]) >= 0 for r in shared)


def test_sweep_from_csv_dataset(tmp_path):
    ds = make_1d(list(range(1, 30)), list(range(10, 40)))
    write_csv_dataset(ds, tmp_path / "d.csv")
    rc = main(["sweep", "--out", str(tmp_path / "o"), "--set", f'dataset="{tmp_path / "d.csv"}"',
               "--set", "test_size=0", "--set", "grid=[5,10,20]", "--psi", "sr",
               "--set", 'costs=["linear"]'])
    assert rc == 0
    assert len(read_csv(tmp_path / "o" / "sweep_linear.csv")) == 9


def test_sweep_infeasible_exits_1(tmp_path):
    rc = main(["sweep", "--out", str(tmp_path), *SMALL_SWEEP, "--set", "g=-1000", "--set", 'costs=["linear"]'])
    assert rc == 1
    opt = read_csv(tmp_path / "optimum_linear.csv")
    assert opt[1]["status"].startswith("infeasible")


def test_train_outputs(tmp_path):
    assert main(["train", "--out", str(tmp_path), *SMALL_TRAIN]) in (0, 1)
    summary = read_csv(tmp_path / "summary_sr.csv")
    assert [r["classifier"] for r in summary] == ["uncons", "sr", "strat"]
    ok = [r for r in summary if int(r["n_ok"]) == 1]
    assert ok and all(float(r["accuracy_stderr"]) == 0 for r in ok)
    assert len(read_csv(tmp_path / "tradeoff_sr_sr.csv")) == 2
    saved = sorted(p.name for p in (tmp_path / "classifiers").iterdir())
    assert saved == ["sr_sr_split000.json", "sr_strat_split000.json", "sr_uncons_split000.json"]
    meta = json.loads((tmp_path / "classifiers" / "sr_strat_split000.json").read_text())["metadata"]
    assert meta["classifier"] == "strat" and len(meta["normalization"]) == 9


def test_train_default_epsilon_grid_has_11_rows(tmp_path):
    rc = main(["train", "--out", str(tmp_path), "--set", "n=400", "--set", "repetitions=1",
               "--set", "g_grid=[0.0]", "--set", "save_classifiers=false"])
    assert rc in (0, 1)
    rows = read_csv(tmp_path / "tradeoff_sr_sr.csv")
    assert [float(r["epsilon"]) for r in rows] == [k / 10 for k in range(-5, 6)]


def _write_toy(tmp_path):
    write_csv_dataset(make_1d([1, 3], [2, 4]), tmp_path / "toy.csv")
    (tmp_path / "clf.json").write_text(dumps_classifier(ThresholdClassifier(3, 3)))


def test_audit_toy(tmp_path, capsys):
    _write_toy(tmp_path)
    rc = main(["audit", "--out", str(tmp_path / "o"), "--dataset", str(tmp_path / "toy.csv"),
               "--classifier", str(tmp_path / "clf.json")])
    assert rc == 0
    rows = read_csv(tmp_path / "o" / "audit.csv")
    sr = rows[0]
    assert sr["psi"] == "sr" and float(sr["h_gap"]) == 0.0 and float(sr["g_gap"]) == 0.5
    assert float(sr["lower"]) == float(sr["upper"]) == 0.5 == float(sr["constraint_lhs"])
    assert "g_gap=0.5" in capsys.readouterr().out


def test_audit_missing_field(tmp_path):
    _write_toy(tmp_path)
    (tmp_path / "bad.json").write_text(json.dumps({"kind": "threshold", "tau0": 1.0}))
    assert main(["audit", "--out", str(tmp_path / "o"), "--dataset", str(tmp_path / "toy.csv"),
                 "--classifier", str(tmp_path / "bad.json")]) == 2


def test_audit_dimension_mismatch(tmp_path):
    _write_toy(tmp_path)
    (tmp_path / "lin.json").write_text(dumps_classifier(LinearClassifier([1, 1], 0, 0)))
    assert main(["audit", "--out", str(tmp_path / "o"), "--dataset", str(tmp_path / "toy.csv"),
                 "--classifier", str(tmp_path / "lin.json"), "--cost", "x"]) == 2


def test_audit_linear_multid_exact(tmp_path):
    ds = generate_adult_like(300, seed=4)
    write_csv_dataset(ds, tmp_path / "a.csv")
    rng = np.random.default_rng(0)
    clf = LinearClassifier(rng.uniform(0.01, 0.1, 9), 9.0, 8.0)
    (tmp_path / "lin.json").write_text(dumps_classifier(clf))
    base = [1.0 if m else "inf" for m in ds.schema.manipulable]
    cost_spec = {"kind": "linear_multi", "base": base, "multiplier0": 2.0}
    (tmp_path / "cost.json").write_text(json.dumps(cost_spec))
    rc = main(["audit", "--out", str(tmp_path / "o"), "--dataset", str(tmp_path / "a.csv"),
               "--classifier", str(tmp_path / "lin.json"), "--cost", str(tmp_path / "cost.json")])
    assert rc == 0
    rows = read_csv(tmp_path / "o" / "audit.csv")
    cost = LinearCostMultiD.scaled([1.0 if m else np.inf for m in ds.schema.manipulable], 2.0)
    measured = social_burden_gap(ds, clf, cost, PSI_SR)
    assert abs(float(rows[0]["exact"]) - measured) <= 1e-6
    assert rows[0]["delta"] != ""


def test_rerun_is_byte_identical(tmp_path):
    args = ["sweep", *SMALL_SWEEP, "--set", 'costs=["linear"]', "--seed", "4"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    for f in (tmp_path / "a").glob("*.csv"):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_config_hash_ignores_nothing_but_is_stable():
    cfg = load_config("synth", None, {})
    assert config_hash(cfg) == config_hash(dict(reversed(list(cfg.items()))))
    assert config_hash(cfg) != config_hash({**cfg, "seed": 1})
