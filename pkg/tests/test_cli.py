import json
import math
from pathlib import Path

import numpy as np
import pytest
import yaml

from optex.cli import main
from optex.config import ConfigError, config_from_dict, parse_config
from optex.model import FactorGrid
from optex.reporting import read_design_csv

DATA = Path(__file__).parent / "data"


def write_config(path, doc):
    path.write_text(yaml.safe_dump(doc), encoding="utf-8")
    return path


def base_doc(**overrides):
    doc = {
        "factors": {"count": 2, "levels": 3},
        "runs": 24,
        "model": {"primary": "main_effects", "potential": "quadratic_terms"},
        "criterion": {
            "family": "MSE.D",
            "kappa": [1 / 3, 1 / 3, 1 / 3],
            "mc_samples": 1000,
        },
        "search": {"starts": 10, "seed": 123},
    }
    doc.update(overrides)
    return doc


class TestParseConfig:
    def test_reference_example_valid(self, tmp_path):
        cfg = parse_config(write_config(tmp_path / "c.yaml", base_doc()))
        spec = cfg.experiment
        assert spec.k == 2 and spec.n_runs == 24
        assert spec.p == 2 and spec.q == 2
        assert spec.criterion.family == "MSE.D"
        assert spec.criterion.mc_samples == 1000
        assert sum(spec.criterion.kappa) == pytest.approx(1.0, abs=1e-12)

    def test_weights_must_sum_to_one(self, tmp_path):
        doc = base_doc()
        doc["criterion"]["kappa"] = [0.5, 0.5, 0.5]
        with pytest.raises(ConfigError, match="weights must sum to 1"):
            parse_config(write_config(tmp_path / "c.yaml", doc))

    def test_single_level_factor_rejected(self, tmp_path):
        doc = base_doc(factors={"count": 2, "levels": 1})
        with pytest.raises(ConfigError, match="needs >=2 levels"):
            parse_config(write_config(tmp_path / "c.yaml", doc))

    def test_unknown_keys_are_hard_errors(self, tmp_path):
        doc = base_doc()
        doc["serach"] = {"starts": 10}
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(write_config(tmp_path / "c.yaml", doc))
        doc = base_doc()
        doc["criterion"]["kapa"] = [1, 0, 0]
        with pytest.raises(ConfigError, match="criterion: unknown key"):
            parse_config(write_config(tmp_path / "c.yaml", doc))

    def test_explicit_term_lists(self, tmp_path):
        doc = base_doc()
        doc["model"] = {
            "primary_terms": [[1, 0], [0, 1], [1, 1]],
            "potential_terms": [[2, 0], [0, 2]],
        }
        cfg = parse_config(write_config(tmp_path / "c.yaml", doc))
        assert cfg.experiment.p == 3
        assert [t.exponents for t in cfg.experiment.potential.terms] == [(2, 0), (0, 2)]

    def test_terms_take_precedence_over_presets(self):
        cfg = config_from_dict(base_doc(model={
            "primary": "second_order",
            "primary_terms": [[1, 0], [0, 1]],
        }))
        assert cfg.experiment.p == 2

    def test_defaults(self):
        cfg = config_from_dict({"factors": {"count": 3, "levels": 2}, "runs": 8})
        spec = cfg.experiment
        assert spec.p == 3 and spec.q == 0
        assert spec.criterion.family == "MSE.D"
        assert spec.criterion.tau2 == 1.0
        assert spec.criterion.alpha == 0.05
        assert spec.criterion.mc_samples == 50
        assert spec.n_starts == 10
        assert cfg.workers is None

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(tmp_path / "nope.yaml")

    def test_overlapping_primary_potential_rejected(self):
        with pytest.raises(ConfigError, match="both primary and potential"):
            config_from_dict(base_doc(model={
                "primary": "second_order", "potential": "quadratic_terms"}))

    def test_too_few_runs_rejected(self):
        with pytest.raises(ConfigError, match="cannot estimate"):
            config_from_dict(base_doc(runs=2))


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def search_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("search")
    doc = base_doc()
    doc["criterion"]["mc_samples"] = 200
    doc["search"] = {"starts": 4, "seed": 321}
    doc["output"] = {"dir": str(tmp / "out")}
    cfg_path = write_config(tmp / "cfg.yaml", doc)
    assert run_cli("search", "--config", str(cfg_path), "--workers", "1") == 0
    return tmp, cfg_path


class TestCmdSearch:
    def test_artifacts_written(self, search_run):
        tmp, _ = search_run
        out = tmp / "out"
        assert (out / "design.csv").exists()
        assert (out / "result.json").exists()
        assert (out / "report.txt").exists()
        design_text = (out / "design.csv").read_text()
        assert design_text.splitlines()[0] == "trt_label,x1,x2"
        assert len(design_text.splitlines()) == 25

    def test_design_on_grid_and_sorted(self, search_run):
        tmp, _ = search_run
        grid = FactorGrid.regular(2, 3)
        design = read_design_csv(tmp / "out" / "design.csv", grid)
        assert design.n == 24
        labels = [int(line.split(",")[0])
                  for line in (tmp / "out" / "design.csv").read_text().splitlines()[1:]]
        assert labels == sorted(labels)

    def test_record_contents(self, search_run):
        tmp, _ = search_run
        rec = json.loads((tmp / "out" / "result.json").read_text())
        assert rec["command"] == "search"
        assert rec["seed"] == 321
        assert len(rec["path"]) == 4
        assert rec["breakdown"]["compound_value"] == pytest.approx(min(rec["path"]))
        assert rec["config"]["criterion"]["family"] == "MSE.D"
        assert rec["config"]["search"]["seed"] == 321
        assert rec["breakdown"]["pe_df"] + rec["breakdown"]["lof_df"] == 24 - 2 - 1

    def test_rerun_byte_identical_design(self, search_run, tmp_path):
        tmp, cfg_path = search_run
        assert run_cli("search", "--config", str(cfg_path), "--workers", "2",
                       "--out", str(tmp_path / "again")) == 0
        first = (tmp / "out" / "design.csv").read_bytes()
        second = (tmp_path / "again" / "design.csv").read_bytes()
        assert first == second

    def test_rerun_from_echoed_config(self, search_run, tmp_path):
        tmp, _ = search_run
        rec = json.loads((tmp / "out" / "result.json").read_text())
        echoed = dict(rec["config"])
        echoed["output"] = {"dir": str(tmp_path / "echo")}
        cfg2 = write_config(tmp_path / "echo.yaml", echoed)
        assert run_cli("search", "--config", str(cfg2), "--workers", "1") == 0
        assert (tmp_path / "echo" / "design.csv").read_bytes() == \
            (tmp / "out" / "design.csv").read_bytes()

    def test_seed_override_changes_seed(self, search_run, tmp_path):
        _, cfg_path = search_run
        out = tmp_path / "o"
        assert run_cli("search", "--config", str(cfg_path), "--seed", "7",
                       "--starts", "2", "--workers", "1", "--out", str(out)) == 0
        rec = json.loads((out / "result.json").read_text())
        assert rec["seed"] == 7
        assert len(rec["path"]) == 2


class TestCmdEval:
    def test_round_trip_matches_search_breakdown(self, search_run, tmp_path):
        tmp, cfg_path = search_run
        out = tmp_path / "eval"
        assert run_cli("eval", "--config", str(cfg_path),
                       "--design", str(tmp / "out" / "design.csv"),
                       "--out", str(out)) == 0
        search_rec = json.loads((tmp / "out" / "result.json").read_text())
        eval_rec = json.loads((out / "eval_result.json").read_text())
        for key in ("phi_primary", "phi_lof", "phi_mse", "log_compound"):
            assert eval_rec["breakdown"][key] == pytest.approx(
                search_rec["breakdown"][key], rel=1e-10)

    def test_off_grid_setting_names_row_and_column(self, search_run, tmp_path):
        _, cfg_path = search_run
        bad = tmp_path / "bad.csv"
        bad.write_text("trt_label,x1,x2\n1,-1.0,-1.0\n2,0.4,1.0\n")
        code = run_cli("eval", "--config", str(cfg_path), "--design", str(bad),
                       "--out", str(tmp_path / "o"))
        assert code == 2

    def test_off_grid_error_message(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("trt_label,x1,x2\n1,-1.0,-1.0\n2,0.4,1.0\n")
        with pytest.raises(ConfigError, match="row 2, column x1"):
            read_design_csv(bad, FactorGrid.regular(2, 3))

    def test_duplicated_design_pe_df(self, search_run, tmp_path):
        # doubling every distinct row: t treatments, n = 2t, pe_df = t
        _, cfg_path = search_run
        rows = ["trt_label,x1,x2"]
        cells = [(-1.0, -1.0), (-1.0, 1.0), (0.0, 0.0), (1.0, -1.0), (1.0, 1.0),
                 (0.0, 1.0), (1.0, 0.0), (-1.0, 0.0), (0.0, -1.0)]
        for i, (a, b) in enumerate(cells):
            rows += [f"{i},{a},{b}", f"{i},{a},{b}"]
        dup = tmp_path / "dup.csv"
        dup.write_text("\n".join(rows) + "\n")
        out = tmp_path / "out"
        assert run_cli("eval", "--config", str(cfg_path), "--design", str(dup),
                       "--out", str(out)) == 0
        rec = json.loads((out / "eval_result.json").read_text())
        assert rec["breakdown"]["pe_df"] == 9

    def test_header_without_labels_accepted(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("x1,x2\n-1.0,1.0\n0.0,0.0\n")
        d = read_design_csv(f, FactorGrid.regular(2, 3))
        assert d.n == 2
        assert list(d.settings[0]) == [0, 2]

    def test_wrong_header_rejected(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("x1,x3\n-1.0,1.0\n")
        with pytest.raises(ConfigError, match="header"):
            read_design_csv(f, FactorGrid.regular(2, 3))

    def test_pb_projection_alias_entries(self, tmp_path):
        cfg = write_config(tmp_path / "pb.yaml", {
            "factors": {"count": 4, "levels": 2},
            "runs": 12,
            "model": {"primary": "main_effects", "potential": "linear_interactions"},
            "criterion": {"family": "MSE.L", "kappa": [1 / 3, 1 / 3, 1 / 3]},
        })
        out = tmp_path / "out"
        assert run_cli("eval", "--config", str(cfg),
                       "--design", str(DATA / "pb12_k4.csv"),
                       "--out", str(out)) == 0
        rec = json.loads((out / "eval_result.json").read_text())
        A = np.array(rec["alias_matrix"])
        assert A.shape == (4, 6)
        pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        for i in range(4):
            for t, (a, b) in enumerate(pairs):
                if i in (a, b):
                    assert A[i, t] == 0.0
                else:
                    assert abs(A[i, t]) == pytest.approx(1 / 3, abs=1e-12)
        assert rec["breakdown"]["pe_df"] <= 2


@pytest.fixture(scope="module")
def records(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("report")
    paths = []
    for i, kappa in enumerate([(1 / 3, 1 / 3, 1 / 3), (1.0, 0.0, 0.0),
                               (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]):
        doc = base_doc()
        doc["criterion"] = {"family": "MSE.P", "kappa": list(kappa)}
        doc["search"] = {"starts": 3, "seed": 1000 + i}
        doc["output"] = {"dir": str(tmp / f"run{i}")}
        cfg = write_config(tmp / f"c{i}.yaml", doc)
        assert run_cli("search", "--config", str(cfg), "--workers", "1") == 0
        paths.append(tmp / f"run{i}" / "result.json")
    return tmp, paths


class TestCmdReport:
    def test_table_shape_and_reference_rows(self, records, capsys):
        tmp, paths = records
        out = tmp / "table"
        assert run_cli("report", *[str(p) for p in paths], "--out", str(out)) == 0
        text = (out / "efficiency.csv").read_text().splitlines()
        assert text[0].startswith("kappa1,kappa2,kappa3,eff_DP,eff_LoF-DP,eff_MSE(D)")
        assert len(text) == 5
        rows = [line.split(",") for line in text[1:]]
        # each pure run is its own reference: efficiency 100 in its column
        assert float(rows[1][3]) == pytest.approx(100.0)
        assert float(rows[2][4]) == pytest.approx(100.0)
        assert float(rows[3][5]) == pytest.approx(100.0)

    def test_missing_reference_is_error(self, records):
        _, paths = records
        assert run_cli("report", str(paths[0]), str(paths[1])) == 2

    def test_mixed_families_rejected(self, records, tmp_path):
        tmp, paths = records
        doc = base_doc()
        doc["criterion"] = {"family": "MSE.L", "kappa": [1.0, 0.0, 0.0]}
        doc["search"] = {"starts": 2, "seed": 5}
        doc["output"] = {"dir": str(tmp_path / "lrun")}
        cfg = write_config(tmp_path / "l.yaml", doc)
        assert run_cli("search", "--config", str(cfg), "--workers", "1") == 0
        code = run_cli("report", str(paths[1]), str(paths[2]), str(paths[3]),
                       str(tmp_path / "lrun" / "result.json"))
        assert code == 2


class TestZeroPeDesignReporting:
    def test_zero_pe_design_reports_zero_efficiency(self, tmp_path):
        # all-distinct 9-run design: pe_df = 0 so the quantile-bearing columns
        # show 0 while the MSE column stays informative
        doc = {
            "factors": {"count": 2, "levels": 3},
            "runs": 9,
            "model": {"primary": "main_effects", "potential": "quadratic_terms"},
            "criterion": {"family": "MSE.P", "kappa": [0.0, 0.0, 1.0]},
            "search": {"starts": 5, "seed": 10},
            "output": {"dir": str(tmp_path / "mse")},
        }
        cfg = write_config(tmp_path / "mse.yaml", doc)
        assert run_cli("search", "--config", str(cfg), "--workers", "1") == 0
        rec = json.loads((tmp_path / "mse" / "result.json").read_text())
        if rec["breakdown"]["pe_df"] == 0:
            assert rec["breakdown"]["phi_primary"] == math.inf
            assert math.isfinite(rec["breakdown"]["phi_mse"])
