import csv
import json
import math

import numpy as np
import pytest

from catsqueeze import states as st
from catsqueeze.cli import ScenarioConfig, main
from catsqueeze.metrics import fock_rd_ladder


def read_csv(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def summary(capsys):
    out = capsys.readouterr().out.strip().splitlines()[-1]
    return dict(item.split("=", 1) for item in out.split())


def run_fail(capsys, argv):
    code = main(argv)
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    payload = json.loads(err[0])
    assert payload["exit"] == code
    return code, payload


class TestState:
    def test_plain_cat_pure(self, tmp_path, capsys):
        assert main(["state", "--alpha2", "2", "--squeeze-db", "0", "--out", str(tmp_path)]) == 0
        assert float(summary(capsys)["purity"]) == pytest.approx(1.0, abs=1e-12)
        rho = st.DensityMatrix.from_json((tmp_path / "state.json").read_text())
        assert st.purity(rho) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("parity", ["even", "odd"])
    def test_squeezed_cat_keeps_minimum(self, tmp_path, capsys, parity):
        main(["state", "--alpha2", "2.1", "--squeeze-db", "0", "--parity", parity, "--out", str(tmp_path)])
        plain = float(summary(capsys)["w_min"])
        main(["state", "--alpha2", "2.1", "--squeeze-db", "4", "--parity", parity, "--out", str(tmp_path)])
        squeezed = float(summary(capsys)["w_min"])
        assert squeezed == pytest.approx(plain, abs=1e-6)
        if parity == "odd":
            assert squeezed == pytest.approx(-1 / math.pi, abs=1e-3)

    def test_fock_beyond_cutoff(self, tmp_path, capsys):
        code, payload = run_fail(capsys, ["state", "--kind", "fock", "--n", "15", "--dim", "10", "--out", str(tmp_path)])
        assert code != 0


class TestErrors:
    def test_unknown_flag(self, capsys):
        code, payload = run_fail(capsys, ["state", "--bogus"])
        assert code == 2

    def test_bad_choice(self, capsys):
        assert run_fail(capsys, ["state", "--parity", "neither"])[0] == 2

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "s.json"
        cfg.write_text(json.dumps({"state": {"alpha3": 1.0}}))
        code, payload = run_fail(capsys, ["state", "--config", str(cfg)])
        assert code == 2 and "alpha3" in payload["message"]

    def test_unreadable_config(self, tmp_path, capsys):
        assert run_fail(capsys, ["state", "--config", str(tmp_path / "missing.json")])[0] == 2

    def test_bad_sweep(self, tmp_path, capsys):
        assert run_fail(capsys, ["decay", "--eta-start", "0.5", "--eta-stop", "0.9", "--out", str(tmp_path)])[0] == 2

    def test_no_negativity_is_numeric(self, tmp_path, capsys):
        code, payload = run_fail(capsys, ["decay", "--kind", "vacuum", "--squeeze-db", "0", "--out", str(tmp_path)])
        assert code == 3
        assert payload["error"] == "NoNegativityError"


class TestConfig:
    def test_file_then_flags(self, tmp_path):
        cfg = tmp_path / "s.json"
        cfg.write_text(json.dumps({"state": {"alpha2": 1.5, "s_db": 2.0}, "seed": 9}))
        doc = json.loads(cfg.read_text())
        merged = ScenarioConfig.build(doc, {"s_db": 3.0, "eta": 0.7, "dim": 30})
        assert merged.state.alpha2 == 1.5
        assert merged.state.s_db == 3.0
        assert merged.state.dim == 30
        assert merged.channel.eta == 0.7
        assert merged.seed == 9

    def test_defaults(self):
        cfg = ScenarioConfig()
        assert (cfg.state.alpha2, cfg.state.s_db, cfg.sweep.start) == (2.1, 4.0, 0.9)

    def test_toml(self, tmp_path, capsys):
        cfg = tmp_path / "s.toml"
        cfg.write_text('seed = 1\n[state]\nkind = "fock"\nn = 2\ns_db = 0.0\n')
        assert main(["state", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        assert float(summary(capsys)["mean_photon"]) == pytest.approx(2.0, abs=1e-12)

    def test_flag_overrides_file(self, tmp_path, capsys):
        cfg = tmp_path / "s.json"
        cfg.write_text(json.dumps({"state": {"kind": "fock", "n": 2, "s_db": 0.0}}))
        main(["state", "--config", str(cfg), "--n", "3", "--out", str(tmp_path)])
        assert float(summary(capsys)["mean_photon"]) == pytest.approx(3.0, abs=1e-12)


class TestChannelAndWigner:
    def test_channel(self, tmp_path, capsys):
        args = ["channel", "--kind", "fock", "--n", "1", "--squeeze-db", "0", "--eta", "0.7", "--out", str(tmp_path)]
        assert main(args) == 0
        assert float(summary(capsys)["mean_photon"]) == pytest.approx(0.7, abs=1e-12)
        main(args[:-2] + ["--env-db", "3", "--out", str(tmp_path)])
        assert float(summary(capsys)["mean_photon"]) > 0.7

    def test_wigner_files(self, tmp_path, capsys):
        assert main(["wigner", "--nodes", "81", "--out", str(tmp_path)]) == 0
        assert float(summary(capsys)["integral"]) == pytest.approx(1.0, abs=1e-3)
        assert (tmp_path / "wigner.csv").read_text().startswith("#")
        cut = (tmp_path / "wigner_cut_x0.csv").read_text().splitlines()
        assert cut[0] == "p,W" and len(cut) == 82


class TestDecay:
    def test_default_factor(self, tmp_path, capsys):
        assert main(["decay", "--out", str(tmp_path)]) == 0
        s = summary(capsys)
        assert float(s["eta_ref"]) == pytest.approx(0.8)
        assert 1.5 <= float(s["factor"]) <= 2.5
        report = read_csv(tmp_path / "decay_report.csv")
        assert np.allclose(report["factor"], report["rd_plain"] / report["rd_squeezed"], rtol=1e-9)

    def test_zero_squeezing_identical(self, tmp_path):
        assert main(["decay", "--squeeze-db", "0", "--out", str(tmp_path)]) == 0
        a = (tmp_path / "decay_squeezed.csv").read_text().splitlines()[1:]
        b = (tmp_path / "decay_plain.csv").read_text().splitlines()[1:]
        assert a == b

    def test_single_photon_closed_form(self, tmp_path):
        assert main(["decay", "--kind", "fock", "--n", "1", "--squeeze-db", "0", "--out", str(tmp_path)]) == 0
        curve = read_csv(tmp_path / "decay_plain.csv")
        eta = curve["eta"]
        assert np.allclose(curve["w_min"], (1 - 2 * eta) / math.pi, atol=1e-9, rtol=0)
        assert np.allclose(curve["rd"], 2 / (2 * eta - 1), rtol=1e-6)
        side = json.loads((tmp_path / "decay_plain.json").read_text())
        assert side["positivity_threshold"] == pytest.approx(0.5, abs=1e-3)

    def test_deterministic(self, tmp_path):
        outs = []
        for k in range(2):
            d = tmp_path / str(k)
            main(["decay", "--eta-stop", "0.7", "--out", str(d)])
            outs.append([(d / n).read_bytes() for n in ("decay_plain.csv", "decay_squeezed.csv", "decay_report.csv")])
        assert outs[0] == outs[1]


class TestFig2:
    def test_small_range(self, tmp_path, capsys):
        args = ["fig2", "--alpha2-min", "1.0", "--alpha2-max", "2.0", "--alpha2-step", "1.0", "--s-step", "0.5", "--n-max", "3", "--out", str(tmp_path)]
        assert main(args) == 0
        assert summary(capsys)["ordered"] == "True"
        rows = read_csv(tmp_path / "fig2.csv")
        assert np.all(rows["rd_opt"] < rows["rd_plain"])
        fock = read_csv(tmp_path / "fig2_fock.csv")
        assert fock["rd"][0] == pytest.approx(2.0, abs=1e-9)
        assert np.allclose(fock["rd"], fock_rd_ladder(3), rtol=1e-11)

    def test_optimize(self, tmp_path, capsys):
        args = ["optimize", "--alpha2", "2.0", "--eta", "0.8", "--s-step", "0.5", "--out", str(tmp_path)]
        assert main(args) == 0
        s = summary(capsys)
        assert float(s["value"]) <= float(s["plain_value"])
        scan = read_csv(tmp_path / "optimize_scan.csv")
        assert scan["s_db"][0] == 0.0


class TestTomo:
    def test_zero_delay(self, tmp_path, capsys):
        args = ["tomo", "--samples", "1200", "--tomo-dim", "12", "--delay-tau", "0", "--out", str(tmp_path)]
        assert main(args) == 0
        assert float(summary(capsys)["eta_eff"]) == 1.0
        report = json.loads((tmp_path / "tomo_report.json").read_text())
        assert report["eta_eff"] == 1.0

    def test_delay_reports_overlap(self, tmp_path, capsys):
        gamma = 1 / math.pi
        args = ["tomo", "--samples", "1200", "--tomo-dim", "12", "--delay-tau", "1", "--gamma", str(gamma), "--out", str(tmp_path)]
        assert main(args) == 0
        assert float(summary(capsys)["eta_eff"]) == pytest.approx(0.5413, abs=1e-4)

    def test_deterministic(self, tmp_path):
        blobs = []
        for k in range(2):
            d = tmp_path / str(k)
            main(["tomo", "--samples", "1200", "--tomo-dim", "12", "--seed", "5", "--out", str(d)])
            blobs.append(((d / "tomo_samples.csv").read_bytes(), (d / "tomo_state.json").read_bytes()))
        assert blobs[0] == blobs[1]

    def test_default_fidelity(self, tmp_path, capsys):
        assert main(["tomo", "--out", str(tmp_path)]) == 0
        assert float(summary(capsys)["fidelity"]) >= 0.99

    def test_corrected_efficiency(self, tmp_path, capsys):
        assert main(["tomo", "--efficiency", "0.85", "--correct", "--out", str(tmp_path)]) == 0
        assert float(summary(capsys)["fidelity"]) >= 0.98
