import json
import math
from pathlib import Path

import pytest

from seqbin import cli
from seqbin import verify as verify_mod
from seqbin.decoder import NEG_INF, StackDecoder

REPO = Path(__file__).resolve().parents[1]

BSC_RATE07 = {
    "mode": "si",
    "source": {"pmf": [[0.45, 0.05], [0.05, 0.45]]},
    "rate": 0.7,
    "bias": 0.7,
    "seeds": {"master": 11},
    "trials": 3,
    "stream_len": 800,
    "delays": list(range(1, 21)),
    "fit": {"delay_window": [4, 20], "comp_window": [2, 256]},
}


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


def read_csv_body(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("#")]


class FlippedMetric(StackDecoder):
    """Negative control: scores every branch with the wrong sign."""

    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        self._sym_metric = [[m if m == NEG_INF else -m for m in row] for row in self._sym_metric]


class TestExponents:
    def test_reference_table(self, tmp_path, capsys):
        assert run_cli("exponents", "--config", write(tmp_path, BSC_RATE07), "--out", tmp_path / "out") == 0
        out = capsys.readouterr().out
        rows = [line.split(",") for line in out.splitlines() if line and not line.startswith("#")]
        assert rows[0][:4] == ["rho", "e_si", "f_si", "g_si"]
        by_rho = {float(r[0]): r for r in rows[1:]}
        assert len(by_rho) == 201
        assert float(by_rho[1.0][1]) == pytest.approx(2 * math.log2(math.sqrt(0.1) + math.sqrt(0.9)), abs=1e-12)
        assert by_rho[0.5][7:] == ["", "", ""]
        summary = json.loads((tmp_path / "out" / "exponents.json").read_text())
        assert summary["exponent"] == pytest.approx(0.052, abs=1e-3)
        assert summary["comp_bias_interval"]["lower"] < 0.7 < summary["comp_bias_interval"]["upper"]
        assert (tmp_path / "out" / "exponents.csv").read_text().startswith("# config_hash=")

    def test_independent_side_information_columns_agree(self, tmp_path, capsys):
        doc = dict(BSC_RATE07, source={"pmf": [[0.1, 0.1], [0.3, 0.3], [0.1, 0.1]]}, rate=1.6)
        assert run_cli("exponents", "--config", write(tmp_path, doc)) == 0
        rows = [line.split(",") for line in capsys.readouterr().out.splitlines()[1:] if not line.startswith("#")]
        for r in rows:
            for a, b in zip(r[1:4], r[4:7]):
                assert float(a) == pytest.approx(float(b), abs=1e-12)

    def test_jsc_columns(self, tmp_path, capsys):
        assert run_cli("exponents", "--config", REPO / "configs" / "jsc_noiseless.json") == 0
        out = capsys.readouterr().out
        row = [line for line in out.splitlines() if line.startswith("0.5,")][0].split(",")
        assert float(row[7]) == pytest.approx(0.5, abs=1e-12)


class TestConfigErrors:
    @pytest.mark.parametrize(
        "patch, needle",
        [
            ({"source": {"pmf": [[0.45, 0.05], [0.05, 0.55]]}}, "row 1: 0.6"),
            ({"mode": "jsc", "rate": None}, "lambda"),
            ({"surprise": 1}, "unknown field"),
            ({"seeds": {"master": 1, "colour": 2}}, "unknown field(s) in seeds"),
            ({"bias": "auto-comp:1.0", "rate": 0.6}, "moment condition"),
            ({"delays": [1, 900]}, "stream length"),
            ({"bias": "whatever:1"}, "bias spec"),
        ],
    )
    def test_exit_code_two(self, tmp_path, capsys, patch, needle):
        doc = {k: v for k, v in dict(BSC_RATE07, **patch).items() if v is not None}
        if doc["mode"] == "jsc":
            doc.pop("rate", None)
        assert run_cli("simulate", "--config", write(tmp_path, doc), "--out", tmp_path) == 2
        assert needle in capsys.readouterr().err

    def test_malformed_channel_names_row(self, tmp_path, capsys):
        doc = dict(BSC_RATE07, mode="jsc", **{"lambda": 1}, channel={"W": [[1.0, 0.0], [0.3, 0.6]], "beta": [0.5, 0.5]})
        del doc["rate"]
        assert run_cli("exponents", "--config", write(tmp_path, doc)) == 2
        assert "transition row 1" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert run_cli("exponents", "--config", tmp_path / "nope.json") == 2

    def test_invalid_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{mode: si")
        assert run_cli("exponents", "--config", path) == 2
        assert "invalid JSON" in capsys.readouterr().err


class TestSimulate:
    def test_outputs_and_byte_identical_rerun(self, tmp_path):
        cfg = write(tmp_path, BSC_RATE07)
        for d in ("a", "b"):
            assert run_cli("simulate", "--config", cfg, "--out", tmp_path / d, "--workers", 1) == 0
        for name in ("pe.csv", "comp.csv", "summary.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        pe = read_csv_body(tmp_path / "a" / "pe.csv")
        assert pe[0] == "d,trials,errors,pe,log2_pe,samples"
        assert len(pe) == 21
        comp = read_csv_body(tmp_path / "a" / "comp.csv")
        assert comp[0] == "n,ccdf,log2_n,log2_ccdf"
        summary = json.loads((tmp_path / "a" / "summary.json").read_text())
        assert summary["master_seed"] == 11
        assert summary["trials_observed"] + summary["cap_abort_count"] == 3
        assert len(summary["code_seeds"]) == 3
        assert summary["theory"]["exponent"] == pytest.approx(0.052, abs=1e-3)

    def test_workers_do_not_change_output(self, tmp_path):
        cfg = write(tmp_path, BSC_RATE07)
        run_cli("simulate", "--config", cfg, "--out", tmp_path / "one", "--workers", 1)
        run_cli("simulate", "--config", cfg, "--out", tmp_path / "two", "--workers", 2)
        for name in ("pe.csv", "comp.csv", "summary.json"):
            assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()

    def test_seed_override(self, tmp_path):
        cfg = write(tmp_path, BSC_RATE07)
        run_cli("simulate", "--config", cfg, "--out", tmp_path / "a", "--workers", 1)
        run_cli("simulate", "--config", cfg, "--out", tmp_path / "b", "--workers", 1, "--seed", 12)
        a = json.loads((tmp_path / "a" / "summary.json").read_text())
        b = json.loads((tmp_path / "b" / "summary.json").read_text())
        assert b["master_seed"] == 12 and a["code_seeds"] != b["code_seeds"]
        assert a["config_hash"] != b["config_hash"]

    def test_zero_trials(self, tmp_path):
        cfg = write(tmp_path, dict(BSC_RATE07, trials=0))
        assert run_cli("simulate", "--config", cfg, "--out", tmp_path, "--workers", 1) == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["fitted_delay_exponent"] is None and summary["trials_observed"] == 0

    def test_all_trials_cap_aborted(self, tmp_path, capsys):
        cfg = write(tmp_path, dict(BSC_RATE07, caps={"max_pops_per_step": 2}))
        assert run_cli("simulate", "--config", cfg, "--out", tmp_path, "--workers", 1) == 3
        assert "cap-aborted" in capsys.readouterr().err
        assert json.loads((tmp_path / "summary.json").read_text())["cap_abort_count"] == 3

    def test_bad_worker_count(self, tmp_path):
        assert run_cli("simulate", "--config", write(tmp_path, BSC_RATE07), "--out", tmp_path, "--workers", 0) == 2


class TestVerify:
    def test_passes_and_writes_transcript(self, tmp_path, capsys):
        assert run_cli("verify", "--seed", 3, "--out", tmp_path / "a") == 0
        assert run_cli("verify", "--seed", 3, "--out", tmp_path / "b") == 0
        text = (tmp_path / "a" / "verify.txt").read_text()
        assert text == (tmp_path / "b" / "verify.txt").read_text()
        assert text.count("PASS") == 4 and "FAIL" not in text

    def test_seed_from_config(self, tmp_path, capsys):
        assert run_cli("verify", "--config", write(tmp_path, BSC_RATE07)) == 0
        assert capsys.readouterr().out.startswith("verify seed=11")

    def test_negative_control_fails_oracle_suite(self, monkeypatch, capsys):
        res = verify_mod.oracle_suite(0, instances=50, decoder_cls=FlippedMetric)
        assert res.violations > 0
        real = verify_mod.run_all
        monkeypatch.setattr(verify_mod, "run_all", lambda seed: real(seed, decoder_cls=FlippedMetric))
        assert run_cli("verify", "--seed", 0) == 1
        assert "FAIL oracle-equivalence" in capsys.readouterr().out

    def test_hidden_oracle_command(self, capsys):
        assert run_cli("oracle", "--seed", 1, "--instances", 10) == 0
        assert "10 checks, 0 violations" in capsys.readouterr().out
