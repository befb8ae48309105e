import json
from dataclasses import replace

import pytest

import cli
from cli import main
from config import DEFAULT_CONFIG
from logging_system import LedgerEntry, LogAction, get_logger, reset_logger


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture(autouse=True)
def fresh_logger():
    reset_logger()
    yield
    reset_logger()


@pytest.fixture
def std1(tmp_path):
    return write(tmp_path, "std1.json", {"weights": ["1"]})


def run_json(capsys, argv):
    code = main(argv + ["--json"])
    return code, json.loads(capsys.readouterr().out)


class TestCertificates:
    def test_gap_certificate(self, capsys, std1):
        code, payload = run_json(capsys, ["certify-gap", "--prime", "2", "--s", "3/4",
                                          "--epsilon", "1/4", "--space", std1])
        assert code == 0
        assert payload["kind"] == "GapCertificate"
        assert payload["gap"] == ["2^-1", "1"]
        assert payload["field"] == {"backend": "padic", "prime": 2}

    def test_dense_backend_reports_no_gap(self, capsys, std1):
        code, payload = run_json(capsys, ["certify-gap", "--prime", "2", "--backend", "hahn",
                                          "--s", "3/4", "--space", std1])
        assert code == 0
        assert payload["kind"] == "NoGap"
        assert payload["gap"] is None

    def test_defect(self, capsys, tmp_path):
        space = write(tmp_path, "w.json", {"field": {"backend": "padic", "prime": 2}, "weights": ["1", "1"]})
        vectors = write(tmp_path, "v.json", [["1", "0"], ["0", "1"]])
        code, payload = run_json(capsys, ["defect", "--space", space, "--vectors", vectors])
        assert code == 0
        assert payload["level"] == "1"

    def test_classify_obstruction(self, capsys, tmp_path):
        odd = write(tmp_path, "odd.json", {"field": {"prime": 2}, "weights": ["2^1/2", "1"]})
        std = write(tmp_path, "std.json", {"field": {"prime": 2}, "weights": ["1", "1"]})
        code, payload = run_json(capsys, ["classify", "--space", odd, "--space2", std])
        assert code == 0
        assert payload["isometric"] is False

    def test_demo(self, capsys):
        code, payload = run_json(capsys, ["demo", "shrinking-balls", "--n", "3"])
        assert code == 0
        assert payload["all_passed"] is True
        assert len(payload["checks"]) == 2


class TestExitCodes:
    def test_grammar_error(self, capsys, tmp_path):
        space = write(tmp_path, "bad.json", {"field": {"prime": 2}, "weights": ["2^0"]})
        code, payload = run_json(capsys, ["defect", "--space", space, "--vectors", space])
        assert code == 2
        assert payload["error"] == "GrammarError"

    def test_epsilon_range(self, capsys, std1):
        code, _ = run_json(capsys, ["certify-gap", "--prime", "2", "--s", "3/4",
                                    "--epsilon", "1", "--space", std1])
        assert code == 2

    def test_patch_far_apart(self, capsys, tmp_path):
        Y = write(tmp_path, "y.json", {"field": {"prime": 2}, "weights": ["1", "1"]})
        G = write(tmp_path, "g.json", {"field": {"prime": 2}, "weights": ["1", "1", "1"]})
        j = write(tmp_path, "j.json", {"base": [["1", "0"]], "images": [["1", "0", "0"]]})
        f = write(tmp_path, "f.json", {"base": [["1", "0"], ["0", "1"]],
                                       "images": [["0", "1", "0"], ["0", "0", "1"]]})
        code, payload = run_json(capsys, ["patch", "--space", Y, "--space2", G, "--map", j, "--map2", f])
        assert code == 4
        assert payload["error"] == "OperatorNormNotBelowOne"

    def test_truncated_map_exhausts_precision(self, capsys, tmp_path):
        H = write(tmp_path, "h.json", {"field": {"backend": "hahn", "prime": 2}, "weights": ["1", "1"]})
        L = write(tmp_path, "l.json", {"base": [["1", "0"], ["1", "O(t^(1))"]],
                                       "images": [["1", "0"], ["1", "0"]]})
        code, payload = run_json(capsys, ["opnorm", "--space", H, "--space2", H, "--map", L])
        assert code == 3
        assert payload["error"] == "PrecisionExhausted"

    def test_internal_error(self, capsys, monkeypatch):
        def broken(ctx):
            raise RuntimeError("broken handler")

        monkeypatch.setitem(cli.COMMANDS, "norm", (broken, "Weighted sup-norms of vectors"))
        code, payload = run_json(capsys, ["norm"])
        assert code == 1
        assert payload == {"error": "RuntimeError", "message": "broken handler",
                           "witness": None, "exit_code": 1}

    def test_verbose_shows_codec_stats(self, capsys, std1):
        code = main(["certify-gap", "--prime", "2", "--s", "3/4", "--space", std1, "--json", "--verbose"])
        assert code == 0
        err = capsys.readouterr().err
        assert "Codec stats" in err and "grammar_errors=0" in err


class TestVerifyCommand:
    def test_report_written(self, capsys, tmp_path):
        report = tmp_path / "report.json"
        code, payload = run_json(capsys, ["verify", "--suite", "t-char", "--cases", "1", "--seed", "3",
                                          "--samples", "5", "--workers", "1", "--report", str(report)])
        assert code == 0
        saved = json.loads(report.read_text())
        assert saved["suite"] == "t-char" and saved["cases"] == 1
        assert payload["passed"] == saved["passed"]


class TestLedger:
    def test_cli_appends_rows(self, capsys, tmp_path, std1):
        ledger = tmp_path / "logs" / "ledger.csv"
        argv = ["certify-gap", "--prime", "2", "--s", "3/4", "--space", std1, "--ledger", str(ledger)]
        assert run_json(capsys, argv)[0] == 0
        assert run_json(capsys, argv)[0] == 0
        lines = ledger.read_text().splitlines()
        assert lines[0] == "timestamp,operation,backend,prime,action,detail"
        assert len(lines) == 3
        assert ",certify-gap,PADIC,2,CERTIFIED," in lines[1]

    def test_detail_quoting(self):
        entry = LedgerEntry("t0", "defect", "PADIC", 2, LogAction.REFUTED.value, 'level "2^-1", not 1')
        assert entry.to_csv() == 't0,defect,PADIC,2,REFUTED,"level ""2^-1"", not 1"'
        assert json.loads(entry.to_json())["action"] == "REFUTED"

    def test_refuted_rows_respect_config(self, tmp_path):
        ledger = tmp_path / "ledger.csv"
        logger = get_logger(replace(DEFAULT_CONFIG.logging, ledger_file=str(ledger),
                                    console_output=False, log_refuted=False))
        logger.log_certificate("defect", None, LogAction.REFUTED, "level 2^-1")
        logger.log_certificate("defect", None, LogAction.CERTIFIED, "level 1")
        rows = ledger.read_text().splitlines()[1:]
        assert len(rows) == 1 and ",-,0,CERTIFIED," in rows[0]

    def test_jsonl_ledger(self, capsys, tmp_path, std1):
        ledger = tmp_path / "ledger.jsonl"
        argv = ["certify-gap", "--prime", "2", "--s", "3/4", "--space", std1, "--ledger", str(ledger)]
        assert run_json(capsys, argv)[0] == 0
        assert run_json(capsys, argv)[0] == 0
        rows = [json.loads(line) for line in ledger.read_text().splitlines()]
        assert len(rows) == 2
        assert list(rows[0]) == LedgerEntry.columns()
        assert rows[1]["operation"] == "certify-gap" and rows[1]["action"] == "CERTIFIED"
