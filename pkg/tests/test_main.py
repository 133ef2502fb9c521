import argparse
import io
import json

import pytest

import main
from main import EXIT_CONFIG, EXIT_OK, EXIT_UNSTABLE, Main, RunConfig, spin_to_l2
from ChernIndex import LevelSeries
from QScalar import ConfigurationError, ConvergenceError, TruncationError
from SUq2Triple import SummabilityReport, TraceRReport, summability_verdict, trend_settled


def run(argv, **kwargs):
    stream = io.StringIO()
    code = Main(stream=stream, **kwargs).iniciar(argv)
    return code, stream.getvalue()


def test_spin_parsing():
    assert spin_to_l2("0") == 0
    assert spin_to_l2("0.5") == 1
    assert spin_to_l2("1") == 2
    with pytest.raises(argparse.ArgumentTypeError):
        spin_to_l2("0.3")


def test_run_config_validation():
    with pytest.raises(ConfigurationError):
        RunConfig("index", q=1.5)
    with pytest.raises(ConfigurationError):
        RunConfig("nope")
    with pytest.raises(ConfigurationError):
        RunConfig("summability")
    config = RunConfig("trace-r", cutoff=80)
    assert RunConfig.from_inputs(config.inputs()).inputs() == config.inputs()
    assert "output" not in config.inputs()


def test_trace_r_command():
    code, out = run(["trace-r", "--q", "0.5", "--cutoff", "80"])
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["command"] == "trace-r"
    assert payload["abs_err"] <= 1e-8
    assert payload["stable"] is True


def test_reports_are_byte_identical():
    assert run(["trace-r", "--cutoff", "20"])[1] == run(["trace-r", "--cutoff", "20"])[1]


def test_lp_suite_command():
    code, out = run(["check", "lp", "--dim", "5", "--trials", "100", "--seed", "1"])
    assert code == EXIT_OK
    assert all(entry["violations"] == 0 for entry in json.loads(out)["values"].values())


def test_invalid_configuration_exits_with_two():
    assert run(["trace-r", "--q", "1.5"])[0] == EXIT_CONFIG
    assert run(["check", "lp", "--dim", "1"])[0] == EXIT_CONFIG


def test_argparse_errors_exit_with_two():
    with pytest.raises(SystemExit) as excinfo:
        run(["index", "--spin", "0.3"])
    assert excinfo.value.code == 2
    with pytest.raises(SystemExit):
        run(["summability", "torus", "--p", "2"])


def test_truncation_errors_exit_with_two(monkeypatch):
    def too_small(ctx, L2):
        raise TruncationError("cutoff too small")

    monkeypatch.setattr(main, "trace_r", too_small)
    assert run(["trace-r"])[0] == EXIT_CONFIG


def test_convergence_failures_emit_a_diagnostic(monkeypatch):
    def no_gap(ctx, L2):
        raise ConvergenceError("no clean gap", {"gap_ratio": 1.5})

    monkeypatch.setattr(main, "trace_r", no_gap)
    code, out = run(["trace-r"])
    assert code == EXIT_UNSTABLE
    payload = json.loads(out)
    assert payload["stable"] is False
    assert payload["values"]["diagnostic"] == {"gap_ratio": 1.5}


class FailingIdentity:
    passed = False

    def as_dict(self):
        return {"violations": 1}


def test_failed_checks_exit_with_three(monkeypatch):
    monkeypatch.setattr(main, "run_cyclic_suite", lambda trials, seed: {"b_sigma_squared": FailingIdentity()})
    code, out = run(["check", "cyclic", "--trials", "5"])
    assert code == EXIT_UNSTABLE
    assert json.loads(out)["values"] == {"b_sigma_squared": {"violations": 1}}


def test_csv_output_file(tmp_path):
    target = tmp_path / "trace.csv"
    code, out = run(["trace-r", "--cutoff", "20", "--format", "csv", "--output", str(target)])
    assert code == EXIT_OK
    assert out == ""
    assert target.read_text(encoding="utf-8").startswith("command,")


def test_cache_reuses_stable_reports(tmp_path, monkeypatch):
    monkeypatch.setenv("QSU2_CACHE_DIR", str(tmp_path))
    calls = []
    original = main.trace_r

    def counted(ctx, L2):
        calls.append(L2)
        return original(ctx, L2)

    monkeypatch.setattr(main, "trace_r", counted)
    first = run(["trace-r", "--cutoff", "20", "--cache"])
    second = run(["trace-r", "--cutoff", "20", "--cache"])
    assert first == second
    assert calls == [20]


def test_trace_r_is_stable_when_the_tail_explains_the_gap():
    code, out = run(["trace-r", "--cutoff", "10"])
    payload = json.loads(out)
    assert payload["abs_err"] > 1e-4
    assert payload["abs_err"] <= 2.0 * payload["tail_estimate"]
    assert code == EXIT_OK


def test_trace_r_flags_an_unexplained_gap(monkeypatch):
    monkeypatch.setattr(main, "trace_r", lambda ctx, L2: TraceRReport(ctx.q, L2, 1.0, 2.0, 1.0, 1e-9))
    code, out = run(["trace-r", "--cutoff", "20"])
    assert code == EXIT_UNSTABLE
    assert json.loads(out)["stable"] is False


def test_summability_stability_follows_the_trend(monkeypatch):
    code, out = run(["summability", "podles", "--p", "3", "--cutoff", "30"])
    payload = json.loads(out)
    assert payload["values"]["settled"] is True
    assert code == EXIT_OK

    def flat(p, ctx, cutoffs, lipschitz=False):
        series = LevelSeries({0: 1.0})
        return SummabilityReport("suq2", ctx.q, p, list(cutoffs), series.contributions, series.ratios(),
                                 {c: 1.0 for c in cutoffs}, series.tail_estimate(), summability_verdict(series),
                                 trend_settled(series))

    monkeypatch.setattr(main, "summability_scan", flat)
    code, out = run(["summability", "suq2", "--p", "1", "--cutoff", "10"])
    assert code == EXIT_UNSTABLE
    assert json.loads(out)["stable"] is False


def test_index_of_the_trivial_unitary():
    code, out = run(["index", "--spin", "0", "--cutoff", "12"])
    payload = json.loads(out)
    assert payload["closed_form"] == [0.0]
    assert payload["values"][0]["cone_correction"] == 0.0
    assert code == EXIT_OK
