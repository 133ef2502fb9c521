import io
import json
import math

import mpmath as mp
import numpy as np
import pytest

from ReportWriter import PAYLOAD_KEYS, ReportWriter, make_payload
from QScalar import ConfigurationError


def sample_payload():
    inputs = {"q": 0.5, "cutoff": 40, "spins2": [0, 1]}
    values = [{"spin2": 0, "index_numeric": 0.0}, {"spin2": 1, "index_numeric": -0.55133}]
    return make_payload("index", inputs, values, closed_form=[0.0, -0.55133], abs_err=1e-6)


def test_payload_has_every_key():
    payload = make_payload("trace-r", {"q": 0.5}, {"partial_sum": 1.0})
    assert tuple(sorted(payload)) == tuple(sorted(PAYLOAD_KEYS))
    assert payload["closed_form"] is None
    assert payload["stable"] is True


def test_numeric_values_are_cleaned():
    payload = make_payload("check", {}, {
        "complex": 1 + 2j,
        "real_complex": complex(3.0, 0.0),
        "inf": math.inf,
        "array": np.arange(3),
        "mp": mp.mpf("0.25"),
        "flag": np.bool_(True),
    })
    values = payload["values"]
    assert values["complex"] == {"re": 1.0, "im": 2.0}
    assert values["real_complex"] == 3.0
    assert values["inf"] == "inf"
    assert values["array"] == [0, 1, 2]
    assert values["mp"] == 0.25
    assert values["flag"] is True
    json.dumps(payload)


def test_json_is_deterministic():
    writer = ReportWriter()
    assert writer.render(sample_payload()) == writer.render(sample_payload())
    assert json.loads(writer.render(sample_payload()))["abs_err"] == pytest.approx(1e-6)


def test_csv_has_one_row_per_item():
    frame = ReportWriter.to_frame(sample_payload())
    assert len(frame) == 2
    assert list(frame.columns[:2]) == ["command", "inputs.q"]
    assert "index_numeric" in frame.columns
    text = ReportWriter().render(sample_payload(), "csv")
    assert text.splitlines()[0].startswith("command,")


def test_tex_table():
    text = ReportWriter().render(sample_payload(), "tex")
    assert "\\begin{tabular}" in text
    assert "index" in text


def test_unknown_format():
    with pytest.raises(ConfigurationError):
        ReportWriter().render(sample_payload(), "xml")


def test_write_to_stream_and_file(tmp_path):
    writer = ReportWriter(base_dir=str(tmp_path))
    stream = io.StringIO()
    text = writer.write(sample_payload(), "json", None, stream)
    assert stream.getvalue() == text
    writer.write(sample_payload(), "json", "out/report.json")
    assert json.loads((tmp_path / "out" / "report.json").read_text(encoding="utf-8"))["command"] == "index"
