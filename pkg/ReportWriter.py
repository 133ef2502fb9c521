import io
import os
import json
import math
import logging
from fractions import Fraction
from typing import Any, Optional

import mpmath as mp
import numpy as np
import pandas as pd
from pylatex import Document, Section, Tabular, NoEscape
from pylatexenc.latexencode import unicode_to_latex

from QScalar import ConfigurationError

# Configuração do logger
logging.basicConfig(filename='ReportWriter.log', level=logging.INFO,
                    format='%(asctime)s - %(levelname)s - %(message)s')

FORMATS = ("json", "csv", "tex")
PAYLOAD_KEYS = ("command", "inputs", "values", "closed_form", "abs_err", "tail_estimate", "stable")


def _clean(value: Any) -> Any:
    """
    Converts numerical results into plain JSON values.

    Complex numbers with a nonzero imaginary part become {"re", "im"};
    non-finite floats become strings so the output stays valid JSON.
    """
    if hasattr(value, "as_dict"):
        return _clean(value.as_dict())
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (mp.mpc, complex, np.complexfloating)):
        z = complex(value)
        if z.imag == 0.0:
            return _clean(z.real)
        return {"re": _clean(z.real), "im": _clean(z.imag)}
    if isinstance(value, (float, np.floating, mp.mpf, Fraction)):
        x = float(value)
        return x if math.isfinite(x) else str(x)
    return value


def make_payload(command: str, inputs: dict, values: Any, closed_form: Any = None, abs_err: Any = None,
                 tail_estimate: Any = None, stable: bool = True) -> dict:
    """
    Schema-stable report: every key in PAYLOAD_KEYS is always present.

    Parameters:
    command (str): CLI command that produced the report.
    inputs (dict): Effective configuration of the run.
    values (Any): Computed values; a dict or a list of per-item dicts.
    closed_form, abs_err, tail_estimate: Optional comparison data, None when not applicable.
    stable (bool): False when the computation is flagged as unstable or failed a check.

    Returns:
    dict: JSON-ready payload without timestamps.
    """
    return _clean({
        "command": command,
        "inputs": inputs,
        "values": values,
        "closed_form": closed_form,
        "abs_err": abs_err,
        "tail_estimate": tail_estimate,
        "stable": bool(stable),
    })


def _flat_items(data: Any, prefix: str = ""):
    if isinstance(data, dict):
        for k, v in data.items():
            yield from _flat_items(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(data, list) and data and all(isinstance(v, dict) for v in data):
        for i, v in enumerate(data):
            yield from _flat_items(v, f"{prefix}[{i}]")
    else:
        yield prefix, data


class ReportWriter:
    """
    Renders payloads as JSON, CSV or a LaTeX table and writes them out.

    Parameters:
    base_dir (str): Directory for relative output paths; defaults to the working directory.
    """

    def __init__(self, base_dir: Optional[str] = None):
        self.base_dir = base_dir

    @staticmethod
    def to_json(payload: dict) -> str:
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @staticmethod
    def to_frame(payload: dict) -> pd.DataFrame:
        """Flat projection: one row per item of `values`, shared fields repeated on every row."""
        values = payload.get("values")
        rows = values if isinstance(values, list) and all(isinstance(v, dict) for v in values) else [values]
        rows = [r if isinstance(r, dict) else {"value": r} for r in rows]
        frame = pd.json_normalize(rows, sep=".")
        frame = frame.reindex(sorted(frame.columns), axis=1)
        shared = {"command": payload.get("command")}
        for key, value in _flat_items(payload.get("inputs", {}), "inputs"):
            shared[key] = json.dumps(value) if isinstance(value, list) else value
        for key in ("closed_form", "abs_err", "tail_estimate", "stable"):
            shared[key] = payload.get(key)
        for i, (key, value) in enumerate(shared.items()):
            frame.insert(i, key, [value] * len(frame))
        return frame

    def to_csv(self, payload: dict) -> str:
        buffer = io.StringIO()
        self.to_frame(payload).to_csv(buffer, index=False)
        return buffer.getvalue()

    @staticmethod
    def create_tex_document(payload: dict) -> Document:
        """
        Cria um documento LaTeX com uma tabela de chave e valor por relatório.
        """
        doc = Document(documentclass="article", document_options=["11pt", "a4paper"])
        title = f"Report: {payload.get('command', '')}"
        with doc.create(Section(NoEscape(unicode_to_latex(title)), numbering=False)):
            with doc.create(Tabular("ll")) as table:
                table.add_hline()
                for key, value in _flat_items(payload):
                    text = json.dumps(value) if isinstance(value, (list, dict)) else str(value)
                    table.add_row((NoEscape(unicode_to_latex(key)), NoEscape(unicode_to_latex(text))))
                table.add_hline()
        return doc

    def to_tex(self, payload: dict) -> str:
        return self.create_tex_document(payload).dumps() + "\n"

    def render(self, payload: dict, fmt: str = "json") -> str:
        if fmt == "json":
            return self.to_json(payload)
        if fmt == "csv":
            return self.to_csv(payload)
        if fmt == "tex":
            return self.to_tex(payload)
        raise ConfigurationError(f"unknown output format {fmt!r}; choose one of {', '.join(FORMATS)}")

    def write(self, payload: dict, fmt: str = "json", output: Optional[str] = None, stream=None) -> str:
        """
        Renders the payload and writes it to `output`, or to `stream` when no path is given.

        Returns:
        str: The rendered text.
        """
        text = self.render(payload, fmt)
        if output:
            path = output if os.path.isabs(output) or not self.base_dir else os.path.join(self.base_dir, output)
            directory = os.path.dirname(path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(path, "w", encoding="utf-8") as handle:
                handle.write(text)
            logging.info(f"Relatório {payload.get('command')} salvo em {path}")
        elif stream is not None:
            stream.write(text)
        return text
