import csv
import io
import json

import pytest

from src.DTOs.run_config import OutputFormat, RunConfig
from src.DTOs.system_params import SystemParams
from src.output_helper import SCHEMA_VERSION, RowSink, format_value


@pytest.fixture
def config() -> RunConfig:
    return RunConfig(command="crests", params=SystemParams(a1=0.5, a2=1.0), threads=1)


@pytest.mark.parametrize(
    "value, text", [(None, ""), (True, "true"), (False, "false"), (0.1, "0.10000000000000001"), (3, "3")]
)
def test_format_value(value, text: str) -> None:
    assert format_value(value) == text


def _data_lines(text: str) -> list[str]:
    return [line for line in text.splitlines() if not line.startswith("#")]


def test_csv_sink_writes_header_and_rows(config: RunConfig) -> None:
    _buffer = io.StringIO()
    with RowSink(config, _buffer) as sink:
        sink.write_all([{"I": -1.0, "kind": "H"}, {"I": 1.0, "kind": "V"}])
    _text = _buffer.getvalue()
    assert _text.startswith(f"# schema_version={SCHEMA_VERSION}\n# command=crests\n")
    assert "# tol.tol_root=9.9999999999999998e-13" in _text
    _rows = list(csv.DictReader(_data_lines(_text)))
    assert list(_rows[0])[:3] == ["a1", "a2", "k1"]
    assert [row["kind"] for row in _rows] == ["H", "V"]
    assert float(_rows[1]["I"]) == 1.0
    assert sink.rows_written == 2


def test_csv_sink_rejects_changing_columns(config: RunConfig) -> None:
    with pytest.raises(ValueError):
        with RowSink(config, io.StringIO()) as sink:
            sink.write({"I": 0.0})
            sink.write({"theta": 0.0})


def test_jsonl_sink(config: RunConfig) -> None:
    _config = config.model_copy(update={"format": OutputFormat.JSONL})
    _buffer = io.StringIO()
    with RowSink(_config, _buffer) as sink:
        sink.write({"I": 0.25, "value": float("inf")})
    _record = json.loads(_buffer.getvalue())
    assert _record["schema_version"] == SCHEMA_VERSION
    assert _record["command"] == "crests"
    assert _record["params"]["a1"] == 0.5
    assert _record["I"] == 0.25
    assert _record["value"] is None


def test_sink_writes_to_the_configured_file(config: RunConfig, tmp_path) -> None:
    _path = tmp_path / "rows.csv"
    with RowSink(config.model_copy(update={"out": str(_path)})) as sink:
        sink.write({"I": 0.0})
    assert _data_lines(_path.read_text(encoding="utf-8"))[1].endswith(",0")
