import csv
import json
import math
import sys
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Optional, TextIO

from loguru import logger

from src.DTOs.run_config import OutputFormat, RunConfig

SCHEMA_VERSION = 1


def format_value(value: Any) -> str:
    """CSV cell text: floats with 17 significant digits, booleans lowercase, None as an empty cell."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, Enum):
        return str(value.value)
    return str(value)


def _json_value(value: Any) -> Any:
    # NaN and inf are not valid JSON
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Enum):
        return value.value
    return value


def parameter_columns(config: RunConfig) -> dict[str, Any]:
    """System parameters and criterion, repeated on every row."""
    _params = config.params
    return {
        "a1": _params.a1,
        "a2": _params.a2,
        "k1": _params.k1,
        "k2": _params.k2,
        "l1": _params.l1,
        "l2": _params.l2,
        "eps": _params.eps,
        "pendulum_sign": _params.pendulum_sign,
        "criterion": str(config.criterion),
    }


def header_block(config: RunConfig) -> dict[str, Any]:
    """Comment header of a CSV file: command, parameters and every tolerance."""
    return {
        "schema_version": SCHEMA_VERSION,
        "command": config.command,
        **parameter_columns(config),
        **{f"tol.{key}": value for key, value in config.tol.model_dump().items()},
    }


class RowSink:
    """
    The single writer of a command's output. Rows are written in the order they are given.

    CSV: ``# key=value`` header lines, a column line, then one line per row with the parameter columns first.
    JSON lines: one object per row with ``schema_version``, ``command``, ``params`` and the row fields.
    """

    def __init__(self, config: RunConfig, stream: Optional[TextIO] = None):
        self.config = config
        self.format = config.format
        self._params = parameter_columns(config)
        self._stream = stream
        self._owned = False
        self._writer = None
        self._columns: Optional[list[str]] = None
        self.rows_written = 0

    def __enter__(self) -> "RowSink":
        if self._stream is None:
            if self.config.out:
                self._stream = Path(self.config.out).open("w", newline="", encoding="utf-8")
                self._owned = True
            else:
                self._stream = sys.stdout
        if self.format == OutputFormat.CSV:
            for _key, _value in header_block(self.config).items():
                self._stream.write(f"# {_key}={format_value(_value)}\n")
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if self._owned:
            self._stream.close()
        else:
            self._stream.flush()
        if exc_type is None:
            logger.info(f"Wrote {self.rows_written} rows ({self.format.value}) to {self.config.out or 'stdout'}")

    def write(self, row: dict[str, Any]) -> None:
        if self.format == OutputFormat.CSV:
            self._write_csv(row)
        else:
            _record = {
                "schema_version": SCHEMA_VERSION,
                "command": self.config.command,
                "params": self._params,
                **{key: _json_value(value) for key, value in row.items()},
            }
            self._stream.write(json.dumps(_record, allow_nan=False) + "\n")
        self.rows_written += 1

    def write_all(self, rows: Iterable[dict[str, Any]]) -> None:
        for _row in rows:
            self.write(_row)

    def _write_csv(self, row: dict[str, Any]) -> None:
        _full = {**self._params, **row}
        if self._columns is None:
            self._columns = list(_full)
            self._writer = csv.writer(self._stream, lineterminator="\n")
            self._writer.writerow(self._columns)
        if list(_full) != self._columns:
            raise ValueError(f"row columns {list(row)} differ from the header {self._columns}")
        self._writer.writerow([format_value(_full[column]) for column in self._columns])
