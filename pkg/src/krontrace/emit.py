"""CSV and JSON emission of :class:`~krontrace.experiment.ResultRow` tables.

Numbers are written with 17 significant digits so a float survives a
write/read cycle bit for bit and regression diffs stay meaningful.
"""
import csv
import json
import logging
import sys
from contextlib import contextmanager
from enum import Enum
from pathlib import Path

from .experiment import RESULT_COLUMNS, ROW_COLUMNS
from .interface import OutputFormat

LOG = logging.getLogger(__name__)


def format_value(value):
    """Render one CSV cell.

    >>> format_value(0.1)
    '0.10000000000000001'
    >>> format_value(None)
    ''
    >>> format_value(800)
    '800'
    """
    if value is None:
        return ""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(rows, stream, include_status=False):
    columns = ROW_COLUMNS if include_status else RESULT_COLUMNS
    writer = csv.DictWriter(stream, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({name: format_value(getattr(row, name)) for name in columns})


def write_json(rows, stream):
    json.dump([row.to_document() for row in rows], stream, indent=2)
    stream.write("\n")


@contextmanager
def _open_output(path):
    if path is None or str(path) == "-":
        yield sys.stdout
        return
    with Path(path).open("w", encoding="utf-8", newline="") as f:
        yield f


def emit(rows, output_format, path=None, include_status=False):
    """Write ``rows`` to ``path`` (stdout when ``None``) as CSV or JSON."""
    output_format = OutputFormat(output_format)
    with _open_output(path) as stream:
        if output_format is OutputFormat.json:
            write_json(rows, stream)
        else:
            write_csv(rows, stream, include_status)
    LOG.debug("Wrote %d rows as %s to %s", len(rows), output_format.value, path or "stdout")
