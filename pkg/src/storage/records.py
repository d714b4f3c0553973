"""Line-delimited JSON records."""
import json
from pathlib import Path

from errors import FormatError


def dumps_record(record):
    # fixed key order and separators keep reruns byte-identical
    return json.dumps(record, separators=(", ", ": "))


def write_records(path, records, append=False):
    count = 0
    with open(path, "a" if append else "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(dumps_record(record) + "\n")
            count += 1
    return count


def iter_records(path):
    """Yield ``(line_number, record)`` pairs, skipping blank lines."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"{path.name}:{line_number}: {e.msg}") from e
            if not isinstance(record, dict):
                raise FormatError(f"{path.name}:{line_number}: expected an object")
            yield line_number, record


def read_records(path):
    return [record for _, record in iter_records(path)]


class RecordWriter:
    """Append-as-you-go writer used by the streaming loop."""

    def __init__(self, path, append=False):
        self.path = Path(path)
        self._fh = open(self.path, "a" if append else "w", encoding="utf-8")
        self.count = 0

    def write(self, record):
        self._fh.write(dumps_record(record) + "\n")
        self.count += 1

    def flush(self):
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
