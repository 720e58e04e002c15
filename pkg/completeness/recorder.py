"""Report recorder

Writes a finished run's machine report and text table in one go.

"""
import abc
import json
import os
from typing import Any, Dict, Optional

REPORT_JSON = "report.json"
REPORT_TEXT = "report.txt"


def dumps(report: Dict[str, Any]) -> str:
    """Canonical JSON: sorted keys, unrounded floats, trailing newline."""
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


class Recorder(abc.ABC):
    @abc.abstractmethod
    def read_report(self) -> Optional[Dict[str, Any]]:
        """Read the last written machine report."""
        raise NotImplementedError

    @abc.abstractmethod
    def write_report(self, report: Dict[str, Any], table: str) -> None:
        """Write the machine report and its rendered table."""
        raise NotImplementedError


class FileRecorder(Recorder):
    directory: str

    def __init__(self, directory: str):
        super(FileRecorder, self).__init__()
        self.directory = directory

    @property
    def json_path(self) -> str:
        return os.path.join(self.directory, REPORT_JSON)

    @property
    def text_path(self) -> str:
        return os.path.join(self.directory, REPORT_TEXT)

    def read_report(self) -> Optional[Dict[str, Any]]:
        if not os.path.exists(self.json_path):
            return None
        with open(self.json_path, "r", encoding="utf-8") as f:
            return json.load(f)

    def write_report(self, report: Dict[str, Any], table: str) -> None:
        os.makedirs(self.directory, exist_ok=True)
        with open(self.json_path, "w", encoding="utf-8") as f:
            f.write(dumps(report))
        with open(self.text_path, "w", encoding="utf-8") as f:
            f.write(table)
