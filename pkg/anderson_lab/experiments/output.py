"""CSV tables, text transcripts and the JSON run summary."""

import csv
import json
import logging
import os
from fractions import Fraction
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, Fraction):
        return str(obj)
    return str(obj)


class TableWriter:
    """Writes every artifact of one run into a single directory."""

    def __init__(self, out_dir: str | Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def _ensure_csv(self, path: Path, header: list):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)

    def _append_csv(self, path: Path, rows: list[list]):
        try:
            with open(path, "a", newline="") as f:
                writer = csv.writer(f)
                writer.writerows(rows)
                f.flush()
                os.fsync(f.fileno())
        except OSError as e:
            logger.error("Failed to write CSV %s: %s", path, e)
            raise

    def write_table(self, name: str, header: list, rows: list[list]) -> Path:
        """Replace ``name.csv`` with a header row and ``rows``."""
        path = self.out_dir / f"{name}.csv"
        self._ensure_csv(path, header)
        self._append_csv(path, rows)
        self.written.append(path)
        logger.info("Wrote %d rows to %s", len(rows), path)
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        path.write_text(text if text.endswith("\n") else text + "\n")
        self.written.append(path)
        return path

    def write_summary(self, summary: dict, name: str = "summary.json") -> Path:
        """JSON with stable key order."""
        path = self.out_dir / name
        path.write_text(json.dumps(summary, sort_keys=True, indent=2, default=_json_default) + "\n")
        self.written.append(path)
        logger.info("Wrote run summary to %s", path)
        return path
