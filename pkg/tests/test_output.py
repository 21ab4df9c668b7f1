"""Unit tests for the run artifact writer."""

import csv
import json
from fractions import Fraction

import numpy as np

from anderson_lab.experiments.output import TableWriter


class TestTableWriter:
    def test_creates_directory(self, tmp_path):
        writer = TableWriter(tmp_path / "a" / "b")
        assert writer.out_dir.is_dir()

    def test_write_table(self, tmp_path):
        writer = TableWriter(tmp_path)
        path = writer.write_table("t", ["x", "y"], [[1, 2.5], [3, 4.5]])
        with open(path) as f:
            rows = list(csv.reader(f))
        assert rows == [["x", "y"], ["1", "2.5"], ["3", "4.5"]]

    def test_table_is_replaced(self, tmp_path):
        writer = TableWriter(tmp_path)
        writer.write_table("t", ["x"], [[1], [2]])
        path = writer.write_table("t", ["x"], [[3]])
        assert path.read_text().splitlines() == ["x", "3"]

    def test_write_text_newline(self, tmp_path):
        path = TableWriter(tmp_path).write_text("notes.txt", "hello")
        assert path.read_text() == "hello\n"

    def test_summary_serializes_numeric_types(self, tmp_path):
        writer = TableWriter(tmp_path)
        path = writer.write_summary(
            {"b": np.float64(0.5), "a": np.int64(3), "z": 1 + 2j, "c": Fraction(-6, 5), "arr": np.arange(2)}
        )
        data = json.loads(path.read_text())
        assert data == {"a": 3, "arr": [0, 1], "b": 0.5, "c": "-6/5", "z": [1.0, 2.0]}
        assert list(data) == sorted(data)
        assert writer.written == [path]
