"""
Results Store Module
Writes experiment outputs (episode CSVs, summaries, verdicts, traces) into one
directory per experiment. Every file is written atomically and carries no
timestamps, so identical runs give byte-identical files.
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import csv
import io
import json
from enum import Enum
from typing import Dict, Iterable, List, Sequence

import numpy as np

from config import Config

RECORD_COLUMNS = ("seed", "episode", "reward_p0", "reward_p1", "phase", "mask_active")
TRACE_COLUMNS = ("window_start", "window_end", "mean", "ci_low", "ci_high", "n_seeds")


class NumpyEncoder(json.JSONEncoder):
    def default(self, obj):
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.bool_):
            return bool(obj)
        if isinstance(obj, Enum):
            return obj.value
        if isinstance(obj, (set, frozenset, tuple)):
            return list(obj)
        return super().default(obj)


def _cell(value) -> str:
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ResultsStore:
    """Output directory of one experiment: <out>/<experiment id>/."""

    def __init__(self, experiment_id: str, out_dir: str = None):
        self.root = os.path.join(out_dir or Config.OUTPUT_DIR, experiment_id)
        self.written: List[str] = []

    def path(self, name: str) -> str:
        return os.path.join(self.root, name)

    def _write_atomic(self, name: str, text: str) -> str:
        os.makedirs(self.root, exist_ok=True)
        target = self.path(name)
        tmp = target + ".tmp"
        with open(tmp, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, target)
        self.written.append(target)
        return target

    # ==================== CSV ====================

    def write_rows(self, name: str, columns: Sequence[str], rows: Iterable[Sequence]) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
        return self._write_atomic(name, buffer.getvalue())

    def write_records(self, condition: str, records: Iterable, fmt: str = Config.DEFAULT_FORMAT) -> str:
        """Episode log with fixed columns seed,episode,reward_p0,reward_p1,phase,mask_active."""
        rows = ((r.seed, r.episode, float(r.reward_p0), float(r.reward_p1), r.phase, r.mask_active) for r in records)
        if fmt == "json":
            return self.write_json(f"records_{condition}.json", {
                "columns": list(RECORD_COLUMNS),
                "rows": [list(row) for row in rows],
            })
        return self.write_rows(f"records_{condition}.csv", RECORD_COLUMNS, rows)

    def write_trace(self, metric: str, rows: Iterable[Sequence]) -> str:
        return self.write_rows(f"trace_{metric}.csv", TRACE_COLUMNS, rows)

    # ==================== JSON / Text ====================

    def write_json(self, name: str, payload: Dict) -> str:
        text = json.dumps(payload, indent=2, sort_keys=True, cls=NumpyEncoder) + "\n"
        return self._write_atomic(name, text)

    def write_text(self, name: str, text: str) -> str:
        return self._write_atomic(name, text if text.endswith("\n") else text + "\n")

    def read_json(self, name: str) -> Dict:
        with open(self.path(name), encoding="utf-8") as f:
            return json.load(f)
