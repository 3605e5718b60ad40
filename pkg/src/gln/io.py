"""Run artifacts: metrics streams, checkpoints and columnar plot data.

Metrics are written twice, as ``metrics.csv`` and ``metrics.jsonl``, one row
per block of examples:

    index      first example index in the block (0-based, over the whole stream)
    split      "train" or "test"
    count      examples in the block
    loss_nats  mean log loss per example over the block, in nats
    accuracy   mean 0/1 correctness over the block (empty when not defined)

Both files depend only on the config and seed. Wall-clock time goes to
``timing.csv`` (index, split, wall_time_s) so the metrics files can be
compared byte for byte between runs.

Checkpoints are ``.npz`` archives. The entry ``__header__`` holds a JSON
document with the format tag and version, the library version and the run
config; every other entry is a named array.
"""

import csv
import json
import math
import time
from pathlib import Path

import numpy as np

from . import __version__

CHECKPOINT_FORMAT = "gln-checkpoint"
CHECKPOINT_VERSION = 1
METRIC_FIELDS = ("index", "split", "count", "loss_nats", "accuracy")


def _fmt(v):
    # repr round-trips floats exactly and is stable across runs
    return "" if v is None else (repr(v) if isinstance(v, float) else str(v))


class MetricsWriter:
    """Accumulates per-example records into fixed-size blocks."""

    def __init__(self, out_dir, block=1000, clock=time.perf_counter):
        if block < 1:
            raise ValueError("block size must be positive")
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.block = int(block)
        self._clock = clock
        self._start = clock()
        self._csv_file = open(self.out_dir / "metrics.csv", "w", newline="")
        self._jsonl = open(self.out_dir / "metrics.jsonl", "w")
        self._timing = open(self.out_dir / "timing.csv", "w", newline="")
        self._csv = csv.writer(self._csv_file, lineterminator="\n")
        self._csv.writerow(METRIC_FIELDS)
        self._timing_csv = csv.writer(self._timing, lineterminator="\n")
        self._timing_csv.writerow(("index", "split", "wall_time_s"))
        self._pending = None
        self.rows = 0
        self.examples = 0

    def record(self, index, split, loss_nats, correct=None, **_):
        p = self._pending
        if p is not None and (p["split"] != split or p["count"] >= self.block):
            self._flush()
            p = None
        if p is None:
            p = self._pending = {"index": int(index), "split": split, "count": 0, "loss": 0.0, "correct": 0,
                                 "has_acc": correct is not None}
        p["count"] += 1
        p["loss"] += float(loss_nats)
        if correct is not None:
            p["correct"] += int(correct)
        self.examples += 1

    def _flush(self):
        p = self._pending
        if p is None:
            return
        acc = p["correct"] / p["count"] if p["has_acc"] else None
        row = {"index": p["index"], "split": p["split"], "count": p["count"],
               "loss_nats": p["loss"] / p["count"], "accuracy": acc}
        self._csv.writerow([_fmt(row[k]) for k in METRIC_FIELDS])
        self._jsonl.write(json.dumps(row) + "\n")
        self._timing_csv.writerow((p["index"], p["split"], f"{self._clock() - self._start:.6f}"))
        self._pending = None
        self.rows += 1

    def close(self):
        self._flush()
        for f in (self._csv_file, self._jsonl, self._timing):
            f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path):
    """Rows of a ``metrics.jsonl`` file."""
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


def save_checkpoint(path, arrays, config=None):
    header = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, "library_version": __version__,
              "config": config or {}, "arrays": sorted(arrays)}
    payload = {k: np.asarray(v) for k, v in arrays.items()}
    if "__header__" in payload:
        raise ValueError("'__header__' is a reserved checkpoint key")
    payload["__header__"] = np.array(json.dumps(header, sort_keys=True))
    with open(path, "wb") as f:
        np.savez(f, **payload)


def load_checkpoint(path):
    """Returns ``(header, arrays)``; raises ValueError on a foreign or newer file."""
    with np.load(path, allow_pickle=False) as data:
        if "__header__" not in data.files:
            raise ValueError(f"{path}: not a checkpoint (no header)")
        header = json.loads(str(data["__header__"]))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: unknown checkpoint format {header.get('format')!r}")
        if header.get("version", 0) > CHECKPOINT_VERSION:
            raise ValueError(f"{path}: checkpoint version {header['version']} is newer than supported")
        arrays = {k: data[k] for k in data.files if k != "__header__"}
    return header, arrays


def write_columns(path, columns):
    """CSV with a header row, one column per key; for external plotting."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=np.float64) for k in names])
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(names)
        for row in data:
            w.writerow(["nan" if math.isnan(v) else repr(float(v)) for v in row])


def read_columns(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    names = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(names))
    return {k: data[:, i] for i, k in enumerate(names)}
