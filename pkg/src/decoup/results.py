"""Result directories keyed by a digest of the canonical run configuration."""

from __future__ import annotations

import csv
import hashlib
import json
import os
from pathlib import Path
from typing import Iterable

from .harness import GrowthFit, RatioRecord, cell_key

ENV_VAR = "DECOUP_RESULTS_DIR"


def results_root(override: str | os.PathLike | None = None) -> Path:
    if override is not None:
        return Path(override)
    return Path(os.environ.get(ENV_VAR, "results"))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]


class RunDirectory:
    """``<root>/<hash>/`` holding config.json, records.jsonl and summaries."""

    def __init__(self, root: Path, config: dict):
        self.config = config
        self.hash = config_hash(config)
        self.path = Path(root) / self.hash

    @classmethod
    def at(cls, path: str | os.PathLike) -> RunDirectory:
        """An existing run directory, with its stored config."""
        path = Path(path)
        config = json.loads((path / "config.json").read_text()) if (path / "config.json").exists() else {}
        run = cls(path.parent, config)
        run.path = path
        return run

    def prepare(self) -> RunDirectory:
        self.path.mkdir(parents=True, exist_ok=True)
        (self.path / "config.json").write_text(canonical_json(self.config) + "\n")
        return self

    @property
    def records_file(self) -> Path:
        return self.path / "records.jsonl"

    def load_records(self) -> list[RatioRecord]:
        if not self.records_file.exists():
            return []
        with self.records_file.open() as fh:
            return [RatioRecord.from_json(json.loads(line)) for line in fh if line.strip()]

    def completed(self) -> dict:
        return {cell_key(r.p, r.ensemble, r.R, r.seed): r for r in self.load_records()}

    def append_record(self, rec: RatioRecord) -> None:
        with self.records_file.open("a") as fh:
            fh.write(canonical_json(rec.to_json()) + "\n")

    def write_records(self, records: Iterable[RatioRecord]) -> None:
        tmp = self.records_file.with_suffix(".tmp")
        with tmp.open("w") as fh:
            for rec in records:
                fh.write(canonical_json(rec.to_json()) + "\n")
        tmp.replace(self.records_file)

    def write_summary(self, records: list[RatioRecord], fits: list[GrowthFit],
                      failures: list[str]) -> None:
        write_summary_csv(self.path / "summary.csv", records)
        summary = {"config_hash": self.hash, "fits": [f.to_json() for f in fits],
                   "failures": failures, "n_records": len(records)}
        (self.path / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


SUMMARY_FIELDS = ("R", "p", "d", "m", "family", "ensemble", "seed", "lhs", "rhs", "ratio",
                  "ratio_stderr", "rhs_weight", "status")


def write_summary_csv(path: Path, records: Iterable[RatioRecord]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_FIELDS)
        for r in records:
            row = r.to_json()
            writer.writerow([row[k] for k in SUMMARY_FIELDS])
