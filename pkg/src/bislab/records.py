"""Run records: one experiment's config echo, seed, and metric history.

The JSON form is deterministic (sorted keys, no timing fields) so that two
runs with identical (config, data seed, train seed) produce byte-identical
documents. Wall-clock time is kept on the object and lands only in CSV.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .metrics import MetricsReport

STAGES = ("joint", "finetune", "bis")


@dataclass
class RunRecord:
    run_id: str
    stage: str
    seed: int
    config: dict
    history: list
    final: MetricsReport
    wall_seconds: float = 0.0

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "stage": self.stage,
            "seed": self.seed,
            "config": self.config,
            "history": [rep.to_dict() for rep in self.history],
            "final": self.final.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(
            run_id=d["run_id"],
            stage=d["stage"],
            seed=int(d["seed"]),
            config=d["config"],
            history=[MetricsReport.from_dict(h) for h in d["history"]],
            final=MetricsReport.from_dict(d["final"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "RunRecord":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())
