"""Check reports: one structured record per empirical verification."""

from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

__all__ = ["CheckReport", "timed_report"]


@dataclass
class CheckReport:
    """Outcome of one check.

    ``statistic`` is compared against ``threshold`` (pass iff
    statistic <= threshold); ``budget`` itemizes the error terms the
    threshold is built from. Reports are deterministic for a fixed seed
    and configuration, except for ``runtime``.
    """

    name: str
    inputs: dict
    statistic: float
    threshold: float
    passed: bool
    budget: dict = field(default_factory=dict)
    seed: int = 0
    runtime: float = 0.0
    notes: list = field(default_factory=list)
    reference: str = ""

    def to_json(self) -> str:
        def default(o):
            import numpy as np

            if isinstance(o, (np.floating, np.integer)):
                return o.item()
            if isinstance(o, np.ndarray):
                return o.tolist()
            raise TypeError(f"not JSON-serializable: {type(o)}")

        return json.dumps(
            {
                "name": self.name,
                "inputs": self.inputs,
                "statistic": self.statistic,
                "threshold": self.threshold,
                "passed": self.passed,
                "budget": self.budget,
                "seed": self.seed,
                "runtime": self.runtime,
                "notes": self.notes,
                "reference": self.reference,
            },
            default=default,
        )


@contextmanager
def timed_report():
    start = time.perf_counter()
    box = {}
    try:
        yield box
    finally:
        box["runtime"] = time.perf_counter() - start
