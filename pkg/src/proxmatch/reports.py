"""Delimited output, JSON output, and run manifests."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .rngutil import RNG_ALGORITHM

CSV_FORMAT = "csv"
JSON_FORMAT = "json"
FORMATS = (CSV_FORMAT, JSON_FORMAT)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def fraction_json(value: Fraction) -> dict:
    """Exact rational as JSON-safe strings plus a float convenience."""
    f = Fraction(value)
    return {
        "numerator": str(f.numerator),
        "denominator": str(f.denominator),
        "decimal": float(f),
    }


@dataclass
class RunManifest:
    """Reproducibility record written next to every report file."""

    command: str
    config: dict
    seed: Optional[int]
    outputs: list[str]
    summary: dict = field(default_factory=dict)
    rng_algorithm: str = RNG_ALGORITHM
    package: str = "proxmatch"
    version: str = "0.1.0"
    started_at: str = ""
    elapsed_seconds: float = 0.0

    def write(self, out_path: Path) -> Path:
        """Store as <out stem>.manifest.json beside the report."""
        target = out_path.with_suffix(".manifest.json")
        write_json(target, asdict(self))
        return target


def manifest_path_for(out_path: Path) -> Path:
    return Path(out_path).with_suffix(".manifest.json")


def start_clock() -> tuple[str, float]:
    """Wall-clock label and monotonic start for manifest timing."""
    return time.strftime("%Y-%m-%dT%H:%M:%S%z"), time.monotonic()
