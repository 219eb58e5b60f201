"""Deterministic report emission: CSV records, JSON summaries, and
gnuplot-style scatter data.

Every file embeds the full run configuration and the toolkit version,
and contains nothing volatile (no timestamps, no environment state):
re-running a command with the same seed and configuration reproduces
each output byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__


@dataclass(frozen=True)
class RunConfig:
    """Fully serialized parameters of one command invocation."""

    command: str
    seed: int | None = None
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "toolkit": "adamul",
            "version": __version__,
            "command": self.command,
            "seed": self.seed,
            "params": self.params,
        }


RECORD_COLUMNS = ("run_id", "site", "cycle", "detected", "sdc_class",
                  "golden_top1", "faulty_top1")


def render_records_csv(config: RunConfig, rows) -> str:
    """CSV text with the run configuration in leading comment lines."""
    buf = io.StringIO()
    buf.write(f"# config: {json.dumps(config.to_dict(), sort_keys=True)}\n")
    writer = csv.DictWriter(buf, fieldnames=RECORD_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def write_records_csv(path, config: RunConfig, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_records_csv(config, rows))
    return path


def write_table_csv(path, config: RunConfig, fieldnames, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write(f"# config: {json.dumps(config.to_dict(), sort_keys=True)}\n")
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    path.write_text(buf.getvalue())
    return path


def write_summary_json(path, config: RunConfig, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"config": config.to_dict(), **payload}
    path.write_text(json.dumps(document, indent=1, sort_keys=True) + "\n")
    return path


def write_scatter_dat(path, config: RunConfig, columns, points, notes=()) -> Path:
    """Whitespace-separated scatter data with '#' comment header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# config: {json.dumps(config.to_dict(), sort_keys=True)}"]
    for note in notes:
        lines.append(f"# {note}")
    lines.append("# columns: " + " ".join(columns))
    for point in points:
        lines.append(" ".join(str(v) for v in point))
    path.write_text("\n".join(lines) + "\n")
    return path
