"""Metrics rows and their CSV file.

Column order (``wall_clock`` only when enabled, since it breaks run-to-run
byte equality)::

    env_step, episodes_completed, deliveries_per_episode,
    window_deliveries_per_episode, actor_loss, critic_loss, pred_loss,
    enc_loss[, wall_clock]

``deliveries_per_episode`` is the cumulative average since the start of the
run; the ``window_`` column covers only the episodes finished since the
previous row. Loss columns are means over the updates since the previous
row (``nan`` when the scheme has no such loss).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

COLUMNS = [
    "env_step",
    "episodes_completed",
    "deliveries_per_episode",
    "window_deliveries_per_episode",
    "actor_loss",
    "critic_loss",
    "pred_loss",
    "enc_loss",
]


@dataclass
class MetricsRecord:
    env_step: int
    episodes_completed: int
    deliveries_per_episode: float
    window_deliveries_per_episode: float
    actor_loss: float
    critic_loss: float
    pred_loss: float
    enc_loss: float
    wall_clock: float = 0.0

    def row(self, with_wall_clock: bool) -> list[str]:
        values = [self.env_step, self.episodes_completed] + [
            getattr(self, c) for c in COLUMNS[2:]
        ]
        out = [str(v) if isinstance(v, int) else repr(float(v)) for v in values]
        if with_wall_clock:
            out.append(f"{self.wall_clock:.3f}")
        return out


class MetricsWriter:
    """Append-only CSV writer; every row is flushed as it is written."""

    def __init__(self, path, with_wall_clock: bool = False):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.with_wall_clock = with_wall_clock
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(COLUMNS + (["wall_clock"] if with_wall_clock else []))
        self._fh.flush()

    def write(self, record: MetricsRecord) -> None:
        self._writer.writerow(record.row(self.with_wall_clock))
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path) -> dict[str, list[float]]:
    """Read a metrics CSV into columns; raises ValueError on empty or malformed files."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty metrics file")
    header, body = rows[0], rows[1:]
    missing = [c for c in ("env_step", "deliveries_per_episode") if c not in header]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    if not body:
        raise ValueError(f"{path}: no data rows")
    cols: dict[str, list[float]] = {name: [] for name in header}
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        for name, value in zip(header, row):
            try:
                cols[name].append(float(value))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric {name}={value!r}") from None
    return cols
