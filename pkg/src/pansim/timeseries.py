"""CSV time-series ingestion, standing in for live repository feeds.

Series are daily, strictly increasing in date, and carry explicit gap
markers where the source file skipped days.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

log = logging.getLogger(__name__)


class TimeSeriesError(ValueError):
    pass


@dataclass
class TimeSeries:
    dates: list[date] = field(default_factory=list)
    columns: dict[str, list[float | None]] = field(default_factory=dict)
    gaps: list[bool] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.dates)

    def column(self, name: str) -> list[float | None]:
        return self.columns[name]

    def observed(self, name: str) -> list[float]:
        """Column values on non-gap rows only."""
        return [v for v, g in zip(self.columns[name], self.gaps) if not g]

    def to_dict(self) -> dict:
        return {
            "dates": [d.isoformat() for d in self.dates],
            "columns": self.columns,
            "gaps": self.gaps,
        }


def parse_column_map(spec: str) -> dict[str, str]:
    """Parse ``canonical=CsvHeader`` pairs, e.g. ``date=Date,infected=Cases``."""
    mapping: dict[str, str] = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise TimeSeriesError(f"bad column map entry {part!r} (want name=Header)")
        canonical, header = part.split("=", 1)
        mapping[canonical.strip()] = header.strip()
    if "date" not in mapping:
        raise TimeSeriesError("column map must include a 'date' entry")
    if len(mapping) < 2:
        raise TimeSeriesError("column map needs at least one numeric column")
    return mapping


def load_timeseries_csv(path: str | Path, column_map: dict[str, str]) -> TimeSeries:
    """Load a dated CSV into a gap-marked daily series.

    Rows that fail to parse are rejected together, naming their line
    numbers; dates must be strictly increasing. Missing days between the
    first and last date become gap rows with None values.
    """
    if "date" not in column_map:
        raise TimeSeriesError("column map must include a 'date' entry")
    numeric = [name for name in column_map if name != "date"]
    if not numeric:
        raise TimeSeriesError("column map needs at least one numeric column")

    p = Path(path)
    if not p.exists():
        raise TimeSeriesError(f"time-series file not found: {p}")

    with open(p, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            log.warning("time-series file %s is empty", p)
            return TimeSeries(columns={name: [] for name in numeric})
        missing = [column_map[name] for name in column_map
                   if column_map[name] not in reader.fieldnames]
        if missing:
            raise TimeSeriesError(f"missing column(s) {missing} in {p}")

        rows: list[tuple[date, dict[str, float]]] = []
        bad_lines: list[int] = []
        for line_no, row in enumerate(reader, start=2):
            try:
                d = date.fromisoformat(row[column_map["date"]].strip())
                values = {name: float(row[column_map[name]]) for name in numeric}
            except (ValueError, AttributeError, TypeError):
                bad_lines.append(line_no)
                continue
            rows.append((d, values))
        if bad_lines:
            raise TimeSeriesError(
                f"unparseable row(s) at line(s) {bad_lines} in {p}")

    if not rows:
        log.warning("time-series file %s has no data rows", p)
        return TimeSeries(columns={name: [] for name in numeric})

    for (d1, _), (d2, _) in zip(rows, rows[1:]):
        if d2 <= d1:
            raise TimeSeriesError(
                f"dates must be strictly increasing; {d2} follows {d1}")

    series = TimeSeries(columns={name: [] for name in numeric})
    by_date = dict(rows)
    day = rows[0][0]
    last = rows[-1][0]
    while day <= last:
        series.dates.append(day)
        observed = by_date.get(day)
        series.gaps.append(observed is None)
        for name in numeric:
            series.columns[name].append(None if observed is None else observed[name])
        day += timedelta(days=1)
    return series


def export_timeseries_csv(series: TimeSeries, path: str | Path,
                          column_map: dict[str, str] | None = None) -> int:
    """Write the observed (non-gap) rows back to CSV; returns row count.

    Loading the exported file with the same column map reproduces the
    series, gaps included, since gaps are re-derived from missing dates.
    """
    names = list(series.columns)
    headers = {name: name for name in names}
    date_header = "date"
    if column_map:
        date_header = column_map.get("date", "date")
        headers = {name: column_map.get(name, name) for name in names}
    written = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([date_header] + [headers[n] for n in names])
        for i, d in enumerate(series.dates):
            if series.gaps[i]:
                continue
            writer.writerow([d.isoformat()] + [repr(series.columns[n][i]) for n in names])
            written += 1
    return written
