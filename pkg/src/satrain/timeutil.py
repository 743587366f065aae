"""UTC timestamp helpers. Internally time is integer seconds since the Unix epoch."""

from __future__ import annotations

from datetime import datetime, timezone

SAMPLE_PERIOD_S = 60


def parse_timestamp(text: str) -> int:
    """ISO-8601 UTC text to epoch seconds. Naive stamps are read as UTC."""
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(round(dt.timestamp()))


def format_timestamp(t_s: int) -> str:
    return datetime.fromtimestamp(int(t_s), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def to_sample_index(t_s: int) -> int:
    return int(t_s) // SAMPLE_PERIOD_S


def from_sample_index(k: int) -> int:
    return int(k) * SAMPLE_PERIOD_S
