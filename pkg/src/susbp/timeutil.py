"""RFC 3339 timestamp handling at millisecond precision.

All timestamps in the package are integer epoch milliseconds (UTC).
Python 3.10's fromisoformat() rejects the 'Z' suffix, so normalize it here.
"""

from __future__ import annotations

from datetime import datetime, timezone

from .errors import DomainError


class TimestampParseError(DomainError):
    def __init__(self, text: str, line: int | None = None):
        self.line = line
        at = f" (line {line})" if line is not None else ""
        super().__init__(f"cannot parse timestamp {text!r}{at}")


def parse_rfc3339_ms(text: str, line: int | None = None) -> int:
    """Parse an RFC 3339 / ISO 8601 timestamp to epoch milliseconds (UTC)."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise TimestampParseError(text, line) from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return round(dt.timestamp() * 1000)


def format_rfc3339_ms(epoch_ms: int) -> str:
    """Render epoch milliseconds as an RFC 3339 UTC timestamp with ms digits."""
    seconds, ms = divmod(epoch_ms, 1000)
    dt = datetime.fromtimestamp(seconds, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{ms:03d}+00:00"
