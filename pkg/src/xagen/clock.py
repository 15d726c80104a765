"""Small time helpers: UTC-millisecond timestamps and their wire format."""

from __future__ import annotations

from datetime import datetime, timezone


def utc_now_ms() -> datetime:
    """Current UTC time, truncated to millisecond precision."""
    now = datetime.now(timezone.utc)
    return now.replace(microsecond=(now.microsecond // 1000) * 1000)


def format_iso_ms(dt: datetime) -> str:
    """Render as `YYYY-MM-DDTHH:MM:SS.mmmZ` (always UTC)."""
    dt = dt.astimezone(timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"


def parse_iso_ms(text: str) -> datetime:
    """Inverse of :func:`format_iso_ms`."""
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%S.%fZ").replace(tzinfo=timezone.utc)


def format_compact_ms(dt: datetime) -> str:
    """Render as `YYYYMMDDTHHMMSS.mmmZ`, safe for file names."""
    dt = dt.astimezone(timezone.utc)
    return dt.strftime("%Y%m%dT%H%M%S.") + f"{dt.microsecond // 1000:03d}Z"


def parse_compact_ms(text: str) -> datetime:
    """Inverse of :func:`format_compact_ms`."""
    return datetime.strptime(text, "%Y%m%dT%H%M%S.%fZ").replace(tzinfo=timezone.utc)
