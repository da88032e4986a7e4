from datetime import datetime, timezone
from functools import lru_cache


@lru_cache(maxsize=8192)
def parse_utc(text: str) -> datetime:
    """Parse ``YYYY-MM-DDTHH:MM:SSZ``."""
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


def format_utc(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def compact_utc(ts: datetime) -> str:
    """File-name form, ``YYYYMMDDTHHMMSSZ``."""
    return ts.astimezone(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def parse_compact_utc(text: str) -> datetime:
    return datetime.strptime(text, "%Y%m%dT%H%M%SZ").replace(tzinfo=timezone.utc)
