import os
from typing import Optional

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

_warned = set()


def _warn_once(key: str, message: str):
    if key not in _warned:
        _warned.add(key)
        print(f"WARNING: {message}")


def data_dir() -> Optional[str]:
    """Default dataset root (BMVR_DATA_DIR), None when unset."""
    value = os.getenv("BMVR_DATA_DIR")
    if not value:
        _warn_once("BMVR_DATA_DIR", "BMVR_DATA_DIR not set. Dataset paths must be passed explicitly.")
        return None
    return value


def max_workers(repeats: int) -> int:
    """Worker threads used for independent repeats."""
    value = os.getenv("BMVR_MAX_WORKERS")
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            _warn_once("BMVR_MAX_WORKERS", f"BMVR_MAX_WORKERS='{value}' is not an integer, using default")
    return max(1, min(repeats, os.cpu_count() or 1))


def verbose() -> bool:
    return os.getenv("BMVR_VERBOSE", "").strip().lower() in ("1", "true", "yes")


def server_port() -> int:
    try:
        return int(os.getenv("BMVR_PORT", "8080"))
    except ValueError:
        _warn_once("BMVR_PORT", "BMVR_PORT is not an integer, using 8080")
        return 8080


def debug(message: str):
    if verbose():
        print(f"[DEBUG] {message}")
