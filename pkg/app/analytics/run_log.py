# app/analytics/run_log.py
from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path
from typing import Any, Dict, Optional

from app.core.config import settings


def log_path() -> Path:
    return Path(settings.log_path)


def log_event(event: Dict[str, Any], path: Optional[Path] = None) -> None:
    """
    Append JSONL log. Never throw.
    """
    try:
        target = path or log_path()
        target.parent.mkdir(parents=True, exist_ok=True)
        event.setdefault("ts", int(time.time()))
        with target.open("a", encoding="utf-8") as f:
            f.write(json.dumps(event, ensure_ascii=False, default=str) + "\n")
    except Exception:
        return


def config_hash(payload: str) -> str:
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
