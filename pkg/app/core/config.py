from __future__ import annotations
import os
from dataclasses import dataclass
from dotenv import load_dotenv

load_dotenv()


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        raise RuntimeError(f"{name} must be an integer, got {raw!r}")


@dataclass(frozen=True)
class Settings:
    # 0 -> os.cpu_count(), 1 -> run seeds inline
    workers: int = _env_int("COLME_WORKERS", 0)
    log_path: str = os.getenv("COLME_LOG_PATH", "logs/run_log.jsonl").strip()
    output_dir: str = os.getenv("COLME_OUTPUT_DIR", "out").strip()
    # 0 -> unlimited release history per peer statistic
    history_cap: int = _env_int("COLME_HISTORY_CAP", 0)
    api_key: str = os.getenv("API_KEY", "dev-key-123").strip()
    api_max_work: int = _env_int("COLME_API_MAX_WORK", 2_000_000)

    def validate(self) -> None:
        if self.workers < 0:
            raise RuntimeError("COLME_WORKERS must be >= 0")
        if self.history_cap < 0:
            raise RuntimeError("COLME_HISTORY_CAP must be >= 0")
        if not self.log_path:
            raise RuntimeError("COLME_LOG_PATH must not be empty")
        if self.api_max_work <= 0:
            raise RuntimeError("COLME_API_MAX_WORK must be positive")

    def pool_size(self) -> int:
        if self.workers == 0:
            return os.cpu_count() or 1
        return self.workers


settings = Settings()
settings.validate()
