from functools import lru_cache
from pathlib import Path

from dotenv import load_dotenv
from joblib import cpu_count
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class Settings(BaseSettings):
    """Runtime defaults, overridable through ``PENALIZED_*`` environment variables or a ``.env`` file."""

    model_config = SettingsConfigDict(env_prefix="PENALIZED_", env_file=".env", extra="ignore")

    transport_cap: int = Field(4096, gt=1)
    enumeration_cap: int = Field(2**20, gt=1)
    block_size: int = Field(4096, gt=0)
    workers: int = Field(default_factory=cpu_count, gt=0)
    log_level: str = "INFO"
    output_dir: Path = Path("output")


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()
