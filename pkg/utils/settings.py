"""Process-wide runtime settings read from the environment."""
import logging
import os

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class RuntimeSettings(BaseSettings):
    """Settings shared by the library and the command line.

    Values are read from ``FQ_*`` environment variables.
    """

    model_config = SettingsConfigDict(env_prefix="FQ_")

    threads: int = Field(
        default=0,
        ge=0,
        title="Worker threads",
        description="Upper bound on worker threads for per-point computations. 0 uses every available CPU.",
    )

    log_level: str = Field(
        default="INFO",
        title="Log level",
        description="Name of the logging level used by the command line.",
    )

    def worker_count(self) -> int:
        """Resolve ``threads`` to a concrete positive worker count."""
        if self.threads > 0:
            return self.threads
        return os.cpu_count() or 1

    def configure_logging(self) -> None:
        level = logging.getLevelName(self.log_level.upper())
        if not isinstance(level, int):
            level = logging.INFO
        logging.basicConfig(
            level=level,
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )
