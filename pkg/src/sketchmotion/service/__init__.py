"""HTTP service exposing the pipeline over a small JSON API."""

from .app import ENV_DATA_DIR, create_app
from .store import Store

__all__ = ["ENV_DATA_DIR", "Store", "create_app"]
