"""Download public benchmark CSVs into a local cache."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, Optional

import requests

LOGGER = logging.getLogger(__name__)

ETT_BASE_URL = "https://raw.githubusercontent.com/zhouhaoyi/ETDataset/main/ETT-small"
DATASET_URLS: Dict[str, str] = {
    name: f"{ETT_BASE_URL}/{name}.csv" for name in ("ETTh1", "ETTh2", "ETTm1", "ETTm2")
}
DEFAULT_CACHE_DIR = Path("assets/datasets")


class DatasetFetcher:
    """Fetches benchmark datasets over HTTP, keeping one file per dataset."""

    def __init__(
        self,
        cache_dir: Path | str = DEFAULT_CACHE_DIR,
        session: Optional[requests.Session] = None,
        urls: Optional[Dict[str, str]] = None,
        timeout: float = 60.0,
    ) -> None:
        self.cache_dir = Path(cache_dir)
        self.session = session or requests.Session()
        self.urls = dict(urls or DATASET_URLS)
        self.timeout = timeout

    def local_path(self, name: str) -> Path:
        """Return where ``name`` is (or would be) cached."""
        return self.cache_dir / f"{name}.csv"

    def fetch(self, name: str, force: bool = False) -> Path:
        """
        Make sure dataset ``name`` is available locally.

        Args:
            name: Dataset name with a known URL
            force: Download again even if the file exists

        Returns:
            Path of the cached CSV
        """
        destination = self.local_path(name)
        if destination.exists() and not force:
            LOGGER.debug("Using cached dataset %s", destination)
            return destination

        url = self.urls.get(name)
        if url is None:
            raise KeyError(f"No download URL known for dataset '{name}'; supply a local CSV path")

        destination.parent.mkdir(parents=True, exist_ok=True)
        partial = destination.with_suffix(".part")
        LOGGER.info("Downloading %s from %s", name, url)
        with self.session.get(url, stream=True, timeout=self.timeout) as response:
            response.raise_for_status()
            with open(partial, "wb") as handle:
                for chunk in response.iter_content(chunk_size=65536):
                    if chunk:
                        handle.write(chunk)
        partial.replace(destination)
        return destination
