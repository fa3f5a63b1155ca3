import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List, Union

import structlog
from pydantic import BaseModel
from tenacity import retry, stop_after_attempt, wait_fixed

from src.errors import ConfigError

logger = structlog.get_logger(__name__)

METRICS_FILE = "metrics.jsonl"
CONFIG_FILE = "config.env"


def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def stable_json(payload: Any) -> str:
    """JSON with sorted keys so identical content hashes identically."""
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False, default=str) + "\n"


@retry(stop=stop_after_attempt(3), wait=wait_fixed(0.2), reraise=True)
def _write_text(path: Path, text: str, mode: str = "w") -> None:
    with open(path, mode, encoding="utf-8") as f:
        f.write(text)


class ArtifactSaver:
    """Writes manifests, metrics and the effective config into one artifact directory.

    Existing files are only replaced when ``force`` is set.
    """

    def __init__(self, base_dir: Union[str, Path], force: bool = False):
        self.base_dir = Path(base_dir)
        self.force = force
        self.base_dir.mkdir(parents=True, exist_ok=True)
        logger.debug(f"Artifact saver initialized at {self.base_dir}")

    def path(self, name: str) -> Path:
        return self.base_dir / name

    def claim(self, *names: str) -> List[Path]:
        """Check that every named output may be written; raises ConfigError before any work starts."""
        paths = [self.path(n) for n in names]
        existing = [str(p) for p in paths if p.exists()]
        if existing and not self.force:
            raise ConfigError(f"Refusing to overwrite {', '.join(existing)}; pass --force to replace")
        return paths

    def save_json(self, name: str, payload: Any) -> Path:
        path = self.path(name)
        _write_text(path, stable_json(payload))
        logger.info(f"Saved {path}")
        return path

    def load_json(self, name: str) -> Dict[str, Any]:
        with open(self.path(name), encoding="utf-8") as f:
            return json.load(f)

    def save_text(self, name: str, text: str) -> Path:
        path = self.path(name)
        _write_text(path, text)
        return path

    def save_config(self, config_text: str) -> Path:
        return self.save_text(CONFIG_FILE, config_text)

    def reset_metrics(self, keep_epochs: int = 0) -> Path:
        """Truncate the metrics file to its first ``keep_epochs`` lines (resume) or empty it."""
        path = self.path(METRICS_FILE)
        kept: List[str] = []
        if keep_epochs and path.exists():
            kept = path.read_text(encoding="utf-8").splitlines()[:keep_epochs]
        _write_text(path, "".join(line + "\n" for line in kept))
        return path

    def append_metrics(self, metrics: Union[BaseModel, Dict[str, Any]]) -> None:
        if isinstance(metrics, BaseModel):
            metrics = metrics.model_dump(mode="json")
        _write_text(self.path(METRICS_FILE), json.dumps(metrics, sort_keys=True) + "\n", mode="a")

    def read_metrics(self) -> List[Dict[str, Any]]:
        path = self.path(METRICS_FILE)
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
