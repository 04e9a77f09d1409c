"""
Reproducibility envelope written next to every emitted artifact.
"""

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from . import __version__
from .utils import PathLike, file_digest, text_digest, write_json

MANIFEST_SUFFIX = ".manifest.json"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class RunManifest(BaseModel):
    """Config snapshot, seeds and input digests of one command invocation."""

    command: str
    config_path: Optional[str] = None
    config: Dict[str, Any] = Field(default_factory=dict)
    tool_version: str = Field(default=__version__)
    seeds: Dict[str, int] = Field(default_factory=dict)
    inputs: Dict[str, str] = Field(default_factory=dict)
    outputs: List[str] = Field(default_factory=list)
    started_at: str = Field(default_factory=_now)
    finished_at: Optional[str] = None

    @property
    def manifest_id(self) -> str:
        """Content hash over everything except timestamps and outputs."""
        content = self.model_dump(mode="json", exclude={"started_at", "finished_at", "outputs"})
        return text_digest(json.dumps(content, sort_keys=True))

    def add_input(self, path: PathLike) -> str:
        digest = file_digest(path)
        self.inputs[str(path)] = digest
        return digest

    def finish(self) -> "RunManifest":
        self.finished_at = _now()
        return self


def manifest_path_for(artifact: PathLike) -> Path:
    artifact = Path(artifact)
    return artifact.with_name(artifact.name + MANIFEST_SUFFIX)


def write_manifest(manifest: RunManifest, artifact: PathLike) -> Path:
    """Write `<artifact>.manifest.json` and record the artifact in outputs."""
    if str(artifact) not in manifest.outputs:
        manifest.outputs.append(str(artifact))
    payload = manifest.model_dump(mode="json")
    payload["manifest_id"] = manifest.manifest_id
    return write_json(manifest_path_for(artifact), payload)


def load_manifest(path: PathLike) -> RunManifest:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    data.pop("manifest_id", None)
    return RunManifest.model_validate(data)
