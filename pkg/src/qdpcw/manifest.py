"""Provenance record written next to every CLI output."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def config_digest(config) -> str:
    """Digest of a JSON-serialisable configuration, independent of key order."""
    text = json.dumps(config, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return "sha256:" + hashlib.sha256(text.encode()).hexdigest()


def now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    config_hash: str
    rng_seed: int | None
    tool_version: str = __version__
    started: str = field(default_factory=now)
    finished: str | None = None
    input_files: list = field(default_factory=list)
    output_files: list = field(default_factory=list)

    def add_input(self, path) -> None:
        self.input_files.append({"path": str(path), "digest": file_digest(path)})

    def add_output(self, path) -> None:
        self.output_files.append({"path": str(path), "digest": file_digest(path)})

    def finish(self) -> None:
        self.finished = now()

    def to_dict(self) -> dict:
        return {"kind": "manifest", "command": self.command, "config_hash": self.config_hash,
                "rng_seed": self.rng_seed, "tool_version": self.tool_version,
                "started": self.started, "finished": self.finished,
                "input_files": list(self.input_files), "output_files": list(self.output_files)}

    @classmethod
    def from_dict(cls, doc: dict) -> "RunManifest":
        doc = {k: v for k, v in doc.items() if k != "kind"}
        return cls(**doc)

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path
