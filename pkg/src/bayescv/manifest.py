"""Run manifests: a key=value provenance record next to every output.

Each command writes one manifest capturing the sub-command, all effective
parameter values, SHA-256 digests of the input files, the seed, the
toolkit version, and a UTC timestamp. Data outputs carry a reference back
to the manifest path (a comment line, a JSON key, or a metadata entry,
depending on the format), and every command prints the manifest path to
standard output.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__

__all__ = ["RunManifest", "file_digest", "write_manifest", "read_manifest"]


@dataclass(frozen=True)
class RunManifest:
    command: str
    seed: int | None
    params: dict[str, str] = field(default_factory=dict)
    inputs: dict[str, str] = field(default_factory=dict)
    version: str = __version__
    created_utc: str = ""

    @classmethod
    def collect(
        cls,
        command: str,
        seed: int | None,
        params: dict[str, object],
        input_paths: list[str | Path],
    ) -> "RunManifest":
        """Digest the inputs and stamp the current time."""
        inputs = {str(p): file_digest(p) for p in input_paths}
        stamped = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        return cls(
            command=command,
            seed=seed,
            params={k: str(v) for k, v in params.items()},
            inputs=inputs,
            created_utc=stamped,
        )


def file_digest(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(manifest: RunManifest, path: str | Path) -> None:
    lines = {
        "command": manifest.command,
        "created_utc": manifest.created_utc,
        "version": manifest.version,
    }
    if manifest.seed is not None:
        lines["seed"] = str(manifest.seed)
    for key, value in manifest.params.items():
        lines[f"param[{key}]"] = value
    for name, digest in manifest.inputs.items():
        lines[f"input[{name}]"] = f"sha256:{digest}"
    with Path(path).open("w", encoding="utf-8") as handle:
        for key in sorted(lines):
            handle.write(f"{key}={lines[key]}\n")


def read_manifest(path: str | Path) -> dict[str, str]:
    out: dict[str, str] = {}
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            out[key] = value
    return out
