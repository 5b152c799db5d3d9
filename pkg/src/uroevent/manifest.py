"""Run manifests: config hash, seed, and input checksums per CLI command.

Manifests contain no timestamps or absolute paths, so identical runs produce
byte-identical files and any mutation of an upstream artifact between stages
changes the recorded checksum.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

PACKAGE_VERSION = "0.1.0"


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(
    out_dir: str | Path,
    command: str,
    config: dict,
    seed: int | None,
    input_paths: list[Path],
) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = {p.name: sha256_file(p) for p in sorted(input_paths, key=lambda p: p.name)}
    payload = {
        "command": command,
        "version": PACKAGE_VERSION,
        "seed": seed,
        "config_sha256": config_hash(config),
        "config": config,
        "inputs": inputs,
    }
    path = out_dir / f"{command}.manifest.json"
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, default=str)
        fh.write("\n")
    return path
