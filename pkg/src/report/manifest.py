"""
Run Manifests
"""

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, Field

from .. import __version__

CHUNK = 1 << 20


def sha256_file(path: Union[str, Path]) -> str:
    """Hex SHA-256 of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(CHUNK), b''):
            digest.update(block)
    return digest.hexdigest()


def sha256_arrays(path: Union[str, Path]) -> str:
    """
    Hex SHA-256 of the arrays in an .npz archive.

    Zip member timestamps are left out, so re-saving identical arrays keeps the hash.
    """
    digest = hashlib.sha256()
    with np.load(path, allow_pickle=False) as z:
        for key in sorted(z.files):
            arr = np.ascontiguousarray(z[key])
            digest.update(f"{key}:{arr.dtype.str}:{arr.shape}".encode('utf-8'))
            digest.update(arr.tobytes())
    return digest.hexdigest()


class InputEntry(BaseModel):
    kind: str
    path: str
    sha256: str


class RunManifest(BaseModel):
    """
    Inputs, model specs and seeds of one command run.

    The hash covers everything except the timestamp, so identical inputs and
    seeds give an identical hash.
    """

    command: str
    inputs: List[InputEntry] = Field(default_factory=list)
    specs: List[Dict[str, Any]] = Field(default_factory=list)
    seeds: Dict[str, int] = Field(default_factory=dict)
    options: Dict[str, Any] = Field(default_factory=dict)
    toolkit_version: str = __version__
    timestamp: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec='seconds'))

    def add_input(self, kind: str, path: Union[str, Path], sha256: Optional[str] = None) -> None:
        self.inputs.append(InputEntry(kind=kind, path=str(path), sha256=sha256 or sha256_file(path)))

    @property
    def hash(self) -> str:
        content = self.model_dump(exclude={'timestamp'})
        canonical = json.dumps(content, sort_keys=True, separators=(',', ':'), default=str)
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def to_json(self) -> str:
        payload = self.model_dump()
        payload['hash'] = self.hash
        return json.dumps(payload, indent=2, sort_keys=True, default=str)

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n")
        return path
