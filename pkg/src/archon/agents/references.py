"""Reference documents under ``references/`` with a JSON manifest."""

from __future__ import annotations

import hashlib
import json
import re
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

from ..workspace import atomic_write

MANIFEST = "manifest.json"


class IngestError(Exception):
    pass


class ReferenceNotFound(KeyError):
    pass


@dataclass(frozen=True)
class ReferenceDoc:
    title: str
    path: str  # relative to the references directory
    source: str
    retrieved: str
    sha256: str


def _load_manifest(dest: Path) -> list[ReferenceDoc]:
    p = dest / MANIFEST
    if not p.exists():
        return []
    return [ReferenceDoc(**d) for d in json.loads(p.read_text(encoding="utf-8"))["documents"]]


def _save_manifest(dest: Path, docs: list[ReferenceDoc]) -> None:
    atomic_write(dest / MANIFEST, json.dumps({"documents": [asdict(d) for d in docs]}, indent=2) + "\n")


def _is_url(source: str) -> bool:
    return source.startswith(("http://", "https://", "file://"))


def _read(p: Path) -> str:
    with open(p, encoding="utf-8", newline="") as fh:
        return fh.read()


def _fetch(source: str, timeout: float) -> str:
    if _is_url(source):
        try:
            with urllib.request.urlopen(source, timeout=timeout) as resp:
                return resp.read().decode("utf-8", errors="replace")
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise IngestError(f"cannot retrieve {source}: {exc}") from exc
    try:
        return _read(Path(source))
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestError(f"cannot read {source}: {exc}") from exc


def title_of(text: str, fallback: str) -> str:
    for line in text.splitlines():
        line = line.strip().lstrip("#").strip()
        if line:
            return line[:200]
    return fallback


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")[:60] or "reference"


def ingest_reference(source: str, dest, clock: Callable[[], str], timeout: float = 30.0) -> ReferenceDoc:
    """Store a text/markdown document and its manifest entry.

    Ingesting the same source twice returns the existing entry untouched.
    """
    dest = Path(dest)
    key = source if _is_url(source) else str(Path(source).resolve())
    docs = _load_manifest(dest)
    for d in docs:
        if d.source == key:
            return d
    text = _fetch(source, timeout)  # nothing is written before this succeeds
    stem = Path(source.rstrip("/")).stem or "reference"
    title = title_of(text, stem)
    name = f"{_slug(stem)}.md"
    taken = {d.path for d in docs}
    n = 2
    while name in taken or (dest / name).exists():
        name = f"{_slug(stem)}-{n}.md"
        n += 1
    atomic_write(dest / name, text)
    doc = ReferenceDoc(title, name, key, clock(), hashlib.sha256(text.encode()).hexdigest())
    _save_manifest(dest, docs + [doc])
    return doc


def list_references(dest) -> list[ReferenceDoc]:
    return _load_manifest(Path(dest))


def read_reference(dest, key: str) -> str:
    """Look a document up by title, manifest path, or any file path under ``dest``."""
    dest = Path(dest)
    for d in _load_manifest(dest):
        if key in (d.title, d.path):
            return _read(dest / d.path)
    candidate = (dest / key).resolve()
    if candidate.is_relative_to(dest.resolve()) and candidate.is_file():
        return _read(candidate)
    raise ReferenceNotFound(key)
