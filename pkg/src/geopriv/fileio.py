"""Small file-output helpers: atomic writes, digests, run manifests."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile


def atomic_write(path, text: str) -> None:
    """Write text to ``path`` via a temp file in the same directory plus
    rename, so failures never leave a partial file behind."""
    path = str(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_path, payload: dict) -> str:
    """Write ``<out_path>.manifest.json`` describing a run; returns its path."""
    manifest_path = str(out_path) + ".manifest.json"
    atomic_write(manifest_path, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return manifest_path
