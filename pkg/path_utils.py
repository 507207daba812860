# path_utils.py
#
# Utilities to normalize user-supplied input/output paths and to fingerprint
# input files for the run manifest.

from __future__ import annotations

import hashlib
import logging
import os

logger = logging.getLogger(__name__)

_CHUNK = 1 << 16


def normalize_path(p: str | os.PathLike | None) -> str | None:
    """Return an absolute path with '~' and environment variables expanded.

    - Empty input is returned unchanged.
    - Relative paths are resolved against the current working directory.
    """
    if not p:
        return p
    expanded = os.path.expandvars(os.path.expanduser(os.fspath(p)))
    return os.path.abspath(expanded)


def ensure_parent(path: str | os.PathLike) -> str:
    """Create the parent directory of an output file if needed."""
    out = normalize_path(path)
    parent = os.path.dirname(out)
    if parent and not os.path.isdir(parent):
        os.makedirs(parent, exist_ok=True)
        logger.info(f"Created output directory: {parent}")
    return out


def file_digest(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(normalize_path(path), "rb") as f:
        for chunk in iter(lambda: f.read(_CHUNK), b""):
            h.update(chunk)
    return h.hexdigest()
