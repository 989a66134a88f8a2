"""Small shared helpers: atomic file writes and stage-scoped seeding."""

from __future__ import annotations

import os
import tempfile
import zlib

import numpy as np


def write_text_atomic(path, text: str) -> None:
    """Write via a temp file plus rename so readers never see partial output."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def stage_seed(root_seed: int, label: str, index: int | None = None) -> np.random.SeedSequence:
    """Derive a per-stage seed stream from one root seed.

    The label keys the pipeline stage and the optional index keys a unit
    of work inside it (a fold, an explained instance), so partial
    re-runs consume exactly the same streams as a full run.
    """
    entropy = [root_seed & 0xFFFFFFFF, zlib.crc32(label.encode("utf-8"))]
    if index is not None:
        entropy.append(index)
    return np.random.SeedSequence(entropy)


def stage_rng(root_seed: int, label: str, index: int | None = None) -> np.random.Generator:
    return np.random.default_rng(stage_seed(root_seed, label, index))
