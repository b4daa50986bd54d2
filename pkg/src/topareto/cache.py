"""On-disk cache for optimization results.

One entry per (problem, volume fraction, initial design, optimizer config),
stored as a JSON summary plus a raw ``.npy`` density array. Writes go
through a temp file and an atomic rename, so concurrent insert-or-get from
several workers is safe: last writer wins with identical content.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .fem2d import DensityField, ProblemSpec
from .simp import DesignResult, OptimizerConfig


def result_key(problem: ProblemSpec, vf: float, init_desc: str,
               cfg: OptimizerConfig) -> str:
    doc = {
        "problem": problem.to_json(),
        "vf": repr(float(vf)),
        "init": init_desc,
        "cfg": cfg.digest(),
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:32]


def field_descriptor(values: np.ndarray) -> str:
    """Cache descriptor for an explicit warm-start field."""
    return "field:" + hashlib.sha256(np.ascontiguousarray(values).tobytes()).hexdigest()[:24]


class RunCache:
    """Insert-or-get store under one root directory; ``None`` root disables it."""

    def __init__(self, root: str | Path | None):
        self.root = Path(root) if root is not None else None
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)

    def get(self, key: str) -> DesignResult | None:
        if self.root is None:
            return None
        meta_path = self.root / f"{key}.json"
        data_path = self.root / f"{key}.npy"
        if not (meta_path.exists() and data_path.exists()):
            return None
        try:
            meta = json.loads(meta_path.read_text())
            values = np.load(data_path)
        except (OSError, ValueError, json.JSONDecodeError):
            return None
        return DesignResult(
            densities=DensityField(values),
            compliance_p=meta["compliance_p"],
            compliance_p1=meta["compliance_p1"],
            vf=meta["vf"],
            iterations=meta["iterations"],
            converged=meta["converged"],
            descent_violations=meta.get("descent_violations", 0),
        )

    def put(self, key: str, result: DesignResult) -> None:
        if self.root is None:
            return
        self._atomic_write(self.root / f"{key}.json",
                           json.dumps(result.summary(), sort_keys=True).encode())
        buf = _npy_bytes(result.densities.values)
        self._atomic_write(self.root / f"{key}.npy", buf)

    def _atomic_write(self, path: Path, data: bytes) -> None:
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except OSError:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def _npy_bytes(values: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(values))
    return buf.getvalue()
