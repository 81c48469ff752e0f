"""
Artifact directory handling.

Files are staged in a hidden directory next to their destination and only
renamed into place by commit(); a failed run leaves nothing behind.
"""

import json
import logging
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def _to_builtin(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def _clean_nonfinite(value):
    """NaN / inf become null so every manifest is strict JSON."""
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean_nonfinite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean_nonfinite(v) for v in value]
    return value


def dumps(data):
    return json.dumps(_clean_nonfinite(data), indent=2, sort_keys=True, default=_to_builtin, allow_nan=False) + "\n"


def write_frame(frame, path):
    """RFC-4180 quoting, fixed column order, full float precision."""
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.17g")


def read_frame(path):
    return pd.read_csv(path, keep_default_na=True)


class ArtifactWriter:
    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.out_dir))
        self.names = []

    def _path(self, name):
        if name in self.names:
            raise ValueError(f"artifact {name!r} written twice")
        self.names.append(name)
        return self._staging / name

    def write_json(self, name, data):
        self._path(name).write_text(dumps(data), encoding="utf-8")
        return name

    def write_csv(self, name, frame):
        write_frame(frame, self._path(name))
        return name

    def write_svg(self, name, svg_text):
        self._path(name).write_text(svg_text, encoding="utf-8")
        return name

    def write_manifest(self, **fields):
        fields["artifacts"] = sorted(self.names)
        return self.write_json(MANIFEST_NAME, fields)

    def commit(self):
        """Rename every staged file into the output directory."""
        for name in self.names:
            os.replace(self._staging / name, self.out_dir / name)
        shutil.rmtree(self._staging, ignore_errors=True)
        for name in self.names:
            logger.info("wrote %s", self.out_dir / name)
        return [self.out_dir / name for name in self.names]

    def discard(self):
        shutil.rmtree(self._staging, ignore_errors=True)
        self.names = []


def read_manifest(directory):
    path = Path(directory) / MANIFEST_NAME
    return json.loads(path.read_text(encoding="utf-8"))
