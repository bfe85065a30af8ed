"""Read-only access to a tumorctrl run directory.

The field format is fixed by the producer: a 32-byte header (magic
b"PFB1", uint32 dim, 3 x uint32 extents, 3 x float32 spacings, little
endian) followed by the cell values as flat little-endian float64 in C
order.  Headers are validated before anything is plotted; a bad or
missing artifact raises ArtifactError naming the file.
"""

import csv
import hashlib
import os
import re
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"PFB1"
HEADER = struct.Struct("<4sI3I3f")


class ArtifactError(Exception):
    """A run artifact is missing or corrupt; the message names it."""


@dataclass(frozen=True)
class Field:
    values: np.ndarray
    spacings: tuple

    @property
    def dim(self):
        return self.values.ndim


def read_field(path) -> Field:
    try:
        with open(path, "rb") as fh:
            head = fh.read(HEADER.size)
            if len(head) != HEADER.size:
                raise ArtifactError(f"{path}: truncated header")
            magic, dim, e0, e1, e2, s0, s1, s2 = HEADER.unpack(head)
            if magic != MAGIC:
                raise ArtifactError(f"{path}: bad magic {magic!r}")
            if not 1 <= dim <= 3:
                raise ArtifactError(f"{path}: bad dim {dim}")
            ext = (e0, e1, e2)[:dim]
            sp = (s0, s1, s2)[:dim]
            if any(e == 0 for e in ext) or any(s <= 0 for s in sp):
                raise ArtifactError(f"{path}: inconsistent header")
            raw = fh.read()
    except OSError as exc:
        raise ArtifactError(f"{path}: {exc.strerror or exc}")
    data = np.frombuffer(raw, dtype="<f8")
    if data.size != int(np.prod(ext)):
        raise ArtifactError(f"{path}: expected {int(np.prod(ext))} values, "
                            f"found {data.size}")
    return Field(values=data.reshape(ext), spacings=sp)


def read_csv_table(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ArtifactError(f"{path}: {exc.strerror or exc}")
    if len(rows) < 2:
        raise ArtifactError(f"{path}: no data rows")
    header = rows[0]
    table = {}
    for j, name in enumerate(header):
        try:
            table[name] = np.array([float(r[j]) for r in rows[1:]])
        except (ValueError, IndexError):
            raise ArtifactError(f"{path}: column {name!r} is not numeric")
    return table


@dataclass
class RunIndex:
    """Discovered artifacts of one run directory."""

    run_dir: str
    config_hash: str
    field_steps: dict      # name -> sorted list of step indices

    def field_path(self, name, step):
        return os.path.join(self.run_dir, "fields", f"{name}_{step:06d}.pfb")


def index_run(run_dir) -> RunIndex:
    if not os.path.isdir(run_dir):
        raise ArtifactError(f"{run_dir}: not a directory")
    lock = os.path.join(run_dir, "config.lock.yaml")
    if not os.path.isfile(lock):
        raise ArtifactError(f"{lock}: missing")
    with open(lock, "rb") as fh:
        config_hash = hashlib.sha256(fh.read()).hexdigest()
    fields_dir = os.path.join(run_dir, "fields")
    steps = {}
    if os.path.isdir(fields_dir):
        pat = re.compile(r"^([a-z]+)_(\d{6})\.pfb$")
        for fname in sorted(os.listdir(fields_dir)):
            m = pat.match(fname)
            if m:
                steps.setdefault(m.group(1), []).append(int(m.group(2)))
    for name in steps:
        steps[name] = sorted(steps[name])
    return RunIndex(run_dir=run_dir, config_hash=config_hash,
                    field_steps=steps)
