"""Binary and CSV serialization of scalar fields.

Format: a 32-byte header followed by the cell values as flat
little-endian float64 in C order.  Header layout (little endian):

    bytes  0..3    magic  b"PFB1"
    bytes  4..7    dim    uint32 (1..3)
    bytes  8..19   extents, 3 x uint32 (unused axes = 0)
    bytes 20..31   spacings, 3 x float32 (unused axes = 0)

Spacings are stored as float32, sufficient for plotting and replay; the
field values themselves round-trip exactly.
"""

import struct

import numpy as np

from .errors import ArtifactIOError
from .grid import Grid, ScalarField

MAGIC = b"PFB1"
HEADER = struct.Struct("<4sI3I3f")
assert HEADER.size == 32


def save_field(path, f: ScalarField):
    g = f.grid
    ext = list(g.shape) + [0] * (3 - g.dim)
    sp = list(g.spacings) + [0.0] * (3 - g.dim)
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, g.dim, *ext, *sp))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load_field(path) -> ScalarField:
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) != HEADER.size:
            raise ArtifactIOError(f"{path}: truncated header")
        magic, dim, e0, e1, e2, s0, s1, s2 = HEADER.unpack(head)
        if magic != MAGIC:
            raise ArtifactIOError(f"{path}: bad magic {magic!r}")
        if not 1 <= dim <= 3:
            raise ArtifactIOError(f"{path}: bad dim {dim}")
        ext = (e0, e1, e2)[:dim]
        sp = (s0, s1, s2)[:dim]
        if any(e == 0 for e in ext) or any(s <= 0 for s in sp):
            raise ArtifactIOError(f"{path}: inconsistent header {ext} {sp}")
        raw = fh.read()
    n = int(np.prod(ext))
    data = np.frombuffer(raw, dtype="<f8")
    if data.size != n:
        raise ArtifactIOError(
            f"{path}: expected {n} values, found {data.size}")
    grid = Grid(ext, [e * s for e, s in zip(ext, sp)])
    return ScalarField(grid, data.reshape(ext))


def field_to_csv(path, f: ScalarField):
    """Index columns plus value, one cell per row."""
    g = f.grid
    cols = ["i", "j", "k"][:g.dim]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols + ["value"]) + "\n")
        for idx in np.ndindex(*g.shape):
            row = [str(i) for i in idx] + [repr(float(f.values[idx]))]
            fh.write(",".join(row) + "\n")
