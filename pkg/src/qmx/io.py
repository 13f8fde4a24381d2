"""Field dumps, CSV writers and the run manifest."""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import FieldState

MAGIC = b"QMXF"
FORMAT_VERSION = 1
# magic, version, ncomp, n1, n2, n3, time, h1, h2, h3, periodic bitmask, pec flag
_HEADER = struct.Struct("<4sIIIIIddddHH")
HEADER_SIZE = 64
_PAD = HEADER_SIZE - _HEADER.size


class DumpFormatError(ValueError):
    pass


def write_atomic(path: Path, data: bytes | str):
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    raw = data.encode() if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_dump(state: FieldState) -> bytes:
    g = state.grid
    vals = np.ascontiguousarray(state.values, dtype="<f8")
    mask = sum(1 << i for i, p in enumerate(g.periodic) if p)
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, vals.shape[0], *g.shape, float(state.time), *g.spacing,
                          mask, int(g.has_pec))
    return header + b"\0" * _PAD + vals.tobytes()


@dataclass
class Dump:
    time: float
    shape: tuple[int, int, int]
    spacing: tuple[float, float, float]
    periodic: tuple[bool, bool, bool]
    has_pec: bool
    values: np.ndarray


def decode_dump(raw: bytes) -> Dump:
    if len(raw) < HEADER_SIZE:
        raise DumpFormatError("file shorter than the header")
    magic, version, nc, n1, n2, n3, t, h1, h2, h3, mask, pec = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DumpFormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DumpFormatError(f"unsupported version {version}")
    count = nc * n1 * n2 * n3
    body = raw[HEADER_SIZE:]
    if len(body) != 8 * count:
        raise DumpFormatError(f"expected {8 * count} data bytes, found {len(body)}")
    vals = np.frombuffer(body, dtype="<f8").reshape(nc, n1, n2, n3).copy()
    return Dump(t, (n1, n2, n3), (h1, h2, h3), tuple(bool(mask >> i & 1) for i in range(3)), bool(pec), vals)


def write_dump(path: Path, state: FieldState):
    write_atomic(path, encode_dump(state))


def read_dump(path: Path) -> Dump:
    return decode_dump(Path(path).read_bytes())


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def csv_text(header: list[str], rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


NORM_HEADER = ["t", "norm_kind", "order", "gamma", "value"]
ENERGY_HEADER = ["t", "energy", "source_norm", "boundary_norm", "ratio"]


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    config: dict
    version: str
    wall_clock: float
    steps: int
    status: str
    files: dict[str, str]  # relative name -> sha256

    def config_hash(self) -> str:
        blob = json.dumps({"config": self.config, "version": self.version}, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def to_json(self) -> str:
        doc = {
            "config": self.config,
            "version": self.version,
            "config_hash": self.config_hash(),
            "wall_clock_seconds": round(self.wall_clock, 3),
            "steps": self.steps,
            "status": self.status,
            "files": dict(sorted(self.files.items())),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def write(self, outdir: Path):
        write_atomic(Path(outdir) / "manifest.json", self.to_json())
