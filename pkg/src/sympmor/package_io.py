"""Binary container for offline-stage results.

Layout: magic b"SPMR", u32 format version, u64 header length, a UTF-8
JSON header {"metadata": ..., "arrays": [{name, dtype, shape}, ...]},
then the raw array payloads in header order, row major, little endian.
Only float64 and int64 payloads are allowed, which keeps round trips
bitwise exact.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, PackageFormatError

MAGIC = b"SPMR"
FORMAT_VERSION = 1

_DTYPES = {"float64": np.dtype("<f8"), "int64": np.dtype("<i8")}


@dataclass
class OfflinePackage:
    """JSON-serializable metadata plus named arrays."""

    metadata: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict)

    def require(self, *names):
        missing = [n for n in names if n not in self.arrays]
        if missing:
            raise PackageFormatError(f"package is missing arrays: {missing}")
        return [self.arrays[n] for n in names]


def _canonical_array(name, arr):
    a = np.asarray(arr)
    if a.dtype.kind in "iub":
        a = np.ascontiguousarray(a, dtype="<i8")
        tag = "int64"
    elif a.dtype.kind == "f":
        a = np.ascontiguousarray(a, dtype="<f8")
        tag = "float64"
    else:
        raise ContractError(f"array {name!r} has unsupported dtype {a.dtype}")
    if not np.all(np.isfinite(a)) and tag == "float64":
        raise ContractError(f"array {name!r} contains non-finite values")
    return a, tag


def save_package(pkg, path):
    """Write an OfflinePackage; byte output is deterministic."""
    entries = []
    payloads = []
    for name, arr in pkg.arrays.items():
        if not isinstance(name, str) or not name:
            raise ContractError("array names must be nonempty strings")
        a, tag = _canonical_array(name, arr)
        entries.append({"name": name, "dtype": tag, "shape": list(a.shape)})
        payloads.append(a.tobytes())
    try:
        header = json.dumps({"metadata": pkg.metadata, "arrays": entries},
                            sort_keys=True, separators=(",", ":")).encode("utf-8")
    except (TypeError, ValueError) as exc:
        raise ContractError(f"package metadata is not JSON-serializable: {exc}") from None
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for chunk in payloads:
            fh.write(chunk)


def load_package(path):
    """Read a package written by save_package.

    Raises PackageFormatError on a bad magic value, an unsupported
    format version, or a header inconsistent with the payload length.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16:
        raise PackageFormatError("file too short to be a package")
    if blob[:4] != MAGIC:
        raise PackageFormatError(f"bad magic {blob[:4]!r}")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != FORMAT_VERSION:
        raise PackageFormatError(
            f"unsupported format version {version} (expected {FORMAT_VERSION})")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    if 16 + hlen > len(blob):
        raise PackageFormatError("truncated header")
    try:
        header = json.loads(blob[16:16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise PackageFormatError(f"corrupt header: {exc}") from None
    if not isinstance(header, dict) or "arrays" not in header or "metadata" not in header:
        raise PackageFormatError("header must carry 'metadata' and 'arrays'")
    arrays = {}
    offset = 16 + hlen
    for entry in header["arrays"]:
        try:
            name = entry["name"]
            dtype = _DTYPES[entry["dtype"]]
            shape = tuple(int(s) for s in entry["shape"])
        except (KeyError, TypeError, ValueError) as exc:
            raise PackageFormatError(f"malformed array entry {entry!r}: {exc}") from None
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * dtype.itemsize
        if offset + nbytes > len(blob):
            raise PackageFormatError(f"payload for array {name!r} is truncated")
        arrays[name] = np.frombuffer(
            blob, dtype=dtype, count=count, offset=offset).reshape(shape).copy()
        offset += nbytes
    if offset != len(blob):
        raise PackageFormatError(f"{len(blob) - offset} trailing bytes after payloads")
    return OfflinePackage(metadata=header["metadata"], arrays=arrays)
