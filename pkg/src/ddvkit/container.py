"""Single-file container: one JSON header line plus length-prefixed blobs.

Layout::

    <utf-8 JSON header, single line>\n
    for each blob named in header["blobs"]:
        <8-byte little-endian unsigned length><raw bytes>

Model files, input-pair sets, and fingerprints all share this container so
one reader handles every on-disk artifact.  Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

from .errors import ModelFormatError

_LEN = struct.Struct("<Q")


def write_container(path, header: dict, blobs: dict[str, bytes]) -> None:
    header = dict(header)
    header["blobs"] = list(blobs.keys())
    line = json.dumps(header, separators=(",", ":"), sort_keys=True)
    if "\n" in line:
        raise ValueError("container header must not contain newlines")
    with open(path, "wb") as fh:
        fh.write(line.encode("utf-8"))
        fh.write(b"\n")
        for name in header["blobs"]:
            blob = blobs[name]
            fh.write(_LEN.pack(len(blob)))
            fh.write(blob)


def read_container(path) -> tuple[dict, dict[str, bytes]]:
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise ModelFormatError("no header line terminator found", offset=len(data))
    try:
        header = json.loads(data[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        offset = getattr(exc, "pos", getattr(exc, "start", 0))
        raise ModelFormatError(f"invalid JSON header: {exc}", offset=offset) from exc
    if not isinstance(header, dict) or "blobs" not in header:
        raise ModelFormatError("header is not an object with a 'blobs' list", offset=0)

    blobs: dict[str, bytes] = {}
    pos = nl + 1
    for name in header["blobs"]:
        if pos + _LEN.size > len(data):
            raise ModelFormatError(f"truncated length prefix for blob {name!r}", offset=pos)
        (length,) = _LEN.unpack_from(data, pos)
        pos += _LEN.size
        if pos + length > len(data):
            raise ModelFormatError(
                f"truncated blob {name!r}: need {length} bytes, have {len(data) - pos}",
                offset=pos,
            )
        blobs[name] = data[pos : pos + length]
        pos += length
    if pos != len(data):
        raise ModelFormatError(f"{len(data) - pos} trailing bytes after last blob", offset=pos)
    return header, blobs
