"""External model adapter: length-prefixed wire protocol over stdio or TCP.

Frame layout (both directions)::

    <4-byte little-endian uint32: payload length>
    <payload: one-line UTF-8 JSON header + "\\n" + optional raw bytes>

Forward requests carry ``{"type": "forward", "n", "shape", "dtype": "f32"}``
plus a little-endian float32 blob; responses mirror the framing with
``{"type": "output", "n", "out_dim", "dtype": "f32"}`` and the output
blob.  The protocol version string is exchanged once when the session
starts; a mismatch aborts cleanly before any tensor moves.  Transport is
local-only (subprocess stdio or a localhost socket) with one strict
request-response session per suspect.
"""

from __future__ import annotations

import json
import os
import selectors
import socket
import struct
import subprocess
import sys

import numpy as np

from .errors import ProtocolError

PROTOCOL_VERSION = "ddv-adapter/1"
DEFAULT_TIMEOUT = 30.0

_LEN = struct.Struct("<I")


# -- framing -------------------------------------------------------------------

def pack_frame(header: dict, blob: bytes = b"") -> bytes:
    payload = json.dumps(header, separators=(",", ":")).encode("utf-8") + b"\n" + blob
    return _LEN.pack(len(payload)) + payload


def unpack_payload(payload: bytes) -> tuple[dict, bytes]:
    nl = payload.find(b"\n")
    if nl < 0:
        raise ProtocolError("frame payload has no header line")
    try:
        header = json.loads(payload[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed frame header: {exc}") from exc
    return header, payload[nl + 1 :]


class _FdTransport:
    """Byte transport over raw file descriptors with a read timeout."""

    def __init__(self, read_fd: int, write_fd: int, timeout: float):
        self._read_fd = read_fd
        self._write_fd = write_fd
        self.timeout = timeout
        self._sel = selectors.DefaultSelector()
        self._sel.register(read_fd, selectors.EVENT_READ)

    def read_exact(self, n: int) -> bytes:
        chunks = []
        remaining = n
        while remaining > 0:
            if not self._sel.select(self.timeout):
                raise ProtocolError(f"timed out after {self.timeout}s waiting for peer")
            chunk = os.read(self._read_fd, remaining)
            if not chunk:
                raise ProtocolError("peer closed the stream mid-message")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def write_all(self, data: bytes) -> None:
        view = memoryview(data)
        while view:
            written = os.write(self._write_fd, view)
            view = view[written:]

    def close(self):
        self._sel.close()


class _SocketTransport:
    def __init__(self, sock: socket.socket, timeout: float):
        self._sock = sock
        sock.settimeout(timeout)

    def read_exact(self, n: int) -> bytes:
        chunks = []
        remaining = n
        while remaining > 0:
            try:
                chunk = self._sock.recv(remaining)
            except socket.timeout:
                raise ProtocolError("timed out waiting for peer") from None
            if not chunk:
                raise ProtocolError("peer closed the connection mid-message")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def write_all(self, data: bytes) -> None:
        self._sock.sendall(data)

    def close(self):
        self._sock.close()


def _recv_frame(transport) -> tuple[dict, bytes]:
    (length,) = _LEN.unpack(transport.read_exact(_LEN.size))
    return unpack_payload(transport.read_exact(length))


# -- client --------------------------------------------------------------------

class RemoteModel:
    """Model-like facade over an adapter session; black-box by contract."""

    access = "blackbox"

    def __init__(self, transport, max_batch: int | None = None, close_hook=None):
        self._transport = transport
        self._close_hook = close_hook
        self.max_batch = max_batch
        self._handshake()

    @classmethod
    def spawn(cls, argv: list[str], timeout: float = DEFAULT_TIMEOUT,
              max_batch=None) -> "RemoteModel":
        """Launch the suspect as a subprocess speaking the protocol on stdio."""
        proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        transport = _FdTransport(proc.stdout.fileno(), proc.stdin.fileno(), timeout)

        def close_hook():
            proc.stdin.close()
            proc.wait(timeout=10)

        return cls(transport, max_batch=max_batch, close_hook=close_hook)

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = DEFAULT_TIMEOUT,
                max_batch=None) -> "RemoteModel":
        sock = socket.create_connection((host, port), timeout=timeout)
        return cls(_SocketTransport(sock, timeout), max_batch=max_batch)

    def _handshake(self):
        self._transport.write_all(
            pack_frame({"type": "hello", "protocol": PROTOCOL_VERSION})
        )
        header, _ = _recv_frame(self._transport)
        if header.get("type") == "error":
            raise ProtocolError(f"peer refused session: {header.get('message')}")
        if header.get("type") != "hello" or header.get("protocol") != PROTOCOL_VERSION:
            raise ProtocolError(
                f"protocol mismatch: peer speaks {header.get('protocol')!r}, "
                f"expected {PROTOCOL_VERSION!r}"
            )
        self.id = header.get("model_id", "remote")
        self.output_dim = int(header["out_dim"])
        shape = header.get("input_shape")
        self.input_shape = tuple(shape) if shape else None

    def forward(self, batch) -> np.ndarray:
        batch = np.ascontiguousarray(batch, dtype=np.float32)
        if self.max_batch is None or len(batch) <= self.max_batch:
            return self._forward_once(batch)
        outs = [
            self._forward_once(batch[i : i + self.max_batch])
            for i in range(0, len(batch), self.max_batch)
        ]
        return np.concatenate(outs, axis=0)

    def _forward_once(self, batch: np.ndarray) -> np.ndarray:
        header = {
            "type": "forward",
            "n": int(batch.shape[0]),
            "shape": list(batch.shape[1:]),
            "dtype": "f32",
        }
        self._transport.write_all(
            pack_frame(header, np.ascontiguousarray(batch, dtype="<f4").tobytes())
        )
        resp, blob = _recv_frame(self._transport)
        if resp.get("type") == "error":
            raise ProtocolError(f"peer error: {resp.get('message')}")
        if resp.get("type") != "output":
            raise ProtocolError(f"unexpected frame type {resp.get('type')!r}")
        n = int(resp["n"])
        out_dim = int(resp["out_dim"])
        expected = n * out_dim * 4
        if len(blob) != expected:
            raise ProtocolError(f"output blob has {len(blob)} bytes, expected {expected}")
        return np.frombuffer(blob, dtype="<f4").reshape(n, out_dim).copy()

    def close(self):
        try:
            self._transport.write_all(pack_frame({"type": "close"}))
        except Exception:
            pass
        self._transport.close()
        if self._close_hook:
            try:
                self._close_hook()
            except Exception:
                pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# -- server --------------------------------------------------------------------

class EchoModel:
    """Test double: output = input flattened, truncated/padded to out_dim."""

    access = "blackbox"

    def __init__(self, out_dim: int, model_id: str = "echo"):
        self.output_dim = int(out_dim)
        self.id = model_id
        self.input_shape = None

    def forward(self, batch):
        flat = np.ascontiguousarray(batch, dtype=np.float32).reshape(len(batch), -1)
        out = np.zeros((len(batch), self.output_dim), dtype=np.float32)
        k = min(self.output_dim, flat.shape[1])
        out[:, :k] = flat[:, :k]
        return out


def serve(model, transport) -> None:
    """Answer one strict request-response session for the given model."""
    try:
        header, _ = _recv_frame(transport)
    except ProtocolError:
        return
    if header.get("type") != "hello" or header.get("protocol") != PROTOCOL_VERSION:
        transport.write_all(
            pack_frame(
                {
                    "type": "error",
                    "message": f"unsupported protocol {header.get('protocol')!r}; "
                    f"this adapter speaks {PROTOCOL_VERSION}",
                }
            )
        )
        return
    hello = {
        "type": "hello",
        "protocol": PROTOCOL_VERSION,
        "model_id": getattr(model, "id", "model"),
        "out_dim": int(model.output_dim),
    }
    shape = getattr(model, "input_shape", None)
    if shape:
        hello["input_shape"] = list(shape)
    transport.write_all(pack_frame(hello))

    while True:
        try:
            header, blob = _recv_frame(transport)
        except ProtocolError:
            return
        kind = header.get("type")
        if kind == "close":
            return
        if kind != "forward":
            transport.write_all(
                pack_frame({"type": "error", "message": f"unexpected frame {kind!r}"})
            )
            return
        try:
            n = int(header["n"])
            shape = tuple(header["shape"])
            if header.get("dtype") != "f32":
                raise ValueError(f"unsupported dtype {header.get('dtype')!r}")
            count = n * int(np.prod(shape)) if shape else n
            if len(blob) != count * 4:
                raise ValueError(f"payload has {len(blob)} bytes, expected {count * 4}")
            batch = np.frombuffer(blob, dtype="<f4").reshape((n, *shape)).copy()
            out = np.ascontiguousarray(model.forward(batch), dtype="<f4")
        except Exception as exc:
            transport.write_all(pack_frame({"type": "error", "message": str(exc)}))
            return
        transport.write_all(
            pack_frame(
                {"type": "output", "n": int(out.shape[0]), "out_dim": int(out.shape[1]),
                 "dtype": "f32"},
                out.tobytes(),
            )
        )


def serve_stdio(model, timeout: float = DEFAULT_TIMEOUT) -> None:
    transport = _FdTransport(sys.stdin.fileno(), sys.stdout.fileno(), timeout)
    serve(model, transport)


def serve_tcp(model, host: str = "127.0.0.1", port: int = 0,
              timeout: float = DEFAULT_TIMEOUT, ready_callback=None) -> None:
    """Serve sessions sequentially on a localhost socket (until killed)."""
    with socket.create_server((host, port)) as server:
        if ready_callback:
            ready_callback(server.getsockname()[1])
        while True:
            conn, _ = server.accept()
            with conn:
                serve(model, _SocketTransport(conn, timeout))
