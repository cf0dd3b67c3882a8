"""Adapter wire protocol: framing, handshake, equivalence, failure modes."""

import os
import sys
import threading

import numpy as np
import pytest

from ddvkit.adapter import (
    PROTOCOL_VERSION,
    EchoModel,
    RemoteModel,
    _FdTransport,
    pack_frame,
    serve,
    unpack_payload,
)
from ddvkit.config import GenConfig
from ddvkit.ddv import compute_ddv
from ddvkit.errors import ProtocolError
from ddvkit.inputgen import InputPairSet
from ddvkit.runtime import save_model

from .conftest import tiny_classifier


def _pipe_pair(timeout=10.0):
    """Two connected FD transports (client, server)."""
    c2s_r, c2s_w = os.pipe()
    s2c_r, s2c_w = os.pipe()
    client = _FdTransport(s2c_r, c2s_w, timeout)
    server = _FdTransport(c2s_r, s2c_w, timeout)
    return client, server


def _serve_in_thread(model, server_transport):
    t = threading.Thread(target=serve, args=(model, server_transport), daemon=True)
    t.start()
    return t


class TestFraming:
    def test_pack_unpack_round_trip(self):
        header = {"type": "forward", "n": 2, "shape": [3], "dtype": "f32"}
        blob = b"\x01\x02\x03"
        frame = pack_frame(header, blob)
        assert int.from_bytes(frame[:4], "little") == len(frame) - 4
        back_header, back_blob = unpack_payload(frame[4:])
        assert back_header == header
        assert back_blob == blob

    def test_headerless_payload_rejected(self):
        with pytest.raises(ProtocolError, match="no header line"):
            unpack_payload(b"no newline here")

    def test_garbage_json_rejected(self):
        with pytest.raises(ProtocolError, match="malformed"):
            unpack_payload(b"{broken\n")


class TestSession:
    def test_echo_round_trips_batch_bit_exactly(self):
        client_t, server_t = _pipe_pair()
        _serve_in_thread(EchoModel(out_dim=4), server_t)
        with RemoteModel(client_t) as remote:
            batch = np.random.default_rng(0).random((3, 4)).astype(np.float32)
            out = remote.forward(batch)
            np.testing.assert_array_equal(out, batch)
            assert remote.output_dim == 4

    def test_echo_truncates_to_out_dim(self):
        client_t, server_t = _pipe_pair()
        _serve_in_thread(EchoModel(out_dim=2), server_t)
        with RemoteModel(client_t) as remote:
            batch = np.arange(12, dtype=np.float32).reshape(2, 6)
            np.testing.assert_array_equal(remote.forward(batch), batch[:, :2])

    def test_native_model_matches_in_process(self):
        model = tiny_classifier(seed=3)
        client_t, server_t = _pipe_pair()
        _serve_in_thread(model, server_t)
        rng = np.random.default_rng(1)
        batch = rng.random((5, 1, 8, 8)).astype(np.float32)
        with RemoteModel(client_t) as remote:
            assert remote.id == model.id
            assert remote.input_shape == model.input_shape
            np.testing.assert_array_equal(remote.forward(batch), model.forward(batch))

    def test_ddv_equivalence_in_process_vs_remote(self):
        model = tiny_classifier(seed=6)
        rng = np.random.default_rng(2)
        pairs = InputPairSet(
            seeds=rng.random((10, 1, 8, 8)).astype(np.float32),
            adversarial=rng.random((10, 1, 8, 8)).astype(np.float32),
            target_model_id=model.id,
            gen_config=GenConfig(n_inputs=10),
        )
        local = compute_ddv(model, pairs)
        client_t, server_t = _pipe_pair()
        _serve_in_thread(model, server_t)
        with RemoteModel(client_t) as remote:
            remote_ddv = compute_ddv(remote, pairs)
        np.testing.assert_allclose(remote_ddv.values, local.values, atol=1e-6)

    def test_max_batch_splits_requests(self):
        model = tiny_classifier(seed=3)
        client_t, server_t = _pipe_pair()
        _serve_in_thread(model, server_t)
        batch = np.random.default_rng(4).random((7, 1, 8, 8)).astype(np.float32)
        with RemoteModel(client_t, max_batch=3) as remote:
            np.testing.assert_array_equal(remote.forward(batch), model.forward(batch))


class TestFailureModes:
    def test_version_mismatch_refused_cleanly(self):
        client_t, server_t = _pipe_pair()
        _serve_in_thread(EchoModel(out_dim=2), server_t)
        client_t.write_all(pack_frame({"type": "hello", "protocol": "bogus/9"}))
        import struct

        (length,) = struct.unpack("<I", client_t.read_exact(4))
        header, blob = unpack_payload(client_t.read_exact(length))
        assert header["type"] == "error"
        assert "unsupported protocol" in header["message"]
        assert blob == b""

    def test_client_raises_on_version_mismatch(self):
        client_t, server_t = _pipe_pair()

        def bad_server():
            import struct

            (length,) = struct.unpack("<I", server_t.read_exact(4))
            server_t.read_exact(length)
            server_t.write_all(
                pack_frame({"type": "hello", "protocol": "other/2", "out_dim": 1})
            )

        threading.Thread(target=bad_server, daemon=True).start()
        with pytest.raises(ProtocolError, match="protocol mismatch"):
            RemoteModel(client_t)

    def test_timeout_raises(self):
        client_t, _server_t = _pipe_pair(timeout=0.2)
        with pytest.raises(ProtocolError, match="timed out"):
            RemoteModel(client_t)

    def test_server_reports_bad_payload(self):
        client_t, server_t = _pipe_pair()
        _serve_in_thread(EchoModel(out_dim=2), server_t)
        client_t.write_all(pack_frame({"type": "hello", "protocol": PROTOCOL_VERSION}))
        import struct

        (length,) = struct.unpack("<I", client_t.read_exact(4))
        client_t.read_exact(length)  # hello reply
        # declare 2x3 floats but send 1 byte
        client_t.write_all(
            pack_frame({"type": "forward", "n": 2, "shape": [3], "dtype": "f32"}, b"x")
        )
        (length,) = struct.unpack("<I", client_t.read_exact(4))
        header, _ = unpack_payload(client_t.read_exact(length))
        assert header["type"] == "error"
        assert "payload" in header["message"]


class TestSubprocess:
    def test_spawned_model_server(self, tmp_path):
        model = tiny_classifier(seed=11)
        path = tmp_path / "m.bin"
        save_model(model, path)
        remote = RemoteModel.spawn(
            [sys.executable, "-m", "ddvkit", "serve", "--model", str(path)],
            timeout=30.0,
        )
        try:
            batch = np.random.default_rng(3).random((4, 1, 8, 8)).astype(np.float32)
            np.testing.assert_array_equal(remote.forward(batch), model.forward(batch))
        finally:
            remote.close()

    def test_spawned_echo_server(self):
        remote = RemoteModel.spawn(
            [sys.executable, "-m", "ddvkit", "serve", "--echo-dim", "4"], timeout=30.0
        )
        try:
            batch = np.random.default_rng(0).random((3, 4)).astype(np.float32)
            np.testing.assert_array_equal(remote.forward(batch), batch)
        finally:
            remote.close()
