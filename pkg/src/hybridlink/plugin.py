"""External-codec wire protocol: framing, subprocess client, dispatch.

Every message is a u32 little-endian total length followed by the magic
"HSCC", a version byte, an op byte and the op's payload. Variable-size
fields carry their own u32 count. Integers and floats are little-endian
throughout. The client enforces the Encode length invariant (exactly
2*round(cbr*W*H*3) float32 values) and falls back to the builtin codec on
any plugin failure unless CodecSpec.strict_plugin is set.
"""
from __future__ import annotations

import os
import select
import struct
import subprocess
import threading
import time

import numpy as np

from . import codec as _codec
from .codec import CodecSpec, ImageFrame, symbol_budget
from .errors import (PluginCrash, PluginError, PluginTimeout,
                     ProtocolViolation)
from .sempath import SemanticVector

MAGIC = b"HSCC"
VERSION = 0x01
OP_ENCODE = 0x01
OP_DECODE = 0x02
OP_CAPABILITIES = 0x03
OP_ERROR = 0x7F
CAP_FLAG_PERSISTENT = 0x01

_HEADER = struct.Struct("<I4sBB")  # total_len, magic, version, op


def build_message(op: int, payload: bytes = b"") -> bytes:
    body = MAGIC + bytes([VERSION, op]) + payload
    return struct.pack("<I", len(body)) + body


def parse_body(body: bytes) -> tuple[int, bytes]:
    """Split a framed body into (op, payload), validating magic/version."""
    if len(body) < 6:
        raise ProtocolViolation("message body shorter than header")
    if body[:4] != MAGIC:
        raise ProtocolViolation(f"bad magic {body[:4]!r}")
    if body[4] != VERSION:
        raise ProtocolViolation(f"unsupported version {body[4]}")
    return body[5], body[6:]


def build_encode_request(img: ImageFrame, spec: CodecSpec) -> bytes:
    payload = struct.pack("<IIff", img.width, img.height, spec.snr_hint_db,
                          spec.target_cbr)
    payload += struct.pack("<I", len(img.data)) + img.data.tobytes()
    return build_message(OP_ENCODE, payload)


def build_encode_response(values: np.ndarray) -> bytes:
    vec = np.asarray(values, dtype="<f4")
    return build_message(OP_ENCODE, struct.pack("<I", len(vec)) + vec.tobytes())


def build_decode_request(values: np.ndarray, width: int, height: int,
                         spec: CodecSpec) -> bytes:
    vec = np.asarray(values, dtype="<f4")
    payload = struct.pack("<IIfI", width, height, spec.snr_hint_db, len(vec))
    return build_message(OP_DECODE, payload + vec.tobytes())


def build_decode_response(pixels: bytes) -> bytes:
    return build_message(OP_DECODE, struct.pack("<I", len(pixels)) + pixels)


def build_capabilities_request() -> bytes:
    return build_message(OP_CAPABILITIES)


def build_capabilities_response(persistent: bool = True) -> bytes:
    flags = CAP_FLAG_PERSISTENT if persistent else 0
    return build_message(OP_CAPABILITIES, bytes([VERSION, flags]))


def build_error_response(message: str) -> bytes:
    data = message.encode()
    return build_message(OP_ERROR, struct.pack("<I", len(data)) + data)


def _take(payload: bytes, fmt: str, offset: int):
    s = struct.Struct(fmt)
    if offset + s.size > len(payload):
        raise ProtocolViolation("payload field truncated")
    return s.unpack_from(payload, offset), offset + s.size


def parse_encode_request(payload: bytes):
    (w, h, snr, cbr), off = _take(payload, "<IIff", 0)
    (n,), off = _take(payload, "<I", off)
    if len(payload) - off != n or n != w * h * 3:
        raise ProtocolViolation("pixel payload length mismatch")
    return w, h, snr, cbr, np.frombuffer(payload, dtype=np.uint8, offset=off)


def parse_encode_response(payload: bytes) -> np.ndarray:
    (n,), off = _take(payload, "<I", 0)
    if len(payload) - off != 4 * n:
        raise ProtocolViolation("float vector length mismatch")
    return np.frombuffer(payload, dtype="<f4", offset=off).astype(np.float64)


def parse_decode_request(payload: bytes):
    (w, h, snr, n), off = _take(payload, "<IIfI", 0)
    if len(payload) - off != 4 * n:
        raise ProtocolViolation("float vector length mismatch")
    vec = np.frombuffer(payload, dtype="<f4", offset=off).astype(np.float64)
    return w, h, snr, vec


def parse_decode_response(payload: bytes) -> bytes:
    (n,), off = _take(payload, "<I", 0)
    if len(payload) - off != n:
        raise ProtocolViolation("pixel payload length mismatch")
    return payload[off:]


def parse_capabilities_response(payload: bytes) -> dict:
    if len(payload) < 2:
        raise ProtocolViolation("capabilities payload too short")
    return {"version": payload[0],
            "persistent": bool(payload[1] & CAP_FLAG_PERSISTENT)}


def read_message(stream) -> bytes | None:
    """Blocking framed read from a binary file object; None at clean EOF."""
    head = stream.read(4)
    if head == b"" or head is None:
        return None
    if len(head) < 4:
        raise ProtocolViolation("truncated length prefix")
    (total,) = struct.unpack("<I", head)
    body = stream.read(total)
    if body is None or len(body) < total:
        raise ProtocolViolation("truncated message body")
    return body


class PluginClient:
    """Serialized request/response exchange with one external codec process.

    The first exchange sends Capabilities; a plugin that advertises the
    persistent flag keeps its process alive for later requests, otherwise a
    fresh process is spawned per call.
    """

    def __init__(self, cmd: list[str], timeout: float = 30.0):
        if not cmd:
            raise ValueError("plugin command must be non-empty")
        self.cmd = list(cmd)
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._persistent = False
        self._negotiated = False
        self._lock = threading.Lock()

    def close(self) -> None:
        if self._proc is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _spawn(self) -> subprocess.Popen:
        try:
            return subprocess.Popen(self.cmd, stdin=subprocess.PIPE,
                                    stdout=subprocess.PIPE)
        except OSError as e:
            raise PluginCrash(f"cannot start plugin: {e}") from e

    def _read_exact(self, fd: int, n: int, deadline: float) -> bytes:
        buf = b""
        while len(buf) < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise PluginTimeout(f"no response within {self.timeout}s")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(fd, n - len(buf))
            if chunk == b"":
                if buf:
                    raise ProtocolViolation("truncated response")
                raise PluginCrash("plugin closed its output without responding")
            buf += chunk
        return buf

    def _exchange(self, request: bytes) -> tuple[int, bytes]:
        with self._lock:
            reuse = self._persistent and self._proc is not None \
                and self._proc.poll() is None
            if reuse:
                proc = self._proc
            else:
                self.close()
                proc = self._spawn()
                self._proc = proc
            try:
                proc.stdin.write(request)
                proc.stdin.flush()
            except (BrokenPipeError, OSError) as e:
                self._proc = None
                raise PluginCrash(f"plugin rejected request: {e}") from e
            deadline = time.monotonic() + self.timeout
            fd = proc.stdout.fileno()
            try:
                (total,) = struct.unpack("<I", self._read_exact(fd, 4, deadline))
                body = self._read_exact(fd, total, deadline)
            except PluginError:
                self.close()
                raise
            op, payload = parse_body(body)
            if op == OP_ERROR:
                (n,), off = _take(payload, "<I", 0)
                raise ProtocolViolation(
                    f"plugin error: {payload[off:off + n].decode(errors='replace')}")
            return op, payload

    def capabilities(self) -> dict:
        op, payload = self._exchange(build_capabilities_request())
        if op != OP_CAPABILITIES:
            raise ProtocolViolation(f"expected capabilities reply, got op {op}")
        caps = parse_capabilities_response(payload)
        self._persistent = caps["persistent"]
        self._negotiated = True
        return caps

    def _ensure_negotiated(self):
        if not self._negotiated:
            self.capabilities()

    def encode(self, img: ImageFrame, spec: CodecSpec) -> np.ndarray:
        """Run Encode and enforce the 2*k length (and evenness) invariant."""
        self._ensure_negotiated()
        op, payload = self._exchange(build_encode_request(img, spec))
        if op != OP_ENCODE:
            raise ProtocolViolation(f"expected encode reply, got op {op}")
        vec = parse_encode_response(payload)
        expected = 2 * symbol_budget(spec.target_cbr, img.width, img.height)
        if len(vec) % 2:
            raise ProtocolViolation(f"encode vector length {len(vec)} is odd")
        if len(vec) != expected:
            raise ProtocolViolation(
                f"encode vector length {len(vec)} != budget {expected}")
        return vec

    def decode(self, values: np.ndarray, width: int, height: int,
               spec: CodecSpec) -> ImageFrame:
        self._ensure_negotiated()
        op, payload = self._exchange(build_decode_request(values, width, height, spec))
        if op != OP_DECODE:
            raise ProtocolViolation(f"expected decode reply, got op {op}")
        pixels = parse_decode_response(payload)
        if len(pixels) != width * height * 3:
            raise ProtocolViolation(
                f"decode pixel count {len(pixels)} != {width * height * 3}")
        return ImageFrame(width, height, np.frombuffer(pixels, dtype=np.uint8))


def encode_image(img: ImageFrame, spec: CodecSpec,
                 client: PluginClient | None = None
                 ) -> tuple[SemanticVector, list[str]]:
    """Encode via the configured codec; plugin failures fall back to builtin."""
    notes: list[str] = []
    if spec.kind == _codec.KIND_PLUGIN:
        try:
            own = client is None
            client = client or PluginClient(spec.plugin_cmd, spec.plugin_timeout)
            try:
                values = client.encode(img, spec)
            finally:
                if own:
                    client.close()
            meta = {"width": img.width, "height": img.height,
                    "k": symbol_budget(spec.target_cbr, img.width, img.height)}
            return SemanticVector(values=values, shape_meta=meta), notes
        except PluginError as e:
            if spec.strict_plugin:
                raise
            notes.append(f"plugin encode failed ({e}); fell back to builtin")
    return _codec.builtin_encode(img, spec), notes


def decode_image(values: np.ndarray, width: int, height: int, spec: CodecSpec,
                 client: PluginClient | None = None
                 ) -> tuple[ImageFrame, list[str]]:
    notes: list[str] = []
    if spec.kind == _codec.KIND_PLUGIN:
        try:
            own = client is None
            client = client or PluginClient(spec.plugin_cmd, spec.plugin_timeout)
            try:
                return client.decode(values, width, height, spec), notes
            finally:
                if own:
                    client.close()
        except PluginError as e:
            if spec.strict_plugin:
                raise
            notes.append(f"plugin decode failed ({e}); fell back to builtin")
    return _codec.builtin_decode(values, width, height, spec), notes
