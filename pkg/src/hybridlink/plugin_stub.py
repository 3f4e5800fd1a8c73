"""Echo stub for the external-codec protocol, runnable as a module.

The default "echo" mode answers Capabilities correctly but echoes request
payloads back on Encode/Decode, deliberately violating the codec length
invariants -- it exercises client-side validation and the builtin fallback
without any real codec. "conform" implements a trivial but fully conforming
pixel-prefix codec; the remaining modes trigger specific failure paths.
"""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import plugin
from .codec import symbol_budget
from .errors import ProtocolViolation

MODES = ("echo", "conform", "odd", "truncate", "crash", "hang")


def _encode_reply(payload: bytes, mode: str) -> bytes:
    w, h, _snr, cbr, pixels = plugin.parse_encode_request(payload)
    k = symbol_budget(cbr, w, h)
    if mode == "echo":
        # wrong length on purpose: the whole pixel plane as floats
        vec = pixels.astype(np.float64) / 255.0 - 0.5
    elif mode == "odd":
        vec = np.zeros(2 * k + 1)
    else:  # conform: keep the first 2k centered pixel samples
        vec = pixels[:2 * k].astype(np.float64) / 255.0 - 0.5
    return plugin.build_encode_response(vec)


def _decode_reply(payload: bytes, mode: str) -> bytes:
    w, h, _snr, vec = plugin.parse_decode_request(payload)
    n_pix = w * h * 3
    if mode == "conform":
        out = np.full(n_pix, 128, dtype=np.uint8)
        n = min(len(vec), n_pix)
        out[:n] = np.clip(np.rint((vec[:n] + 0.5) * 255.0), 0, 255).astype(np.uint8)
    else:  # echo: length mirrors the vector, not the frame
        out = np.clip(np.rint((vec + 0.5) * 255.0), 0, 255).astype(np.uint8)
    return plugin.build_decode_response(out.tobytes())


def serve(mode: str, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin.buffer
    stdout = stdout or sys.stdout.buffer
    while True:
        try:
            body = plugin.read_message(stdin)
        except ProtocolViolation as e:
            stdout.write(plugin.build_error_response(str(e)))
            stdout.flush()
            return 1
        if body is None:
            return 0
        try:
            op, payload = plugin.parse_body(body)
            if op != plugin.OP_CAPABILITIES:
                if mode == "crash":
                    return 1
                if mode == "hang":
                    time.sleep(3600)
            if op == plugin.OP_CAPABILITIES:
                reply = plugin.build_capabilities_response(persistent=True)
            elif op == plugin.OP_ENCODE:
                reply = _encode_reply(payload, mode)
            elif op == plugin.OP_DECODE:
                reply = _decode_reply(payload, mode)
            else:
                reply = plugin.build_error_response(f"unknown op {op}")
            if mode == "truncate":
                reply = reply[:len(reply) // 2]
                stdout.write(reply)
                stdout.flush()
                return 1
            stdout.write(reply)
            stdout.flush()
        except ProtocolViolation as e:
            stdout.write(plugin.build_error_response(str(e)))
            stdout.flush()
            return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="codec protocol test stub")
    parser.add_argument("--mode", choices=MODES, default="echo")
    args = parser.parse_args(argv)
    return serve(args.mode)


if __name__ == "__main__":
    sys.exit(main())
