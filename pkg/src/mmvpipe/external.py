"""Host side of the external executor protocol: spawn, handshake, infer.

The child process speaks length-prefixed binary frames over its standard
input/output. A session handles one in-flight request at a time (guarded
by a lock); parallelism comes from pooling sessions, not from sharing one.
"""

from __future__ import annotations

import json
import os
import select
import struct
import subprocess
import threading
import time

import numpy as np

from .errors import (
    ExternalProtocolError,
    HelloMismatch,
    ShapeMismatch,
    SpawnFailure,
)
from .executors import ExecutorSpec, _check_batch
from .wire import PROTOCOL_VERSION, WIRE_MAGIC, encode_frame, payload_length, tensor_header

_HELLO_KEYS = ("v", "max_batch", "in_channels", "out_channels", "spatial_rank")


class ExecutorSession:
    """One live child process plus its declared capabilities."""

    def __init__(self, spec: ExecutorSpec, proc: subprocess.Popen, hello: dict):
        self.spec = spec
        self.proc = proc
        self.hello = hello
        self.max_batch = int(hello["max_batch"])
        self._lock = threading.Lock()
        self._closed = False

    def infer(self, batch: np.ndarray) -> np.ndarray:
        return external_infer(self, batch)

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            if self.proc.stdin:
                self.proc.stdin.close()
            self.proc.wait(timeout=self.spec.timeout)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _read_exact(proc: subprocess.Popen, n: int, deadline: float) -> bytes:
    """Read exactly n bytes from the child's stdout before the deadline."""
    fd = proc.stdout.fileno()
    chunks = []
    got = 0
    while got < n:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise ExternalProtocolError(f"timeout waiting for {n - got} more frame bytes")
        ready, _, _ = select.select([fd], [], [], min(remaining, 0.5))
        if not ready:
            if proc.poll() is not None:
                raise ExternalProtocolError(
                    f"executor exited with code {proc.returncode} mid-frame"
                )
            continue
        chunk = os.read(fd, n - got)
        if not chunk:
            code = proc.poll()
            raise ExternalProtocolError(
                f"executor closed its output after {got} of {n} bytes"
                + (f" (exit code {code})" if code is not None else "")
            )
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def _read_frame(proc: subprocess.Popen, timeout: float) -> tuple[dict, np.ndarray | None]:
    deadline = time.monotonic() + timeout
    prefix = _read_exact(proc, 8, deadline)
    if prefix[:4] != WIRE_MAGIC:
        raise ExternalProtocolError(f"bad frame magic {prefix[:4]!r} from executor")
    (hlen,) = struct.unpack("<I", prefix[4:8])
    if hlen > 1 << 20:
        raise ExternalProtocolError(f"unreasonable header length {hlen}")
    try:
        header = json.loads(_read_exact(proc, hlen, deadline).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ExternalProtocolError(f"executor sent a non-JSON header: {exc}") from exc
    if not isinstance(header, dict):
        raise ExternalProtocolError(f"executor header is not an object: {header!r}")
    nbytes = payload_length(header) if header.get("type") in ("infer", "result") else 0
    payload = None
    if nbytes:
        raw = _read_exact(proc, nbytes, deadline)
        payload = np.frombuffer(raw, dtype="<f4").reshape(header["shape"])
    return header, payload


def external_spawn(spec: ExecutorSpec) -> ExecutorSession:
    """Start the child and validate its hello declaration against the spec."""
    try:
        proc = subprocess.Popen(
            list(spec.command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=None,
        )
    except OSError as exc:
        raise SpawnFailure(f"cannot start {spec.command!r}: {exc}") from exc
    try:
        header, _ = _read_frame(proc, spec.timeout)
    except ExternalProtocolError:
        proc.kill()
        proc.wait()
        raise
    if header.get("type") != "hello":
        proc.kill()
        proc.wait()
        raise ExternalProtocolError(f"expected a hello frame, got {header.get('type')!r}")
    missing = [k for k in _HELLO_KEYS if k not in header]
    if missing:
        proc.kill()
        proc.wait()
        raise ExternalProtocolError(f"hello frame missing keys {missing}")
    problems = []
    if header["v"] != PROTOCOL_VERSION:
        problems.append(f"protocol v{header['v']} != v{PROTOCOL_VERSION}")
    if header["in_channels"] != spec.in_channels:
        problems.append(f"in_channels {header['in_channels']} != {spec.in_channels}")
    if header["out_channels"] != spec.out_channels:
        problems.append(f"out_channels {header['out_channels']} != {spec.out_channels}")
    if header["spatial_rank"] != spec.spatial_rank:
        problems.append(f"spatial_rank {header['spatial_rank']} != {spec.spatial_rank}")
    if not isinstance(header["max_batch"], int) or header["max_batch"] < 1:
        problems.append(f"max_batch {header['max_batch']!r} invalid")
    if problems:
        proc.kill()
        proc.wait()
        raise HelloMismatch("; ".join(problems))
    return ExecutorSession(spec, proc, header)


def external_infer(session: ExecutorSession, batch: np.ndarray) -> np.ndarray:
    """One infer/result round trip on a live session."""
    spec = session.spec
    batch = _check_batch(spec, batch)
    if batch.shape[0] > session.max_batch:
        raise ValueError(f"batch {batch.shape[0]} exceeds declared max batch {session.max_batch}")
    frame = encode_frame(tensor_header("infer", batch.shape), batch)
    with session._lock:
        try:
            session.proc.stdin.write(frame)
            session.proc.stdin.flush()
        except (OSError, ValueError, BrokenPipeError) as exc:
            raise ExternalProtocolError(f"cannot write to executor: {exc}") from exc
        header, payload = _read_frame(session.proc, spec.timeout)
    if header.get("type") == "error":
        raise ExternalProtocolError(f"executor error: {header.get('note', '(no note)')}")
    if header.get("type") != "result":
        raise ExternalProtocolError(f"expected a result frame, got {header.get('type')!r}")
    shape = tuple(header["shape"])
    expected = (batch.shape[0], spec.out_channels) + batch.shape[2:]
    if shape != expected:
        raise ShapeMismatch(f"executor returned shape {shape}, expected {expected}")
    return payload


class ExternalExecutor:
    """Executor-protocol adapter over a lazily spawned session.

    Oversized batches are split into chunks of the child's declared max
    batch. Calls are serialized per-process; pool several ExternalExecutor
    instances for parallelism.
    """

    def __init__(self, spec: ExecutorSpec):
        self.spec = spec
        self._session: ExecutorSession | None = None

    def _ensure(self) -> ExecutorSession:
        if self._session is None:
            self._session = external_spawn(self.spec)
        return self._session

    def __call__(self, batch: np.ndarray) -> np.ndarray:
        session = self._ensure()
        batch = _check_batch(self.spec, batch)
        if batch.shape[0] <= session.max_batch:
            return external_infer(session, batch)
        outs = [
            external_infer(session, batch[i : i + session.max_batch])
            for i in range(0, batch.shape[0], session.max_batch)
        ]
        return np.concatenate(outs, axis=0)

    def close(self) -> None:
        if self._session is not None:
            self._session.close()
            self._session = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
