"""Worker/learner messages and length-prefixed frame channels."""

from __future__ import annotations

import collections
import pickle
import socket
import struct
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

HEADER = struct.Struct(">I")
MAX_FRAME = 1 << 31


@dataclass
class RolloutBatch:
    worker_id: int
    version: int
    seq_start: int
    chunks: list
    episodes: List[dict] = field(default_factory=list)
    env_steps: int = 0


@dataclass
class Heartbeat:
    worker_id: int
    time: float


@dataclass
class ParamBroadcast:
    version: int
    tensors: Dict[str, Any]
    norm: dict
    n_steps: int
    intrinsic_state: Any = None


@dataclass
class Stop:
    reason: str = "stop"


class ChannelClosed(ConnectionError):
    pass


class ChannelTimeout(TimeoutError):
    pass


def encode(msg) -> bytes:
    body = pickle.dumps(msg, protocol=pickle.HIGHEST_PROTOCOL)
    if len(body) >= MAX_FRAME:
        raise ValueError("frame too large")
    return HEADER.pack(len(body)) + body


def decode(frame: bytes):
    (n,) = HEADER.unpack_from(frame)
    body = frame[HEADER.size:]
    if len(body) != n:
        raise ValueError(f"truncated frame: {len(body)} of {n} bytes")
    return pickle.loads(body)


class SocketChannel:
    """Blocking length-prefixed frames over a connected stream socket."""

    def __init__(self, sock: socket.socket):
        self.sock = sock

    def send(self, msg) -> None:
        try:
            self.sock.sendall(encode(msg))
        except OSError as e:
            raise ChannelClosed(str(e)) from e

    def _read(self, n: int, deadline: Optional[float]) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            if deadline is not None:
                left = deadline - time.monotonic()
                if left <= 0:
                    raise ChannelTimeout("no message before deadline")
                self.sock.settimeout(left)
            else:
                self.sock.settimeout(None)
            try:
                part = self.sock.recv(n - len(buf))
            except socket.timeout as e:
                raise ChannelTimeout("no message before deadline") from e
            except OSError as e:
                raise ChannelClosed(str(e)) from e
            if not part:
                raise ChannelClosed("peer closed the connection")
            buf.extend(part)
        return bytes(buf)

    def recv(self, timeout: Optional[float] = None):
        deadline = None if timeout is None else time.monotonic() + timeout
        head = self._read(HEADER.size, deadline)
        (n,) = HEADER.unpack(head)
        return pickle.loads(self._read(n, deadline))

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class InProcChannel:
    """One end of an in-memory channel pair; frames still go through encode/decode."""

    def __init__(self, inbox: collections.deque, outbox: collections.deque):
        self.inbox = inbox
        self.outbox = outbox
        self.closed = False

    @classmethod
    def pair(cls):
        a, b = collections.deque(), collections.deque()
        return cls(a, b), cls(b, a)

    def send(self, msg) -> None:
        if self.closed:
            raise ChannelClosed("channel closed")
        self.outbox.append(encode(msg))

    def recv(self, timeout: Optional[float] = None):
        if not self.inbox:
            raise ChannelTimeout("no message queued")
        return decode(self.inbox.popleft())

    def close(self) -> None:
        self.closed = True
