"""Reliable in-order delivery of frames between agent and auctioneer.

The agent drives every exchange: it hands a frame to the transport and gets
the auctioneer's reply frame back (or None for messages that need none).
"""
from __future__ import annotations

import socket
import struct
import threading
from collections import deque
from typing import Callable, Protocol

Handler = Callable[[bytes], "bytes | None"]


class Transport(Protocol):
    def exchange(self, frame: bytes) -> bytes | None: ...
    def close(self) -> None: ...


class TransportError(RuntimeError):
    pass


class InMemoryTransport:
    """A pair of queues; the auctioneer consumes one frame per step."""

    def __init__(self, handler: Handler):
        self.handler = handler
        self.to_auctioneer: deque[bytes] = deque()
        self.to_agent: deque[bytes] = deque()

    def exchange(self, frame: bytes) -> bytes | None:
        self.to_auctioneer.append(frame)
        reply = self.handler(self.to_auctioneer.popleft())
        if reply is None:
            return None
        self.to_agent.append(reply)
        return self.to_agent.popleft()

    def close(self) -> None:
        pass


_NO_REPLY = b"\x00\x00\x00\x00"


def _read_exact(sock: socket.socket, n: int) -> bytes:
    out = bytearray()
    while len(out) < n:
        chunk = sock.recv(n - len(out))
        if not chunk:
            raise TransportError("peer closed the stream")
        out += chunk
    return bytes(out)


def _read_frame(sock: socket.socket) -> bytes:
    head = _read_exact(sock, 4)
    (length,) = struct.unpack(">I", head)
    return head + _read_exact(sock, length) if length else head


class StreamTransport:
    """Carries the same frames over a byte stream to a served auctioneer.

    The auctioneer runs on its own thread behind a socket pair.  A
    zero-length frame stands for "no reply".
    """

    def __init__(self, handler: Handler):
        self._agent_sock, self._server_sock = socket.socketpair()
        self._thread = threading.Thread(target=self._serve, args=(handler,), daemon=True)
        self._error: BaseException | None = None
        self._thread.start()

    def _serve(self, handler: Handler):
        try:
            while True:
                try:
                    frame = _read_frame(self._server_sock)
                except TransportError:
                    return
                reply = handler(frame)
                self._server_sock.sendall(reply if reply is not None else _NO_REPLY)
        except BaseException as exc:  # surfaced on the agent side
            self._error = exc
            self._server_sock.close()

    def exchange(self, frame: bytes) -> bytes | None:
        try:
            self._agent_sock.sendall(frame)
            reply = _read_frame(self._agent_sock)
        except (OSError, TransportError) as exc:
            raise TransportError(f"stream failed: {self._error or exc}") from exc
        return None if reply == _NO_REPLY else reply

    def close(self) -> None:
        self._agent_sock.close()
        self._thread.join(timeout=5)
        self._server_sock.close()
