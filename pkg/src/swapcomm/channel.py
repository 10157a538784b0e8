"""Public classical announcement channel.

Two interchangeable implementations: an in-process channel for single
process sessions and a TCP line protocol for two-process sessions. Both
feed an always-available tap that records every announcement in delivery
order; the tap is the eavesdropper's entire view.

Wire format, one announcement per line, UTF-8, newline-terminated:

    {"v":1,"sid":"<token>","blk":3,"side":"A","kind":"Measurement","label":"PsiPlus"}

The label field is present exactly for Measurement announcements. The
channel is unauthenticated; see README for the known classical-layer gap.
"""
from __future__ import annotations

import enum
import json
import socket
from collections import deque
from dataclasses import dataclass

from .quantum import BellLabel

WIRE_VERSION = 1
WIRE_FIELDS = ("v", "sid", "blk", "side", "kind", "label")
SIDES = ("A", "B")


class ChannelError(Exception):
    """Base for channel failures."""


class TransportError(ChannelError):
    """Underlying transport failed (connect, timeout, closed socket)."""


class FrameError(ChannelError):
    """Malformed wire frame; byte_offset locates it in the stream."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (at byte {byte_offset})")
        self.byte_offset = byte_offset


class OrderingError(ChannelError):
    """Announcements from one side arrived out of block order."""


class AnnouncementKind(enum.Enum):
    MEASUREMENT = "Measurement"
    NO_MESSAGE = "NoMessageDeclaration"
    SESSION_START = "SessionStart"
    SESSION_END = "SessionEnd"


@dataclass(frozen=True)
class Announcement:
    """One public statement: a measurement result or a control message."""

    session_id: str
    block: int
    side: str
    kind: AnnouncementKind
    label: BellLabel | None = None

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}, got {self.side!r}")
        if (self.kind is AnnouncementKind.MEASUREMENT) != (self.label is not None):
            raise ValueError("exactly Measurement announcements carry a label")
        if self.block < 0:
            raise ValueError("block must be non-negative")

    def to_wire(self) -> str:
        fields: dict = {
            "v": WIRE_VERSION,
            "sid": self.session_id,
            "blk": self.block,
            "side": self.side,
            "kind": self.kind.value,
        }
        if self.label is not None:
            fields["label"] = self.label.value
        return json.dumps(fields, separators=(",", ":"))

    @classmethod
    def from_wire(cls, line: str, byte_offset: int = 0) -> "Announcement":
        try:
            fields = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FrameError(f"invalid frame: {exc.msg}", byte_offset + exc.pos) from exc
        if not isinstance(fields, dict):
            raise FrameError("frame is not an object", byte_offset)
        unknown = set(fields) - set(WIRE_FIELDS)
        if unknown:
            raise FrameError(f"unexpected fields {sorted(unknown)}", byte_offset)
        if fields.get("v") != WIRE_VERSION:
            raise FrameError(f"unsupported version {fields.get('v')!r}", byte_offset)
        try:
            kind = AnnouncementKind(fields["kind"])
            label = BellLabel(fields["label"]) if "label" in fields else None
            return cls(
                session_id=fields["sid"],
                block=fields["blk"],
                side=fields["side"],
                kind=kind,
                label=label,
            )
        except (KeyError, ValueError) as exc:
            raise FrameError(f"invalid frame: {exc}", byte_offset) from exc


class _OrderGate:
    """Enforces strictly increasing Measurement blocks per side."""

    def __init__(self):
        self._last: dict[str, int] = {}

    def check(self, ann: Announcement) -> None:
        if ann.kind is not AnnouncementKind.MEASUREMENT:
            return
        last = self._last.get(ann.side, 0)
        if ann.block <= last:
            raise OrderingError(
                f"side {ann.side} announced block {ann.block} after block {last}"
            )
        self._last[ann.side] = ann.block


class InProcessEndpoint:
    def __init__(self, channel: "InProcessChannel", side: str):
        self._channel = channel
        self.side = side

    def send(self, ann: Announcement) -> None:
        self._channel._deliver(self.side, ann)

    def receive(self) -> Announcement:
        queue = self._channel._queues[self.side]
        if not queue:
            raise TransportError(f"endpoint {self.side}: nothing to receive")
        return queue.popleft()

    def close(self) -> None:
        pass


class InProcessChannel:
    """Duplex in-memory channel; delivery order defines the tap order."""

    def __init__(self):
        self._queues: dict[str, deque[Announcement]] = {s: deque() for s in SIDES}
        self._tap: list[Announcement] = []
        self._gate = _OrderGate()

    def endpoint(self, side: str) -> InProcessEndpoint:
        if side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}")
        return InProcessEndpoint(self, side)

    def _deliver(self, sender: str, ann: Announcement) -> None:
        if ann.side != sender:
            raise ChannelError(f"endpoint {sender} cannot send for side {ann.side}")
        self._gate.check(ann)
        other = "B" if sender == "A" else "A"
        self._queues[other].append(ann)
        self._tap.append(ann)

    def tap(self) -> tuple[Announcement, ...]:
        """Every announcement so far, in delivery order."""
        return tuple(self._tap)


class TcpEndpoint:
    """One end of the public TCP channel, speaking the line protocol.

    Tracks byte offsets of incoming frames so malformed ones can be located,
    and taps everything sent or received in wire order.
    """

    def __init__(self, sock: socket.socket, side: str, timeout: float = 10.0):
        self.side = side
        self._sock = sock
        self._sock.settimeout(timeout)
        self._reader = sock.makefile("rb")
        self._read_offset = 0
        self._gate = _OrderGate()
        self._tap: list[Announcement] = []

    def send(self, ann: Announcement) -> None:
        if ann.side != self.side:
            raise ChannelError(f"endpoint {self.side} cannot send for side {ann.side}")
        try:
            self._sock.sendall(ann.to_wire().encode("utf-8") + b"\n")
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc
        self._tap.append(ann)

    def receive(self) -> Announcement:
        offset = self._read_offset
        try:
            raw = self._reader.readline()
        except OSError as exc:
            raise TransportError(f"receive failed: {exc}") from exc
        if not raw:
            raise TransportError("peer closed the connection")
        self._read_offset += len(raw)
        if not raw.endswith(b"\n"):
            raise FrameError("frame is not newline-terminated", offset)
        try:
            line = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FrameError(f"invalid frame: {exc.reason}", offset + exc.start) from exc
        ann = Announcement.from_wire(line.rstrip("\n"), offset)
        self._gate.check(ann)
        self._tap.append(ann)
        return ann

    def tap(self) -> tuple[Announcement, ...]:
        return tuple(self._tap)

    def close(self) -> None:
        try:
            self._reader.close()
            self._sock.close()
        except OSError:
            pass


# --------------------------------------------------------------------------
# Two-process plumbing. The client opens two connections to the same port:
# first the substrate link, then the public channel. The substrate link
# stands in for the pre-shared entangled pairs; it carries one private
# hello per party (config cross-check plus that party's encoded operations)
# and is invisible to the tap. Only the public channel is the transcript.
# --------------------------------------------------------------------------

SUBSTRATE_PREAMBLE = b"swapcomm-substrate v1\n"
PUBLIC_PREAMBLE = b"swapcomm-public v1\n"


def _read_line(sock_file, what: str) -> bytes:
    line = sock_file.readline()
    if not line:
        raise TransportError(f"peer closed while reading {what}")
    return line


class SubstrateLink:
    """Private side channel representing the shared entangled pairs."""

    def __init__(self, sock: socket.socket, timeout: float = 10.0):
        self._sock = sock
        self._sock.settimeout(timeout)
        self._reader = sock.makefile("rb")

    def send_hello(self, hello: dict) -> None:
        payload = dict(hello)
        payload["v"] = WIRE_VERSION
        try:
            self._sock.sendall(json.dumps(payload, separators=(",", ":")).encode() + b"\n")
        except OSError as exc:
            raise TransportError(f"substrate send failed: {exc}") from exc

    def receive_hello(self) -> dict:
        try:
            raw = _read_line(self._reader, "substrate hello")
        except OSError as exc:
            raise TransportError(f"substrate receive failed: {exc}") from exc
        try:
            hello = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise TransportError(f"invalid substrate hello: {exc}") from exc
        if not isinstance(hello, dict) or hello.get("v") != WIRE_VERSION:
            raise TransportError("invalid substrate hello")
        return hello

    def close(self) -> None:
        try:
            self._reader.close()
            self._sock.close()
        except OSError:
            pass


class SessionListener:
    """Accepts the two connections of a remote party (substrate, then public)."""

    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self._timeout = timeout
        self._server = socket.create_server((host, port))
        self._server.settimeout(timeout)

    @property
    def address(self) -> tuple[str, int]:
        return self._server.getsockname()[:2]

    def accept(self) -> tuple[SubstrateLink, TcpEndpoint]:
        substrate = self._accept_kind(SUBSTRATE_PREAMBLE)
        public = self._accept_kind(PUBLIC_PREAMBLE)
        return SubstrateLink(substrate, self._timeout), TcpEndpoint(
            public, side="A", timeout=self._timeout
        )

    def _accept_kind(self, expected: bytes) -> socket.socket:
        try:
            conn, _ = self._server.accept()
            conn.settimeout(self._timeout)
            # Byte-at-a-time so no buffered reader can swallow later frames.
            preamble = b""
            while not preamble.endswith(b"\n") and len(preamble) < 128:
                chunk = conn.recv(1)
                if not chunk:
                    break
                preamble += chunk
        except OSError as exc:
            raise TransportError(f"accept failed: {exc}") from exc
        if preamble != expected:
            conn.close()
            raise TransportError(
                f"unexpected preamble {preamble!r}, wanted {expected!r}"
            )
        return conn

    def close(self) -> None:
        try:
            self._server.close()
        except OSError:
            pass


def dial_session(host: str, port: int, timeout: float = 10.0) -> tuple[SubstrateLink, TcpEndpoint]:
    """Connect to a listening party; returns (substrate, public endpoint)."""

    def connect(preamble: bytes) -> socket.socket:
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
            sock.sendall(preamble)
        except OSError as exc:
            raise TransportError(f"cannot reach {host}:{port}: {exc}") from exc
        return sock

    substrate = connect(SUBSTRATE_PREAMBLE)
    public = connect(PUBLIC_PREAMBLE)
    return SubstrateLink(substrate, timeout), TcpEndpoint(public, side="B", timeout=timeout)
