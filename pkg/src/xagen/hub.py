"""Per-session broadcast channels and stream-message framing.

Each live session owns one :class:`SessionChannel`; the ingest path publishes
serialized frames under the channel lock, and any number of subscribers drain
independent ordered queues.  A subscriber whose outbound backlog exceeds the
buffer limit is marked overflowed and disconnected rather than ever blocking
ingestion.
"""

from __future__ import annotations

import json
import queue
import threading

SUBSCRIBER_BUFFER_LIMIT = 4 * 1024 * 1024

_CLOSED = object()
_OVERFLOW = object()


class SubscriberClosed(Exception):
    """The channel finished; no further frames will arrive."""


class SubscriberOverflow(Exception):
    """The subscriber fell more than the buffer limit behind."""


class ChannelClosedError(Exception):
    """Subscription attempted after the session finished."""


def make_frame(type_: str, seq: int | None, payload: dict) -> str:
    """Serialize one StreamMessage: a single text frame per message."""
    return json.dumps({"v": 1, "type": type_, "seq": seq, "payload": payload},
                      separators=(",", ":"))


class Subscriber:
    def __init__(self, channel: "SessionChannel"):
        self._channel = channel
        self._queue: queue.Queue = queue.Queue()
        self.backlog_bytes = 0  # guarded by the channel lock
        self.overflowed = False

    def get(self, timeout: float | None = None) -> str | None:
        """Next frame, or None on timeout; raises when the stream ends."""
        try:
            item = self._queue.get(timeout=timeout)
        except queue.Empty:
            return None
        if item is _CLOSED:
            raise SubscriberClosed()
        if item is _OVERFLOW:
            raise SubscriberOverflow()
        with self._channel.lock:
            self.backlog_bytes -= len(item)
        return item


class SessionChannel:
    """Single-producer, many-subscriber frame fan-out for one session.

    The lock doubles as the session's ingest lock: the producer holds it
    while appending to the store, folding state and publishing, so a
    subscriber attached under the same lock observes a gapless stream.
    """

    def __init__(self, session_id: str):
        self.session_id = session_id
        self.lock = threading.RLock()
        self.closed = False
        self._subscribers: list[Subscriber] = []

    def subscribe(self) -> Subscriber:
        with self.lock:
            if self.closed:
                raise ChannelClosedError(self.session_id)
            subscriber = Subscriber(self)
            self._subscribers.append(subscriber)
            return subscriber

    def unsubscribe(self, subscriber: Subscriber) -> None:
        with self.lock:
            if subscriber in self._subscribers:
                self._subscribers.remove(subscriber)

    def publish(self, frames: list[str]) -> None:
        """Enqueue frames to every subscriber, never blocking the producer."""
        with self.lock:
            for subscriber in list(self._subscribers):
                for frame in frames:
                    if subscriber.overflowed:
                        break
                    if subscriber.backlog_bytes + len(frame) > SUBSCRIBER_BUFFER_LIMIT:
                        subscriber.overflowed = True
                        subscriber._queue.put(_OVERFLOW)
                        self._subscribers.remove(subscriber)
                        break
                    subscriber.backlog_bytes += len(frame)
                    subscriber._queue.put(frame)

    def close(self) -> None:
        with self.lock:
            if self.closed:
                return
            self.closed = True
            for subscriber in self._subscribers:
                subscriber._queue.put(_CLOSED)
            self._subscribers.clear()
