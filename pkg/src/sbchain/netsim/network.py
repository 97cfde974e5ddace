"""Authenticated point-to-point links with partially synchronous delays."""
from __future__ import annotations

import random
import threading
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Optional

from ..consensus.messages import Kind, Message


@dataclass(frozen=True)
class LinkModel:
    """Before ``gst`` a message is late with probability ``drop_rate``: it is held
    back and released at gst + U(0, delta). Every other message, and every
    message after GST, arrives within U(0, delta). Links never lose messages.
    """

    gst: float = 0.0
    delta: float = 0.01
    drop_rate: float = 0.0
    pre_gst_delay: float = 0.05

    def delay(self, rng: random.Random, now: float) -> float:
        if now < self.gst:
            if rng.random() < self.drop_rate:
                return self.gst - now + rng.uniform(0, self.delta)
            return rng.uniform(0, self.pre_gst_delay)
        return rng.uniform(0, self.delta)


Interceptor = Callable[[int, Message], list]


class Network:
    """Routes messages between node inboxes through each destination's event loop.

    ``interceptors[src]`` may rewrite what a byzantine node sends to each
    destination (message-level adversary). Counters record what was actually
    put on the wire, by message kind.
    """

    def __init__(self, n: int, loop_for, receivers: list, link: LinkModel = LinkModel(),
                 seed: int = 0, interceptors: Optional[dict[int, Interceptor]] = None,
                 on_send: Optional[Callable[[int, int, Message], None]] = None):
        self.n = n
        self.loop_for = loop_for
        self.receivers = receivers
        self.link = link
        self.rng = random.Random(seed)
        self.interceptors = interceptors or {}
        self.on_send = on_send
        self.sent: Counter = Counter()
        self.bytes_sent = 0
        self._lock = threading.Lock()

    def send(self, src: int, dst: int, msg: Message):
        out = [msg]
        icpt = self.interceptors.get(src)
        if icpt is not None:
            out = icpt(dst, msg)
        for m in out:
            self._put(src, dst, m)

    def broadcast(self, src: int, msg: Message):
        for dst in range(self.n):
            self.send(src, dst, msg)

    def _put(self, src: int, dst: int, msg: Message):
        loop = self.loop_for(dst)
        with self._lock:
            self.sent[msg.kind] += 1
            self.bytes_sent += msg.size
            delay = 0.0 if src == dst else self.link.delay(self.rng, loop.now())
        if self.on_send is not None:
            self.on_send(src, dst, msg)
        recv = self.receivers[dst]
        loop.after(delay, lambda: recv(msg))

    @property
    def gossip_messages(self) -> int:
        return self.sent[Kind.TX_GOSSIP]
