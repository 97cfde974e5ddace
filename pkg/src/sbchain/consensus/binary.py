"""Binary byzantine consensus, one bit per (instance, slot).

``DBFTBinary`` follows the DBFT structure: each round BV-broadcasts estimates
(relay at f+1, accept into bin_values at 2f+1), a rotating weak coordinator
suggests a value, every node broadcasts an AUX set once its round timer fired,
and a round closes on n-f AUX sets contained in bin_values. A value is decided
when it is the only one seen and matches the round parity. Timers grow with
the round number, which is what makes the protocol terminate after GST.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

from .messages import Kind, Message, bits_to_mask, mask_to_bits


class Transport(Protocol):
    def broadcast(self, msg: Message) -> None: ...
    def set_timer(self, delay: float, callback: Callable[[], None]) -> None: ...


class BinaryAgreement(Protocol):
    """What the superblock layer needs from a binary consensus implementation."""

    def propose(self, instance: int, slot: int, bit: bool) -> None: ...
    def handle(self, msg: Message) -> None: ...
    def has_proposed(self, instance: int, slot: int) -> bool: ...


@dataclass
class _Round:
    est_from: dict[bool, set] = field(default_factory=lambda: {False: set(), True: set()})
    est_sent: set = field(default_factory=set)
    bin_values: list = field(default_factory=list)  # insertion ordered
    aux: dict[int, frozenset] = field(default_factory=dict)
    coord_value: Optional[bool] = None
    coord_sent: bool = False
    timer_fired: bool = False
    aux_sent: bool = False
    done: bool = False


@dataclass
class _Slot:
    est: Optional[bool] = None
    round: int = 0
    decided: Optional[bool] = None
    decided_round: int = 0
    rounds: dict[int, _Round] = field(default_factory=dict)

    def rnd(self, r: int) -> _Round:
        st = self.rounds.get(r)
        if st is None:
            st = self.rounds[r] = _Round()
        return st


class DBFTBinary:
    def __init__(self, node_id: int, n: int, f: int, transport: Transport,
                 on_decide: Callable[[int, int, bool], None],
                 base_timeout: float = 0.01):
        self.node_id = node_id
        self.n = n
        self.f = f
        self.transport = transport
        self.on_decide = on_decide
        self.base_timeout = base_timeout
        self.slots: dict[tuple[int, int], _Slot] = {}

    def _slot(self, instance: int, slot: int) -> _Slot:
        key = (instance, slot)
        st = self.slots.get(key)
        if st is None:
            st = self.slots[key] = _Slot()
        return st

    def coordinator(self, r: int) -> int:
        return (r - 1) % self.n

    def has_proposed(self, instance: int, slot: int) -> bool:
        st = self.slots.get((instance, slot))
        return st is not None and st.est is not None

    def decided(self, instance: int, slot: int) -> Optional[bool]:
        st = self.slots.get((instance, slot))
        return None if st is None else st.decided

    def propose(self, instance: int, slot: int, bit: bool):
        st = self._slot(instance, slot)
        if st.est is not None:
            return
        st.est = bool(bit)
        self._start_round(instance, slot, st, 1)

    # -- rounds ------------------------------------------------------------

    def _start_round(self, instance: int, slot: int, st: _Slot, r: int):
        st.round = r
        rd = st.rnd(r)
        self._send_est(instance, slot, r, rd, st.est)
        self.transport.set_timer(self.base_timeout * r, lambda: self._timer(instance, slot, r))
        # estimates for this round may have arrived before we got here
        self._coord(instance, slot, st, r)
        self._progress(instance, slot, st)

    def _send_est(self, instance: int, slot: int, r: int, rd: _Round, v: bool):
        if v in rd.est_sent:
            return
        rd.est_sent.add(v)
        self.transport.broadcast(Message(Kind.BC_EST, self.node_id, instance, slot, r, value=int(v)))

    def _timer(self, instance: int, slot: int, r: int):
        st = self._slot(instance, slot)
        st.rnd(r).timer_fired = True
        self._progress(instance, slot, st)

    def _coord(self, instance: int, slot: int, st: _Slot, r: int):
        rd = st.rnd(r)
        if (self.coordinator(r) == self.node_id and st.round == r and rd.bin_values
                and not rd.coord_sent):
            rd.coord_sent = True
            self.transport.broadcast(Message(Kind.BC_COORD, self.node_id, instance, slot, r,
                                             value=int(rd.bin_values[0])))

    def handle(self, msg: Message):
        st = self._slot(msg.instance, msg.slot)
        r = msg.round
        if r < 1:
            return
        rd = st.rnd(r)
        if msg.kind is Kind.BC_EST:
            v = bool(msg.value & 1)
            voters = rd.est_from[v]
            if msg.sender in voters:
                return
            voters.add(msg.sender)
            if len(voters) >= self.f + 1:
                self._send_est(msg.instance, msg.slot, r, rd, v)
            if len(voters) >= 2 * self.f + 1 and v not in rd.bin_values:
                rd.bin_values.append(v)
                self._coord(msg.instance, msg.slot, st, r)
        elif msg.kind is Kind.BC_COORD:
            if msg.sender != self.coordinator(r) or rd.coord_value is not None:
                return
            rd.coord_value = bool(msg.value & 1)
        elif msg.kind is Kind.BC_AUX:
            if msg.sender in rd.aux:
                return  # a second, conflicting AUX from the same sender is ignored
            values = mask_to_bits(msg.value)
            if not values:
                return
            rd.aux[msg.sender] = values
        else:
            return
        if st.round == r:
            self._progress(msg.instance, msg.slot, st)

    def _progress(self, instance: int, slot: int, st: _Slot):
        r = st.round
        rd = st.rnd(r)
        if rd.done:
            return
        if not rd.aux_sent:
            if not (rd.bin_values and rd.timer_fired):
                return
            if rd.coord_value is not None and rd.coord_value in rd.bin_values:
                aux = {rd.coord_value}
            else:
                aux = set(rd.bin_values)
            rd.aux_sent = True
            self.transport.broadcast(Message(Kind.BC_AUX, self.node_id, instance, slot, r,
                                             value=bits_to_mask(aux)))
            if rd.done:  # the broadcast may have re-entered and closed the round
                return
        allowed = set(rd.bin_values)
        supporting = [vals for vals in rd.aux.values() if vals <= allowed]
        if len(supporting) < self.n - self.f:
            return
        rd.done = True
        values = frozenset().union(*supporting)
        parity = bool(r % 2)
        if len(values) == 1:
            (v,) = values
            st.est = v
            if v == parity and st.decided is None:
                st.decided = v
                st.decided_round = r
                self.on_decide(instance, slot, v)
        else:
            st.est = parity
        if st.decided is not None and r >= st.decided_round + 2:
            return  # everyone has decided by now; stop spawning rounds
        self._start_round(instance, slot, st, r + 1)
