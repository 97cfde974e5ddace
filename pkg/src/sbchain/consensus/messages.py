from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from ..core import HashAlgo, Writer


class Kind(enum.IntEnum):
    RB_SEND = 1
    RB_ECHO = 2
    RB_READY = 3
    BC_EST = 4
    BC_AUX = 5
    BC_COORD = 6
    TX_GOSSIP = 7  # compatibility baseline only


RB_KINDS = (Kind.RB_SEND, Kind.RB_ECHO, Kind.RB_READY)
BC_KINDS = (Kind.BC_EST, Kind.BC_AUX, Kind.BC_COORD)


def bits_to_mask(values) -> int:
    return sum(1 << int(v) for v in values)


def mask_to_bits(mask: int) -> frozenset:
    return frozenset(v for v in (False, True) if mask >> int(v) & 1)


@dataclass(frozen=True)
class Message:
    """One consensus message.

    ``digest`` names the proposal for RB messages; ``payload`` carries the
    encoded block on RB_SEND and RB_ECHO. For BC messages ``value`` is the bit
    (EST, COORD) or a bitmask of the value set (AUX: 1 = {false}, 2 = {true}).
    """

    kind: Kind
    sender: int
    instance: int
    slot: int
    round: int = 0
    digest: bytes = b""
    value: int = 0
    payload: Optional[bytes] = None

    def encode(self) -> bytes:
        return (
            Writer()
            .int(int(self.kind))
            .int(self.sender)
            .int(self.instance)
            .int(self.slot)
            .int(self.round)
            .raw(self.digest)
            .int(self.value)
            .opt(self.payload)
            .getvalue()
        )

    def digest_hex(self) -> str:
        return HashAlgo.KECCAK256.digest(self.encode())[:8].hex()

    @property
    def size(self) -> int:
        return 48 + len(self.digest) + len(self.payload or b"")
