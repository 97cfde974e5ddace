"""Domain types shared by every module: transactions, blocks, receipts, hashes.

All values are frozen dataclasses. Serialization is a length-prefixed field
concatenation in a fixed field order, so every encoding is injective and
decodes back to an equal value.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Optional, Sequence

import blake3
import sha3
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

MAX_TX_SIZE = 32 * 1024
U64_MAX = 2**64 - 1
U128_MAX = 2**128 - 1

GAS_PAYMENT = 21000
GAS_PER_WRITE = 100
OP_RECORD_SIZE = 64

ZERO_HASH = b"\x00" * 32


class DecodeError(ValueError):
    pass


class HashAlgo(enum.Enum):
    KECCAK256 = "keccak256"
    BLAKE3 = "blake3"

    def digest(self, data: bytes) -> bytes:
        if self is HashAlgo.KECCAK256:
            return sha3.keccak_256(data).digest()
        return blake3.blake3(data).digest()

    @classmethod
    def parse(cls, name: str) -> "HashAlgo":
        name = name.lower()
        if name in ("keccak", "keccak256", "keccak-256"):
            return cls.KECCAK256
        if name == "blake3":
            return cls.BLAKE3
        raise ValueError(f"unknown hash algorithm {name!r}")


@dataclass(frozen=True)
class Hash:
    digest: bytes
    algo: HashAlgo = HashAlgo.KECCAK256

    def __post_init__(self):
        if len(self.digest) != 32:
            raise ValueError("digest must be 32 bytes")

    def __bytes__(self) -> bytes:
        return self.digest

    def hex(self) -> str:
        return self.digest.hex()


# ---------------------------------------------------------------------------
# low-level codec


def int_bytes(x: int) -> bytes:
    """Minimal two's-complement big-endian bytes (0 -> b'\\x00')."""
    return x.to_bytes(x.bit_length() // 8 + 1, "big", signed=True)


class Writer:
    __slots__ = ("parts",)

    def __init__(self):
        self.parts: list[bytes] = []

    def raw(self, b: bytes) -> "Writer":
        self.parts.append(struct.pack(">I", len(b)))
        self.parts.append(b)
        return self

    def int(self, x: int) -> "Writer":
        return self.raw(int_bytes(x))

    def opt(self, b: Optional[bytes]) -> "Writer":
        # presence flag keeps None distinct from b""
        if b is None:
            self.parts.append(b"\x00")
            return self
        self.parts.append(b"\x01")
        return self.raw(b)

    def seq(self, items: Sequence[bytes]) -> "Writer":
        self.parts.append(struct.pack(">I", len(items)))
        for item in items:
            self.raw(item)
        return self

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class Reader:
    __slots__ = ("data", "pos")

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _take(self, k: int) -> bytes:
        end = self.pos + k
        if end > len(self.data):
            raise DecodeError("truncated input")
        out = self.data[self.pos:end]
        self.pos = end
        return out

    def raw(self) -> bytes:
        (k,) = struct.unpack(">I", self._take(4))
        return self._take(k)

    def int(self) -> int:
        b = self.raw()
        if not b:
            raise DecodeError("empty integer field")
        return int.from_bytes(b, "big", signed=True)

    def opt(self) -> Optional[bytes]:
        flag = self._take(1)
        if flag == b"\x00":
            return None
        if flag != b"\x01":
            raise DecodeError("bad presence flag")
        return self.raw()

    def seq(self) -> list[bytes]:
        (k,) = struct.unpack(">I", self._take(4))
        return [self.raw() for _ in range(k)]

    def done(self):
        if self.pos != len(self.data):
            raise DecodeError("trailing bytes")


# ---------------------------------------------------------------------------
# keys and addresses


def address_from_public_key(public_key: bytes) -> bytes:
    return HashAlgo.KECCAK256.digest(public_key)[-20:]


@dataclass(frozen=True)
class KeyPair:
    private: Ed25519PrivateKey = field(repr=False, compare=False)
    public: bytes

    @classmethod
    def from_seed(cls, seed: bytes) -> "KeyPair":
        secret = HashAlgo.KECCAK256.digest(b"keypair" + seed)
        priv = Ed25519PrivateKey.from_private_bytes(secret)
        pub = priv.public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )
        return cls(priv, pub)

    @property
    def address(self) -> bytes:
        return address_from_public_key(self.public)


# ---------------------------------------------------------------------------
# transactions


@dataclass(frozen=True)
class Transaction:
    """A signed payment or exchange-op.

    ``recipient=None`` with a non-empty payload creates a contract account;
    ``value`` is deliberately not range-checked here so that eager and lazy
    validation can reject malformed values coming from byzantine peers.
    """

    sender: bytes
    recipient: Optional[bytes]
    nonce: int
    value: int
    gas_limit: int
    gas_price: int
    payload: bytes = b""
    public_key: bytes = b""
    signature: bytes = b""

    def __post_init__(self):
        if len(self.sender) != 20:
            raise ValueError("sender must be a 20-byte address")
        if self.recipient is not None and len(self.recipient) != 20:
            raise ValueError("recipient must be a 20-byte address or None")
        if not 0 <= self.nonce <= U64_MAX:
            raise ValueError("nonce out of range")
        if not 0 < self.gas_limit <= U64_MAX or not 0 < self.gas_price <= U64_MAX:
            raise ValueError("gas limit and price must be positive u64")

    @cached_property
    def _encoding(self) -> bytes:
        # memoised; the instance is immutable so the encoding cannot go stale
        return _tx_writer(self, self.signature).getvalue()

    @property
    def max_cost(self) -> int:
        return self.value + self.gas_limit * self.gas_price


def _tx_writer(tx: Transaction, signature: bytes) -> Writer:
    return (
        Writer()
        .raw(tx.sender)
        .opt(tx.recipient)
        .int(tx.nonce)
        .int(tx.value)
        .int(tx.gas_limit)
        .int(tx.gas_price)
        .raw(tx.payload)
        .raw(tx.public_key)
        .raw(signature)
    )


def canonical_encode(tx: Transaction) -> bytes:
    return tx._encoding


def signing_bytes(tx: Transaction) -> bytes:
    return _tx_writer(tx, b"").getvalue()


def _read_tx(r: Reader) -> Transaction:
    return Transaction(
        sender=r.raw(),
        recipient=r.opt(),
        nonce=r.int(),
        value=r.int(),
        gas_limit=r.int(),
        gas_price=r.int(),
        payload=r.raw(),
        public_key=r.raw(),
        signature=r.raw(),
    )


def decode_transaction(data: bytes) -> Transaction:
    r = Reader(data)
    try:
        tx = _read_tx(r)
    except ValueError as e:
        raise DecodeError(str(e)) from e
    r.done()
    return tx


def tx_hash(tx: Transaction, algo: HashAlgo = HashAlgo.KECCAK256) -> Hash:
    return Hash(algo.digest(canonical_encode(tx)), algo)


def sign(tx: Transaction, key: KeyPair) -> Transaction:
    unsigned = replace(tx, public_key=key.public, signature=b"")
    return replace(unsigned, signature=key.private.sign(signing_bytes(unsigned)))


def verify_signature(tx: Transaction) -> bool:
    if len(tx.public_key) != 32 or len(tx.signature) != 64:
        return False
    if address_from_public_key(tx.public_key) != tx.sender:
        return False
    try:
        Ed25519PublicKey.from_public_bytes(tx.public_key).verify(
            tx.signature, signing_bytes(tx)
        )
    except (InvalidSignature, ValueError):
        return False
    return True


# exchange-op payload: back-to-back 64-byte (key, value) storage writes


def encode_ops(writes: Iterable[tuple[bytes, bytes]]) -> bytes:
    out = []
    for k, v in writes:
        if len(k) != 32 or len(v) != 32:
            raise ValueError("storage keys and values are 32 bytes")
        out.append(k + v)
    return b"".join(out)


def decode_ops(payload: bytes) -> list[tuple[bytes, bytes]]:
    if len(payload) % OP_RECORD_SIZE:
        raise DecodeError("exchange-op payload is not a whole number of records")
    return [
        (payload[i:i + 32], payload[i + 32:i + 64])
        for i in range(0, len(payload), OP_RECORD_SIZE)
    ]


def intrinsic_gas(tx: Transaction) -> int:
    writes = -(-len(tx.payload) // OP_RECORD_SIZE)
    return GAS_PAYMENT + GAS_PER_WRITE * writes


def contract_address(sender: bytes, nonce: int) -> bytes:
    return HashAlgo.KECCAK256.digest(Writer().raw(sender).int(nonce).getvalue())[-20:]


# ---------------------------------------------------------------------------
# accounts


@dataclass(frozen=True)
class Account:
    """Account state. ``storage_root`` is None for externally owned accounts."""

    nonce: int = 0
    balance: int = 0
    storage_root: Optional[bytes] = None

    def __post_init__(self):
        if self.balance < 0:
            raise ValueError("negative balance")
        if self.nonce < 0:
            raise ValueError("negative nonce")


def encode_account(acct: Account) -> bytes:
    return Writer().int(acct.nonce).int(acct.balance).opt(acct.storage_root).getvalue()


def decode_account(data: bytes) -> Account:
    r = Reader(data)
    acct = Account(r.int(), r.int(), r.opt())
    r.done()
    return acct


# ---------------------------------------------------------------------------
# blocks


@dataclass(frozen=True)
class Block:
    proposer_id: int
    timestamp: int
    transactions: tuple[Transaction, ...]
    number: int = 0
    parent_hash: bytes = ZERO_HASH
    state_root: bytes = ZERO_HASH
    tx_root: bytes = ZERO_HASH
    receipt_root: bytes = ZERO_HASH

    def __post_init__(self):
        if not isinstance(self.transactions, tuple):
            object.__setattr__(self, "transactions", tuple(self.transactions))
        if not 0 <= self.timestamp <= U64_MAX:
            raise ValueError("timestamp must fit in u64")


def encode_header(block: Block) -> bytes:
    return (
        Writer()
        .int(block.proposer_id)
        .int(block.number)
        .int(block.timestamp)
        .raw(block.parent_hash)
        .raw(block.state_root)
        .raw(block.tx_root)
        .raw(block.receipt_root)
        .int(len(block.transactions))
        .getvalue()
    )


def encode_body(txs: Sequence[Transaction]) -> bytes:
    return Writer().seq([canonical_encode(t) for t in txs]).getvalue()


def decode_body(data: bytes) -> tuple[Transaction, ...]:
    r = Reader(data)
    txs = tuple(decode_transaction(b) for b in r.seq())
    r.done()
    return txs


def encode_block(block: Block) -> bytes:
    return Writer().raw(encode_header(block)).raw(encode_body(block.transactions)).getvalue()


def decode_block(data: bytes) -> Block:
    try:
        r = Reader(data)
        header, body = r.raw(), r.raw()
        r.done()
        h = Reader(header)
        proposer, number, ts = h.int(), h.int(), h.int()
        parent, sroot, troot, rroot = h.raw(), h.raw(), h.raw(), h.raw()
        count = h.int()
        h.done()
        txs = decode_body(body)
        if count != len(txs):
            raise DecodeError("header tx count mismatch")
        return Block(proposer, ts, txs, number, parent, sroot, troot, rroot)
    except DecodeError:
        raise
    except ValueError as e:
        raise DecodeError(str(e)) from e


def block_hash(block: Block, algo: HashAlgo = HashAlgo.KECCAK256) -> bytes:
    return algo.digest(encode_header(block))


@dataclass(frozen=True)
class Superblock:
    consensus_index: int
    sub_blocks: tuple[tuple[int, Block], ...] = ()

    def __post_init__(self):
        if not isinstance(self.sub_blocks, tuple):
            object.__setattr__(self, "sub_blocks", tuple(self.sub_blocks))
        ids = [pid for pid, _ in self.sub_blocks]
        if ids != sorted(set(ids)):
            raise ValueError("sub-blocks must have distinct ascending proposer ids")

    @property
    def blocks(self) -> list[Block]:
        return [b for _, b in self.sub_blocks]


def encode_superblock(sb: Superblock) -> bytes:
    w = Writer().int(sb.consensus_index)
    w.seq([Writer().int(pid).raw(encode_block(b)).getvalue() for pid, b in sb.sub_blocks])
    return w.getvalue()


# ---------------------------------------------------------------------------
# receipts


@dataclass(frozen=True)
class Receipt:
    status: bool
    block_hash: bytes
    block_number: int
    tx_hash: bytes
    sender: bytes
    recipient: Optional[bytes]
    contract_address: Optional[bytes]
    cumulative_gas_used: int
    gas_used: int
    logs: tuple[bytes, ...] = ()


def encode_receipt(r: Receipt) -> bytes:
    return (
        Writer()
        .int(int(r.status))
        .raw(r.block_hash)
        .int(r.block_number)
        .raw(r.tx_hash)
        .raw(r.sender)
        .opt(r.recipient)
        .opt(r.contract_address)
        .int(r.cumulative_gas_used)
        .int(r.gas_used)
        .seq(list(r.logs))
        .getvalue()
    )


def decode_receipt(data: bytes) -> Receipt:
    r = Reader(data)
    out = Receipt(
        bool(r.int()), r.raw(), r.int(), r.raw(), r.raw(), r.opt(), r.opt(),
        r.int(), r.int(), tuple(r.seq()),
    )
    r.done()
    return out


def receipt_trie_value(r: Receipt) -> bytes:
    # block linkage is excluded: the receipt root is part of the header it would point to
    return (
        Writer()
        .int(int(r.status))
        .raw(r.tx_hash)
        .int(r.cumulative_gas_used)
        .int(r.gas_used)
        .seq(list(r.logs))
        .getvalue()
    )
