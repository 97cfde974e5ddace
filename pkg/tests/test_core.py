import os
import random
from dataclasses import replace

import blake3
import pytest
from Crypto.Hash import keccak
from hypothesis import given, strategies as st

from sbchain.core import (
    GAS_PAYMENT,
    MAX_TX_SIZE,
    Account,
    Block,
    DecodeError,
    HashAlgo,
    KeyPair,
    Receipt,
    Superblock,
    Transaction,
    address_from_public_key,
    canonical_encode,
    decode_account,
    decode_block,
    decode_ops,
    decode_receipt,
    decode_transaction,
    encode_account,
    encode_block,
    encode_ops,
    encode_receipt,
    encode_superblock,
    intrinsic_gas,
    sign,
    tx_hash,
    verify_signature,
)

from conftest import pay

DATA = os.path.join(os.path.dirname(__file__), "data", "hash_vectors.txt")

addresses = st.binary(min_size=20, max_size=20)
u64 = st.integers(0, 2**64 - 1)
txs = st.builds(
    Transaction,
    sender=addresses,
    recipient=st.none() | addresses,
    nonce=u64,
    value=st.integers(-(2**130), 2**130),
    gas_limit=st.integers(1, 2**64 - 1),
    gas_price=st.integers(1, 2**64 - 1),
    payload=st.binary(max_size=200),
    public_key=st.binary(max_size=40),
    signature=st.binary(max_size=70),
)


def random_tx(rng):
    return Transaction(
        rng.randbytes(20),
        None if rng.random() < 0.2 else rng.randbytes(20),
        rng.randrange(2**64),
        rng.randrange(2**128),
        rng.randrange(1, 2**64),
        rng.randrange(1, 2**64),
        rng.randbytes(rng.randrange(0, 300)),
        rng.randbytes(32),
        rng.randbytes(64),
    )


def test_encoding_is_deterministic(keys):
    a = pay(keys[0], keys[1].address, 0)
    b = pay(keys[0], keys[1].address, 0)
    assert a == b
    assert canonical_encode(a) == canonical_encode(b)


def test_value_change_changes_encoding(keys):
    t0 = Transaction(keys[0].address, keys[1].address, 0, 0, 21000, 1)
    assert canonical_encode(t0) != canonical_encode(replace(t0, value=1))


def test_round_trip_on_seeded_random_txs():
    rng = random.Random(1234)
    for _ in range(1000):
        tx = random_tx(rng)
        enc = canonical_encode(tx)
        assert canonical_encode(decode_transaction(enc)) == enc
        assert decode_transaction(enc) == tx


@given(txs)
def test_round_trip_property(tx):
    assert decode_transaction(canonical_encode(tx)) == tx


@given(txs, txs)
def test_encoding_injective(a, b):
    if a != b:
        assert canonical_encode(a) != canonical_encode(b)


def test_none_recipient_distinct_from_any_address():
    s = b"\x01" * 20
    a = Transaction(s, None, 0, 0, 1, 1)
    b = Transaction(s, b"\x00" * 20, 0, 0, 1, 1)
    assert canonical_encode(a) != canonical_encode(b)


def test_decode_rejects_trailing_and_truncated(keys):
    enc = canonical_encode(pay(keys[0], keys[1].address, 0))
    with pytest.raises(DecodeError):
        decode_transaction(enc + b"\x00")
    with pytest.raises(DecodeError):
        decode_transaction(enc[:-1])


def test_field_ranges_enforced():
    s = b"\x01" * 20
    with pytest.raises(ValueError):
        Transaction(s, None, -1, 0, 1, 1)
    with pytest.raises(ValueError):
        Transaction(s, None, 0, 0, 0, 1)
    with pytest.raises(ValueError):
        Transaction(b"\x01" * 19, None, 0, 0, 1, 1)


def oracle(algo, data):
    if algo is HashAlgo.KECCAK256:
        return keccak.new(digest_bits=256, data=data).digest()
    return blake3.blake3(data).digest()


def test_tx_hash_against_reference_implementations(keys):
    tx = pay(keys[0], keys[1].address, 3, value=77)
    hk = tx_hash(tx, HashAlgo.KECCAK256)
    hb = tx_hash(tx, HashAlgo.BLAKE3)
    assert hk.digest == oracle(HashAlgo.KECCAK256, canonical_encode(tx))
    assert hb.digest == oracle(HashAlgo.BLAKE3, canonical_encode(tx))
    assert hk.digest != hb.digest
    assert len(hk.digest) == len(hb.digest) == 32
    assert tx_hash(tx) == tx_hash(tx)


@given(st.binary(min_size=1, max_size=300), st.data())
def test_one_payload_byte_flip_changes_digest(payload, data):
    s = b"\x05" * 20
    tx = Transaction(s, s, 0, 0, 1, 1, payload)
    i = data.draw(st.integers(0, len(payload) - 1))
    flipped = payload[:i] + bytes([payload[i] ^ 0xFF]) + payload[i + 1:]
    t2 = replace(tx, payload=flipped)
    for algo in HashAlgo:
        assert tx_hash(tx, algo) != tx_hash(t2, algo)
        assert tx_hash(t2, algo).digest == oracle(algo, canonical_encode(t2))


@given(st.binary(max_size=2000))
def test_hash_algo_matches_reference(data):
    for algo in HashAlgo:
        assert algo.digest(data) == oracle(algo, data)


def test_golden_vectors():
    import importlib.util

    spec = importlib.util.spec_from_file_location(
        "golden", os.path.join(os.path.dirname(__file__), "..", "scripts", "make_golden_vectors.py"))
    gen = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(gen)
    expected_inputs = [d.hex() or "-" for d in gen.inputs()]
    with open(DATA) as fh:
        lines = [line.split() for line in fh if line.strip()]
    assert [l[0] for l in lines] == expected_inputs  # wire format of the fixed txs is pinned too
    for inp, k, b in lines:
        data = b"" if inp == "-" else bytes.fromhex(inp)
        assert HashAlgo.KECCAK256.digest(data).hex() == k
        assert HashAlgo.BLAKE3.digest(data).hex() == b


def test_well_known_digests():
    assert HashAlgo.KECCAK256.digest(b"").hex().startswith("c5d2460186f7233c")
    assert HashAlgo.BLAKE3.digest(b"").hex().startswith("af1349b9f5f9a1a6")


# -- keys and signatures ---------------------------------------------------


def test_address_derivation(keys):
    k = keys[0]
    assert len(k.address) == 20
    assert k.address == oracle(HashAlgo.KECCAK256, k.public)[-20:]
    assert KeyPair.from_seed(b"test-0").address == k.address
    assert address_from_public_key(keys[1].public) != k.address


def test_sign_then_verify(keys):
    assert verify_signature(pay(keys[0], keys[1].address, 0))


def test_verify_fails_after_value_increment(keys):
    tx = pay(keys[0], keys[1].address, 0, value=5)
    assert not verify_signature(replace(tx, value=6))


def test_signature_from_other_key_rejected(keys):
    a, b = keys[0], keys[1]
    tx = pay(a, b.address, 0)
    other = sign(Transaction(a.address, b.address, 0, 1, 21000, 1), b)
    # b's signature and key, but a's sender address
    assert not verify_signature(replace(other, sender=a.address))
    assert not verify_signature(replace(tx, signature=other.signature))


@pytest.mark.parametrize("sig", [b"", b"\x00", b"\x00" * 64, b"\xff" * 65])
def test_malformed_signature_is_false_not_exception(keys, sig):
    tx = pay(keys[0], keys[1].address, 0)
    assert verify_signature(replace(tx, signature=sig)) is False
    assert verify_signature(replace(tx, public_key=b"\x01\x02")) is False


FIELDS = {
    "recipient": lambda t: b"\x09" * 20,
    "nonce": lambda t: t.nonce + 1,
    "value": lambda t: t.value + 1,
    "gas_limit": lambda t: t.gas_limit + 1,
    "gas_price": lambda t: t.gas_price + 1,
    "payload": lambda t: t.payload + b"\x00",
}


@pytest.mark.parametrize("field", sorted(FIELDS))
def test_any_single_field_mutation_invalidates(keys, field):
    tx = pay(keys[2], keys[3].address, 4, value=9)
    assert verify_signature(tx)
    assert not verify_signature(replace(tx, **{field: FIELDS[field](tx)}))


@given(st.integers(0, 2**64 - 2), st.integers(0, 10**6))
def test_signature_soundness_property(nonce, value):
    k = KeyPair.from_seed(b"prop")
    tx = sign(Transaction(k.address, None, nonce, value, 21000, 1), k)
    assert verify_signature(tx)
    assert not verify_signature(replace(tx, nonce=nonce + 1))


# -- ops, gas, accounts, blocks, receipts -------------------------------------


def test_ops_codec_and_intrinsic_gas():
    writes = [(b"\x01" * 32, b"\x02" * 32), (b"\x03" * 32, b"\x04" * 32)]
    payload = encode_ops(writes)
    assert decode_ops(payload) == writes
    s = b"\x01" * 20
    assert intrinsic_gas(Transaction(s, s, 0, 0, 1, 1)) == GAS_PAYMENT
    assert intrinsic_gas(Transaction(s, s, 0, 0, 1, 1, payload)) == GAS_PAYMENT + 200
    with pytest.raises(DecodeError):
        decode_ops(payload[:-1])


def test_account_codec_and_invariants():
    for acct in (Account(), Account(3, 10**20), Account(1, 0, b"\x07" * 32)):
        assert decode_account(encode_account(acct)) == acct
    with pytest.raises(ValueError):
        Account(0, -1)


def test_block_round_trip(keys):
    txs = tuple(pay(keys[0], keys[1].address, i) for i in range(3))
    b = Block(2, 1_700_000_000_000, txs, 5, b"\x01" * 32, b"\x02" * 32, b"\x03" * 32, b"\x04" * 32)
    assert decode_block(encode_block(b)) == b
    with pytest.raises(DecodeError):
        decode_block(encode_block(b)[:-3])


def test_superblock_ordering_enforced(keys):
    blk = Block(0, 0, (pay(keys[0], keys[1].address, 0),))
    Superblock(1, ((0, blk), (2, blk)))
    with pytest.raises(ValueError):
        Superblock(1, ((2, blk), (0, blk)))
    with pytest.raises(ValueError):
        Superblock(1, ((1, blk), (1, blk)))
    assert encode_superblock(Superblock(1, ((0, blk),))) != encode_superblock(Superblock(2, ((0, blk),)))


def test_receipt_round_trip():
    r = Receipt(True, b"\x01" * 32, 3, b"\x02" * 32, b"\x03" * 20, None, b"\x04" * 20, 42000, 21000,
                (b"log",))
    assert decode_receipt(encode_receipt(r)) == r


def test_max_tx_size_constant():
    assert MAX_TX_SIZE == 32 * 1024
