import random

import pytest
from hypothesis import given, strategies as st
from hypothesis.stateful import RuleBasedStateMachine, invariant, rule

from sbchain.core import HashAlgo, Receipt
from sbchain.statetrie import (
    EMPTY_SENTINEL,
    Trie,
    build_block_tries,
    empty_root,
    from_nibbles,
    to_nibbles,
)
from sbchain.storage import KVStore

from conftest import pay
from trieproof import make_proof, oracle_digest, reference_root, verify_proof

keys_st = st.binary(min_size=0, max_size=6)
values_st = st.binary(min_size=1, max_size=12)


def filled(mapping, algo=HashAlgo.KECCAK256, order=None):
    t = Trie(algo)
    for k in order if order is not None else mapping:
        t.put(k, mapping[k])
    return t


def test_nibbles_round_trip():
    assert to_nibbles(b"\xab\x01") == bytes([10, 11, 0, 1])
    assert from_nibbles(to_nibbles(b"\x00\xff\x10")) == b"\x00\xff\x10"


@pytest.mark.parametrize("algo", list(HashAlgo))
def test_empty_root_is_hash_of_sentinel(algo):
    assert Trie(algo).root_hash() == empty_root(algo) == oracle_digest(algo, EMPTY_SENTINEL)


def test_get_put_overwrite_delete():
    t = Trie()
    t.put(b"dog", b"1")
    t.put(b"doge", b"2")
    t.put(b"do", b"3")
    assert t.get(b"dog") == b"1" and t.get(b"doge") == b"2" and t.get(b"do") == b"3"
    assert t.get(b"d") is None and t.get(b"dogs") is None
    t.put(b"dog", b"9")
    assert t.get(b"dog") == b"9"
    t.delete(b"dog")
    assert t.get(b"dog") is None and b"doge" in t
    assert len(t) == 2
    t.delete(b"missing")
    assert len(t) == 2


def test_put_then_delete_restores_root():
    rng = random.Random(7)
    t = filled({rng.randbytes(32): rng.randbytes(8) for _ in range(50)})
    before = t.root_hash()
    k = rng.randbytes(32)
    t.put(k, b"new")
    assert t.root_hash() != before
    t.delete(k)
    assert t.root_hash() == before


@pytest.mark.parametrize("algo", list(HashAlgo))
def test_random_inserts_match_sorted_rebuild_and_reference(algo):
    rng = random.Random(11)
    m = {rng.randbytes(32): rng.randbytes(rng.randrange(1, 40)) for _ in range(1000)}
    incremental = filled(m, algo)
    rebuilt = filled(m, algo, order=sorted(m))
    assert incremental.root_hash() == rebuilt.root_hash() == reference_root(algo, m)
    assert dict(incremental.items()) == m


@given(st.dictionaries(keys_st, values_st, max_size=25), st.randoms())
def test_insertion_order_irrelevant(m, rnd):
    order = list(m)
    rnd.shuffle(order)
    a = filled(m)
    b = filled(m, order=order)
    assert a.root_hash() == b.root_hash() == reference_root(HashAlgo.KECCAK256, m)


@given(st.dictionaries(keys_st, values_st, max_size=25))
def test_structure_equal_across_hashes(m):
    k = filled(m, HashAlgo.KECCAK256)
    b = filled(m, HashAlgo.BLAKE3)
    assert k.structure() == b.structure()
    if m:
        assert k.root_hash() != b.root_hash()


class TrieMachine(RuleBasedStateMachine):
    """The trie behaves like a dict and its root always equals the rebuilt root."""

    def __init__(self):
        super().__init__()
        self.trie = Trie()
        self.model = {}

    @rule(k=keys_st, v=values_st)
    def put(self, k, v):
        self.trie.put(k, v)
        self.model[k] = v

    @rule(k=keys_st)
    def delete(self, k):
        self.trie.delete(k)
        self.model.pop(k, None)

    @rule(k=keys_st)
    def get(self, k):
        assert self.trie.get(k) == self.model.get(k)

    @invariant()
    def root_matches(self):
        assert self.trie.root_hash() == reference_root(HashAlgo.KECCAK256, self.model)


TestTrieMachine = TrieMachine.TestCase


# -- persistence ---------------------------------------------------------------


def test_flush_threshold_and_eviction_reads_from_kv():
    kv = KVStore()
    t = Trie(kv=kv, flush_threshold=2_000)
    rng = random.Random(3)
    m = {}
    written = 0
    for _ in range(200):
        k, v = rng.randbytes(32), rng.randbytes(16)
        t.put(k, v)
        m[k] = v
        written += t.flush_if_needed()
    assert written > 0 and kv.writes > 0
    assert t.dirty_bytes < 2_000
    t.flush()
    root = t.root_hash()
    t.evict()
    reads = kv.reads
    k0 = next(iter(m))
    assert t.get(k0) == m[k0]
    assert kv.reads > reads
    assert t.root_hash() == root


def test_recover_from_root_in_kv():
    kv = KVStore()
    rng = random.Random(5)
    m = {rng.randbytes(32): rng.randbytes(8) for _ in range(100)}
    t = Trie(kv=kv)
    for k, v in m.items():
        t.put(k, v)
    t.flush()
    again = Trie.from_root(t.root_hash(), kv)
    assert dict(again.items()) == m
    again.put(b"x", b"y")
    t.put(b"x", b"y")
    assert again.root_hash() == t.root_hash()


def test_evict_requires_flush():
    t = Trie(kv=KVStore())
    t.put(b"a", b"b")
    with pytest.raises(RuntimeError):
        t.evict()


def test_flush_is_atomic_on_kv_failure():
    class Broken(KVStore):
        def write_batch(self, items):
            raise OSError("disk full")

    t = Trie(kv=Broken())
    t.put(b"a", b"1")
    with pytest.raises(OSError):
        t.flush()
    kv = KVStore()
    assert t.flush(kv) > 0
    assert Trie.from_root(t.root_hash(), kv).get(b"a") == b"1"


def test_snapshot_is_isolated():
    t = Trie()
    t.put(b"a", b"1")
    snap = t.snapshot()
    t.put(b"a", b"2")
    assert snap.get(b"a") == b"1"
    assert snap.root_hash() != t.root_hash()


# -- proofs --------------------------------------------------------------------


@pytest.mark.parametrize("algo", list(HashAlgo))
def test_membership_proofs(algo):
    rng = random.Random(9)
    m = {rng.randbytes(32): rng.randbytes(10) for _ in range(64)}
    t = filled(m, algo)
    root = t.root_hash()
    for k in list(m)[:16]:
        proof = make_proof(t, k)
        assert verify_proof(root, k, m[k], proof, algo)
        assert not verify_proof(root, k, m[k] + b"!", proof, algo)
    absent = b"\x00" * 32
    assert verify_proof(root, absent, None, make_proof(t, absent), algo)


def test_tampered_proof_fails():
    rng = random.Random(13)
    m = {rng.randbytes(32): rng.randbytes(10) for _ in range(32)}
    t = filled(m)
    k = next(iter(m))
    proof = make_proof(t, k)
    bad = list(proof)
    last = bytearray(bad[-1])
    last[-1] ^= 1
    bad[-1] = bytes(last)
    assert not verify_proof(t.root_hash(), k, m[k], bad, HashAlgo.KECCAK256)


# -- block tries ---------------------------------------------------------------


def receipt_for(tx, i):
    return Receipt(True, bytes([i]) * 32, 1, b"\x01" * 32, tx.sender, tx.recipient, None,
                   21000 * (i + 1), 21000)


def test_block_tries_commit_to_order(keys):
    txs = [pay(keys[0], keys[1].address, i) for i in range(4)]
    rcs = [receipt_for(t, i) for i, t in enumerate(txs)]
    tx_root, rc_root = build_block_tries(txs, rcs)
    assert (tx_root, rc_root) == build_block_tries(txs, rcs)
    swapped = build_block_tries(txs[::-1], rcs[::-1])
    assert swapped[0] != tx_root
    assert build_block_tries([], []) == (empty_root(HashAlgo.KECCAK256),) * 2


def test_block_tries_length_mismatch(keys):
    tx = pay(keys[0], keys[1].address, 0)
    with pytest.raises(ValueError):
        build_block_tries([tx], [])
