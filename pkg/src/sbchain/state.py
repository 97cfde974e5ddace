"""Account state: an account trie plus one storage trie per contract account."""
from __future__ import annotations

from typing import Iterable, Mapping, Optional

from .core import Account, HashAlgo, decode_account, encode_account
from .statetrie import DEFAULT_FLUSH_THRESHOLD, Trie, TrieSnapshot, empty_root


def account_key(address: bytes) -> bytes:
    # fixed keccak so that trie shape does not depend on the node hash algorithm
    return HashAlgo.KECCAK256.digest(address)


def slot_key(slot: bytes) -> bytes:
    return HashAlgo.KECCAK256.digest(slot)


class WorldState:
    def __init__(
        self,
        algo: HashAlgo = HashAlgo.KECCAK256,
        kv=None,
        flush_threshold: int = DEFAULT_FLUSH_THRESHOLD,
    ):
        self.algo = algo
        self.kv = kv
        self.flush_threshold = flush_threshold
        self.accounts = Trie(algo, kv, flush_threshold)
        self._storage: dict[bytes, Trie] = {}
        self._dirty_storage: set[bytes] = set()
        self.bytes_flushed = 0

    @classmethod
    def from_genesis(cls, balances: Mapping[bytes, int], contracts: Iterable[bytes] = (), **kw):
        st = cls(**kw)
        for addr, bal in balances.items():
            st.set_account(addr, Account(0, bal))
        for addr in contracts:
            acct = st.get_account(addr) or Account()
            st.set_account(addr, Account(acct.nonce, acct.balance, empty_root(st.algo)))
        st.root()
        return st

    # -- accounts ----------------------------------------------------------

    def get_account(self, address: bytes) -> Optional[Account]:
        raw = self.accounts.get(account_key(address))
        return None if raw is None else decode_account(raw)

    def account(self, address: bytes) -> Account:
        return self.get_account(address) or Account()

    def set_account(self, address: bytes, acct: Account):
        self.accounts.put(account_key(address), encode_account(acct))

    def nonce(self, address: bytes) -> int:
        return self.account(address).nonce

    def balance(self, address: bytes) -> int:
        return self.account(address).balance

    # -- contract storage --------------------------------------------------

    def _storage_trie(self, address: bytes) -> Trie:
        trie = self._storage.get(address)
        if trie is None:
            acct = self.account(address)
            root = acct.storage_root or empty_root(self.algo)
            trie = Trie.from_root(root, self.kv, self.algo, flush_threshold=self.flush_threshold)
            self._storage[address] = trie
        return trie

    def get_storage(self, address: bytes, slot: bytes) -> Optional[bytes]:
        acct = self.get_account(address)
        if acct is None or acct.storage_root is None:
            return None
        return self._storage_trie(address).get(slot_key(slot))

    def set_storage(self, address: bytes, slot: bytes, value: bytes):
        acct = self.account(address)
        if acct.storage_root is None:
            self.set_account(address, Account(acct.nonce, acct.balance, empty_root(self.algo)))
        self._storage_trie(address).put(slot_key(slot), value)
        self._dirty_storage.add(address)

    # -- roots, snapshots, flushing ---------------------------------------

    def root(self) -> bytes:
        for address in sorted(self._dirty_storage):
            acct = self.account(address)
            sroot = self._storage[address].root_hash()
            self.set_account(address, Account(acct.nonce, acct.balance, sroot))
        self._dirty_storage.clear()
        return self.accounts.root_hash()

    def checkpoint(self):
        return (
            self.accounts.root,
            {a: t.root for a, t in self._storage.items()},
            set(self._dirty_storage),
        )

    def revert(self, cp):
        root, storage_roots, dirty = cp
        self.accounts.root = root
        for addr in list(self._storage):
            if addr in storage_roots:
                self._storage[addr].root = storage_roots[addr]
            else:
                del self._storage[addr]
        self._dirty_storage = dirty

    def snapshot(self) -> TrieSnapshot:
        self.root()
        return self.accounts.snapshot()

    @property
    def dirty_bytes(self) -> int:
        return self.accounts.dirty_bytes + sum(t.dirty_bytes for t in self._storage.values())

    def flush_if_needed(self, kv=None) -> int:
        if self.dirty_bytes < self.flush_threshold:
            return 0
        return self.flush(kv)

    def flush(self, kv=None) -> int:
        kv = kv if kv is not None else self.kv
        self.root()
        written = sum(t.flush(kv) for t in self._storage.values())
        written += self.accounts.flush(kv)
        self.kv = kv
        self.bytes_flushed += written
        return written

    def total_balance(self) -> int:
        return sum(decode_account(v).balance for _, v in self.accounts.items())
