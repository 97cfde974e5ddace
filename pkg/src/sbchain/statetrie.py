"""Hex-nibble Merkle Patricia trie with pluggable node hashing.

Nodes are immutable and shared between versions, so a root reference is a
snapshot and reverting a write is restoring an older root. Digests are
computed lazily and cached on the node; a node is written to the KV store
(keyed by its digest) at most once.

Node encodings (children referenced by digest, never inlined)::

    empty   00
    leaf    01 | lp(path) | lp(value)
    ext     02 | lp(path) | lp(child)
    branch  03 | 16 x opt(child) | opt(value)
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Union

from .core import (
    DecodeError,
    Hash,
    HashAlgo,
    Reader,
    Receipt,
    Transaction,
    Writer,
    canonical_encode,
    int_bytes,
    receipt_trie_value,
)

EMPTY_SENTINEL = b"\x00"
DEFAULT_FLUSH_THRESHOLD = 4 * 1024 * 1024


def empty_root(algo: HashAlgo) -> bytes:
    return algo.digest(EMPTY_SENTINEL)


_HEX_TO_NIBBLE = bytes.maketrans(b"0123456789abcdef", bytes(range(16)))


def to_nibbles(key: bytes) -> bytes:
    return key.hex().encode().translate(_HEX_TO_NIBBLE)


def from_nibbles(nibbles: bytes) -> bytes:
    if len(nibbles) % 2:
        raise ValueError("odd nibble count")
    return bytes((nibbles[i] << 4) | nibbles[i + 1] for i in range(0, len(nibbles), 2))


def _common_prefix(a: bytes, b: bytes) -> int:
    n = min(len(a), len(b))
    i = 0
    while i < n and a[i] == b[i]:
        i += 1
    return i


class HashRef:
    """A child that lives only in the KV store."""

    __slots__ = ("digest",)

    def __init__(self, digest: bytes):
        self.digest = digest


class _Node:
    __slots__ = ("_digest", "_stored")

    def __init__(self):
        self._digest = None
        self._stored = False


class Leaf(_Node):
    __slots__ = ("path", "value")

    def __init__(self, path: bytes, value: bytes):
        super().__init__()
        self.path = path
        self.value = value


class Extension(_Node):
    __slots__ = ("path", "child")

    def __init__(self, path: bytes, child):
        super().__init__()
        self.path = path
        self.child = child


class Branch(_Node):
    __slots__ = ("children", "value")

    def __init__(self, children: Sequence, value: Optional[bytes]):
        super().__init__()
        self.children = tuple(children)
        self.value = value


Ref = Union[_Node, HashRef, None]


def _estimate_size(node: _Node) -> int:
    if isinstance(node, Leaf):
        return 9 + len(node.path) + len(node.value)
    if isinstance(node, Extension):
        return 41 + len(node.path)
    return 18 + 37 * sum(c is not None for c in node.children) + len(node.value or b"")


def decode_node(data: bytes) -> _Node:
    """Decode a stored node; children come back as unresolved HashRefs."""
    if not data:
        raise DecodeError("empty node encoding")
    tag, r = data[0], Reader(data[1:])
    if tag == 1:
        node = Leaf(r.raw(), r.raw())
    elif tag == 2:
        node = Extension(r.raw(), HashRef(r.raw()))
    elif tag == 3:
        children = []
        for _ in range(16):
            d = r.opt()
            children.append(None if d is None else HashRef(d))
        node = Branch(children, r.opt())
    else:
        raise DecodeError(f"unknown node tag {tag}")
    r.done()
    return node


class Trie:
    """Authenticated key-value map.

    ``kv`` is any object with ``get``/``write_batch``; it backs both flushing
    and reads of nodes that were evicted from memory.
    """

    def __init__(
        self,
        algo: HashAlgo = HashAlgo.KECCAK256,
        kv=None,
        flush_threshold: int = DEFAULT_FLUSH_THRESHOLD,
        root: Ref = None,
    ):
        self.algo = algo
        self.kv = kv
        self.flush_threshold = flush_threshold
        self.root: Ref = root
        self.dirty_bytes = 0
        self.dirty_nodes = 0
        self.hash_count = 0

    @classmethod
    def from_root(cls, root_digest: bytes, kv, algo: HashAlgo = HashAlgo.KECCAK256, **kw):
        root = None if root_digest == empty_root(algo) else HashRef(root_digest)
        return cls(algo, kv, root=root, **kw)

    # -- node plumbing -----------------------------------------------------

    def _new(self, node: _Node) -> _Node:
        self.dirty_nodes += 1
        self.dirty_bytes += _estimate_size(node)
        return node

    def _resolve(self, ref: Ref) -> Optional[_Node]:
        if isinstance(ref, HashRef):
            if self.kv is None:
                raise KeyError("trie node not in memory and no KV store attached")
            data = self.kv.get(ref.digest)
            if data is None:
                raise KeyError(f"missing trie node {ref.digest.hex()}")
            node = decode_node(data)
            node._digest = ref.digest
            node._stored = True
            return node
        return ref

    def _ref_digest(self, ref: Ref) -> bytes:
        if isinstance(ref, HashRef):
            return ref.digest
        return self.node_digest(ref)

    def encode_node(self, node: _Node) -> bytes:
        if isinstance(node, Leaf):
            return b"\x01" + Writer().raw(node.path).raw(node.value).getvalue()
        if isinstance(node, Extension):
            return b"\x02" + Writer().raw(node.path).raw(self._ref_digest(node.child)).getvalue()
        w = Writer()
        for c in node.children:
            w.opt(None if c is None else self._ref_digest(c))
        w.opt(node.value)
        return b"\x03" + w.getvalue()

    def node_digest(self, node: _Node) -> bytes:
        if node._digest is None:
            node._digest = self.algo.digest(self.encode_node(node))
            self.hash_count += 1
        return node._digest

    # -- reads -------------------------------------------------------------

    def get(self, key: bytes) -> Optional[bytes]:
        return _lookup(self, self.root, to_nibbles(key))

    def __contains__(self, key: bytes) -> bool:
        return self.get(key) is not None

    def items(self) -> Iterator[tuple[bytes, bytes]]:
        """All (key, value) pairs in key order."""
        yield from self._walk(self.root, b"")

    def _walk(self, ref: Ref, prefix: bytes):
        node = self._resolve(ref)
        if node is None:
            return
        if isinstance(node, Leaf):
            yield from_nibbles(prefix + node.path), node.value
        elif isinstance(node, Extension):
            yield from self._walk(node.child, prefix + node.path)
        else:
            if node.value is not None:
                yield from_nibbles(prefix), node.value
            for i, c in enumerate(node.children):
                if c is not None:
                    yield from self._walk(c, prefix + bytes([i]))

    def __len__(self) -> int:
        return sum(1 for _ in self.items())

    # -- writes ------------------------------------------------------------

    def put(self, key: bytes, value: bytes):
        if not isinstance(value, (bytes, bytearray)):
            raise TypeError("trie values are bytes")
        if not value:
            raise ValueError("empty values are not stored; use delete")
        self.root = self._put(self.root, to_nibbles(key), bytes(value))

    def _put(self, ref: Ref, path: bytes, value: bytes) -> _Node:
        node = self._resolve(ref)
        if node is None:
            return self._new(Leaf(path, value))
        if isinstance(node, Leaf):
            if node.path == path:
                if node.value == value:
                    return node
                return self._new(Leaf(path, value))
            common = _common_prefix(node.path, path)
            branch = self._fork(node.path[common:], node.value, path[common:], value)
            return self._new(Extension(path[:common], branch)) if common else branch
        if isinstance(node, Extension):
            common = _common_prefix(node.path, path)
            if common == len(node.path):
                child = self._put(node.child, path[common:], value)
                if child is node.child:
                    return node
                return self._new(Extension(node.path, child))
            rest = node.path[common + 1:]
            moved = node.child if not rest else self._new(Extension(rest, node.child))
            children = [None] * 16
            children[node.path[common]] = moved
            branch_value = None
            remainder = path[common:]
            if remainder:
                children[remainder[0]] = self._new(Leaf(remainder[1:], value))
            else:
                branch_value = value
            branch = self._new(Branch(children, branch_value))
            return self._new(Extension(path[:common], branch)) if common else branch
        # branch
        if not path:
            if node.value == value:
                return node
            return self._new(Branch(node.children, value))
        i = path[0]
        child = self._put(node.children[i], path[1:], value)
        if child is node.children[i]:
            return node
        children = list(node.children)
        children[i] = child
        return self._new(Branch(children, node.value))

    def _fork(self, p1: bytes, v1: bytes, p2: bytes, v2: bytes) -> Branch:
        children = [None] * 16
        value = None
        for p, v in ((p1, v1), (p2, v2)):
            if p:
                children[p[0]] = self._new(Leaf(p[1:], v))
            else:
                value = v
        return self._new(Branch(children, value))

    def delete(self, key: bytes):
        self.root = self._delete(self.root, to_nibbles(key))

    def _delete(self, ref: Ref, path: bytes) -> Ref:
        node = self._resolve(ref)
        if node is None:
            return ref
        if isinstance(node, Leaf):
            return None if node.path == path else ref
        if isinstance(node, Extension):
            if path[:len(node.path)] != node.path:
                return ref
            child = self._delete(node.child, path[len(node.path):])
            if child is node.child:
                return ref
            return None if child is None else self._prefix(node.path, child)
        if not path:
            if node.value is None:
                return ref
            return self._normalize(node.children, None)
        i = path[0]
        child = self._delete(node.children[i], path[1:])
        if child is node.children[i]:
            return ref
        children = list(node.children)
        children[i] = child
        return self._normalize(children, node.value)

    def _normalize(self, children, value) -> Ref:
        present = [i for i, c in enumerate(children) if c is not None]
        if not present:
            return None if value is None else self._new(Leaf(b"", value))
        if len(present) == 1 and value is None:
            i = present[0]
            return self._prefix(bytes([i]), children[i])
        return self._new(Branch(children, value))

    def _prefix(self, nibbles: bytes, ref: Ref) -> _Node:
        child = self._resolve(ref)
        if isinstance(child, Leaf):
            return self._new(Leaf(nibbles + child.path, child.value))
        if isinstance(child, Extension):
            return self._new(Extension(nibbles + child.path, child.child))
        return self._new(Extension(nibbles, ref))

    # -- roots -------------------------------------------------------------

    def root_hash(self) -> bytes:
        if self.root is None:
            return empty_root(self.algo)
        return self._ref_digest(self.root)

    def compute_root(self) -> Hash:
        return Hash(self.root_hash(), self.algo)

    def structure(self):
        """Digest-free shape of the trie: equal across hash algorithms."""
        return _shape(self, self.root)

    # -- persistence -------------------------------------------------------

    def flush(self, kv=None) -> int:
        """Write every node not yet stored; returns bytes written.

        The batch is built before anything is marked, so a failed write
        leaves the trie exactly as it was and the flush can be retried.
        """
        kv = kv if kv is not None else self.kv
        if kv is None:
            raise ValueError("no KV store to flush to")
        batch, pending = [], []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node is None or isinstance(node, HashRef) or node._stored:
                continue
            batch.append((self.node_digest(node), self.encode_node(node)))
            pending.append(node)
            if isinstance(node, Extension):
                stack.append(node.child)
            elif isinstance(node, Branch):
                stack.extend(node.children)
        if batch:
            kv.write_batch(batch)
        for node in pending:
            node._stored = True
        if self.kv is None:
            self.kv = kv
        self.dirty_bytes = 0
        self.dirty_nodes = 0
        return sum(len(v) for _, v in batch)

    def flush_if_needed(self, kv=None) -> int:
        if self.dirty_bytes < self.flush_threshold:
            return 0
        return self.flush(kv)

    def evict(self):
        """Drop in-memory nodes; subsequent reads go through the KV store."""
        if self.dirty_bytes or (self.root is not None and not isinstance(self.root, HashRef)
                                and not self.root._stored):
            raise RuntimeError("flush before evicting")
        if self.root is not None:
            self.root = HashRef(self.root_hash())

    def snapshot(self) -> "TrieSnapshot":
        return TrieSnapshot(self.root, self.algo, self.kv)


def _lookup(trie, ref: Ref, path: bytes) -> Optional[bytes]:
    while True:
        node = trie._resolve(ref)
        if node is None:
            return None
        if isinstance(node, Leaf):
            return node.value if node.path == path else None
        if isinstance(node, Extension):
            if path[:len(node.path)] != node.path:
                return None
            path = path[len(node.path):]
            ref = node.child
        else:
            if not path:
                return node.value
            ref = node.children[path[0]]
            path = path[1:]


def _shape(trie, ref: Ref):
    node = trie._resolve(ref)
    if node is None:
        return None
    if isinstance(node, Leaf):
        return ("leaf", node.path.hex(), node.value)
    if isinstance(node, Extension):
        return ("ext", node.path.hex(), _shape(trie, node.child))
    return ("branch", tuple(_shape(trie, c) for c in node.children), node.value)


@dataclass(frozen=True)
class TrieSnapshot:
    """A root pinned at a block boundary; later writes to the trie do not show."""

    root: Ref
    algo: HashAlgo
    kv: object = None

    def _resolve(self, ref):
        return Trie._resolve(self, ref)

    def get(self, key: bytes) -> Optional[bytes]:
        return _lookup(self, self.root, to_nibbles(key))

    def root_hash(self) -> bytes:
        return Trie(self.algo, self.kv, root=self.root).root_hash()


def build_block_tries(
    txs: Sequence[Transaction],
    receipts: Sequence[Receipt],
    algo: HashAlgo = HashAlgo.KECCAK256,
) -> tuple[bytes, bytes]:
    """Transaction and receipt roots, both keyed by the encoded tx index."""
    if len(txs) != len(receipts):
        raise ValueError(f"{len(txs)} transactions but {len(receipts)} receipts")
    tx_trie, receipt_trie = Trie(algo), Trie(algo)
    for i, (tx, rc) in enumerate(zip(txs, receipts)):
        key = int_bytes(i)
        tx_trie.put(key, canonical_encode(tx))
        receipt_trie.put(key, receipt_trie_value(rc))
    return tx_trie.root_hash(), receipt_trie.root_hash()
