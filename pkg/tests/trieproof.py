"""Merkle proofs over the state trie, for tests only.

A proof is the list of node encodings from the root down to the key. The
verifier rehashes with library calls that do not go through the package.
"""
import struct

import blake3
from Crypto.Hash import keccak

from sbchain.core import HashAlgo
from sbchain.statetrie import Branch, Extension, HashRef, Leaf, decode_node, to_nibbles


def oracle_digest(algo, data):
    if algo is HashAlgo.KECCAK256:
        return keccak.new(digest_bits=256, data=data).digest()
    return blake3.blake3(data).digest()


def make_proof(trie, key):
    proof, ref, path = [], trie.root, to_nibbles(key)
    while ref is not None:
        node = trie._resolve(ref)
        proof.append(trie.encode_node(node))
        if isinstance(node, Leaf):
            break
        if isinstance(node, Extension):
            if path[: len(node.path)] != node.path:
                break
            path, ref = path[len(node.path):], node.child
        else:
            if not path:
                break
            ref, path = node.children[path[0]], path[1:]
    return proof


def verify_proof(root, key, value, proof, algo):
    """True iff ``proof`` shows key -> value under ``root`` (value None = absent)."""
    expected, path = root, to_nibbles(key)
    for i, enc in enumerate(proof):
        if oracle_digest(algo, enc) != expected:
            return False
        try:
            node = decode_node(enc)
        except ValueError:
            return False
        last = i == len(proof) - 1
        if isinstance(node, Leaf):
            return last and (node.value == value if node.path == path else value is None)
        if isinstance(node, Extension):
            if path[: len(node.path)] != node.path:
                return last and value is None
            path, nxt = path[len(node.path):], node.child
        else:
            if not path:
                return last and node.value == value
            nxt, path = node.children[path[0]], path[1:]
        if nxt is None:
            return last and value is None
        assert isinstance(nxt, HashRef)
        expected = nxt.digest
    return False


def _lp(b):
    return struct.pack(">I", len(b)) + b


def _opt(b):
    return b"\x00" if b is None else b"\x01" + _lp(b)


def reference_root(algo, mapping):
    """Root of the canonical trie for ``mapping``, built from scratch by recursion
    over sorted keys. Independent of the incremental insert/delete code."""
    items = sorted((to_nibbles(k), v) for k, v in mapping.items())

    def build(items, depth):
        if not items:
            return None
        if len(items) == 1:
            path, value = items[0]
            return b"\x01" + _lp(path[depth:]) + _lp(value)
        first, last = items[0][0], items[-1][0]  # sorted, so these bound the common prefix
        cp = 0
        while depth + cp < min(len(first), len(last)) and first[depth + cp] == last[depth + cp]:
            cp += 1
        if cp:
            child = build(items, depth + cp)
            return b"\x02" + _lp(first[depth:depth + cp]) + _lp(oracle_digest(algo, child))
        value = None
        groups = [[] for _ in range(16)]
        for path, v in items:
            if len(path) == depth:
                value = v
            else:
                groups[path[depth]].append((path, v))
        out = b"\x03"
        for g in groups:
            enc = build(g, depth + 1)
            out += _opt(None if enc is None else oracle_digest(algo, enc))
        return out + _opt(value)

    enc = build(items, 0)
    return oracle_digest(algo, b"\x00" if enc is None else enc)
