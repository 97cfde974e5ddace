"""Regenerate tests/data/hash_vectors.txt.

Each line is ``input_hex keccak256_hex blake3_hex``. Digests come from
pycryptodome and the blake3 package directly, not from sbchain. The last
lines are canonical encodings of fixed signed transactions, so the file also
pins the wire format.
"""
import os
import sys

import blake3
from Crypto.Hash import keccak

from sbchain.core import KeyPair, Transaction, canonical_encode, encode_ops, sign

OUT = os.path.join(os.path.dirname(__file__), "..", "tests", "data", "hash_vectors.txt")


def fixed_txs():
    k0, k1 = KeyPair.from_seed(b"golden-0"), KeyPair.from_seed(b"golden-1")
    yield sign(Transaction(k0.address, k1.address, 0, 10, 21000, 1), k0)
    yield sign(Transaction(k1.address, None, 7, 0, 21100, 3, encode_ops([(b"\x01" * 32, b"\x02" * 32)])), k1)
    yield sign(Transaction(k0.address, k0.address, 2**64 - 1, 2**128 - 1, 2**64 - 1, 1), k0)


def inputs():
    yield b""
    yield b"abc"
    yield bytes(range(251))
    yield bytes(i % 251 for i in range(1025))
    yield b"\x00" * 64
    for tx in fixed_txs():
        yield canonical_encode(tx)


def main(path=OUT):
    with open(path, "w") as fh:
        for data in inputs():
            k = keccak.new(digest_bits=256, data=data).hexdigest()
            b = blake3.blake3(data).hexdigest()
            fh.write(f"{data.hex() or '-'} {k} {b}\n")


if __name__ == "__main__":
    main(*sys.argv[1:])
