"""Blockchain node library, cluster simulator and benchmark tools."""
from .core import Block, Hash, HashAlgo, KeyPair, Receipt, Superblock, Transaction

__all__ = ["Block", "Hash", "HashAlgo", "KeyPair", "Receipt", "Superblock", "Transaction"]
