"""Blockchain ledger for news: signed records, publisher reputation, PoA/PoW and Merkle proofs."""

__version__ = "0.1.0"
