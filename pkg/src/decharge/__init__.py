"""Decentralized EV charging coordination via tree-structured collective learning."""

__version__ = "0.1.0"
