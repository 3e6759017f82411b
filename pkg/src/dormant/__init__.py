"""Serializability evolution, gadget injection and gadget-chain detection for JVM artifacts."""

__version__ = "0.1.0"
