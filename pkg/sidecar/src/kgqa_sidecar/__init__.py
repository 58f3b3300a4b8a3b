"""Sidecar producing the neural exchange files the QA core consumes:
beams JSONL from a toy sequence-to-sequence generator, and deterministic
text-embedding vector files for relation labels."""

__version__ = "0.1.0"
