"""Knowledge-graph question answering downstream of text generation:
skeleton-query parsing, candidate grounding, KG execution, and evaluation."""

__version__ = "0.1.0"
