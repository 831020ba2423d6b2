"""Batch toxicity scoring for comment JSONL files."""

__version__ = "0.1.0"
