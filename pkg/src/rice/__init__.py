"""Prompt-level inference latency, energy and carbon estimates for LLMs."""

__version__ = "0.1.0"
