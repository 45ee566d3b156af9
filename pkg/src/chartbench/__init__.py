"""Benchmark harness for LLM-generated chart programs."""

__version__ = "0.1.0"
