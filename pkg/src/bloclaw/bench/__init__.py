"""Benchmark harness: deterministic corpora and suite runners."""
