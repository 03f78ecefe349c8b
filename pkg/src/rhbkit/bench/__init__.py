"""Benchmark cases, studies and the command-line entry point."""
