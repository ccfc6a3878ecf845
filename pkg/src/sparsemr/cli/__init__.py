"""Command-line interface for sparsemr."""
