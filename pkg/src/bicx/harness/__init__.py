"""Command-line runs, audits and verification suites."""
