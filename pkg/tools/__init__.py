"""Command-line and file plumbing."""
