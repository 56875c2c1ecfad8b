"""Test suite for binsense."""
