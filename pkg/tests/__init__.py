"""Unit tests for the DPP likelihood toolkit."""
