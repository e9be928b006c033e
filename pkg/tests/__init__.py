"""Test suite for gbede."""
