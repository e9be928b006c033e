"""Helper utilities for gbede."""
