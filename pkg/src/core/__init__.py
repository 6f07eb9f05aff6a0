"""Shared error hierarchy and small statistics helpers."""
