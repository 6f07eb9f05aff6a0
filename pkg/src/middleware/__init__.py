"""Logging and stage-timing middleware shared by the pipelines and the CLI."""
