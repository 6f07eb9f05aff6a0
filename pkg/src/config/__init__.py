"""Process settings and per-run configuration."""
