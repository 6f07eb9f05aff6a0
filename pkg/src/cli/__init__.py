"""Command-line surface: synth, estimate, diffmap, qverify."""

from src.cli.main import build_parser, main, run

__all__ = ["build_parser", "main", "run"]
