"""
Commands package initialization.

Each command module exposes ``register(sub, parent, settings)``, which adds
its subcommands to the top-level parser.
"""

from chi2map.commands import bench_commands, feature_commands, learning_commands

__all__ = [
    "feature_commands",
    "learning_commands",
    "bench_commands",
]
