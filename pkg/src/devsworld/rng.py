"""Seeded per-component random substreams.

Each component draws from its own generator derived from ``(seed, path)``, so
adding or removing a component never shifts another component's stream.
"""
from __future__ import annotations

import random


def substream(seed: int, path: str) -> random.Random:
    # str seeds are hashed with SHA-512 by random.Random: platform independent
    return random.Random(f"{int(seed)}/{path}")
