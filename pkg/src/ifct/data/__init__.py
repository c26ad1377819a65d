"""Example guideline trees shipped with the package (liver, renal, pancreas)."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

EXAMPLE_ORGANS = ("liver", "renal", "pancreas")


def example_path(organ: str) -> Path:
    if organ not in EXAMPLE_ORGANS:
        raise KeyError(f"no example tree for organ {organ!r}; choose from {EXAMPLE_ORGANS}")
    return Path(str(resources.files(__name__).joinpath(f"{organ}.json")))


def load_example(organ: str):
    from ..guideline import read_guideline
    return read_guideline(example_path(organ))
