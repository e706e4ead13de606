"""Bundled model documents."""

from importlib import resources


def bundled_model_text(name: str = "i4_transition.json") -> str:
    return resources.files(__package__).joinpath(name).read_text(encoding="utf-8")
