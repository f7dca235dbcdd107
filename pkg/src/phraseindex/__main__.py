"""Allow `python -m phraseindex` as an alias for the console script."""

from .cli import entrypoint

entrypoint()
