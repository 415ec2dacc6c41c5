"""Assorted helpers."""


def save(obj, path, overwrite=False):
    """Write an object to a file path."""
    raise NotImplementedError
