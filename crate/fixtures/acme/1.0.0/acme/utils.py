"""Assorted helpers."""


def load(path, mode="r"):
    """Load a dataset from a file path."""
    with open(path, mode) as fh:
        return fh.read()


def save(obj, path, overwrite=False):
    """Write an object to a file path."""
    raise NotImplementedError


def legacy_hash(data):
    """Old checksum kept for compatibility."""
    return hash(data)
