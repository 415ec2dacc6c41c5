"""File input and output."""


def exists(path):
    """Whether a file path exists."""
    return False


def load(path, mode="r"):
    """Load a dataset from a file path."""
    with open(path, mode) as fh:
        return fh.read()
