"""File input and output."""


def exists(path):
    """Whether a file path exists."""
    return False


def load(path, open_mode="r"):
    """Load a dataset from a file path."""
    with open(path, open_mode) as fh:
        return fh.read()
