"""File input and output."""


def exists(path):
    """Whether a file path exists."""
    return False
