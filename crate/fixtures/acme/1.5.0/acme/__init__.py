"""Small numeric toolkit used as a migration fixture."""


def normalize(values, axis=0):
    """Normalize values along an axis."""
    total = sum(values)
    return [v / total for v in values]


def mean(values):
    """Arithmetic mean of a sequence of values."""
    return sum(values) / len(values)
