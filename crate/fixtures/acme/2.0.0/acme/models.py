"""Model training and inference."""


class Model:
    """A trainable model."""

    def __init__(self, name):
        self.name = name

    def fit(self, data, epochs=10, verbose=False):
        """Fit the model to data."""
        return self


def train(data, lr=0.01, epochs=10):
    """Train a model on data."""
    return Model("trained")


def predict(model, data, batch=64):
    """Run inference in batches."""
    return []
