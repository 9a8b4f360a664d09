import numpy as np

from deepshallow.net import evaluate

BOX = (-5.0, 5.0)


def max_rel_err(a, b, n=10_000, seed=0):
    """Largest symmetric relative gap between two nets on uniform box samples."""
    X = np.random.default_rng(seed).uniform(*BOX, (n, a.input_dim))
    fa, fb = evaluate(a, X), evaluate(b, X)
    scale = np.maximum(np.maximum(np.abs(fa), np.abs(fb)), 1e-12)
    return float(np.max(np.abs(fa - fb) / scale))
