"""Shared fixtures-by-function for the test modules."""

import numpy as np

from literale import FusionConfig, KGModel, ModelConfig, TripleStore
from literale.training import bce_loss, smooth_labels
from literale.data import batch_targets

FD_STEP = 1e-5
FD_TOL = 1e-4

# 6 entities, 2 relations, 12 training triples; both relations pair up the
# entities symmetrically so every score function can fit them
TOY_TRAIN = [
    (0, 0, 1), (1, 0, 0), (2, 0, 3), (3, 0, 2), (4, 0, 5), (5, 0, 4),
    (0, 1, 3), (3, 1, 0), (1, 1, 4), (4, 1, 1), (2, 1, 5), (5, 1, 2),
]
TOY_VALID = [(0, 0, 2), (3, 1, 4)]
TOY_TEST = [(1, 0, 2), (4, 1, 5)]


def toy_store():
    return TripleStore(6, 2, TOY_TRAIN, TOY_VALID, TOY_TEST)


def toy_literals(n_entities=6, n_d=2, seed=0):
    rng = np.random.default_rng(seed)
    lit = rng.uniform(0, 1, size=(n_entities, n_d))
    lit[0] = 0.0  # an entity without literals
    return lit


def model_config(kind, H=8, **kw):
    if kind == "conve":
        kw.setdefault("reshape_width", 4)
        kw.setdefault("n_filters", 2)
    return ModelConfig(kind, embedding_dim=H, **kw)


def make_model(kind, fusion, H=8, n_e=6, n_r=4, n_d=2, seed=0, **kw):
    lit = toy_literals(n_e, n_d, seed)
    return KGModel(model_config(kind, H, **kw), FusionConfig(fusion), n_e, n_r, lit, seed=seed)


def rel_error(a, b):
    a, b = np.ravel(a), np.ravel(b)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


def model_loss(model, heads, rels, targets, rng_seed, train=True):
    rng = np.random.default_rng(rng_seed)
    scores, cache = model.forward(heads, rels, train=train, rng=rng)
    loss, dscores = bce_loss(scores, targets)
    return loss, dscores, cache


def model_gradient_errors(model, store=None, rng_seed=123, step=FD_STEP):
    """Relative error between analytic and central-difference gradients, per parameter."""
    store = store or toy_store()
    pairs = store.training_pairs()
    n = model.n_entities
    targets = smooth_labels(batch_targets(pairs, store, n), 0.1, n)
    heads, rels = pairs[:, 0], pairs[:, 1]

    model.store.zero_grads()
    _, dscores, cache = model_loss(model, heads, rels, targets, rng_seed)
    model.backward(cache, dscores)
    errors = {}
    for name, p in model.store.entries.items():
        analytic = p.grad.copy()
        numeric = np.zeros_like(p.value)
        it = np.nditer(p.value, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p.value[idx]
            p.value[idx] = orig + step
            plus = model_loss(model, heads, rels, targets, rng_seed)[0]
            p.value[idx] = orig - step
            minus = model_loss(model, heads, rels, targets, rng_seed)[0]
            p.value[idx] = orig
            numeric[idx] = (plus - minus) / (2 * step)
        errors[name] = rel_error(analytic, numeric)
    model.store.zero_grads()
    return errors


def numeric_grad(f, x, step=FD_STEP):
    """Central differences of scalar ``f`` at array ``x`` (modified in place, then restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + step
        fp = f()
        x[idx] = orig - step
        fm = f()
        x[idx] = orig
        g[idx] = (fp - fm) / (2 * step)
    return g
