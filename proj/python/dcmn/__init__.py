"""Python front end for the dcmn C++ core.

Configs and reports cross the boundary as JSON; this module converts them
to and from dicts.
"""

import json

from . import _dcmn
from ._dcmn import Error, Example, Model, combos, cosine_score, tokenize, top_k_indices

__all__ = [
    "Error",
    "Example",
    "Model",
    "ablate",
    "combos",
    "cosine_score",
    "default_config",
    "evaluate",
    "gen_synthetic",
    "gradcheck",
    "load_jsonl",
    "load_model",
    "save_jsonl",
    "select",
    "sweep_topk",
    "tokenize",
    "top_k_indices",
    "train",
]


def _cfg(config):
    return json.dumps(config or {})


def default_config():
    return json.loads(_dcmn.default_config())


def gen_synthetic(**spec):
    return _dcmn.gen_synthetic(json.dumps(spec))


def load_jsonl(path, max_seq_len=512, num_options=0):
    return _dcmn.load_jsonl(str(path), max_seq_len, num_options)


def save_jsonl(path, examples):
    _dcmn.save_jsonl(str(path), list(examples))


def train(train_set, dev=None, config=None):
    """Train a fresh model. Returns (model, report dict)."""
    model, report = _dcmn.train(list(train_set), None if dev is None else list(dev), _cfg(config))
    return model, json.loads(report)


def evaluate(model, data):
    return json.loads(model.evaluate(list(data)))


def select(model, example, k, method="cosine"):
    return model.select(example, k, method)


def load_model(path):
    return _dcmn.load_model(str(path))


def ablate(train_set, dev, config=None, combos=()):
    return json.loads(_dcmn.ablate(list(train_set), list(dev), _cfg(config), list(combos)))


def sweep_topk(train_set, dev, ks, config=None):
    return json.loads(_dcmn.sweep_topk(list(train_set), list(dev), _cfg(config), list(ks)))


def gradcheck(seed=7, hidden=4, step=1e-4, tolerance=1e-3):
    return json.loads(_dcmn.gradcheck(seed, hidden, step, tolerance))
