"""Ranking evaluation with head and tail corruption, raw or filtered."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import TripleStore
from .errors import ConfigurationError

HITS_AT = (1, 3, 10)


def rank_of(true_entity: int, scores, filter_set=()) -> int:
    """Rank of ``true_entity`` among all candidates not in ``filter_set``.

    Exact ties with the true score count half (rounded down), so a model
    that scores everything equally gets the middle rank.
    """
    scores = np.asarray(scores)
    keep = np.ones(scores.shape[0], dtype=bool)
    keep[list(set(filter_set) - {true_entity})] = False
    keep[true_entity] = False
    target = scores[true_entity]
    greater = int(np.count_nonzero(scores[keep] > target))
    ties = int(np.count_nonzero(scores[keep] == target))
    return 1 + greater + ties // 2


def ranks_from_scores(scores: np.ndarray, targets: np.ndarray, filter_mask: np.ndarray | None = None) -> np.ndarray:
    """Vectorised :func:`rank_of` over rows. ``filter_mask`` marks excluded candidates."""
    rows = np.arange(len(targets))
    target_scores = scores[rows, targets][:, None]
    keep = np.ones_like(scores, dtype=bool) if filter_mask is None else ~filter_mask
    keep[rows, targets] = False
    greater = np.count_nonzero((scores > target_scores) & keep, axis=1)
    ties = np.count_nonzero((scores == target_scores) & keep, axis=1)
    return 1 + greater + ties // 2


@dataclass
class MetricSet:
    mr: float
    mrr: float
    hits_at: dict[int, float]

    @classmethod
    def from_ranks(cls, ranks) -> "MetricSet":
        # fsum is exactly rounded, so the result does not depend on triple order
        ranks = np.asarray(ranks, dtype=float)
        n = len(ranks)
        return cls(
            mr=math.fsum(ranks) / n,
            mrr=math.fsum(1.0 / ranks) / n,
            hits_at={k: float(np.count_nonzero(ranks <= k)) / n for k in HITS_AT},
        )

    def as_dict(self) -> dict[str, float]:
        d = {"mr": self.mr, "mrr": self.mrr}
        d.update({f"hits{k}": v for k, v in self.hits_at.items()})
        return d


@dataclass
class RankingReport:
    overall: MetricSet
    head: MetricSet
    tail: MetricSet
    n_test: int
    filtered: bool = True
    head_ranks: np.ndarray = field(default=None, repr=False)
    tail_ranks: np.ndarray = field(default=None, repr=False)

    @property
    def mr(self) -> float:
        return self.overall.mr

    @property
    def mrr(self) -> float:
        return self.overall.mrr

    @property
    def hits_at(self) -> dict[int, float]:
        return self.overall.hits_at

    @classmethod
    def from_ranks(cls, head_ranks, tail_ranks, filtered=True) -> "RankingReport":
        head_ranks, tail_ranks = np.asarray(head_ranks), np.asarray(tail_ranks)
        return cls(
            overall=MetricSet.from_ranks(np.concatenate([head_ranks, tail_ranks])),
            head=MetricSet.from_ranks(head_ranks),
            tail=MetricSet.from_ranks(tail_ranks),
            n_test=len(tail_ranks),
            filtered=filtered,
            head_ranks=head_ranks,
            tail_ranks=tail_ranks,
        )

    def as_dict(self) -> dict[str, float]:
        out = {}
        for name in ("overall", "head", "tail"):
            for k, v in getattr(self, name).as_dict().items():
                out[f"{name}.{k}"] = v
        return out

    def to_keyvalue(self) -> str:
        lines = [f"setting={'filtered' if self.filtered else 'raw'}", f"n_test={self.n_test}"]
        lines += [f"{k}={v!r}" for k, v in self.as_dict().items()]
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        cols = ["mr", "mrr", "hits1", "hits3", "hits10"]
        header = f"{'direction':<10}" + "".join(f"{c:>10}" for c in cols)
        lines = [f"# {'filtered' if self.filtered else 'raw'} ranking, {self.n_test} triples", header]
        for name in ("head", "tail", "overall"):
            d = getattr(self, name).as_dict()
            lines.append(f"{name:<10}" + f"{d['mr']:>10.2f}" + "".join(f"{d[c]:>10.4f}" for c in cols[1:]))
        return "\n".join(lines) + "\n"


def read_keyvalue_report(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                k, v = line.rstrip("\n").split("=", 1)
                out[k] = v
    return out


def _filter_mask(queries, targets, index, n_entities):
    mask = np.zeros((len(queries), n_entities), dtype=bool)
    for row, (q, r) in enumerate(queries):
        known = index.get((int(q), int(r)))
        if known:
            mask[row, list(known)] = True
    return mask


def evaluate(
    model, store: TripleStore, split: str = "test", filtered: bool = True, batch_size: int = 512, workers: int = 1
) -> RankingReport:
    """Rank every triple of ``split`` under tail corruption ``(h, r, ?)`` and
    head corruption, the latter scored as ``(t, r_inverse, ?)``.

    Batches are independent, so ``workers > 1`` scores them on a thread pool;
    the result does not depend on the worker count.
    """
    triples = np.asarray(store.split(split), dtype=np.int64).reshape(-1, 3)
    if len(triples) == 0:
        raise ConfigurationError(f"split {split!r} is empty")
    n_r = store.n_relations
    heads, rels, tails = triples[:, 0], triples[:, 1], triples[:, 2]
    directions = {
        "tail": (np.stack([heads, rels], 1), tails),
        "head": (np.stack([tails, rels + n_r], 1), heads),
    }
    if workers < 1:
        raise ConfigurationError("workers must be >= 1")

    def rank_batch(q, t):
        scores = model.score_tails(q[:, 0], q[:, 1], batch_size=batch_size)
        mask = _filter_mask(q, t, store.filter_index, model.n_entities) if filtered else None
        return ranks_from_scores(scores, t, mask)

    ranks = {}
    for name, (queries, targets) in directions.items():
        starts = range(0, len(queries), batch_size)
        args = [(queries[s : s + batch_size], targets[s : s + batch_size]) for s in starts]
        if workers == 1:
            out = [rank_batch(q, t) for q, t in args]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                out = list(pool.map(lambda a: rank_batch(*a), args))
        ranks[name] = np.concatenate(out)
    return RankingReport.from_ranks(ranks["head"], ranks["tail"], filtered=filtered)
