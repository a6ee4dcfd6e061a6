"""Triple and literal ingestion: vocabularies, triple stores, literal matrices.

Files are UTF-8 TSV. Relational files hold ``head<TAB>relation<TAB>tail`` and
the literal file holds ``entity<TAB>data_relation<TAB>value``. A dataset
directory contains ``train.txt``, ``valid.txt``, ``test.txt`` and optionally
``numerical_literals.txt``.
"""

from __future__ import annotations

import logging
import math
import os
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, IngestionError, KGLookupError, ParseError

log = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")
LITERAL_FILE = "numerical_literals.txt"


class Index:
    """Bidirectional map between surface strings and contiguous ids."""

    def __init__(self, symbols=()):
        self._ids: dict[str, int] = {}
        self._symbols: list[str] = []
        for s in symbols:
            self.add(s)

    def add(self, symbol: str) -> int:
        idx = self._ids.get(symbol)
        if idx is None:
            idx = len(self._symbols)
            self._ids[symbol] = idx
            self._symbols.append(symbol)
        return idx

    def id(self, symbol: str) -> int:
        try:
            return self._ids[symbol]
        except KeyError:
            raise KGLookupError(f"unknown symbol {symbol!r}") from None

    def symbol(self, idx: int) -> str:
        if not 0 <= idx < len(self._symbols):
            raise KGLookupError(f"id {idx} out of range [0, {len(self._symbols)})")
        return self._symbols[idx]

    def __contains__(self, symbol) -> bool:
        return symbol in self._ids

    def __len__(self) -> int:
        return len(self._symbols)

    def __iter__(self):
        return iter(self._symbols)

    def __eq__(self, other) -> bool:
        return isinstance(other, Index) and self._symbols == other._symbols

    @property
    def symbols(self) -> list[str]:
        return list(self._symbols)


@dataclass
class Vocabulary:
    entities: Index = field(default_factory=Index)
    relations: Index = field(default_factory=Index)
    data_relations: Index = field(default_factory=Index)

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    @property
    def n_data_relations(self) -> int:
        return len(self.data_relations)


def _read_tsv(path):
    """Yield ``(line_no, fields)`` for every nonempty line of a TSV file."""
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            yield line_no, line.split("\t")


def parse_triples(path, vocab: Vocabulary) -> list[tuple[int, int, int]]:
    """Read relational triples in file order, extending ``vocab`` as needed.

    Duplicates are kept; deduplication happens in :class:`TripleStore`.
    """
    triples = []
    for line_no, fields in _read_tsv(path):
        if len(fields) != 3:
            raise ParseError(path, line_no, f"expected 3 tab-separated fields, got {len(fields)}")
        h, r, t = fields
        triples.append((vocab.entities.add(h), vocab.relations.add(r), vocab.entities.add(t)))
    return triples


def parse_literals(path) -> list[tuple[str, str, float]]:
    """Read ``(entity, data_relation, value)`` rows; values must be finite."""
    rows = []
    for line_no, fields in _read_tsv(path):
        if len(fields) != 3:
            raise ParseError(path, line_no, f"expected 3 tab-separated fields, got {len(fields)}")
        ent, rel, raw = fields
        try:
            value = float(raw)
        except ValueError:
            raise ParseError(path, line_no, f"non-numeric literal value {raw!r}") from None
        if not math.isfinite(value):
            raise IngestionError(f"{path}:{line_no}: non-finite literal value in ({ent}, {rel}, {raw})")
        rows.append((ent, rel, value))
    return rows


@dataclass
class TripleStore:
    """Deduplicated relational triples plus the lookup indexes training needs.

    ``hr_index`` maps ``(head, relation)`` to the set of training tails. It
    also contains reciprocal keys ``(tail, relation + n_relations)`` so head
    prediction reduces to tail prediction. ``filter_index`` is the same
    structure built over all three splits, used for filtered ranking.
    """

    n_entities: int
    n_relations: int
    train: list[tuple[int, int, int]]
    valid: list[tuple[int, int, int]]
    test: list[tuple[int, int, int]]
    all_known: set = field(init=False)
    hr_index: dict = field(init=False)
    filter_index: dict = field(init=False)

    def __post_init__(self):
        self.train = _dedup(self.train)
        self.valid = _dedup(self.valid)
        self.test = _dedup(self.test)
        for split in SPLITS:
            for h, r, t in getattr(self, split):
                if not (0 <= h < self.n_entities and 0 <= t < self.n_entities and 0 <= r < self.n_relations):
                    raise IngestionError(f"{split} triple {(h, r, t)} out of vocabulary bounds")
        self.all_known = set(self.train) | set(self.valid) | set(self.test)
        self.hr_index = self._index(self.train)
        self.filter_index = self._index(self.all_known)

    def _index(self, triples) -> dict:
        index: dict[tuple[int, int], set[int]] = {}
        n_r = self.n_relations
        for h, r, t in triples:
            index.setdefault((h, r), set()).add(t)
            index.setdefault((t, r + n_r), set()).add(h)
        return index

    def split(self, name: str) -> list[tuple[int, int, int]]:
        if name not in SPLITS:
            raise ConfigurationError(f"unknown split {name!r}; expected one of {SPLITS}")
        return getattr(self, name)

    @property
    def n_relations_with_reciprocals(self) -> int:
        return 2 * self.n_relations

    def training_pairs(self) -> np.ndarray:
        """Distinct ``(head, relation)`` keys of ``hr_index`` in sorted order."""
        if not self.hr_index:
            return np.zeros((0, 2), dtype=np.int64)
        return np.array(sorted(self.hr_index), dtype=np.int64)


def _dedup(triples):
    seen = set()
    out = []
    for t in triples:
        t = tuple(int(x) for x in t)
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


@dataclass
class LiteralMatrix:
    """Dense ``n_entities x n_data_relations`` literal values with a presence mask."""

    values: np.ndarray
    present: np.ndarray
    norm_params: np.ndarray  # (n_data_relations, 2): per-column (min, max)
    normalized: bool = False
    n_triples: int = 0

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_data_relations(self) -> int:
        return self.values.shape[1]

    @classmethod
    def empty(cls, n_entities: int) -> "LiteralMatrix":
        return cls(
            values=np.zeros((n_entities, 0)),
            present=np.zeros((n_entities, 0), dtype=bool),
            norm_params=np.zeros((0, 2)),
        )


def build_literal_matrix(
    literal_triples,
    vocab: Vocabulary,
    min_frequency: int = 5,
    normalize: bool = True,
    skip_unknown_entities: bool = False,
) -> LiteralMatrix:
    """Assemble the literal matrix, registering retained data relations in ``vocab``.

    Data relations seen in fewer than ``min_frequency`` triples are dropped
    before ids are assigned. For repeated ``(entity, data_relation)`` pairs
    the first value in input order wins. With ``normalize`` each column is
    min-max scaled over its present values; a zero-range column maps to 0.5.
    """
    rows = []
    for ent, rel, value in literal_triples:
        value = float(value)
        if not math.isfinite(value):
            raise IngestionError(f"non-finite literal value in ({ent}, {rel}, {value})")
        if ent not in vocab.entities:
            if skip_unknown_entities:
                continue
            raise KGLookupError(f"literal triple references unknown entity {ent!r}")
        rows.append((ent, rel, value))

    counts = Counter(rel for _, rel, _ in rows)
    kept_rows = [row for row in rows if counts[row[1]] >= min_frequency]
    for _, rel, _ in kept_rows:
        vocab.data_relations.add(rel)

    n_e, n_d = vocab.n_entities, vocab.n_data_relations
    values = np.zeros((n_e, n_d))
    present = np.zeros((n_e, n_d), dtype=bool)
    for ent, rel, value in kept_rows:
        i, k = vocab.entities.id(ent), vocab.data_relations.id(rel)
        if not present[i, k]:
            values[i, k] = value
            present[i, k] = True

    norm_params = np.zeros((n_d, 2))
    for k in range(n_d):
        col = values[present[:, k], k]
        if col.size:
            norm_params[k] = col.min(), col.max()

    lit = LiteralMatrix(values, present, norm_params, normalized=False, n_triples=len(kept_rows))
    if normalize:
        lit = normalize_literals(lit)
    return lit


def normalize_literals(lit: LiteralMatrix) -> LiteralMatrix:
    lo, hi = lit.norm_params[:, 0], lit.norm_params[:, 1]
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (lit.values - lo) / safe, 0.5)
    values = np.where(lit.present, scaled, 0.0)
    return LiteralMatrix(values, lit.present.copy(), lit.norm_params.copy(), True, lit.n_triples)


def one_to_n_targets(head_id: int, relation_id: int, store: TripleStore, n_entities: int) -> np.ndarray:
    """Binary label vector over all candidate tails of a training ``(head, relation)``."""
    try:
        tails = store.hr_index[(head_id, relation_id)]
    except KeyError:
        raise KGLookupError(f"no training tails for (head={head_id}, relation={relation_id})") from None
    y = np.zeros(n_entities)
    y[list(tails)] = 1.0
    return y


def batch_targets(pairs: np.ndarray, store: TripleStore, n_entities: int) -> np.ndarray:
    y = np.zeros((len(pairs), n_entities))
    for row, (h, r) in enumerate(pairs):
        y[row, list(store.hr_index[(int(h), int(r))])] = 1.0
    return y


@dataclass
class DatasetStats:
    n_entities: int
    n_relations: int
    n_data_relations: int
    n_relational_triples: int
    n_literal_triples: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def dataset_stats(store: TripleStore | None, literals: LiteralMatrix | None) -> DatasetStats:
    if store is None:
        return DatasetStats(0, 0, 0, 0, 0)
    n_triples = len(store.train) + len(store.valid) + len(store.test)
    n_d = literals.n_data_relations if literals is not None else 0
    n_lit = literals.n_triples if literals is not None else 0
    return DatasetStats(store.n_entities, store.n_relations, n_d, n_triples, n_lit)


@dataclass
class Dataset:
    vocab: Vocabulary
    store: TripleStore
    literals: LiteralMatrix
    name: str = ""

    def stats(self) -> DatasetStats:
        return dataset_stats(self.store, self.literals)


def load_dataset(directory, min_frequency: int = 5, normalize: bool = True, literals: bool = True) -> Dataset:
    """Ingest a dataset directory; entity and relation ids follow train, valid, test order."""
    vocab = Vocabulary()
    splits = {}
    for split in SPLITS:
        path = os.path.join(directory, f"{split}.txt")
        if not os.path.exists(path):
            raise FileNotFoundError(path)
        splits[split] = parse_triples(path, vocab)
    lit_path = os.path.join(directory, LITERAL_FILE)
    if literals and os.path.exists(lit_path):
        lit = build_literal_matrix(
            parse_literals(lit_path), vocab, min_frequency, normalize, skip_unknown_entities=True
        )
    else:
        lit = LiteralMatrix.empty(vocab.n_entities)
    store = TripleStore(vocab.n_entities, vocab.n_relations, **splits)
    return Dataset(vocab, store, lit, name=os.path.basename(os.path.normpath(directory)))


def write_dataset(dataset: Dataset, directory, raw_literals=None) -> None:
    """Write a dataset in the directory layout :func:`load_dataset` reads.

    ``raw_literals`` overrides the literal rows written; by default present
    entries of the (possibly normalized) matrix are written as-is.
    """
    os.makedirs(directory, exist_ok=True)
    ents, rels = dataset.vocab.entities, dataset.vocab.relations
    for split in SPLITS:
        with open(os.path.join(directory, f"{split}.txt"), "w", encoding="utf-8") as f:
            for h, r, t in dataset.store.split(split):
                f.write(f"{ents.symbol(h)}\t{rels.symbol(r)}\t{ents.symbol(t)}\n")
    if raw_literals is None:
        lit = dataset.literals
        raw_literals = [
            (ents.symbol(i), dataset.vocab.data_relations.symbol(k), lit.values[i, k])
            for i, k in zip(*np.nonzero(lit.present))
        ]
    with open(os.path.join(directory, LITERAL_FILE), "w", encoding="utf-8") as f:
        for ent, rel, value in raw_literals:
            f.write(f"{ent}\t{rel}\t{float(value)!r}\n")
