"""A link-prediction model: base score function plus optional literal fusion.

Parameter names in the store:

    distmult / conve   E, R, fusion.W (or fusion.W1, fusion.W2)
    complex            E_re, E_im, R_re, R_im, fusion_re.*, fusion_im.*
    conve              conv.filters, conv.W, conv.b

``conv.b`` is ConvE's per-entity score bias. It starts at zero and, like
every bias, is left out of :func:`parameter_count`.
"""

from __future__ import annotations

import numpy as np

from . import numeric as nx
from . import scoring
from .errors import ConfigurationError, DimensionError, KGLookupError
from .fusion import FusionConfig, fuse_backward, fuse_forward
from .scoring import ModelConfig


def parameter_count(config: ModelConfig, n_entities: int, n_relations: int, n_data_relations: int, fusion="none") -> int:
    """Number of parameters, biases excluded.

    ComplEx fuses its real and imaginary parts with independent transforms,
    so its fusion overhead is counted twice.
    """
    if isinstance(fusion, str):
        fusion = FusionConfig(fusion)
    overhead = fusion.parameter_count(config.embedding_dim, n_data_relations)
    if config.model_kind == "complex":
        overhead *= 2
    return scoring.base_parameter_count(config, n_entities, n_relations) + overhead


BIAS_NAMES = {"conv.b"}


class KGModel:
    def __init__(
        self,
        config: ModelConfig,
        fusion: FusionConfig,
        n_entities: int,
        n_relations: int,
        literals: np.ndarray | None = None,
        store: nx.ParameterStore | None = None,
        seed: int = 0,
        dtype=np.float64,
    ):
        """``n_relations`` counts every relation the model embeds, reciprocals included."""
        self.config = config
        self.fusion = fusion
        self.n_entities = n_entities
        self.n_relations = n_relations
        if literals is None:
            literals = np.zeros((n_entities, 0))
        literals = np.asarray(literals, dtype=dtype)
        if literals.shape[0] != n_entities:
            raise DimensionError("KGModel", f"literal rows {literals.shape[0]} != n_entities {n_entities}")
        self.literals = literals
        if store is None:
            store = nx.init_parameters(self.parameter_shapes(), seed, dtype)
            for name in BIAS_NAMES & set(store.entries):
                store.value(name)[...] = 0.0
        self.store = store
        missing = set(self.parameter_shapes()) - set(self.store.entries)
        if missing:
            raise ConfigurationError(f"parameter store lacks {sorted(missing)}")
        for name, shape in self.parameter_shapes().items():
            if self.store.value(name).shape != tuple(shape):
                raise DimensionError("KGModel", f"{name} has shape {self.store.value(name).shape}, expected {shape}")

    @property
    def kind(self) -> str:
        return self.config.model_kind

    @property
    def n_data_relations(self) -> int:
        return self.literals.shape[1]

    @property
    def parts(self) -> list[str]:
        return ["re", "im"] if self.kind == "complex" else [""]

    @staticmethod
    def _suffix(part):
        return f"_{part}" if part else ""

    def parameter_shapes(self) -> dict[str, tuple]:
        H = self.config.embedding_dim
        shapes = {}
        for part in self.parts:
            shapes[f"E{self._suffix(part)}"] = (self.n_entities, H)
        for part in self.parts:
            shapes[f"R{self._suffix(part)}"] = (self.n_relations, H)
        if self.kind == "conve":
            c = self.config
            shapes["conv.filters"] = (c.n_filters, 1, c.filter_size, c.filter_size)
            shapes["conv.W"] = (c.projection_in, H)
            shapes["conv.b"] = (self.n_entities,)
        for part in self.parts:
            prefix = f"fusion{self._suffix(part)}."
            for wname, shape in self.fusion.weight_shapes(H, self.n_data_relations).items():
                shapes[prefix + wname] = shape
        return shapes

    def parameter_count(self) -> int:
        """Stored parameters minus biases, comparable with :func:`parameter_count`."""
        return self.store.n_parameters() - sum(self.store[n].size for n in BIAS_NAMES & set(self.store.entries))

    def _fusion_weights(self, part) -> dict:
        prefix = f"fusion{self._suffix(part)}."
        return {k[len(prefix):]: p.value for k, p in self.store.entries.items() if k.startswith(prefix)}

    # ------------------------------------------------------------------
    # forward / backward

    def enriched_entities(self):
        """Literal-enriched entity tables, one per embedding part, plus caches."""
        tables, caches = [], []
        for part in self.parts:
            E = self.store.value(f"E{self._suffix(part)}")
            out, cache = fuse_forward(self.fusion.kind, E, self.literals, self._fusion_weights(part))
            tables.append(out)
            caches.append(cache)
        return tables, caches

    def _check_ids(self, heads, rels):
        heads, rels = np.asarray(heads, dtype=np.int64), np.asarray(rels, dtype=np.int64)
        if heads.size and (heads.min() < 0 or heads.max() >= self.n_entities):
            raise KGLookupError(f"entity id out of range [0, {self.n_entities})")
        if rels.size and (rels.min() < 0 or rels.max() >= self.n_relations):
            raise KGLookupError(f"relation id out of range [0, {self.n_relations})")
        return heads, rels

    def forward(self, heads, rels, train: bool = False, rng: np.random.Generator | None = None):
        """1-N scores ``(B, n_entities)`` for query pairs ``(heads[b], rels[b])``."""
        heads, rels = self._check_ids(heads, rels)
        tables, fusion_caches = self.enriched_entities()
        rate = self.config.embedding_dropout
        head_vecs, head_masks, rel_vecs, rel_masks = [], [], [], []
        for part, table in zip(self.parts, tables):
            h, hm = nx.dropout_forward(nx.lookup_rows_forward(table, heads), rate, train, rng)
            R = self.store.value(f"R{self._suffix(part)}")
            r, rm = nx.dropout_forward(nx.lookup_rows_forward(R, rels), rate, train, rng)
            head_vecs.append(h)
            head_masks.append(hm)
            rel_vecs.append(r)
            rel_masks.append(rm)

        if self.kind == "distmult":
            scores, score_cache = scoring.distmult_1n_forward(head_vecs[0], rel_vecs[0], tables[0])
        elif self.kind == "complex":
            scores, score_cache = scoring.complex_1n_forward(
                head_vecs[0], head_vecs[1], rel_vecs[0], rel_vecs[1], tables[0], tables[1]
            )
        else:
            scores, score_cache = scoring.conve_1n_forward(
                head_vecs[0],
                rel_vecs[0],
                tables[0],
                self.store.value("conv.filters"),
                self.store.value("conv.W"),
                self.config,
                train,
                rng,
                bias=self.store.value("conv.b"),
            )
        cache = (heads, rels, fusion_caches, head_masks, rel_masks, score_cache)
        return scores, cache

    def backward(self, cache, dscores) -> None:
        """Accumulate gradients of a loss whose gradient w.r.t. the scores is ``dscores``."""
        heads, rels, fusion_caches, head_masks, rel_masks, score_cache = cache
        if self.kind == "distmult":
            dh, dr, dc = scoring.distmult_1n_backward(dscores, score_cache)
            dheads, drels, dcands = [dh], [dr], [dc]
        elif self.kind == "complex":
            dhr, dhi, drr, dri, dcr, dci = scoring.complex_1n_backward(dscores, score_cache)
            dheads, drels, dcands = [dhr, dhi], [drr, dri], [dcr, dci]
        else:
            dh, dr, dc, dfilters, dW, db = scoring.conve_1n_backward(dscores, score_cache)
            dheads, drels, dcands = [dh], [dr], [dc]
            self.store.accumulate("conv.filters", dfilters)
            self.store.accumulate("conv.W", dW)
            self.store.accumulate("conv.b", db)

        H = self.config.embedding_dim
        for i, part in enumerate(self.parts):
            sfx = self._suffix(part)
            dhead = nx.dropout_backward(dheads[i], head_masks[i])
            dtable = dcands[i] + nx.lookup_rows_backward(dhead, heads, self.n_entities)
            de, wgrads = fuse_backward(self.fusion.kind, dtable, fusion_caches[i], self._fusion_weights(part), H)
            self.store.accumulate(f"E{sfx}", de)
            for wname, g in wgrads.items():
                self.store.accumulate(f"fusion{sfx}.{wname}", g)
            drel = nx.dropout_backward(drels[i], rel_masks[i])
            self.store.accumulate(f"R{sfx}", nx.lookup_rows_backward(drel, rels, self.n_relations))

    # ------------------------------------------------------------------
    # evaluation helpers

    def score_tails(self, heads, rels, batch_size: int = 512) -> np.ndarray:
        """Eval-mode 1-N scores, computed in batches."""
        heads, rels = np.asarray(heads), np.asarray(rels)
        out = np.empty((len(heads), self.n_entities))
        for start in range(0, len(heads), batch_size):
            sl = slice(start, start + batch_size)
            out[sl], _ = self.forward(heads[sl], rels[sl], train=False)
        return out

    def score(self, head: int, rel: int, tail: int) -> float:
        """Eval-mode score of a single triple, computed without the 1-N path."""
        return enriched_score(self, head, rel, tail)

    def entity_embeddings(self) -> np.ndarray:
        """Base entity embeddings, real and imaginary parts concatenated for ComplEx."""
        return np.concatenate([self.store.value(f"E{self._suffix(p)}") for p in self.parts], axis=1)

    def enriched_embeddings(self) -> np.ndarray:
        tables, _ = self.enriched_entities()
        return np.concatenate(tables, axis=1)


def enriched_score(model: KGModel, head: int, rel: int, tail: int) -> float:
    """Score one triple with both entities passed through the model's fusion."""
    for idx, bound, what in ((head, model.n_entities, "entity"), (tail, model.n_entities, "entity"), (rel, model.n_relations, "relation")):
        if not 0 <= idx < bound:
            raise KGLookupError(f"{what} id {idx} out of range [0, {bound})")
    enriched = {}
    for part in model.parts:
        E = model.store.value(f"E{model._suffix(part)}")
        weights = model._fusion_weights(part)
        rows = E[[head, tail]]
        lit = model.literals[[head, tail]]
        out, _ = fuse_forward(model.fusion.kind, rows, lit, weights)
        enriched[part] = out
    if model.kind == "distmult":
        e = enriched[""]
        return scoring.score_distmult(e[0], e[1], model.store.value("R")[rel])
    if model.kind == "complex":
        re, im = enriched["re"], enriched["im"]
        return scoring.score_complex(
            re[0], im[0], re[1], im[1], model.store.value("R_re")[rel], model.store.value("R_im")[rel]
        )
    e = enriched[""]
    return scoring.score_conve(
        e[0],
        e[1],
        model.store.value("R")[rel],
        model.store.value("conv.filters"),
        model.store.value("conv.W"),
        model.config,
        bias=float(model.store.value("conv.b")[tail]),
    )
