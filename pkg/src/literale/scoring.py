"""Base score functions: DistMult, ComplEx and ConvE.

Single-triple scorers take plain vectors. The ``*_1n`` functions score a
batch of ``(head, relation)`` queries against every candidate tail at once
and come with matching backward passes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numeric as nx
from .errors import ConfigurationError, DimensionError

MODEL_KINDS = ("distmult", "complex", "conve")


@dataclass
class ModelConfig:
    model_kind: str = "distmult"
    embedding_dim: int = 200
    n_filters: int = 32
    filter_size: int = 3
    reshape_width: int = 10
    embedding_dropout: float = 0.2
    feature_map_dropout: float = 0.2
    projection_dropout: float = 0.3

    def __post_init__(self):
        self.model_kind = self.model_kind.lower()
        if self.model_kind not in MODEL_KINDS:
            raise ConfigurationError(f"unknown model {self.model_kind!r}; expected one of {MODEL_KINDS}")
        if self.embedding_dim <= 0:
            raise ConfigurationError("embedding_dim must be positive")
        for rate in (self.embedding_dropout, self.feature_map_dropout, self.projection_dropout):
            if not 0.0 <= rate < 1.0:
                raise ConfigurationError(f"dropout rate {rate} outside [0, 1)")
        if self.model_kind == "conve":
            H, w, k = self.embedding_dim, self.reshape_width, self.filter_size
            if w <= 0 or H % w:
                raise ConfigurationError(f"ConvE needs embedding_dim ({H}) divisible by reshape_width ({w})")
            if self.n_filters <= 0 or k <= 0 or k > w or k > 2 * (H // w):
                raise ConfigurationError(f"filter size {k} does not fit the {2 * H // w}x{w} input grid")

    @property
    def grid_shape(self) -> tuple[int, int]:
        """Shape of the stacked ``[e; r]`` input image for ConvE."""
        return 2 * (self.embedding_dim // self.reshape_width), self.reshape_width

    @property
    def feature_map_shape(self) -> tuple[int, int, int]:
        gh, gw = self.grid_shape
        k = self.filter_size
        return self.n_filters, gh - k + 1, gw - k + 1

    @property
    def projection_in(self) -> int:
        return int(np.prod(self.feature_map_shape))

    def conv_parameter_count(self) -> int:
        if self.model_kind != "conve":
            return 0
        return self.n_filters * self.filter_size**2 + self.projection_in * self.embedding_dim


def _same_length(op, *vectors):
    n = len(vectors[0])
    for v in vectors[1:]:
        if len(v) != n:
            raise DimensionError(op, f"vector lengths differ: {[len(u) for u in vectors]}")


def score_distmult(e_i, e_j, r_k) -> float:
    e_i, e_j, r_k = map(np.asarray, (e_i, e_j, r_k))
    _same_length("score_distmult", e_i, e_j, r_k)
    return float(np.sum(e_i * e_j * r_k))


def score_complex(re_i, im_i, re_j, im_j, re_r, im_r) -> float:
    vs = list(map(np.asarray, (re_i, im_i, re_j, im_j, re_r, im_r)))
    _same_length("score_complex", *vs)
    re_i, im_i, re_j, im_j, re_r, im_r = vs
    return float(
        np.sum(re_i * re_j * re_r)
        + np.sum(im_i * im_j * re_r)
        + np.sum(re_i * im_j * im_r)
        - np.sum(im_i * re_j * im_r)
    )


def score_conve(e_i, e_j, r_k, filters, W, config: ModelConfig, bias: float = 0.0) -> float:
    """Eval-mode ConvE score for one triple; ``bias`` is the tail entity's score offset."""
    e_i, e_j, r_k = map(np.asarray, (e_i, e_j, r_k))
    _same_length("score_conve", e_i, e_j, r_k)
    scores, _ = conve_1n_forward(e_i[None], r_k[None], e_j[None], filters, W, config, train=False, bias=np.array([bias]))
    return float(scores[0, 0])


# ---------------------------------------------------------------------------
# 1-N batched forms


def distmult_1n_forward(head, rel, cand):
    """head, rel: (B, H); cand: (N, H) -> (B, N)."""
    if head.shape != rel.shape or head.shape[-1] != cand.shape[-1]:
        raise DimensionError("distmult_1n", f"shapes {head.shape}, {rel.shape}, {cand.shape}")
    q = head * rel
    return q @ cand.T, (head, rel, cand, q)


def distmult_1n_backward(dscores, cache):
    head, rel, cand, q = cache
    dq = dscores @ cand
    dcand = dscores.T @ q
    return dq * rel, dq * head, dcand


def complex_1n_forward(head_re, head_im, rel_re, rel_im, cand_re, cand_im):
    if not (head_re.shape == head_im.shape == rel_re.shape == rel_im.shape and cand_re.shape == cand_im.shape):
        raise DimensionError("complex_1n", "real/imaginary part shapes disagree")
    if head_re.shape[-1] != cand_re.shape[-1]:
        raise DimensionError("complex_1n", f"embedding widths {head_re.shape[-1]} vs {cand_re.shape[-1]}")
    # coefficient vectors multiplying Re(e_j) and Im(e_j)
    a = head_re * rel_re - head_im * rel_im
    b = head_im * rel_re + head_re * rel_im
    scores = a @ cand_re.T + b @ cand_im.T
    return scores, (head_re, head_im, rel_re, rel_im, cand_re, cand_im, a, b)


def complex_1n_backward(dscores, cache):
    head_re, head_im, rel_re, rel_im, cand_re, cand_im, a, b = cache
    da = dscores @ cand_re
    db = dscores @ cand_im
    dcand_re = dscores.T @ a
    dcand_im = dscores.T @ b
    dhead_re = da * rel_re + db * rel_im
    dhead_im = -da * rel_im + db * rel_re
    drel_re = da * head_re + db * head_im
    drel_im = -da * head_im + db * head_re
    return dhead_re, dhead_im, drel_re, drel_im, dcand_re, dcand_im


def conve_1n_forward(head, rel, cand, filters, W, config: ModelConfig, train=False, rng=None, bias=None):
    """ConvE: relu(relu(conv([e_i; r_k])) flattened @ W) . e_j + b_j for every candidate.

    ``bias`` holds one offset per candidate (zeros when omitted). Without it
    every score is non-negative whenever the candidates are, e.g. after a
    ReLU fusion.
    """
    B, H = head.shape
    if rel.shape != head.shape or cand.shape[-1] != H or H != config.embedding_dim:
        raise DimensionError("conve_1n", f"shapes {head.shape}, {rel.shape}, {cand.shape} for H={config.embedding_dim}")
    gh, gw = config.grid_shape
    if filters.shape != (config.n_filters, 1, config.filter_size, config.filter_size):
        raise ConfigurationError(f"filter shape {filters.shape} inconsistent with config")
    if W.shape != (config.projection_in, H):
        raise ConfigurationError(f"projection shape {W.shape} != {(config.projection_in, H)}")
    grid = np.concatenate([head.reshape(B, 1, gh // 2, gw), rel.reshape(B, 1, gh // 2, gw)], axis=2)
    conv = nx.conv2d_forward(grid, filters)
    fmap = nx.relu_forward(conv)
    fmap_d, fmap_mask = nx.dropout_forward(fmap, config.feature_map_dropout, train, rng)
    flat = fmap_d.reshape(B, -1)
    proj = nx.affine_forward(W, flat)
    proj_d, proj_mask = nx.dropout_forward(proj, config.projection_dropout, train, rng)
    hidden = nx.relu_forward(proj_d)
    scores = hidden @ cand.T
    if bias is not None:
        if bias.shape != (cand.shape[0],):
            raise DimensionError("conve_1n", f"bias shape {bias.shape} != ({cand.shape[0]},)")
        scores = scores + bias
    cache = (grid, conv, fmap_mask, flat, proj_d, proj_mask, hidden, cand, filters, W, config)
    return scores, cache


def conve_1n_backward(dscores, cache):
    """Returns ``(dhead, drel, dcand, dfilters, dW, dbias)``."""
    grid, conv, fmap_mask, flat, proj_d, proj_mask, hidden, cand, filters, W, config = cache
    B = grid.shape[0]
    gh, gw = config.grid_shape
    dhidden = dscores @ cand
    dcand = dscores.T @ hidden
    dproj = nx.dropout_backward(nx.relu_backward(dhidden, proj_d), proj_mask)
    dW, dflat = nx.affine_backward(dproj, W, flat)
    dfmap = nx.dropout_backward(dflat.reshape(conv.shape), fmap_mask)
    dconv = nx.relu_backward(dfmap, conv)
    dfilters, dgrid = nx.conv2d_backward(dconv, grid, filters)
    half = gh // 2
    dhead = dgrid[:, 0, :half, :].reshape(B, -1)
    drel = dgrid[:, 0, half:, :].reshape(B, -1)
    return dhead, drel, dcand, dfilters, dW, dscores.sum(axis=0)


def score_all_tails(model_kind: str, head, rel, candidates, config: ModelConfig | None = None, conv_params=None):
    """Scores of one query against every candidate tail (eval mode).

    For ComplEx pass ``head``, ``rel`` and ``candidates`` as ``(re, im)`` pairs.
    ``conv_params`` is ``(filters, W)`` or ``(filters, W, bias)`` for ConvE.
    """
    if model_kind == "distmult":
        scores, _ = distmult_1n_forward(np.atleast_2d(head), np.atleast_2d(rel), np.atleast_2d(candidates))
    elif model_kind == "complex":
        (hr, hi), (rr, ri), (cr, ci) = head, rel, candidates
        scores, _ = complex_1n_forward(*(np.atleast_2d(v) for v in (hr, hi, rr, ri, cr, ci)))
    elif model_kind == "conve":
        filters, W, *bias = conv_params
        scores, _ = conve_1n_forward(
            np.atleast_2d(head), np.atleast_2d(rel), np.atleast_2d(candidates), filters, W, config,
            bias=bias[0] if bias else None,
        )
    else:
        raise ConfigurationError(f"unknown model {model_kind!r}")
    return scores[0]


def base_parameter_count(config: ModelConfig, n_entities: int, n_relations: int) -> int:
    """Parameter count of the base model without literal fusion, biases excluded."""
    H = config.embedding_dim
    gamma = n_entities * H + n_relations * H
    if config.model_kind == "complex":
        return 2 * gamma
    return gamma + config.conv_parameter_count()
