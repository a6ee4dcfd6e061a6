"""Link prediction over knowledge graphs with literal-enriched entity embeddings."""

from .data import (
    Dataset,
    LiteralMatrix,
    TripleStore,
    Vocabulary,
    build_literal_matrix,
    dataset_stats,
    load_dataset,
    one_to_n_targets,
    parse_triples,
)
from .evaluation import RankingReport, evaluate, rank_of
from .fusion import FusionConfig, fuse_gate, fuse_linear, fuse_mlp, fuse_nonlinear
from .model import KGModel, enriched_score, parameter_count
from .numeric import AdamConfig, ParameterStore, adam_step, init_parameters, load_checkpoint, save_checkpoint
from .scoring import ModelConfig, score_all_tails, score_complex, score_conve, score_distmult
from .training import TrainConfig, bce_loss, fit, smooth_labels, train_epoch

__version__ = "0.1.0"
