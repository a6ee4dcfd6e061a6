"""Command-line entry point: ``literale {train,evaluate,neighbors,generate,stats}``.

Settings come from three layers, later ones winning: built-in defaults, an
optional ``--config`` file of ``key=value`` lines, and explicit flags. The
effective settings of every run are written next to its outputs as
``<output>.config`` so the run can be repeated with ``--config``.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import plotting
from .analysis import NeighborQuery, format_neighbors, generate_synthetic, nearest_neighbors
from .data import load_dataset, write_dataset
from .errors import ConfigurationError, LiteralEError
from .evaluation import evaluate
from .fusion import FUSION_KINDS, FusionConfig
from .model import KGModel
from .numeric import load_checkpoint, save_checkpoint
from .scoring import MODEL_KINDS, ModelConfig
from .training import TrainConfig, fit

log = logging.getLogger("literale")

COMMANDS = ("train", "evaluate", "neighbors", "generate", "stats")
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3


@dataclass
class RunConfig:
    dataset: str = ""
    model: str = "distmult"
    fusion: str = "linear"
    dim: int = 200
    hidden_dim: int = 0
    n_filters: int = 32
    filter_size: int = 3
    reshape_width: int = 10
    embedding_dropout: float = 0.2
    feature_map_dropout: float = 0.2
    projection_dropout: float = 0.3
    lr: float = 0.001
    batch_size: int = 128
    epochs: int = 0  # 0 selects the per-model default
    label_smoothing: float = 0.1
    eval_every: int = 3
    patience: int = 5
    seed: int = 0
    seeds: int = 1
    min_frequency: int = 5
    checkpoint: str = "model.ckpt"
    out: str = ""
    filtered: bool = True
    split: str = "test"
    workers: int = 1
    entity: str = ""
    space: str = "all"
    k: int = 5
    n_entities: int = 200
    n_clusters: int = 4
    link_prob: float = 1.0

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ConfigurationError(f"unknown model {self.model!r}; expected one of {MODEL_KINDS}")
        if self.fusion not in FUSION_KINDS:
            raise ConfigurationError(f"unknown fusion {self.fusion!r}; expected one of {FUSION_KINDS}")
        if self.seeds < 1:
            raise ConfigurationError("seeds must be >= 1")
        if self.split not in ("train", "valid", "test"):
            raise ConfigurationError(f"unknown split {self.split!r}")

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            self.model,
            embedding_dim=self.dim,
            n_filters=self.n_filters,
            filter_size=self.filter_size,
            reshape_width=self.reshape_width,
            embedding_dropout=self.embedding_dropout,
            feature_map_dropout=self.feature_map_dropout,
            projection_dropout=self.projection_dropout,
        )

    def fusion_config(self) -> FusionConfig:
        return FusionConfig(self.fusion, hidden_dim=self.hidden_dim or None)

    def train_config(self, seed=None) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.lr,
            batch_size=self.batch_size,
            max_epochs=self.epochs or TrainConfig.default_epochs(self.model, self.fusion),
            label_smoothing=self.label_smoothing,
            eval_every=self.eval_every,
            patience=self.patience,
            seed=self.seed if seed is None else seed,
        )

    def to_text(self) -> str:
        return "".join(f"{f.name}={_format_value(getattr(self, f.name))}\n" for f in fields(self))


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(name, raw: str, typ):
    try:
        if typ is bool or typ == "bool":
            low = raw.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if typ is int or typ == "int":
            return int(raw)
        if typ is float or typ == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigurationError(f"config key {name!r}: cannot parse {raw!r}") from None


def read_config_file(path) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment. Unknown keys are rejected."""
    known = {f.name: f.type for f in fields(RunConfig)}
    out = {}
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{line_no}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigurationError(f"{path}:{line_no}: unknown key {key!r}")
            out[key] = _convert(key, value, known[key])
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="literale", description="Link prediction with literal-enriched embeddings.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS
    for name in COMMANDS:
        c = sub.add_parser(name)
        c.add_argument("--config", default=None, help="key=value settings file")
        c.add_argument("--dataset", default=S, help="dataset directory")
        c.add_argument("--model", default=S, choices=MODEL_KINDS)
        c.add_argument("--fusion", default=S, choices=FUSION_KINDS)
        c.add_argument("--dim", type=int, default=S)
        c.add_argument("--hidden-dim", dest="hidden_dim", type=int, default=S)
        c.add_argument("--lr", type=float, default=S)
        c.add_argument("--batch-size", dest="batch_size", type=int, default=S)
        c.add_argument("--epochs", type=int, default=S)
        c.add_argument("--label-smoothing", dest="label_smoothing", type=float, default=S)
        c.add_argument("--patience", type=int, default=S)
        c.add_argument("--seed", type=int, default=S)
        c.add_argument("--seeds", type=int, default=S, help="train N runs with seeds seed..seed+N-1")
        c.add_argument("--checkpoint", default=S)
        c.add_argument("--out", default=S)
        c.add_argument("--filtered", dest="filtered", action="store_true", default=S)
        c.add_argument("--raw", dest="filtered", action="store_false", default=S)
        c.add_argument("--split", default=S)
        c.add_argument("--workers", type=int, default=S, help="evaluation threads")
        c.add_argument("--k", type=int, default=S)
        c.add_argument("--entity", default=S)
        c.add_argument("--space", default=S, choices=("all", "embedding", "literal", "enriched"))
        c.add_argument("--min-frequency", dest="min_frequency", type=int, default=S)
        c.add_argument("--n-entities", dest="n_entities", type=int, default=S)
        c.add_argument("--n-clusters", dest="n_clusters", type=int, default=S)
        c.add_argument("--link-prob", dest="link_prob", type=float, default=S)
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    for f in fields(RunConfig):
        if hasattr(args, f.name):
            values[f.name] = getattr(args, f.name)
    return RunConfig(**values)


def write_config(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(cfg.to_text())


def _require(value, what):
    if not value:
        raise ConfigurationError(f"--{what} is required")
    return value


def _load(cfg: RunConfig):
    return load_dataset(_require(cfg.dataset, "dataset"), min_frequency=cfg.min_frequency)


def _build_model(cfg: RunConfig, ds, store=None, seed=None) -> KGModel:
    return KGModel(
        cfg.model_config(),
        cfg.fusion_config(),
        ds.store.n_entities,
        2 * ds.store.n_relations,
        ds.literals.values,
        store=store,
        seed=cfg.seed if seed is None else seed,
    )


def _load_model(cfg: RunConfig, ds) -> KGModel:
    """Rebuild a model from a checkpoint, taking architecture settings from its sidecar config."""
    path = _require(cfg.checkpoint, "checkpoint")
    sidecar = path + ".config"
    if os.path.exists(sidecar):
        saved = read_config_file(sidecar)
        arch = {k: saved[k] for k in (
            "model", "fusion", "dim", "hidden_dim", "n_filters", "filter_size", "reshape_width",
            "embedding_dropout", "feature_map_dropout", "projection_dropout", "min_frequency",
        ) if k in saved}
        cfg = dataclasses.replace(cfg, **arch)
        if arch.get("min_frequency") is not None and cfg.dataset:
            ds = load_dataset(cfg.dataset, min_frequency=cfg.min_frequency)
    return _build_model(cfg, ds, store=load_checkpoint(path)), ds


def cmd_train(cfg: RunConfig) -> int:
    ds = _load(cfg)
    mrrs = []
    for i in range(cfg.seeds):
        seed = cfg.seed + i
        ckpt = cfg.checkpoint if cfg.seeds == 1 else f"{cfg.checkpoint}.seed{seed}"
        os.makedirs(os.path.dirname(os.path.abspath(ckpt)), exist_ok=True)
        model = _build_model(cfg, ds, seed=seed)
        tcfg = cfg.train_config(seed)
        with open(ckpt + ".log.tsv", "w", encoding="utf-8") as log_file:
            result = fit(model, ds.store, tcfg, log_file=log_file)
        save_checkpoint(result.best_store, ckpt)
        write_config(dataclasses.replace(cfg, seed=seed, seeds=1, checkpoint=ckpt), ckpt + ".config")
        plotting.plot_training_curve(result.log, ckpt + ".curve.png", title=f"{cfg.model}+{cfg.fusion}, seed {seed}")
        print(f"seed={seed}\tbest_epoch={result.best_epoch}\tbest_val_mrr={result.best_mrr!r}\tcheckpoint={ckpt}")
        mrrs.append(result.best_mrr)
    if cfg.seeds > 1:
        arr = np.asarray(mrrs)
        summary = f"seeds={cfg.seeds}\nmean_val_mrr={float(arr.mean())!r}\nstd_val_mrr={float(arr.std())!r}\n"
        sys.stdout.write(summary)
        out = cfg.out or cfg.checkpoint + ".seeds"
        with open(out, "w", encoding="utf-8") as f:
            f.write(summary)
        plotting.plot_seed_study(arr, out + ".png", title=f"{cfg.model}+{cfg.fusion}")
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    ds = _load(cfg)
    model, ds = _load_model(cfg, ds)
    report = evaluate(model, ds.store, cfg.split, filtered=cfg.filtered, workers=cfg.workers)
    sys.stdout.write(report.to_table())
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as f:
            f.write(report.to_keyvalue())
        with open(cfg.out + ".table.txt", "w", encoding="utf-8") as f:
            f.write(report.to_table())
        write_config(cfg, cfg.out + ".config")
        plotting.plot_ranking_report(report, cfg.out + ".png")
    return 0


def cmd_neighbors(cfg: RunConfig) -> int:
    ds = _load(cfg)
    entity = _require(cfg.entity, "entity")
    spaces = ("embedding", "literal", "enriched") if cfg.space == "all" else (cfg.space,)
    model = None
    if any(s != "literal" for s in spaces):
        model, ds = _load_model(cfg, ds)
    rows = {}
    for space in spaces:
        rows[space] = nearest_neighbors(NeighborQuery(entity, space, cfg.k), ds.vocab.entities, model, ds.literals)
    text = format_neighbors(entity, rows)
    sys.stdout.write(text)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as f:
            f.write(text)
        write_config(cfg, cfg.out + ".config")
        plotting.plot_neighbors(entity, rows, cfg.out + ".png")
    return 0


def cmd_generate(cfg: RunConfig) -> int:
    out = _require(cfg.out, "out")
    ds = generate_synthetic(cfg.n_entities, cfg.n_clusters, seed=cfg.seed, link_prob=cfg.link_prob)
    write_dataset(ds, out, raw_literals=ds.raw_literals)
    write_config(cfg, os.path.join(out, "generate.config"))
    s = ds.stats()
    print(f"wrote {out}: {s.n_entities} entities, {s.n_relational_triples} relational triples, {s.n_literal_triples} literal triples")
    return 0


def cmd_stats(cfg: RunConfig) -> int:
    stats = _load(cfg).stats()
    text = "".join(f"{k}={v}\n" for k, v in stats.as_dict().items())
    sys.stdout.write(text)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as f:
            f.write(text)
        plotting.plot_stats(stats, cfg.out + ".png")
    return 0


HANDLERS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "neighbors": cmd_neighbors,
    "generate": cmd_generate,
    "stats": cmd_stats,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve_config(args)
        return HANDLERS[args.command](cfg)
    except LiteralEError as e:
        print(f"literale: error: {e}", file=sys.stderr)
        return e.exit_code
    except FileNotFoundError as e:
        print(f"literale: error: file not found: {e.filename or e}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except KeyError as e:
        print(f"literale: error: unknown key {e}", file=sys.stderr)
        return 7


if __name__ == "__main__":
    sys.exit(main())
