"""``cone`` command line: synth, split, analyze, train, detect, evaluate.

Every command writes into ``--out`` only, refuses a non-empty output
directory unless ``--force`` is given, persists the resolved configuration
as ``config.txt`` and finishes with a ``status.json``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import kvconfig
from .analysis import analyze
from .archive import load_model, save_embeddings, save_model
from .clustering import aggregate_score, best_matches
from .communities import parse_community_lines, read_communities, write_communities
from .datasets import generate_planted, read_dataset, write_dataset
from .model import ConeConfig, train
from .pipeline import detect, embed_dataset, split_communities

log = logging.getLogger("cone")

CONFIG_FILE = "config.txt"
STATUS_FILE = "status.json"


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; every key may appear in a ``--config`` file."""

    seed: int = 0
    # model
    encoder: str = "lstm"
    k: int = 2
    p: int = 16
    d: int = 2
    token_dim: int = 16
    hidden: tuple = (64, 32, 16)
    rho: float = 0.1
    epochs: int = 300
    max_len: int = 512
    init_scale: float = 0.08
    # split / detect / evaluate
    train_fraction: float = 0.1
    k_clusters: int | None = None
    candidates: tuple = ()
    folds: int = 5
    n_init: int = 10
    exclude_train: bool = False
    min_size: int = 1
    metric: str = "f1"
    bins: int = 10
    directed: bool = False
    # synth
    pattern: str = "co-star"
    num_communities: int = 6
    community_size: int = 8
    noise_edges: int = 12
    attr_signature_size: int = 4
    node_noise: int = 2
    noise_pool: int = 20

    def __post_init__(self):
        if self.metric not in ("f1", "jaccard", "both"):
            raise ValueError(f"metric must be f1, jaccard or both, got {self.metric!r}")
        if self.min_size < 1 or self.bins < 1 or self.folds < 1 or self.n_init < 1:
            raise ValueError("min_size, bins, folds and n_init must be >= 1")
        if self.k_clusters is not None and self.k_clusters < 1:
            raise ValueError("k_clusters must be >= 1")
        self.model_config()  # validates the model fields

    def model_config(self) -> ConeConfig:
        names = {f.name for f in fields(ConeConfig)}
        return ConeConfig(**{k: v for k, v in asdict(self).items() if k in names})

    def dumps(self) -> str:
        return kvconfig.dumps(asdict(self))

    @classmethod
    def loads(cls, text: str, source: str = "<config>") -> "RunConfig":
        return cls(**kvconfig.coerce(cls, kvconfig.loads(text, source)))


# flag dest -> RunConfig key
FLAG_KEYS = {
    "seed": "seed",
    "encoder": "encoder",
    "k_transitions": "k",
    "k_clusters": "k_clusters",
    "train_fraction": "train_fraction",
    "metric": "metric",
    "min_size": "min_size",
    "epochs": "epochs",
    "rho": "rho",
    "p": "p",
    "d": "d",
    "candidates": "candidates",
    "exclude_train": "exclude_train",
    "bins": "bins",
    "directed": "directed",
    "pattern": "pattern",
    "num_communities": "num_communities",
    "community_size": "community_size",
    "noise_edges": "noise_edges",
    "signature_size": "attr_signature_size",
}


def resolve_config(args) -> RunConfig:
    """Flags over ``--config`` file over defaults."""
    values = {}
    if args.config:
        path = Path(args.config)
        values.update(kvconfig.coerce(RunConfig, kvconfig.loads(path.read_text(encoding="utf-8"), str(path))))
    for dest, key in FLAG_KEYS.items():
        v = getattr(args, dest, None)
        if v is not None:
            values[key] = v
    return RunConfig(**values)


def threads() -> int:
    raw = os.environ.get("CONE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"CONE_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"CONE_THREADS must be a positive integer, got {raw!r}")
    return n


def _candidates(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"candidates must be comma-separated integers, got {text!r}") from None


def _prepare_out(out, force: bool) -> Path:
    out = Path(out)
    if out.exists() and not out.is_dir():
        raise FileExistsError(f"{out} exists and is not a directory")
    if out.exists() and any(out.iterdir()) and not force:
        raise FileExistsError(f"{out} is not empty; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _communities_by_id(path, index=None, split="all"):
    """Read a community file; without an index, IDs are interned on the fly."""
    if index is not None:
        return read_communities(path, index, split)
    with open(path, encoding="utf-8") as fh:
        return list(parse_community_lines(fh))


# -- commands -------------------------------------------------------------------


def cmd_synth(args, cfg: RunConfig, out: Path) -> dict:
    ds = generate_planted(
        cfg.pattern, cfg.num_communities, cfg.community_size, cfg.noise_edges, cfg.attr_signature_size,
        seed=cfg.seed, node_noise=cfg.node_noise, noise_pool=cfg.noise_pool,
    )
    paths = write_dataset(ds, out)
    return {"outputs": sorted(p.name for p in paths.values()), **ds.stats()}


def cmd_split(args, cfg: RunConfig, out: Path) -> dict:
    ds = read_dataset(args.data, directed=cfg.directed)
    comms = ds.communities
    if args.communities:
        comms = read_communities(args.communities, ds.graph.index)
    tr, te = split_communities(comms, cfg.train_fraction, cfg.seed)
    write_communities(tr, out / "train.txt", ds.graph.ids)
    write_communities(te, out / "test.txt", ds.graph.ids)
    return {"outputs": ["train.txt", "test.txt"], "train": len(tr), "test": len(te)}


def cmd_analyze(args, cfg: RunConfig, out: Path) -> dict:
    ds = read_dataset(args.data, directed=cfg.directed)
    comms = read_communities(args.communities, ds.graph.index) if args.communities else ds.communities
    reports = analyze(comms, ds.graph, ds.attrs, cfg.bins)
    outputs = []
    for name, rep in reports.items():
        rep.write_values(out / f"{name}.csv", name)
        rep.write_histogram(out / f"{name}_hist.csv")
        outputs += [f"{name}.csv", f"{name}_hist.csv"]
    excluded = reports["density"].excluded
    return {"outputs": outputs, "communities": len(comms), "excluded": len(excluded), "excluded_ids": excluded}


def cmd_train(args, cfg: RunConfig, out: Path) -> dict:
    ds = read_dataset(args.data, directed=cfg.directed)
    tr = read_communities(args.train, ds.graph.index, "train")
    mc = cfg.model_config()
    model, trace = train(ds.graph, ds.sequences(mc.max_len), tr, mc)
    save_model(model, out / "model.cone")
    save_embeddings(model.final_embedding, out / "embeddings.cemb")
    _write_csv(out / "loss.csv", ["epoch", "loss"], [(e, repr(float(v))) for e, v in enumerate(trace)])
    return {
        "outputs": ["model.cone", "embeddings.cemb", "loss.csv"],
        "initial_loss": trace[0] if trace else None,
        "final_loss": trace[-1] if trace else None,
    }


def cmd_detect(args, cfg: RunConfig, out: Path) -> dict:
    ds = read_dataset(args.data, directed=cfg.directed)
    model = load_model(args.model)
    tr = read_communities(args.train, ds.graph.index, "train") if args.train else None
    s = embed_dataset(model, ds)
    if cfg.k_clusters is None and args.candidates is not None and not cfg.candidates:
        raise ValueError("empty candidate list and no --k-clusters given")
    found = detect(
        s, tr, k_clusters=cfg.k_clusters, candidates=cfg.candidates or None, seed=cfg.seed,
        n_init=cfg.n_init, min_size=cfg.min_size, exclude_train=cfg.exclude_train, folds=cfg.folds,
    )
    write_communities(found.communities, out / "detected.txt", ds.graph.ids)
    save_embeddings(s, out / "embeddings.cemb")
    (out / "summary.txt").write_text(f"k={found.k} selected={str(found.selected).lower()} detected={len(found.communities)}\n")
    return {"outputs": ["detected.txt", "embeddings.cemb", "summary.txt"], "k": found.k, "detected": len(found.communities)}


def cmd_evaluate(args, cfg: RunConfig, out: Path) -> dict:
    if args.data:
        index = read_dataset(args.data, directed=cfg.directed).graph.index
    else:
        index = {}
        for path in (args.detected, args.truth):
            for _, _, members in _communities_by_id(path):
                for m in members:
                    index.setdefault(m, len(index))
    det = read_communities(args.detected, index, "detected")
    truth = read_communities(args.truth, index, "truth")
    metrics = ["f1", "jaccard"] if cfg.metric == "both" else [cfg.metric]
    scores = {m: aggregate_score(det, truth, m) for m in metrics}
    _write_csv(out / "scores.csv", ["metric", "value"], [(m, repr(float(v))) for m, v in scores.items()])
    rows = [(m, *r[:3], repr(float(r[3]))) for m in metrics for r in best_matches(det, truth, m)]
    _write_csv(out / "matches.csv", ["metric", "side", "id", "best_match", "score"], rows)
    return {"outputs": ["scores.csv", "matches.csv"], "scores": scores}


COMMANDS = {
    "synth": cmd_synth,
    "split": cmd_split,
    "analyze": cmd_analyze,
    "train": cmd_train,
    "detect": cmd_detect,
    "evaluate": cmd_evaluate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file (flags take precedence)")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--force", action="store_true", help="write into a non-empty output directory")
    common.add_argument("--directed", action="store_true", default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cone", description="Community-oriented embedding and detection.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate a planted-pattern dataset")
    s.add_argument("--pattern", choices=("star", "co-star", "bridge"))
    s.add_argument("--num-communities", type=int)
    s.add_argument("--community-size", type=int)
    s.add_argument("--noise-edges", type=int)
    s.add_argument("--signature-size", type=int)

    s = sub.add_parser("split", parents=[common], help="split communities into train and test files")
    s.add_argument("--data", required=True, help="dataset directory")
    s.add_argument("--communities", help="community file (default: the dataset's)")
    s.add_argument("--train-fraction", type=float)

    s = sub.add_parser("analyze", parents=[common], help="density and homogeneity reports")
    s.add_argument("--data", required=True)
    s.add_argument("--communities")
    s.add_argument("--bins", type=int)

    s = sub.add_parser("train", parents=[common], help="train a model on example communities")
    s.add_argument("--data", required=True)
    s.add_argument("--train", required=True, help="training community file")
    s.add_argument("--encoder", choices=("lstm", "feedforward"))
    s.add_argument("--k-transitions", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--rho", type=float)
    s.add_argument("--p", type=int)
    s.add_argument("--d", type=int)

    s = sub.add_parser("detect", parents=[common], help="embed a dataset and cluster it")
    s.add_argument("--data", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--train", help="training community file (needed for cluster-count selection)")
    s.add_argument("--k-clusters", type=int)
    s.add_argument("--candidates", type=_candidates, help="comma-separated candidate cluster counts")
    s.add_argument("--min-size", type=int)
    s.add_argument("--exclude-train", action="store_true", default=None)

    s = sub.add_parser("evaluate", parents=[common], help="score detected against true communities")
    s.add_argument("--detected", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--data", help="dataset directory (optional; resolves node IDs)")
    s.add_argument("--metric", choices=("f1", "jaccard", "both"))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    started = time.time()
    status = {"command": args.command, "status": "error", "exit_code": 1}
    out = None
    try:
        cfg = resolve_config(args)
        status["threads"] = threads()
        out = _prepare_out(args.out, args.force)
        (out / CONFIG_FILE).write_text(cfg.dumps(), encoding="utf-8")
        status.update(COMMANDS[args.command](args, cfg, out))
        status.update(status="ok", exit_code=0)
    except (OSError, ValueError, FloatingPointError) as exc:
        status["message"] = f"{type(exc).__name__}: {exc}"
        print(f"cone {args.command}: {status['message']}", file=sys.stderr)
    status["seconds"] = round(time.time() - started, 3)
    if out is not None:
        (out / STATUS_FILE).write_text(json.dumps(status, indent=2, sort_keys=True, default=str) + "\n")
    return status["exit_code"]
