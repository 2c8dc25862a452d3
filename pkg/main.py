# Command line entry point. Run it with ./run.sh <subcommand> ... which creates
# the virtual environment on first use.
#
#   generate   write a seeded synthetic dataset directory
#   ego        extract the k-hop ego network of every labeled node
#   train      train one model, write a checkpoint and its loss history
#   eval       score a checkpoint on the test split it was trained against
#   run-all    train and evaluate gcn, sage and dgcnn on one shared split
#
# Defaults come from config.txt; flags override them. Status lines go to
# stderr, tables and counts go to stdout.

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from checkpoint import load_checkpoint, save_checkpoint, write_egos, write_history, write_metrics, write_scores
from dataset import SynthConfig, generate_synthetic, load_dataset, save_dataset
from errors import DataError, SpreaderGnnError
from metrics import MetricsRecord
from models import Arch, auto_sortpool_k
from settings import RuntimeConfig, read_config_file, runtime_defaults, synth_defaults, train_defaults
from sparse_graph import extract_egos
from trainer import (EgoDataset, NodeDataset, TrainConfig, ego_dataset, evaluate, node_dataset,
                     prepare_dataset, predict_scores, stratified_split, train, PRESETS)
from utils import atomic_write_text, fan_out, say

RUN_ALL_ORDER = (Arch.GCN, Arch.SAGE, Arch.DGCNN)
DISPLAY_NAMES = {Arch.GCN: "GCN", Arch.SAGE: "GraphSAGE", Arch.DGCNN: "DGCNN"}


def _optional_int(text: str) -> Optional[int]:
    if text.strip().lower() in ("none", "auto"):
        return None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, 'auto' or 'none', got {text!r}") from None


# ---------------- parser ----------------

def _add_train_flags(p: argparse.ArgumentParser, d: TrainConfig, with_model: bool = True) -> None:
    if with_model:
        p.add_argument("--model", choices=[a.tag for a in Arch], default=d.model, help="model to train")
    p.add_argument("--epochs", type=int, default=d.epochs, help="training epochs")
    p.add_argument("--lr", type=float, default=d.lr, help="Adam step size")
    p.add_argument("--dropout", type=float, default=d.dropout, help="dropout probability")
    p.add_argument("--hidden-dim", type=int, default=d.hidden_dim, help="hidden width of every graph layer")
    p.add_argument("--split-ratio", type=float, default=d.split_ratio, help="share of each class used for training")
    p.add_argument("--seed", type=int, default=d.seed, help="seed for the split, init, dropout and shuffling")
    p.add_argument("--sortpool-k", type=_optional_int, default=d.sortpool_k,
                   help="DGCNN SortPooling size; 'auto' uses the 0.6-quantile of training ego sizes")
    p.add_argument("--hops", type=int, default=d.ego_hops, help="ego network radius for DGCNN")
    p.add_argument("--neighbor-cap", type=_optional_int, default=d.neighbor_cap,
                   help="GraphSAGE neighbors sampled per node while training; 'none' uses all")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None,
                   help="named settings applied after the other flags (paper: lr=1e-5)")


def build_parser(raw, rt: RuntimeConfig) -> argparse.ArgumentParser:
    synth = synth_defaults(raw)
    tr = train_defaults(raw)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    parser = argparse.ArgumentParser(prog="spreader-gnn", formatter_class=fmt,
                                     description="Misinformation spreader detection with GCN, GraphSAGE and DGCNN.")
    parser.add_argument("--config", default=None, help="settings file (default: config.txt next to main.py)")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", formatter_class=fmt, help="write a synthetic dataset")
    g.add_argument("--n", type=int, default=synth.n_nodes, help="number of nodes")
    g.add_argument("--spreader-fraction", type=float, default=synth.spreader_fraction, help="share of spreaders")
    g.add_argument("--feature-dim", type=int, default=synth.feature_dim, help="node feature width")
    g.add_argument("--feature-shift", type=float, default=synth.feature_shift, help="per-class feature mean offset")
    g.add_argument("--p-intra", type=float, default=synth.p_intra, help="edge probability within a class")
    g.add_argument("--p-inter", type=float, default=synth.p_inter, help="edge probability across classes")
    g.add_argument("--hub-boost", type=float, default=synth.hub_boost,
                   help="extra edge probability for pairs touching a spreader")
    g.add_argument("--label-fraction", type=float, default=synth.label_fraction, help="share of each class labeled")
    g.add_argument("--seed", type=int, default=synth.seed, help="generator seed")
    g.add_argument("--out", default="data", help="dataset directory to write")

    e = sub.add_parser("ego", formatter_class=fmt, help="extract ego networks of the labeled nodes")
    e.add_argument("--data", default="data", help="dataset directory")
    e.add_argument("--hops", type=int, default=tr.ego_hops, help="ego network radius")
    e.add_argument("--out", default=None, help="egos.csv path (default: <data>/egos.csv)")

    t = sub.add_parser("train", formatter_class=fmt, help="train one model")
    t.add_argument("--data", default="data", help="dataset directory")
    _add_train_flags(t, tr)
    t.add_argument("--checkpoint", default=None, help=f"checkpoint path (default: {rt.out}/<model>.ckpt)")

    v = sub.add_parser("eval", formatter_class=fmt, help="evaluate a checkpoint on its test split")
    v.add_argument("--data", default="data", help="dataset directory")
    v.add_argument("--checkpoint", required=True, help="checkpoint written by train")
    v.add_argument("--model", choices=[a.tag for a in Arch], default=None,
                   help="refuse checkpoints holding a different model")
    v.add_argument("--out", default=None, help="metrics JSON path (default: <checkpoint>.metrics.json)")
    v.add_argument("--scores", default=None, help="also write item,node,label,score rows for the test split")

    r = sub.add_parser("run-all", formatter_class=fmt, help="train and compare all three models")
    r.add_argument("--data", default="data", help="dataset directory")
    _add_train_flags(r, tr, with_model=False)
    r.add_argument("--out", default=rt.out, help="directory for checkpoints, metrics and comparison.tsv")
    return parser


def train_config_from(args: argparse.Namespace, rt: RuntimeConfig, model: Optional[str] = None) -> TrainConfig:
    cfg = TrainConfig(
        model=model or args.model,
        epochs=args.epochs,
        lr=args.lr,
        dropout=args.dropout,
        hidden_dim=args.hidden_dim,
        split_ratio=args.split_ratio,
        seed=args.seed,
        sortpool_k=args.sortpool_k,
        ego_hops=args.hops,
        neighbor_cap=args.neighbor_cap,
        log_every=rt.log_every,
    )
    return cfg.with_preset(args.preset).validate()


def _checkpoint_meta(cfg: TrainConfig) -> dict:
    return {
        "seed": cfg.seed,
        "split_ratio": cfg.split_ratio,
        "ego_hops": cfg.ego_hops,
        "epochs": cfg.epochs,
        "lr": cfg.lr,
        "dropout": cfg.dropout,
        "neighbor_cap": cfg.neighbor_cap,
    }


def _history_path(checkpoint: Path) -> Path:
    return checkpoint.with_name(checkpoint.stem + ".history.csv")


# ---------------- subcommands ----------------

def cmd_generate(args, rt: RuntimeConfig) -> int:
    cfg = SynthConfig(
        n_nodes=args.n,
        spreader_fraction=args.spreader_fraction,
        feature_dim=args.feature_dim,
        feature_shift=args.feature_shift,
        p_intra=args.p_intra,
        p_inter=args.p_inter,
        hub_boost=args.hub_boost,
        label_fraction=args.label_fraction,
        seed=args.seed,
    ).validate()
    data = generate_synthetic(cfg)
    d = save_dataset(args.out, data.graph, data.table)
    counts = data.table.class_counts()
    print(f"nodes\t{data.table.n_nodes}")
    print(f"edges\t{data.graph.n_edges}")
    for key in ("spreaders", "regulars", "unlabeled"):
        print(f"{key}\t{counts[key]}")
    say(f"💾 Wrote dataset to {d.path}")
    return 0


def cmd_ego(args, rt: RuntimeConfig) -> int:
    graph, table = load_dataset(args.data)
    roots = table.labeled_nodes()
    if roots.size == 0:
        raise DataError("no labeled nodes")
    egos = extract_egos(graph, roots, args.hops, rt.threads)
    out = Path(args.out) if args.out else Path(args.data) / "egos.csv"
    write_egos(roots, table.labels[roots], egos, out)
    sizes = np.array([ego.graph.n_nodes for ego in egos], dtype=np.int64)
    print(f"egos\t{sizes.size}")
    print(f"hops\t{args.hops}")
    print(f"min\t{int(sizes.min())}")
    print(f"median\t{float(np.median(sizes)):g}")
    print(f"q60\t{auto_sortpool_k(sizes, floor=1)}")
    print(f"max\t{int(sizes.max())}")
    say(f"💾 Wrote {sizes.size} ego networks to {out}")
    return 0


def cmd_train(args, rt: RuntimeConfig) -> int:
    cfg = train_config_from(args, rt)
    graph, table = load_dataset(args.data)
    dataset = prepare_dataset(graph, table, cfg, rt.threads)
    params, history = train(dataset, cfg)
    checkpoint = Path(args.checkpoint) if args.checkpoint else Path(rt.out) / f"{cfg.model}.ckpt"
    save_checkpoint(params, checkpoint, _checkpoint_meta(cfg))
    write_history(history, _history_path(checkpoint))
    return 0


def cmd_eval(args, rt: RuntimeConfig) -> int:
    checkpoint = Path(args.checkpoint)
    params, meta = load_checkpoint(checkpoint, expect=args.model)
    cfg = TrainConfig(
        model=params.arch.tag,
        hidden_dim=params.hidden_dim,
        seed=int(meta.get("seed", 0)),
        split_ratio=float(meta.get("split_ratio", 0.8)),
        ego_hops=int(meta.get("ego_hops", 3)),
        sortpool_k=params.sortpool_k or None,
        log_every=rt.log_every,
    ).validate()
    graph, table = load_dataset(args.data)
    dataset = prepare_dataset(graph, table, cfg, rt.threads)
    _, test_index = stratified_split(dataset.labels, cfg.split_ratio, cfg.seed)
    record = evaluate(params, dataset, test_index, cfg, rt.threads)

    out = Path(args.out) if args.out else checkpoint.with_name(checkpoint.stem + ".metrics.json")
    write_metrics(record, out, cfg.model, cfg.seed)
    if args.scores:
        scores = predict_scores(params, dataset, test_index, cfg, rt.threads)
        rows = [(int(i), int(dataset.nodes[i]), int(dataset.labels[i]), float(s))
                for i, s in zip(test_index, scores)]
        write_scores(rows, args.scores)
    print(json.dumps(record.to_json(cfg.model, cfg.seed), sort_keys=True))
    say(f"📊 {cfg.model}: accuracy={record.accuracy:.4f} mcc={record.mcc:.4f} "
        f"roc_auc={'n/a' if record.roc_auc is None else f'{record.roc_auc:.4f}'}")
    return 0


def _percent(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{100.0 * value:.2f}"


def comparison_rows(results: Sequence[Tuple[Arch, MetricsRecord]]) -> List[List[str]]:
    rows = [["Model", "Accuracy", "MCC", "ROC AUC"]]
    for arch, rec in results:
        rows.append([DISPLAY_NAMES[arch], _percent(rec.accuracy), _percent(rec.mcc), _percent(rec.roc_auc)])
    return rows


def render_table(rows: List[List[str]]) -> str:
    widths = [max(len(r[j]) for r in rows) for j in range(len(rows[0]))]
    lines = []
    for r in rows:
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def cmd_run_all(args, rt: RuntimeConfig) -> int:
    configs = [train_config_from(args, rt, arch.tag) for arch in RUN_ALL_ORDER]
    graph, table = load_dataset(args.data)
    nodes: NodeDataset = node_dataset(graph, table)
    egos: EgoDataset = ego_dataset(graph, table, configs[0].ego_hops, rt.threads)
    # one split for everyone: both datasets list the labeled nodes in the same order
    train_index, test_index = stratified_split(nodes.labels, configs[0].split_ratio, configs[0].seed)
    out = Path(args.out)

    def job(cfg: TrainConfig) -> MetricsRecord:
        dataset = egos if cfg.arch == Arch.DGCNN else nodes
        params, history = train(dataset, cfg, train_index)
        checkpoint = out / f"{cfg.model}.ckpt"
        save_checkpoint(params, checkpoint, _checkpoint_meta(cfg))
        write_history(history, _history_path(checkpoint))
        record = evaluate(params, dataset, test_index, cfg)
        write_metrics(record, out / f"metrics_{cfg.model}.json", cfg.model, cfg.seed)
        return record

    records = fan_out(job, configs, rt.threads)
    rows = comparison_rows(list(zip(RUN_ALL_ORDER, records)))
    atomic_write_text(out / "comparison.tsv", "".join("\t".join(r) + "\n" for r in rows))
    sys.stdout.write(render_table(rows))
    sys.stdout.flush()
    say(f"💾 Wrote comparison to {out / 'comparison.tsv'}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "ego": cmd_ego,
    "train": cmd_train,
    "eval": cmd_eval,
    "run-all": cmd_run_all,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    try:
        raw = read_config_file(known.config)
        rt = runtime_defaults(raw)
        parser = build_parser(raw, rt)
    except SpreaderGnnError as e:
        say(f"❌ {e}")
        return 1
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args, rt)
    except (SpreaderGnnError, OSError) as e:
        say(f"❌ {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
