"""Splitting, seeded training loops and evaluation for all three models.

Items are addressed by position in the dataset's labeled-node list, so one
stratified split serves GCN/SAGE (positions -> node ids) and DGCNN
(positions -> ego samples) alike.
"""
import math
from dataclasses import asdict, dataclass, field, fields
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from dataset import NodeTable
from errors import ConfigError, DataError, NumericError, UsageError
from metrics import MetricsRecord, evaluate_scores
from models import (Arch, ModelParams, auto_sortpool_k, dgcnn_forward, gcn_forward, init_params,
                    node_to_graph_dataset, sage_forward)
from optimizer import adam_step, init_adam
from sparse_graph import EgoSample, SparseGraph, sym_norm_adj
from tensor import Tensor, bce_with_logits, take_rows
from utils import fan_out, say

REFERENCE_LR = 1e-5
PRESETS: Dict[str, Dict[str, Any]] = {
    "paper": {"lr": REFERENCE_LR},
}


@dataclass
class TrainConfig:
    model: str = "gcn"
    epochs: int = 200
    lr: float = 1e-3
    dropout: float = 0.5
    hidden_dim: int = 32
    split_ratio: float = 0.8
    seed: int = 0
    sortpool_k: Optional[int] = None   # None: pick from training ego sizes
    ego_hops: int = 3
    neighbor_cap: Optional[int] = None
    log_every: int = 10

    def validate(self) -> "TrainConfig":
        Arch.parse(self.model)
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError(f"split_ratio must be in (0, 1), got {self.split_ratio}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not self.lr >= 0.0 or not math.isfinite(self.lr):
            raise ConfigError(f"lr must be a finite value >= 0, got {self.lr}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.hidden_dim < 1:
            raise ConfigError(f"hidden_dim must be >= 1, got {self.hidden_dim}")
        if self.sortpool_k is not None and self.sortpool_k < 2:
            raise ConfigError(f"sortpool_k must be >= 2, got {self.sortpool_k}")
        if self.ego_hops < 0:
            raise ConfigError(f"ego_hops must be >= 0, got {self.ego_hops}")
        if self.neighbor_cap is not None and self.neighbor_cap < 1:
            raise ConfigError(f"neighbor_cap must be >= 1, got {self.neighbor_cap}")
        return self

    @property
    def arch(self) -> Arch:
        return Arch.parse(self.model)

    def with_preset(self, name: Optional[str]) -> "TrainConfig":
        if not name:
            return self
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}")
        return TrainConfig(**{**asdict(self), **PRESETS[name]})

    def to_json(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float


@dataclass
class TrainHistory:
    epochs: List[EpochRecord] = field(default_factory=list)
    test: Optional[MetricsRecord] = None

    def record(self, epoch: int, loss: float, acc: float) -> None:
        if not math.isfinite(loss):
            raise NumericError(f"epoch {epoch}: loss is {loss}")
        self.epochs.append(EpochRecord(epoch, float(loss), float(acc)))

    @property
    def final_loss(self) -> float:
        return self.epochs[-1].train_loss if self.epochs else float("nan")


# ---------------- datasets ----------------

@dataclass(eq=False)
class NodeDataset:
    """Whole graph for GCN/SAGE; items are the labeled nodes in ascending order."""
    graph: SparseGraph
    features: np.ndarray
    nodes: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return int(self.nodes.shape[0])

    @cached_property
    def norm_graph(self) -> SparseGraph:
        return sym_norm_adj(self.graph)

    @cached_property
    def x(self) -> Tensor:
        return Tensor(self.features)

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])


@dataclass(eq=False)
class EgoDataset:
    """One ego sample per labeled node (same order as NodeDataset)."""
    samples: List[EgoSample]
    nodes: np.ndarray

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    @property
    def feature_dim(self) -> int:
        return self.samples[0].features.cols if self.samples else 0


Dataset = Union[NodeDataset, EgoDataset]


def node_dataset(graph: SparseGraph, table: NodeTable) -> NodeDataset:
    nodes = table.labeled_nodes()
    return NodeDataset(graph=graph, features=table.features, nodes=nodes, labels=table.labels[nodes])


def ego_dataset(graph: SparseGraph, table: NodeTable, hops: int = 3, workers: int = 1) -> EgoDataset:
    nodes = table.labeled_nodes()
    samples = node_to_graph_dataset(graph, table.features, table.labels, nodes, k=hops, workers=workers)
    return EgoDataset(samples=samples, nodes=nodes)


def prepare_dataset(graph: SparseGraph, table: NodeTable, cfg: TrainConfig, workers: int = 1) -> Dataset:
    if cfg.arch == Arch.DGCNN:
        data = ego_dataset(graph, table, cfg.ego_hops, workers)
        sizes = [s.n_nodes for s in data.samples]
        if sizes:
            say(f"🕸️ Built {len(sizes)} ego networks ({cfg.ego_hops} hops), "
                f"sizes {min(sizes)}..{max(sizes)}")
        return data
    return node_dataset(graph, table)


def _check_kind(dataset: Dataset, arch: Arch) -> None:
    wants_egos = arch == Arch.DGCNN
    if wants_egos != isinstance(dataset, EgoDataset):
        kind = "ego samples" if wants_egos else "a whole graph"
        raise UsageError(f"{arch.tag} trains on {kind}, got {type(dataset).__name__}")


# ---------------- splitting ----------------

def stratified_split(labels: Sequence[int], ratio: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Per-class shuffle; floor((1 - ratio) * class size) items of each class go to test."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size == 0:
        raise DataError("no labeled nodes")
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must be in (0, 1), got {ratio}")
    rng = np.random.Generator(np.random.Philox(seed))
    train, test = [], []
    for cls in (0, 1):
        members = np.flatnonzero(labels == cls)
        if members.shape[0] < 2:
            raise DataError(f"class {cls} has {members.shape[0]} labeled item(s); a split needs at least 2")
        members = rng.permutation(members)
        # the epsilon keeps 10 * (1 - 0.8) from flooring to 1
        n_test = int(math.floor(members.shape[0] * (1.0 - ratio) + 1e-9))
        test.append(members[:n_test])
        train.append(members[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


# ---------------- forward helpers ----------------

@dataclass
class _Streams:
    init: np.random.Generator
    dropout: np.random.Generator
    shuffle: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "_Streams":
        a, b, c = np.random.SeedSequence(seed).spawn(3)
        return cls(*(np.random.Generator(np.random.Philox(s)) for s in (a, b, c)))


def node_logits(params: ModelParams, data: NodeDataset, training: bool,
                rng: Optional[np.random.Generator], cfg: TrainConfig) -> Tensor:
    if params.arch == Arch.GCN:
        return gcn_forward(data.norm_graph, data.x, params, training, rng, cfg.dropout)
    if params.arch == Arch.SAGE:
        return sage_forward(data.graph, data.x, params, training, rng, cfg.dropout, cfg.neighbor_cap)
    raise UsageError(f"{params.arch.tag} does not score nodes of a whole graph")


def predict_scores(params: ModelParams, dataset: Dataset, index: Sequence[int],
                   cfg: Optional[TrainConfig] = None, workers: int = 1) -> np.ndarray:
    """Sigmoid scores (eval mode) for the given item positions."""
    cfg = cfg or TrainConfig(model=params.arch.tag)
    index = np.asarray(index, dtype=np.int64)
    _check_kind(dataset, params.arch)
    if isinstance(dataset, NodeDataset):
        logits = node_logits(params, dataset, False, None, cfg).data[:, 0]
        return expit(logits[dataset.nodes[index]])
    # eval mode never writes to params, so workers can share them
    logits = fan_out(lambda i: dgcnn_forward(dataset.samples[i], params, False, None, cfg.dropout).item(),
                     [int(i) for i in index], workers)
    return expit(np.asarray(logits, dtype=np.float64))


# ---------------- training ----------------

def _log_epoch(cfg: TrainConfig, epoch: int, loss: float, acc: float) -> None:
    every = max(1, int(cfg.log_every))
    if epoch == 1 or epoch == cfg.epochs or epoch % every == 0:
        say(f"🧠 {cfg.model} epoch {epoch}/{cfg.epochs} loss={loss:.4f} train_acc={acc:.3f}")


def _train_nodes(params: ModelParams, data: NodeDataset, train_index: np.ndarray,
                 cfg: TrainConfig, streams: _Streams, history: TrainHistory) -> None:
    states = init_adam(params.params())
    rows = data.nodes[train_index]
    y = data.labels[train_index]
    for epoch in range(1, cfg.epochs + 1):
        try:
            logits = node_logits(params, data, True, streams.dropout, cfg)
            picked = take_rows(logits, rows)
            loss = bce_with_logits(picked, y)
            loss.backward()
            adam_step(params.params(), states, cfg.lr)
        except NumericError as e:
            raise NumericError(f"epoch {epoch}: {e}") from e
        acc = float(np.mean((picked.data[:, 0] >= 0.0).astype(np.int64) == y))
        history.record(epoch, loss.item(), acc)
        _log_epoch(cfg, epoch, loss.item(), acc)


def _train_egos(params: ModelParams, data: EgoDataset, train_index: np.ndarray,
                cfg: TrainConfig, streams: _Streams, history: TrainHistory) -> None:
    states = init_adam(params.params())
    for epoch in range(1, cfg.epochs + 1):
        order = streams.shuffle.permutation(train_index)
        total, hits = 0.0, 0
        try:
            for i in order:
                sample = data.samples[int(i)]
                logit = dgcnn_forward(sample, params, True, streams.dropout, cfg.dropout)
                loss = bce_with_logits(logit, [sample.label])
                loss.backward()
                adam_step(params.params(), states, cfg.lr)
                total += loss.item()
                hits += int((logit.item() >= 0.0) == bool(sample.label))
        except NumericError as e:
            raise NumericError(f"epoch {epoch}: {e}") from e
        mean_loss = total / len(order)
        acc = hits / len(order)
        history.record(epoch, mean_loss, acc)
        _log_epoch(cfg, epoch, mean_loss, acc)


def initial_params(dataset: Dataset, cfg: TrainConfig, train_index: Sequence[int]) -> ModelParams:
    """Weights exactly as train() would start from for this (config, split)."""
    streams = _Streams.from_seed(cfg.seed)
    return _init_for(dataset, cfg, np.asarray(train_index, dtype=np.int64), streams)


def _init_for(dataset: Dataset, cfg: TrainConfig, train_index: np.ndarray, streams: _Streams) -> ModelParams:
    k = None
    if cfg.arch == Arch.DGCNN:
        k = cfg.sortpool_k or auto_sortpool_k([dataset.samples[int(i)].n_nodes for i in train_index])
    return init_params(cfg.arch, dataset.feature_dim, cfg.hidden_dim, streams.init, sortpool_k=k)


def train(dataset: Dataset, cfg: TrainConfig, train_index: Optional[Sequence[int]] = None
          ) -> Tuple[ModelParams, TrainHistory]:
    """Seeded training run. Without an explicit split, the config's stratified split is used."""
    cfg.validate()
    _check_kind(dataset, cfg.arch)
    if len(dataset) == 0:
        raise DataError("no labeled nodes")
    if train_index is None:
        train_index, _ = stratified_split(dataset.labels, cfg.split_ratio, cfg.seed)
    train_index = np.asarray(train_index, dtype=np.int64)
    if train_index.size == 0:
        raise DataError("the training split is empty")

    streams = _Streams.from_seed(cfg.seed)
    params = _init_for(dataset, cfg, train_index, streams)
    extra = f", sortpool_k={params.sortpool_k}" if params.arch == Arch.DGCNN else ""
    say(f"🚀 Training {cfg.model} on {train_index.size} items for {cfg.epochs} epochs "
        f"(lr={cfg.lr:g}, hidden={cfg.hidden_dim}{extra}, seed={cfg.seed})")

    history = TrainHistory()
    if isinstance(dataset, NodeDataset):
        _train_nodes(params, dataset, train_index, cfg, streams, history)
    else:
        _train_egos(params, dataset, train_index, cfg, streams, history)
    params.check_finite()
    say(f"✅ {cfg.model} finished, final loss {history.final_loss:.4f}")
    return params, history


def evaluate(params: ModelParams, dataset: Dataset, test_index: Sequence[int],
             cfg: Optional[TrainConfig] = None, workers: int = 1) -> MetricsRecord:
    test_index = np.asarray(test_index, dtype=np.int64)
    if test_index.size == 0:
        raise DataError("the test split is empty")
    scores = predict_scores(params, dataset, test_index, cfg, workers)
    truth = dataset.labels[test_index]
    record = evaluate_scores(scores, truth)
    if record.roc_auc is None:
        say("⚠️ test split holds a single class; ROC AUC is undefined")
    return record
