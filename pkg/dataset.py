"""Dataset directories (edges.tsv, features.csv, labels.csv) and the seeded
synthetic spreader/regular graph generator that stands in for real data."""
import csv
import io
from dataclasses import asdict, dataclass, fields
from enum import IntEnum
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np

from errors import ConfigError, DataError, DatasetParseError, ReferentialError
from sparse_graph import SparseGraph, build_graph
from utils import atomic_write_text, say

EDGES_FILE = "edges.tsv"
FEATURES_FILE = "features.csv"
LABELS_FILE = "labels.csv"


class Label(IntEnum):
    UNLABELED = -1
    REGULAR = 0
    SPREADER = 1


@dataclass(frozen=True)
class DatasetDir:
    path: Path

    def __post_init__(self):
        object.__setattr__(self, "path", Path(self.path))

    @property
    def edges(self) -> Path:
        return self.path / EDGES_FILE

    @property
    def features(self) -> Path:
        return self.path / FEATURES_FILE

    @property
    def labels(self) -> Path:
        return self.path / LABELS_FILE


@dataclass(eq=False)
class NodeTable:
    features: np.ndarray   # (n_nodes x feature_dim)
    labels: np.ndarray     # Label value per node

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise DataError(f"features {self.features.shape} and labels {self.labels.shape} are not row-aligned")
        if not np.all(np.isin(self.labels, [Label.UNLABELED, Label.REGULAR, Label.SPREADER])):
            raise DataError("labels must be -1 (unlabeled), 0 or 1")

    @property
    def n_nodes(self) -> int:
        return int(self.features.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    def labeled_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.labels != Label.UNLABELED)

    def class_counts(self) -> Dict[str, int]:
        return {
            "spreaders": int(np.sum(self.labels == Label.SPREADER)),
            "regulars": int(np.sum(self.labels == Label.REGULAR)),
            "unlabeled": int(np.sum(self.labels == Label.UNLABELED)),
        }


# ---------------- reading ----------------

def _as_dir(d: Union[str, Path, DatasetDir]) -> DatasetDir:
    return d if isinstance(d, DatasetDir) else DatasetDir(Path(d))


def _read_features(path: Path) -> np.ndarray:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or header[0].strip() != "id":
            raise DatasetParseError(path, 1, "header must start with 'id'")
        dim = len(header) - 1
        rows: Dict[int, List[float]] = {}
        for row in reader:
            line = reader.line_num
            if not row or not "".join(row).strip():
                continue
            if len(row) != dim + 1:
                raise DatasetParseError(path, line, f"expected {dim + 1} fields, got {len(row)}")
            try:
                node = int(row[0])
                values = [float(v) for v in row[1:]]
            except ValueError as e:
                raise DatasetParseError(path, line, str(e)) from None
            if node in rows:
                raise DatasetParseError(path, line, f"node {node} listed twice")
            rows[node] = values
    n = len(rows)
    missing = sorted(set(range(n)) - set(rows))
    if missing:
        raise ReferentialError(f"{path}: node ids must be 0..{n - 1}; {missing[0]} is missing")
    return np.array([rows[i] for i in range(n)], dtype=np.float64).reshape(n, dim)


def _read_edges(path: Path, n_nodes: int) -> List[Tuple[int, int]]:
    edges = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            if len(parts) != 2:
                raise DatasetParseError(path, line_no, "expected 'src<TAB>dst'")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError as e:
                raise DatasetParseError(path, line_no, str(e)) from None
            for node in (u, v):
                if not 0 <= node < n_nodes:
                    raise ReferentialError(f"{path}:{line_no}: node {node} is not in {FEATURES_FILE}")
            edges.append((u, v))
    return edges


def _read_labels(path: Path, n_nodes: int) -> np.ndarray:
    labels = np.full(n_nodes, int(Label.UNLABELED), dtype=np.int64)
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            return labels
        if [h.strip() for h in header] != ["id", "label"]:
            raise DatasetParseError(path, 1, "header must be 'id,label'")
        for row in reader:
            line = reader.line_num
            if not row or not "".join(row).strip():
                continue
            if len(row) != 2:
                raise DatasetParseError(path, line, f"expected 2 fields, got {len(row)}")
            try:
                node, label = int(row[0]), int(row[1])
            except ValueError as e:
                raise DatasetParseError(path, line, str(e)) from None
            if label not in (Label.REGULAR, Label.SPREADER):
                raise DatasetParseError(path, line, f"label must be 0 or 1, got {label}")
            if not 0 <= node < n_nodes:
                raise ReferentialError(f"{path}:{line}: node {node} is not in {FEATURES_FILE}")
            if labels[node] != Label.UNLABELED:
                raise DatasetParseError(path, line, f"node {node} labeled twice")
            labels[node] = label
    return labels


def load_dataset(directory: Union[str, Path, DatasetDir]) -> Tuple[SparseGraph, NodeTable]:
    d = _as_dir(directory)
    for p in (d.features, d.edges, d.labels):
        if not p.exists():
            raise FileNotFoundError(f"missing dataset file: {p}")
    features = _read_features(d.features)
    n = features.shape[0]
    graph = build_graph(_read_edges(d.edges, n), n)
    table = NodeTable(features, _read_labels(d.labels, n))
    return graph, table


# ---------------- writing ----------------

def _fmt(value: float) -> str:
    return repr(float(value))


def render_dataset(graph: SparseGraph, table: NodeTable) -> Dict[str, str]:
    """File name -> exact file text."""
    edges = io.StringIO()
    edges.write("# src\tdst\n")
    for u, v in graph.edge_pairs():
        edges.write(f"{u}\t{v}\n")

    feats = io.StringIO()
    feats.write(",".join(["id"] + [f"f{j}" for j in range(table.feature_dim)]) + "\n")
    for i in range(table.n_nodes):
        feats.write(",".join([str(i)] + [_fmt(v) for v in table.features[i]]) + "\n")

    labels = io.StringIO()
    labels.write("id,label\n")
    for i in table.labeled_nodes():
        labels.write(f"{int(i)},{int(table.labels[i])}\n")

    return {EDGES_FILE: edges.getvalue(), FEATURES_FILE: feats.getvalue(), LABELS_FILE: labels.getvalue()}


def save_dataset(directory: Union[str, Path, DatasetDir], graph: SparseGraph, table: NodeTable) -> DatasetDir:
    if graph.n_nodes != table.n_nodes:
        raise DataError(f"graph has {graph.n_nodes} nodes, table has {table.n_nodes}")
    d = _as_dir(directory)
    for name, text in render_dataset(graph, table).items():
        atomic_write_text(d.path / name, text)
    return d


# ---------------- synthetic generation ----------------

@dataclass
class SynthConfig:
    n_nodes: int = 400
    spreader_fraction: float = 0.5
    feature_dim: int = 8
    feature_shift: float = 1.5
    p_intra: float = 0.005
    p_inter: float = 0.005
    hub_boost: float = 0.05
    label_fraction: float = 0.5
    seed: int = 0

    def validate(self) -> "SynthConfig":
        if self.n_nodes < 2:
            raise ConfigError(f"n_nodes must be >= 2, got {self.n_nodes}")
        if self.feature_dim < 1:
            raise ConfigError(f"feature_dim must be >= 1, got {self.feature_dim}")
        if not 0.0 < self.spreader_fraction < 1.0:
            raise ConfigError(f"spreader_fraction must be in (0, 1), got {self.spreader_fraction}")
        for name in ("p_intra", "p_inter", "hub_boost", "label_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        n_spreaders = round(self.n_nodes * self.spreader_fraction)
        if n_spreaders == 0 or n_spreaders == self.n_nodes:
            raise ConfigError(
                f"{self.n_nodes} nodes at spreader_fraction {self.spreader_fraction} leaves a class empty")
        return self

    def to_json(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass(eq=False)
class SyntheticDataset:
    graph: SparseGraph
    table: NodeTable
    classes: np.ndarray   # ground-truth class of every node, labeled or not


def box_muller(rng: np.random.Generator, count: int) -> np.ndarray:
    u1 = 1.0 - rng.random(count)   # (0, 1], keeps log finite
    u2 = rng.random(count)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def generate_synthetic(cfg: SynthConfig) -> SyntheticDataset:
    """Two-class graph. Spreaders ~ N(+shift, I), regulars ~ N(-shift, I);
    pairs link with p_intra / p_inter, plus hub_boost when a spreader is involved."""
    cfg.validate()
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    n = cfg.n_nodes

    n_spreaders = round(n * cfg.spreader_fraction)
    classes = np.zeros(n, dtype=np.int64)
    classes[rng.permutation(n)[:n_spreaders]] = Label.SPREADER

    sign = np.where(classes == Label.SPREADER, 1.0, -1.0)
    noise = box_muller(rng, n * cfg.feature_dim).reshape(n, cfg.feature_dim)
    features = noise + cfg.feature_shift * sign[:, None]

    iu, ju = np.triu_indices(n, k=1)
    same = classes[iu] == classes[ju]
    spreader_pair = (classes[iu] == Label.SPREADER) | (classes[ju] == Label.SPREADER)
    p = np.where(same, cfg.p_intra, cfg.p_inter) + cfg.hub_boost * spreader_pair
    keep = rng.random(iu.shape[0]) < np.minimum(p, 1.0)
    graph = build_graph(np.stack([iu[keep], ju[keep]], axis=1), n)

    labels = np.full(n, int(Label.UNLABELED), dtype=np.int64)
    for cls in (Label.REGULAR, Label.SPREADER):
        members = np.flatnonzero(classes == cls)
        count = round(members.shape[0] * cfg.label_fraction)
        chosen = rng.choice(members, size=count, replace=False)
        labels[chosen] = cls

    data = SyntheticDataset(graph=graph, table=NodeTable(features, labels), classes=classes)
    counts = data.table.class_counts()
    say(f"🧪 Generated {n} nodes, {graph.n_edges} edges, "
        f"{counts['spreaders']} + {counts['regulars']} labeled (seed {cfg.seed})")
    return data
