# config.txt holds `key value` pairs, one per line. Lines starting with the
# rocket emoji are comments. The key prefix picks the section:
#   synth.*    defaults for `generate`
#   train.*    defaults for `train`, `eval` and `run-all`
#   runtime.*  worker threads, log cadence, output directory

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Dict, Optional, Type, TypeVar, Union, get_args, get_origin

from dataset import SynthConfig
from errors import ConfigError
from trainer import TrainConfig
from utils import threads_from_env, warn

COMMENT = "🚀"
SECTIONS = ("synth", "train", "runtime")
DEFAULT_CONFIG = Path(__file__).resolve().parent / "config.txt"

C = TypeVar("C")


@dataclass
class RuntimeConfig:
    threads: int = 1
    log_every: int = 10
    out: str = "runs"


def read_config_file(path: Union[str, Path, None] = None) -> Dict[str, Dict[str, str]]:
    """Raw strings per section. A missing file means every built-in default applies."""
    path = Path(path) if path is not None else DEFAULT_CONFIG
    raw: Dict[str, Dict[str, str]] = {s: {} for s in SECTIONS}
    if not path.exists():
        return raw
    with open(path, "r", encoding="utf-8") as config_file:
        for line_no, line in enumerate(config_file, start=1):
            if not line.strip() or line.lstrip().startswith(COMMENT):
                continue
            parts = line.strip().split(None, 1)
            if len(parts) != 2:
                raise ConfigError(f"{path}:{line_no}: expected 'key value', got {line.strip()!r}")
            key, value = parts
            section, _, name = key.partition(".")
            if section not in raw or not name:
                warn(f"Unknown config key: {key}")
                continue
            raw[section][name] = value.strip()
    return raw


def _coerce(kind: Any, text: str, key: str) -> Any:
    if get_origin(kind) is Union:
        # Optional[...] fields accept "none" for "not set"
        if text.lower() in ("none", "auto", ""):
            return None
        kind = next(a for a in get_args(kind) if a is not type(None))
    try:
        if kind is bool:
            return text.strip().lower() in ("1", "true", "yes")
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"config key {key}: {text!r} is not a valid {kind.__name__}") from None
    return text


def _build(cls: Type[C], section: str, values: Dict[str, str]) -> C:
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for name, text in values.items():
        if name not in known:
            warn(f"Unknown config key: {section}.{name}")
            continue
        kwargs[name] = _coerce(known[name].type, text, f"{section}.{name}")
    return cls(**kwargs)


def synth_defaults(raw: Optional[Dict[str, Dict[str, str]]] = None) -> SynthConfig:
    raw = raw if raw is not None else read_config_file()
    return _build(SynthConfig, "synth", raw.get("synth", {}))


def train_defaults(raw: Optional[Dict[str, Dict[str, str]]] = None) -> TrainConfig:
    raw = raw if raw is not None else read_config_file()
    return _build(TrainConfig, "train", raw.get("train", {}))


def runtime_defaults(raw: Optional[Dict[str, Dict[str, str]]] = None) -> RuntimeConfig:
    raw = raw if raw is not None else read_config_file()
    rt = _build(RuntimeConfig, "runtime", raw.get("runtime", {}))
    rt.threads = threads_from_env(rt.threads)
    if rt.log_every < 1:
        raise ConfigError(f"runtime.log_every must be >= 1, got {rt.log_every}")
    return rt
