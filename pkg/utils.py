import asyncio
import os
import sys
from pathlib import Path
from typing import Callable, List, Sequence, TypeVar, Union

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "SPREADER_GNN_THREADS"


def say(message: str) -> None:
    """Status line for humans. Stdout is reserved for data (tables)."""
    print(message, file=sys.stderr, flush=True)


def warn(message: str) -> None:
    say(f"⚠️ {message}")


def threads_from_env(default: int = 1) -> int:
    raw = os.getenv(THREADS_ENV, "")
    if not raw.strip():
        return max(1, int(default))
    try:
        return max(1, int(raw))
    except ValueError:
        warn(f"{THREADS_ENV}={raw!r} is not an integer; using {default}")
        return max(1, int(default))


async def _gather_bounded(fn: Callable[[T], R], items: Sequence[T], workers: int) -> List[R]:
    gate = asyncio.Semaphore(max(1, workers))

    async def one(item):
        async with gate:
            return await asyncio.to_thread(fn, item)

    # gather keeps input order no matter which job finishes first
    return list(await asyncio.gather(*(one(it) for it in items)))


def fan_out(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    """Run fn over items on at most `workers` threads, results in input order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    return asyncio.run(_gather_bounded(fn, items, workers))


def atomic_write_bytes(path: Union[str, Path], payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(payload)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def atomic_write_text(path: Union[str, Path], text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
