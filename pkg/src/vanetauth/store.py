"""Line-oriented JSON persistence with atomic replacement."""

from __future__ import annotations

import contextlib
import json
import os
import tempfile
from pathlib import Path

from .errors import IoFailure


def dumps_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def atomic_write(path: Path | str, text: str, mode: int = 0o644) -> None:
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                f.write(text)
            os.chmod(tmp, mode)
            os.replace(tmp, path)
        except BaseException:
            with contextlib.suppress(FileNotFoundError):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def write_jsonl(path: Path | str, records) -> None:
    atomic_write(path, "".join(dumps_line(r) + "\n" for r in records))


def read_jsonl(path: Path | str) -> list[dict]:
    try:
        with open(path, encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def write_json(path: Path | str, obj, mode: int = 0o644) -> None:
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n", mode)


def read_json(path: Path | str):
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


@contextlib.contextmanager
def dir_lock(state_dir: Path | str):
    """Exclusive lock file guarding a state directory."""
    lock = Path(state_dir) / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise IoFailure(f"{state_dir} is locked by another invocation ({lock})") from None
    except OSError as exc:
        raise IoFailure(f"{lock}: {exc}") from exc
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(lock)
