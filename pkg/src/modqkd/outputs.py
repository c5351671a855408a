"""Deterministic data files and run manifests."""
from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

MANIFEST_NAME = "manifest.json"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int,)) or (hasattr(v, "dtype") and getattr(v.dtype, "kind", "") in "iu"):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def write_dsv(path: Path, comments: list[str], columns: list[str], rows, sep: str = "\t") -> Path:
    lines = [f"# {c}" for c in comments]
    lines.append(sep.join(columns))
    for row in rows:
        lines.append(sep.join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_dsv(path: Path, sep: str = "\t") -> tuple[list[str], list[list[str]]]:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
    return lines[0].split(sep), [ln.split(sep) for ln in lines[1:]]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    arguments: dict
    config: dict
    seed: int
    version: str
    started: str = field(default_factory=_now)
    finished: str = ""
    outputs: dict = field(default_factory=dict)  # file name -> sha256

    def record(self, out_dir: Path, files: list[Path]) -> None:
        self.outputs = {Path(f).name: sha256(f) for f in sorted(files)}
        self.finished = _now()

    def write(self, out_dir: Path) -> Path:
        return write_json(Path(out_dir) / MANIFEST_NAME, self.__dict__)

    @classmethod
    def load(cls, path: Path) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        data = json.loads(path.read_text(encoding="utf-8"))
        return cls(**data)
