"""Workspace layout and derived-artifact bookkeeping.

A workspace is a directory with fixed input subdirectories and a
``derived/`` tree the stages write into. Inputs are never overwritten;
every derived file records the hash of the config that produced it, so a
stage can refuse to build on stale prerequisites.
"""
from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

from .errors import ValidationError

CONFIG_NAME = "procflow.json"
INPUT_DIRS = ("annotations", "transcripts", "recipes", "frames")

DEFAULT_CONFIG = {
    "seed": 0,
    "embedding_dim": 64,
    "histogram_bin_s": 60,
    "coarse_min_overlap": 1,
    "clustering": {"distance_threshold": 0.3},
    "compare": {"max_pairs": 500, "k_frames": 2},
    "verify": {"max_frames": 20},
    "qa": {"easy_segments_per_video": 3, "hard_combos": {"2": 2, "3": 2, "4": 1, "5": 1}},
    "providers": {"mode": "mock"},
    "refine_clusters": False,
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


class Workspace:
    def __init__(self, root: str | Path, config_path: str | Path | None = None):
        self.root = Path(root)
        if not self.root.is_dir():
            raise ValidationError(f"workspace root {self.root} does not exist")
        path = Path(config_path) if config_path else self.root / CONFIG_NAME
        overrides = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {}
        self.config = _deep_merge(DEFAULT_CONFIG, overrides)
        self.config_hash = hashlib.sha256(
            json.dumps(self.config, sort_keys=True).encode("utf-8")
        ).hexdigest()[:16]

    # -- paths ---------------------------------------------------------
    @property
    def derived(self) -> Path:
        return self.root / "derived"

    def input_dir(self, name: str) -> Path:
        return self.root / name

    def derived_path(self, *parts: str) -> Path:
        path = self.derived.joinpath(*parts)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    # -- derived artifact IO --------------------------------------------
    def write_json(self, relpath: str, payload: dict) -> Path:
        path = self.derived_path(*relpath.split("/"))
        body = {"config_hash": self.config_hash}
        body.update(payload)
        path.write_text(
            json.dumps(body, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        return path

    def write_jsonl(self, relpath: str, rows: list[dict]) -> Path:
        path = self.derived_path(*relpath.split("/"))
        with path.open("w", encoding="utf-8") as fh:
            fh.write(json.dumps({"_meta": {"config_hash": self.config_hash}}, sort_keys=True) + "\n")
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
        return path

    def read_json(self, relpath: str, check_hash: bool = True, force: bool = False) -> dict:
        path = self.derived / Path(*relpath.split("/"))
        data = json.loads(path.read_text(encoding="utf-8"))
        if check_hash and not force and data.get("config_hash") != self.config_hash:
            raise ValidationError(
                f"{relpath} was produced under config {data.get('config_hash')}, current is "
                f"{self.config_hash}; rerun the producing stage or pass --force"
            )
        return data

    def read_jsonl(self, relpath: str, check_hash: bool = True, force: bool = False) -> list[dict]:
        path = self.derived / Path(*relpath.split("/"))
        rows = []
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                data = json.loads(line)
                if "_meta" in data:
                    recorded = data["_meta"].get("config_hash")
                    if check_hash and not force and recorded != self.config_hash:
                        raise ValidationError(
                            f"{relpath} was produced under config {recorded}, current is "
                            f"{self.config_hash}; rerun the producing stage or pass --force"
                        )
                    continue
                rows.append(data)
        return rows

    def has_derived(self, relpath: str) -> bool:
        return (self.derived / Path(*relpath.split("/"))).exists()
