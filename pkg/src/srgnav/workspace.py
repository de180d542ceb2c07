"""Manifest-rooted workspace that chains the pipeline's persisted artifacts.

Every artifact records the hash of the category space it was built for, and
loading checks it against the manifest, so files from incompatible spaces
cannot be mixed. Paths in the manifest are relative to the workspace root.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .categories import CategorySpace
from .gcn import EmbeddingTable, checkpoint_from_dict
from .graph import SRG, srg_from_dict
from .presets import house_config, tiny_config
from .trajectories import loads_corpus
from .world import Scene, SceneGenConfig, scene_from_dict

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT_VERSION = 1

PRESETS = {"house": house_config, "tiny": tiny_config}

# artifacts a stage invalidates when it rewrites its own outputs
DOWNSTREAM = {
    "trajectories": ("checkpoint", "embeddings", "loss_history", "reports"),
    "build-srg": ("checkpoint", "embeddings", "loss_history", "reports"),
    "train": ("reports",),
}


class WorkspaceError(Exception):
    exit_code = 1


class MissingDependencyError(WorkspaceError):
    """A stage ran before the stage that produces its inputs."""

    exit_code = 3


class HashMismatchError(WorkspaceError):
    """An artifact was built for a different category space."""

    exit_code = 4


class MalformedFileError(WorkspaceError):
    exit_code = 5


def load_generator_config(path) -> tuple[SceneGenConfig, dict]:
    """Read a JSON generator config.

    Either ``{"preset": "house" | "tiny", ...keyword overrides}`` or the
    full field dictionary of :class:`SceneGenConfig`.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise MissingDependencyError(f"generator config {path} does not exist") from None
    except json.JSONDecodeError as e:
        raise MalformedFileError(f"generator config {path} is not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise MalformedFileError(f"generator config {path} must hold a JSON object")
    opts = dict(raw)
    preset = opts.pop("preset", None)
    try:
        if preset is None:
            cfg = SceneGenConfig.from_dict(opts)
        elif preset in PRESETS:
            cfg = PRESETS[preset](**opts)
        else:
            raise ValueError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
    except (TypeError, ValueError, KeyError) as e:
        raise MalformedFileError(f"generator config {path}: {e}") from None
    return cfg, raw


@dataclass
class Manifest:
    space: CategorySpace
    generator: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)
    format_version: int = MANIFEST_FORMAT_VERSION

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "category_space_hash": self.space.hash(),
            "category_space": self.space.to_dict(),
            "generator": self.generator,
            "seeds": self.seeds,
            "paths": self.paths,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Manifest":
        if d.get("format_version") != MANIFEST_FORMAT_VERSION:
            raise ValueError(f"unsupported manifest format_version {d.get('format_version')!r}")
        space = CategorySpace.from_dict(d["category_space"])
        if space.hash() != d["category_space_hash"]:
            raise ValueError("manifest category_space_hash does not match its category space")
        return cls(space, d["generator"], d["seeds"], d["paths"])


class Workspace:
    def __init__(self, root, manifest: Manifest):
        self.root = Path(root)
        self.manifest = manifest

    @property
    def space(self) -> CategorySpace:
        return self.manifest.space

    @classmethod
    def create(cls, root, space: CategorySpace, generator: dict, seed: int) -> "Workspace":
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        return cls(root, Manifest(space, generator, {"generate": seed}, {}))

    @classmethod
    def open(cls, root) -> "Workspace":
        path = Path(root) / MANIFEST_NAME
        try:
            d = json.loads(path.read_text())
        except FileNotFoundError:
            raise MissingDependencyError(f"no workspace manifest at {path}; run 'generate' first") from None
        except json.JSONDecodeError as e:
            raise MalformedFileError(f"manifest {path} is not valid JSON: {e}") from None
        try:
            return cls(root, Manifest.from_dict(d))
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedFileError(f"manifest {path}: {e}") from None

    def save(self) -> None:
        text = json.dumps(self.manifest.to_dict(), indent=1, sort_keys=True) + "\n"
        (self.root / MANIFEST_NAME).write_text(text)

    def write(self, rel: str, text: str) -> str:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        return rel

    def invalidate(self, stage: str) -> None:
        for key in DOWNSTREAM.get(stage, ()):
            self.manifest.paths.pop(key, None)

    def require(self, key: str, producer: str) -> Path:
        """Path of a recorded artifact, or a dependency error naming its producer."""
        rel = self.manifest.paths.get(key)
        if rel is None:
            raise MissingDependencyError(f"workspace has no {key}; run '{producer}' first")
        path = self.root / rel
        if not path.exists():
            raise MissingDependencyError(f"{key} file {path} is missing; rerun '{producer}'")
        return path

    # -- checked loaders

    def _check_hash(self, found, path: Path) -> None:
        if found != self.space.hash():
            raise HashMismatchError(
                f"{path} was built for category space {found!r}, workspace uses {self.space.hash()!r}")

    def _json(self, path: Path) -> dict:
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise MalformedFileError(f"{path} is not valid JSON: {e}") from None
        if not isinstance(d, dict):
            raise MalformedFileError(f"{path} must hold a JSON object")
        return d

    def _parse(self, path: Path, what: str, fn, *args):
        try:
            return fn(*args)
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise MalformedFileError(f"{path}: malformed {what}: {e}") from None

    def load_scenes(self, split: str) -> list[Scene]:
        rels = self.manifest.paths.get("scenes", {}).get(split)
        if rels is None:
            raise MissingDependencyError(f"workspace has no {split} scenes; run 'generate' first")
        scenes = []
        for rel in rels:
            path = self.root / rel
            if not path.exists():
                raise MissingDependencyError(f"scene file {path} is missing; rerun 'generate'")
            d = self._json(path)
            self._check_hash(d.get("category_space_hash"), path)
            scenes.append(self._parse(path, "scene", scene_from_dict, d))
        return scenes

    def load_corpus(self) -> list:
        path = self.require("corpus", "trajectories")
        text = path.read_text()
        first = text.split("\n", 1)[0]
        try:
            header = json.loads(first)
        except json.JSONDecodeError as e:
            raise MalformedFileError(f"{path}: malformed corpus header: {e}") from None
        self._check_hash(header.get("category_space_hash") if isinstance(header, dict) else None, path)
        return self._parse(path, "corpus", loads_corpus, text, self.space)

    def load_srg(self, key: str = "srg_pruned") -> SRG:
        path = self.require(key, "build-srg")
        d = self._json(path)
        self._check_hash(d.get("category_space_hash"), path)
        return self._parse(path, "SRG", srg_from_dict, d)

    def load_checkpoint(self):
        path = self.require("checkpoint", "train")
        d = self._json(path)
        self._check_hash(d.get("category_space_hash"), path)
        return self._parse(path, "checkpoint", checkpoint_from_dict, d)

    def load_embeddings(self) -> EmbeddingTable:
        path = self.require("embeddings", "train")
        table, found = self._parse(path, "embedding table", EmbeddingTable.from_text, path.read_text())
        self._check_hash(found, path)
        if table.names != self.space.node_names:
            raise MalformedFileError(f"{path}: embedding rows do not match the category space nodes")
        return table

    def load_episode_log(self, policy: str) -> list[dict]:
        reports = self.manifest.paths.get("reports", {})
        if policy not in reports:
            raise MissingDependencyError(f"no evaluation log for policy {policy!r}; run 'evaluate' first")
        path = self.root / reports[policy]["episodes"]
        if not path.exists():
            raise MissingDependencyError(f"episode log {path} is missing; rerun 'evaluate'")
        lines = [line for line in path.read_text().splitlines() if line.strip()]
        try:
            rows = [json.loads(line) for line in lines]
        except json.JSONDecodeError as e:
            raise MalformedFileError(f"{path} is not valid JSON lines: {e}") from None
        if not rows or not isinstance(rows[0], dict):
            raise MalformedFileError(f"{path} has no header record")
        self._check_hash(rows[0].get("category_space_hash"), path)
        return rows[1:]
