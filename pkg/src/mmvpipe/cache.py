"""Content-addressed cache of deterministically preprocessed samples.

Each source/target/cost-map file of a manifest is loaded, run through the
transform chain, and stored as an NDT blob under
``<cache_dir>/<first 2 hex of key>/<key>.ndt``. The key is a SHA-256 over
(file size, file content hash, canonical transform config, pipeline
version), so a rebuild after any change re-processes exactly the affected
blobs and an unchanged rebuild writes nothing.
"""

from __future__ import annotations

import hashlib
import json
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import Manifest, write_json
from .errors import IoError, TransformError
from .formats import read_image, write_ndt
from .transforms import build_chain, canonical_config_bytes

PIPELINE_VERSION = "1"


@dataclass
class BuildStats:
    """Counts from one build_cache run."""

    blobs_written: int = 0
    blobs_skipped: int = 0
    records_rebuilt: int = 0
    records_total: int = 0


@dataclass
class CacheIndex:
    """Mapping of sample id -> per-role blob paths and content keys."""

    entries: dict = field(default_factory=dict)
    pipeline_version: str = PIPELINE_VERSION
    transform_config: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "entries": self.entries,
            "pipeline_version": self.pipeline_version,
            "transform_config": self.transform_config,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CacheIndex":
        return cls(doc.get("entries", {}), doc.get("pipeline_version", ""), doc.get("transform_config", []))

    def save(self, path) -> None:
        write_json(path, self.to_dict())

    @classmethod
    def load(cls, path) -> "CacheIndex":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def blob_path(self, cache_dir, sample_id: str, role: str) -> Path:
        return Path(cache_dir) / self.entries[sample_id][role]["path"]


def file_content_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def content_key(path, transform_bytes: bytes, version: str = PIPELINE_VERSION) -> str:
    size = Path(path).stat().st_size
    h = hashlib.sha256()
    h.update(str(size).encode())
    h.update(b"\x00")
    h.update(file_content_hash(path).encode())
    h.update(b"\x00")
    h.update(transform_bytes)
    h.update(b"\x00")
    h.update(version.encode())
    return h.hexdigest()


def _blob_relpath(key: str) -> str:
    return f"{key[:2]}/{key}.ndt"


def build_cache(
    manifest: Manifest, transform_config: list[dict], cache_dir, workers: int = 1
) -> tuple[CacheIndex, BuildStats]:
    """Preprocess every manifest file into the cache, skipping up-to-date blobs.

    Safe to run with any worker count: keys make writes idempotent and the
    index is assembled from a sorted collection, so the persisted
    ``index.json`` is byte-identical regardless of scheduling.
    """
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    chain = build_chain(transform_config)
    transform_bytes = canonical_config_bytes(transform_config)
    index_path = cache_dir / "index.json"

    jobs = []
    for record in manifest.records:
        for role, src in (
            ("source", record.source_path),
            ("target", record.target_path),
            ("costmap", record.costmap_path),
        ):
            if src is not None:
                jobs.append((record.id, role, src))

    def process(job):
        sample_id, role, src = job
        try:
            key = content_key(src, transform_bytes)
        except OSError as exc:
            raise IoError(f"cannot stat/hash {src}: {exc}") from exc
        rel = _blob_relpath(key)
        blob = cache_dir / rel
        if blob.is_file():
            # content-addressed: a blob named by this key already holds the result
            return sample_id, role, key, rel, False
        img = read_image(src)  # typed format errors propagate unchanged
        for name, fn in chain:
            try:
                img = fn(img)
            except Exception as exc:
                raise TransformError(f"sample {sample_id!r} ({role}) op {name!r}: {exc}") from exc
        blob.parent.mkdir(parents=True, exist_ok=True)
        tmp = blob.with_name(f".{uuid.uuid4().hex}.tmp")
        write_ndt(img, tmp)
        tmp.replace(blob)  # atomic; identical bytes make last-writer-wins safe
        return sample_id, role, key, rel, True

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(process, jobs))
    else:
        results = [process(j) for j in jobs]

    stats = BuildStats(records_total=len(manifest.records))
    entries: dict = {}
    rebuilt_ids = set()
    for sample_id, role, key, rel, written in sorted(results):
        entries.setdefault(sample_id, {})[role] = {"key": key, "path": rel}
        if written:
            stats.blobs_written += 1
            rebuilt_ids.add(sample_id)
        else:
            stats.blobs_skipped += 1
    stats.records_rebuilt = len(rebuilt_ids)

    index = CacheIndex(entries, PIPELINE_VERSION, list(transform_config))
    index.save(index_path)
    return index, stats
